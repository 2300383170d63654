# ══════════════════════════════════════════════════════════
# app/main.py — acapro
# Servicio HTTP: health, API del simulador y página de traza
# ══════════════════════════════════════════════════════════

import logging
import os
from contextlib import asynccontextmanager

from dotenv import load_dotenv
from fastapi import FastAPI, Request
from fastapi.responses import RedirectResponse

load_dotenv()

from app.routers import simulacion  # noqa: E402

logging.basicConfig(
    level=os.environ.get("ACA_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger("acapro.main")


@asynccontextmanager
async def lifespan(app: "FastAPI"):
    # ─── STARTUP ───
    logger.info("acapro iniciado (max budget %s)", simulacion.MAX_BUDGET)
    yield
    # ─── SHUTDOWN ───
    logger.info("acapro detenido.")


app = FastAPI(
    title="acapro",
    description="Simulador, compilador y verificador de autómatas celulares asíncronos para máquinas de Turing",
    version="1.0.0",
    lifespan=lifespan,
)


# -- HTTPS Redirect Middleware --
@app.middleware("http")
async def redirect_to_https(request: Request, call_next):
    # Railway pasa el header x-forwarded-proto
    if request.headers.get("x-forwarded-proto") == "http":
        url = request.url.replace(scheme="https")
        return RedirectResponse(url, status_code=301)
    return await call_next(request)


# -- Routers --
app.include_router(simulacion.router)
app.include_router(simulacion.pages)


@app.get("/health")
async def health():
    return {"status": "ok", "app": "acapro"}


if __name__ == "__main__":
    import uvicorn
    port = int(os.environ.get("PORT", 8080))
    uvicorn.run("app.main:app", host="0.0.0.0", port=port, reload=True)
