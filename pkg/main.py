# ══════════════════════════════════════════════════════════
# main.py — acapro
# Punto de entrada de la CLI: python main.py <comando> ...
# El servicio HTTP vive en app.main (ver Railway.toml).
# ══════════════════════════════════════════════════════════

import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
