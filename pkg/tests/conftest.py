# ══════════════════════════════════════════════════════════
# tests/conftest.py — acapro
# Fixtures compartidos. La base va en memoria antes de que
# cualquier test importe app.database.
# ══════════════════════════════════════════════════════════

import os

os.environ["DATABASE_URL"] = "sqlite://"
os.environ.setdefault("ACA_COLOR", "0")

import pytest  # noqa: E402

from app.services.construction_service import compile_tm  # noqa: E402
from app.services.turing_service import load_builtin, zigzag_machine  # noqa: E402


@pytest.fixture(scope="session")
def zigzag():
    return zigzag_machine()


@pytest.fixture(scope="session")
def builtins():
    return {name: load_builtin(name) for name in
            ("zigzag", "unary-inc", "bin-counter", "palindrome")}


@pytest.fixture(scope="session")
def zigzag_c1(zigzag):
    return compile_tm(zigzag, 1)


@pytest.fixture(scope="session")
def zigzag_c2(zigzag):
    return compile_tm(zigzag, 2)


@pytest.fixture(scope="session")
def zigzag_literal(zigzag):
    """Tabla de construcción 1 sin la guarda de promoción."""
    return compile_tm(zigzag, 1, promote_guard=False)
