"""Kernel backend selection.

``PRIVBESS_BACKEND=numpy`` forces the pure-numpy path; ``numba`` (the
default) uses the compiled kernel when numba imports, and falls back to
numpy otherwise.
"""

import logging
import os

log = logging.getLogger(__name__)

ENV_VAR = "PRIVBESS_BACKEND"
BACKENDS = ("numba", "numpy")


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve(name: str | None = None) -> str:
    name = (name or os.environ.get(ENV_VAR) or "numba").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"{ENV_VAR} must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and not numba_available():
        log.warning("numba not importable; using the numpy backend")
        return "numpy"
    return name


def integrator(name: str | None = None):
    if resolve(name) == "numba":
        from ._kernels import integrate
    else:
        from ._fallback import integrate
    return integrate
