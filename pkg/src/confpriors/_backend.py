"""Numerical backend selection.

The hot kernels (MLP forward/backward, fused posterior gradients, simplex
flow integration) exist in two functionally identical variants: a pure-numpy
reference and a numba ``@njit`` twin.  Which one the package uses is decided
once at import time:

* ``CONFPRIORS_BACKEND=numpy`` forces the pure-numpy path.
* ``CONFPRIORS_BACKEND=numba`` forces numba and raises if it is missing.
* unset: numba when importable, numpy otherwise.

Outputs of the two backends agree to floating-point roundoff but are not
guaranteed bitwise-identical to each other; determinism contracts hold
within a fixed backend.
"""

from __future__ import annotations

import os

_VALID = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def select_backend() -> str:
    """Resolve the backend name from the environment. Called once on import."""
    requested = os.environ.get("CONFPRIORS_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ValueError(
            f"CONFPRIORS_BACKEND must be one of {_VALID}, got {requested!r}"
        )
    if requested == "numba":
        if not _numba_available():
            raise ImportError(
                "CONFPRIORS_BACKEND=numba but numba is not importable"
            )
        return "numba"
    if requested == "numpy":
        return "numpy"
    return "numba" if _numba_available() else "numpy"


BACKEND: str = select_backend()
