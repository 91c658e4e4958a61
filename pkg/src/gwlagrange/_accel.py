"""Numba availability switch.

Hot kernels in :mod:`gwlagrange.kernels` are written twice: a scalar-loop
version compiled with ``numba.njit`` and a vectorised pure-numpy version.
The compiled path is used when numba imports cleanly and the environment
variable ``GWLAGRANGE_DISABLE_NUMBA`` is unset (or ``0``/``false``).

The flag is read once at import time; set it before importing the package.
"""
from __future__ import annotations

import os

ENV_FLAG = "GWLAGRANGE_DISABLE_NUMBA"


def _flag_set(value: str | None) -> bool:
    if value is None:
        return False
    return value.strip().lower() not in ("", "0", "false", "no", "off")


try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _flag_set(os.environ.get(ENV_FLAG))


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Compilation happens even when the env flag disables numba; the flag only
    changes which implementation the public dispatchers pick.
    """
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func
    return _numba.njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
