"""Backend selection for the hot kernels.

Set ``PENFBM_NO_NUMBA=1`` (or ``PENFBM_BACKEND=numpy``) before import to run
the pure-numpy implementations. Numba is used otherwise, when importable.
"""

import os

_flag = os.environ.get("PENFBM_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
_flag = _flag or os.environ.get("PENFBM_BACKEND", "").strip().lower() == "numpy"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, otherwise a no-op decorator.

    The numba implementations are compiled even when the numpy backend is
    selected, so tests and benchmarks can compare both paths.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    import numba

    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)
