"""Numba switch.

Hot kernels are compiled with numba unless ``BINPICK_DISABLE_NUMBA`` is set
to a truthy value (or numba is not importable), in which case the pure-numpy
implementations in :mod:`binpick.kernels` are used instead.
"""
import logging
import os

_FALSY = {"", "0", "false", "no", "off"}

DISABLED_BY_ENV = os.environ.get("BINPICK_DISABLE_NUMBA", "0").strip().lower() not in _FALSY

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True`` by default; identity without numba."""
    kwargs.setdefault("cache", True)

    def wrap(func):
        if not HAVE_NUMBA:
            return func
        return numba.njit(**kwargs)(func)

    if len(args) == 1 and callable(args[0]):
        return wrap(args[0])
    return wrap


def max_threads(requested=None):
    """Effective worker count, capped by ``BINPICK_THREADS`` when set."""
    cap = os.environ.get("BINPICK_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, int(n))
