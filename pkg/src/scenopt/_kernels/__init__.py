"""Hot kernels with import-time backend selection.

The compiled ``_core`` extension is used when it is importable; otherwise, or
when the ``SCENOPT_PURE_PYTHON`` environment variable is set to a non-empty
value other than ``0``, the numpy implementation in ``_fallback`` is used.
``BACKEND`` names the active choice and ``backends()`` exposes every
available implementation (the benchmark and the agreement tests use it).
"""
import os

from . import _fallback

OPTIMAL = _fallback.OPTIMAL
UNBOUNDED = _fallback.UNBOUNDED
ITER_LIMIT = _fallback.ITER_LIMIT
SINGULAR = _fallback.SINGULAR

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_force_python = os.environ.get("SCENOPT_PURE_PYTHON", "") not in ("", "0")

if _core is not None and not _force_python:
    _active = _core
    BACKEND = "cython"
else:
    _active = _fallback
    BACKEND = "python"

binomial_tail = _active.binomial_tail
simplex_loop = _active.simplex_loop
refactor = _active.refactor
pivot = _fallback.pivot


def backends():
    """Map backend name to module for every importable implementation."""
    found = {"python": _fallback}
    if _core is not None:
        found["cython"] = _core
    return found
