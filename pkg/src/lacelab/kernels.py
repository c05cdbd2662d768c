"""Kernel selection: the compiled ``_core`` extension when importable, else
the pure-Python ``_fallback``.  Set ``LACELAB_PURE_PYTHON=1`` to force the
fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback

if os.environ.get("LACELAB_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "compiled" if _impl is not _fallback else "python"

nz_sweep = _impl.nz_sweep
bfs_cluster = _impl.bfs_cluster
enum_cluster_stats = _impl.enum_cluster_stats
pi1_level0 = _impl.pi1_level0
pi1_level1 = _impl.pi1_level1

__all__ = [
    "BACKEND",
    "nz_sweep",
    "bfs_cluster",
    "enum_cluster_stats",
    "pi1_level0",
    "pi1_level1",
]
