"""Compiled versus pure-Python kernel timings.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each row
reports the best of N wall-clock times for one call, and the speed-up.
"""

import argparse
import timeit

import numpy as np

from lacelab import _fallback
from lacelab.topology import build_graph

try:
    from lacelab import _core
except ImportError:  # pragma: no cover
    _core = None


def _uv(g):
    e = g.edges
    return np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])


def cases():
    q10 = build_graph("qn", 10)
    t = build_graph("torus", 3, 8)
    q3 = build_graph("qn", 3)
    rng = np.random.default_rng(0)
    out = []
    for g in (q10, t):
        order = rng.permutation(g.edge_count).astype(np.int64)
        out.append((f"nz_sweep {g.label}", "nz_sweep", (g.vertex_count, *_uv(g), order)))
    a = q10.adjacency
    occ = (rng.random(q10.edge_count) < 0.15).astype(np.uint8)
    out.append((f"bfs_cluster {q10.label}", "bfs_cluster",
                (a.indptr, a.nbr, a.eid, occ, 0, -1, None)))
    out.append((f"enum_cluster_stats {q3.label}", "enum_cluster_stats",
                (q3.vertex_count, *_uv(q3), 0)))
    _, masks, _ = _core.pi1_level0(q3.vertex_count, *_uv(q3), 0) if _core else \
        _fallback.pi1_level0(q3.vertex_count, *_uv(q3), 0)
    keys = np.unique(masks)[:8]
    out.append((f"pi1_level1 {q3.label} (8 sets)", "pi1_level1",
                (q3.vertex_count, *_uv(q3), 0, keys)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'case':40s} {'compiled [s]':>13s} {'python [s]':>11s} {'speed-up':>9s}")
    for label, name, call_args in cases():
        py = min(timeit.repeat(lambda: getattr(_fallback, name)(*call_args),
                               number=1, repeat=args.repeat))
        if _core is None:
            print(f"{label:40s} {'n/a':>13s} {py:11.4f} {'n/a':>9s}")
            continue
        c = min(timeit.repeat(lambda: getattr(_core, name)(*call_args),
                              number=1, repeat=args.repeat))
        print(f"{label:40s} {c:13.5f} {py:11.4f} {py / c:9.1f}")


if __name__ == "__main__":
    main()
