"""Command-line entry point: ``lacelab <subcommand> [flags]``.

Every run writes ``manifest.json`` (the resolved parameters plus a
timestamp) and ``record.json`` (payload, flags and a hash of the
manifest's statistical fields) into the output directory, along with any
CSV files the subcommand produces.  Everything except ``manifest.json``
is byte-identical across repeated runs and worker counts.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import diagrams, enumeration, expansion, lace, percolation
from .io import dumps, fmt_float
from .topology import build_graph

# fields that do not influence statistical output
_VOLATILE = ("timestamp", "workers", "out", "manifest")


class SchemaError(ValueError):
    """Manifest does not match the subcommand's schema."""


# -- argument parsing ---------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _common(sp, graph=True, p=False, replicas=False):
    if graph:
        sp.add_argument("--graph", choices=["qn", "torus"])
        sp.add_argument("--n", type=int)
        sp.add_argument("--L", type=int)
    if p:
        sp.add_argument("--p", type=float)
        sp.add_argument("--p-grid", type=_floats, dest="p_grid")
    if replicas:
        sp.add_argument("--replicas", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out")
    sp.add_argument("--manifest", help="JSON file of flag values; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lacelab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="Newman-Ziff sweeps and canonical chi, E|C_max|")
    _common(sp, p=True, replicas=True)

    sp = sub.add_parser("estimate-pc", help="solve chi(p) = target")
    _common(sp, replicas=True)
    sp.add_argument("--lambda0", type=float)
    sp.add_argument("--target", type=float, help="explicit chi target instead of lambda0")
    sp.add_argument("--order", type=int, help="also report residuals up to this M")

    sp = sub.add_parser("pi", help="Monte Carlo Pi^(0), Pi^(1) and their difference")
    _common(sp, p=True, replicas=True)

    sp = sub.add_parser("fixed-point", help="damped critical-point recursion")
    _common(sp, replicas=True)
    sp.add_argument("--mode", choices=[lace.INFINITE, lace.FINITE_TARGET])
    sp.add_argument("--target", type=float, help="chi target f (default V^(1/3))")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", type=int, dest="max_iter")

    sp = sub.add_parser("diagrams", help="triangle-type Fourier sums")
    _common(sp, p=True)
    sp.add_argument("--i", type=int)
    sp.add_argument("--j", type=int)
    sp.add_argument("--samples", type=int)

    sp = sub.add_parser("enumerate", help="exact polynomial for an event")
    _common(sp, p=True)
    sp.add_argument("--event", choices=["chi", "pi0", "pi1", "cmax", "two-point"])
    sp.add_argument("--x", type=int, help="target vertex for two-point")
    sp.add_argument("--box", type=int, help="box region with this many active axes")
    sp.add_argument("--radius", type=int)
    sp.add_argument("--max-edges", type=int, dest="max_edges")

    sp = sub.add_parser("spherical", help="spherical-model critical value")
    _common(sp, graph=False)
    sp.add_argument("--n", type=int)
    sp.add_argument("--method", choices=list(diagrams.SPHERICAL_METHODS))
    sp.add_argument("--samples", type=int)

    sp = sub.add_parser("window", help="scaling-window table on Q_n")
    _common(sp, replicas=True)
    sp.add_argument("--order", type=int)
    sp.add_argument("--delta-grid", type=_floats, dest="delta_grid")

    sp = sub.add_parser("residuals", help="p_hat - p_c^(M) across n on Q_n")
    _common(sp, graph=False, replicas=True)
    sp.add_argument("--n-grid", type=_ints, dest="n_grid")
    sp.add_argument("--order", type=int)
    sp.add_argument("--lambda0", type=float)

    sp = sub.add_parser("verify", help="compare two records")
    sp.add_argument("records", nargs=2)
    sp.add_argument("--sigma", type=float, default=4.0)
    sp.add_argument("--out")
    return ap


DEFAULTS = {
    "seed": 0, "replicas": 1000, "L": None, "lambda0": 1.0, "order": 1, "mode": lace.INFINITE,
    "gamma": 0.5, "tol": 1e-8, "max_iter": 200, "i": 0, "j": 1, "samples": 100_000,
    "event": "chi", "radius": 1, "method": "bessel-laplace", "delta_grid": [-4, -2, 2, 4],
    "max_edges": enumeration.MAX_EDGES_TWO_LEVEL,
}


def resolve(args: argparse.Namespace) -> dict:
    """Merge explicit flags over ``--manifest`` over env over defaults."""
    params = {k: v for k, v in vars(args).items()}
    if args.__dict__.get("manifest"):
        data = json.loads(Path(args.manifest).read_text())
        for k, v in data.items():
            k = k.replace("-", "_")
            if params.get(k) is None:
                params[k] = v
    if params.get("workers") is None and os.environ.get("LACELAB_WORKERS"):
        params["workers"] = int(os.environ["LACELAB_WORKERS"])
    if params.get("out") is None:
        params["out"] = os.environ.get("LACELAB_OUT", "lacelab-out")
    for k, v in DEFAULTS.items():
        if params.get(k) is None:
            params[k] = v
    if params.get("workers") is None:
        params["workers"] = 1
    return params


def _graph(params):
    if params.get("graph") is None or params.get("n") is None:
        raise SchemaError("--graph and --n are required")
    return build_graph(params["graph"], params["n"], params.get("L"))


def _rational(p: float) -> Fraction:
    """The decimal a float was typed as, e.g. 0.3 -> 3/10."""
    return Fraction(repr(float(p)))


def _grid(params) -> list[float]:
    if params.get("p_grid"):
        return list(params["p_grid"])
    if params.get("p") is not None:
        return [params["p"]]
    return []


# -- subcommands -----------------------------------------------------------------------


def cmd_simulate(params, out: Path) -> dict:
    g = _graph(params)
    stats = percolation.simulate(g, params["replicas"], params["seed"], params["workers"])
    stats.to_csv(out / "micro.csv")
    values = []
    for p in _grid(params):
        cv = percolation.canonical_expectation(stats, p)
        values.append({"quantity": "chi", "p": p, "value": cv.chi, "stderr": cv.chi_err})
        values.append({"quantity": "cmax", "p": p, "value": cv.cmax, "stderr": cv.cmax_err})
    return {"kind": "monte-carlo", "files": ["micro.csv", "micro.json"], "values": values,
            "summary": f"{g.label}: {stats.replicas} sweeps, chi(b=B)={stats.mean_chi[-1]:.6g}"}


def cmd_estimate_pc(params, out: Path) -> dict:
    g = _graph(params)
    stats = percolation.simulate(g, params["replicas"], params["seed"], params["workers"])
    if params.get("target") is not None:
        est = expansion.estimate_pc(g, stats, "explicit", params["target"])
    else:
        est = expansion.estimate_pc(g, stats, "lambda0", params["lambda0"])
    payload = {"kind": "monte-carlo", "estimate": est.to_dict(),
               "values": [{"quantity": "p_hat", "p": None, "value": est.p_hat,
                           "stderr": est.stderr}]}
    series = expansion.series_for(g.family)
    omega = g.degree
    trunc = []
    for M in range(1, min(params["order"], len(series.coefficients)) + 1):
        t = expansion.truncate_pc(series, omega, M)
        trunc.append({"M": M, "p_trunc_exact": str(t), "p_trunc": float(t),
                      "residual": est.p_hat - float(t)})
    payload["truncations"] = trunc
    payload["summary"] = (f"{g.label}: p_hat={est.p_hat:.8g} +/- {est.stderr:.2g}, "
                          f"Omega*p_hat={omega * est.p_hat:.6g}")
    return payload


def cmd_pi(params, out: Path) -> dict:
    g = _graph(params)
    values, details = [], []
    for p in _grid(params) or [1.0 / g.degree]:
        tot = lace.estimate_pi_total(g, p, params["replicas"], params["seed"], params["workers"])
        for est in (tot.pi0, tot.pi1):
            values.append({"quantity": f"pi{est.order}", "p": p, "value": est.value,
                           "stderr": est.stderr})
            details.append(est.to_dict())
        values.append({"quantity": "pi_total", "p": p, "value": tot.value, "stderr": tot.stderr})
    return {"kind": "monte-carlo", "values": values, "estimates": details,
            "notes": [lace._TRUNCATION_NOTE],
            "summary": f"{g.label}: " + ", ".join(
                f"{v['quantity']}(p={v['p']:.4g})={v['value']:.5g}" for v in values)}


def cmd_fixed_point(params, out: Path) -> dict:
    g = _graph(params)
    R, seed, workers = params["replicas"], params["seed"], params["workers"]

    def pi_total(p):
        # common random numbers: every iterate reuses the same seed
        return lace.estimate_pi_total(g, p, R, seed, workers)

    mode = params["mode"]
    f = params.get("target") or g.vertex_count ** (1 / 3)
    chi = (lambda p: f) if mode == lace.FINITE_TARGET else None
    res = lace.solve_fixed_point(g, pi_total, chi, mode, params["gamma"], params["tol"],
                                 params["max_iter"])
    with open(out / "fixed_point_trace.csv", "w") as fh:
        fh.write("iteration,p,pi_hat,chi,residual\n")
        for it, p, pi, c, r in res.trace:
            fh.write(f"{it},{fmt_float(p)},{fmt_float(pi)},{fmt_float(c)},{fmt_float(r)}\n")
    payload = {"kind": "monte-carlo", "files": ["fixed_point_trace.csv"],
               "result": {"p_star": res.p_star, "iterations": res.iterations,
                          "residual": res.residual, "converged": res.converged, "mode": mode},
               "notes": [lace._TRUNCATION_NOTE]}
    if mode == lace.FINITE_TARGET:
        stats = percolation.simulate(g, R, seed + 1, workers)
        cv = percolation.canonical_expectation(stats, res.p_star)
        pi = pi_total(res.p_star)
        d, s = lace.identity_defect(g.degree, res.p_star, pi, cv)
        payload["defect"] = {"value": d, "stderr": s, "chi": cv.chi, "chi_err": cv.chi_err,
                             "pi": pi.value, "pi_err": pi.stderr, "target": f}
    payload["summary"] = (f"{g.label}: p*={res.p_star:.8g} converged={res.converged} "
                          f"after {res.iterations} iterations")
    return payload


def cmd_diagrams(params, out: Path) -> dict:
    n, i, j = params["n"], params["i"], params["j"]
    if params.get("graph") is None or n is None:
        raise SchemaError("--graph and --n are required")
    omega = n if params["graph"] == "qn" else 2 * n
    p = params["p"] if params.get("p") is not None else 0.9 / omega
    if params["graph"] == "qn":
        dv = [diagrams.triangle_qn(n, _rational(p), i, j)]
    else:
        dv = [diagrams.triangle_zn(n, p, i, j, params["samples"], params["seed"])]
        if i == 0:
            dv.append(diagrams.triangle_zn_bessel(n, p, j))
    diagrams.write_csv(out / "diagrams.csv", dv)
    values = [{"quantity": f"T({i},{j})", "p": p, "value": float(d.value), "stderr": d.error}
              for d in dv[:1]]
    return {"kind": "exact" if params["graph"] == "qn" else "monte-carlo",
            "files": ["diagrams.csv"], "values": values, "surrogate": diagrams.SURROGATE,
            "summary": f"T({i},{j}) n={n} p={p:.6g}: {float(dv[0].value):.10g}"}


_EVENT_QUANTITY = {"chi": "chi", "pi0": "pi0", "pi1": "pi1", "cmax": "cmax"}


def cmd_enumerate(params, out: Path) -> dict:
    if params.get("box") is not None:
        region = enumeration.BoxSpec(params["box"], params["radius"],
                                     params.get("graph") or "zn").region()
    else:
        region = _graph(params)
    ev = params["event"]
    if ev == "chi":
        poly = enumeration.exact_chi(region)
    elif ev == "pi0":
        poly = enumeration.exact_pi0(region)
    elif ev == "pi1":
        poly = enumeration.exact_pi1_two_level(region, max_edges=params["max_edges"])
    elif ev == "cmax":
        poly = enumeration.exact_cmax(region)
    else:
        if params.get("x") is None:
            raise SchemaError("--x is required for the two-point event")
        poly = enumeration.exact_two_point(region, params["x"])
    quantity = _EVENT_QUANTITY.get(ev, f"tau:{params.get('x')}")
    values = []
    for p in _grid(params):
        v = poly.evaluate(_rational(p))
        values.append({"quantity": quantity, "p": p, "exact": str(v), "value": float(v),
                       "stderr": 0.0})
    return {"kind": "exact", "polynomials": {quantity: poly.to_json()}, "values": values,
            "summary": f"{getattr(region, 'label', 'region')} {ev}: {poly!r}"}


def cmd_spherical(params, out: Path) -> dict:
    n = params.get("n")
    if n is None:
        raise SchemaError("--n is required")
    dv = diagrams.spherical_tc(n, params["method"], params["samples"], params["seed"])
    with open(out / "spherical_trace.csv", "w") as fh:
        fh.write("x,integrand\n")
        for x, y in dv.extra["trace"]:
            fh.write(f"{fmt_float(x)},{fmt_float(y)}\n")
    return {"kind": "numeric", "files": ["spherical_trace.csv"],
            "values": [{"quantity": "T_c", "p": None, "value": dv.value, "stderr": dv.error}],
            "method": params["method"],
            "summary": f"T_c(n={n}) = {dv.value:.12g} ({params['method']}), "
                       f"T_c/(2n) = {dv.value / (2 * n):.8g}"}


def cmd_window(params, out: Path) -> dict:
    g = _graph(params)
    rows = expansion.scaling_window_experiment(g, params["order"], params["delta_grid"],
                                               params["replicas"], params["seed"],
                                               params["workers"])
    expansion.window_csv(out / "window.csv", rows)
    rejected = [r["delta"] for r in rows if r["status"] != "ok"]
    return {"kind": "monte-carlo", "files": ["window.csv"], "rows": rows,
            "summary": f"{g.label} M={params['order']}: {len(rows) - len(rejected)} rows"
                       + (f", rejected deltas {rejected}" if rejected else "")}


def cmd_residuals(params, out: Path) -> dict:
    ns = params.get("n_grid")
    if not ns:
        raise SchemaError("--n-grid is required")
    est = expansion.pc_table(ns, params["replicas"], params["seed"], params["lambda0"],
                             params["workers"])
    Ms = list(range(1, params["order"] + 1))
    res = expansion.residual_decay("qn", ns, Ms, est)
    expansion.estimates_csv(out / "residuals.csv", res["rows"], est)
    return {"kind": "monte-carlo", "files": ["residuals.csv"], "fits": res["fits"],
            "flags": res["flags"],
            "summary": "slopes " + ", ".join(f"M={M}: {v['slope']:.3g}+/-{v['slope_err']:.2g}"
                                              for M, v in res["fits"].items())}


COMMANDS = {
    "simulate": cmd_simulate, "estimate-pc": cmd_estimate_pc, "pi": cmd_pi,
    "fixed-point": cmd_fixed_point, "diagrams": cmd_diagrams, "enumerate": cmd_enumerate,
    "spherical": cmd_spherical, "window": cmd_window, "residuals": cmd_residuals,
}


def manifest_hash(manifest: dict) -> str:
    stable = {k: v for k, v in manifest.items() if k not in _VOLATILE}
    return hashlib.sha256(dumps(stable).encode()).hexdigest()


def run(command: str, params: dict) -> tuple[int, dict]:
    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = {k: v for k, v in params.items() if k != "command" and v is not None}
    manifest.update(command=command, version=__version__,
                    timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat())
    (out / "manifest.json").write_text(dumps(manifest))
    payload = COMMANDS[command](params, out)
    record = {"command": command, "manifest_hash": manifest_hash(manifest),
              "version": __version__, "payload": payload}
    (out / "record.json").write_text(dumps(record))
    return 0, record


# -- verify -------------------------------------------------------------------------------


def _rows(record: dict) -> dict:
    rows = {}
    for v in record["payload"].get("values", []):
        rows[(v["quantity"], v.get("p"))] = v
    return rows


def verify(path_a, path_b, sigma: float = 4.0) -> tuple[int, dict]:
    """Compare two records row by row; exact polynomials are evaluated at each p."""
    a = json.loads(Path(path_a).read_text())
    b = json.loads(Path(path_b).read_text())
    if a["payload"] == b["payload"]:
        n = len(a["payload"].get("values", []))
        return 0, {"status": "all-exact-match", "rows": n, "checks": []}
    checks = []
    ra, rb = _rows(a), _rows(b)
    polys = {}
    for rec in (a, b):
        for q, data in rec["payload"].get("polynomials", {}).items():
            polys[q] = enumeration.RationalPolynomial.from_json(data)
    keys = set(ra) | set(rb)
    for key in sorted(keys, key=lambda k: (k[0], -1 if k[1] is None else k[1])):
        q, p = key
        x, y = ra.get(key), rb.get(key)
        if x is None or y is None:
            # one side may be an exact polynomial
            row = x or y
            if q in polys and p is not None and row.get("exact") is None:
                exact = float(polys[q].evaluate(_rational(p)))
                x, y = row, {"value": exact, "stderr": 0.0, "exact": True}
            else:
                continue
        diff = x["value"] - y["value"]
        err = math.hypot(x.get("stderr") or 0.0, y.get("stderr") or 0.0)
        if err == 0:
            ok = diff == 0
            z = 0.0 if ok else math.inf
        else:
            z = diff / err
            ok = abs(z) <= sigma
        checks.append({"quantity": q, "p": p, "a": x["value"], "b": y["value"], "z": z,
                       "pass": ok})
    if not checks:
        raise SchemaError("records share no comparable quantities")
    status = "pass" if all(c["pass"] for c in checks) else "fail"
    return (0 if status == "pass" else 1), {"status": status, "sigma": sigma, "checks": checks}


# -- entry point ----------------------------------------------------------------------------


def _error(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "verify":
            code, report = verify(*args.records, sigma=args.sigma)
            text = dumps(report)
            if args.out:
                Path(args.out).write_text(text)
            print(f"verify: {report['status']} ({len(report['checks']) or report.get('rows', 0)}"
                  " rows)")
            return code
        params = resolve(args)
        code, record = run(args.command, params)
        print(f"{args.command}: {record['payload'].get('summary', 'done')}")
        return code
    except SchemaError as exc:
        return _error("schema", exc, 2)
    except (ValueError, ArithmeticError, OverflowError) as exc:
        return _error("module", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
