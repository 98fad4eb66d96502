"""Command line: ``simplexot {geometry,solve,diagnose,metric,appendix} ...``.

Exit codes: 0 success, 2 bad config or arguments, 3 numerical failure (the
report is still written), 4 output directory not writable.
"""
from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .appendix import appendix_report, build_example
from .config import load_config, validate
from .errors import ConfigError, SimplexOTError, ValidationError
from .geometry import Chart, Side
from .grid import Grid
from .metric import (
    build_metric_graph,
    completion_probe,
    distance_bound_scan,
    interior_samples,
    isometry_residual,
    jensen_segments,
)
from .report import RunDirectory, svg_unfolded
from .solver import make_measure, solve_dual, solve_exact, solve_scaled, verify_pushforward

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class NumericalFailure(Exception):
    """A run finished but a contract check failed; its report is already written."""


# ---------------------------------------------------------------------------
# arguments


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", default="runs", help="root of run directories (default: runs)")
    p.add_argument("--dim", type=int, help="dimension d (config: dimension)")
    p.add_argument("--resolution", type=int, action="append", help="grid resolution, repeatable (config: resolutions)")
    p.add_argument("--seed", type=int, help="sampling seed (config: seed)")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", help="source density: uniform or doubling (config: mu)")
    p.add_argument("--nu", help="target density: uniform or doubling (config: nu)")
    p.add_argument("--solver", help="exact, dual or scaled (config: solver.method)")


def _appendix_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=int, dest="M")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)


def parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="simplexot", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    geo = sub.add_parser("geometry", help="stratum census and charts")
    geo.add_argument("what", choices=("census", "charts"))
    _common(geo)

    for name, text in (("solve", "solve the transport problem"), ("diagnose", "c-gradient checks of a solution")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _solver_flags(p)

    met = sub.add_parser("metric", help="Hessian metric graph, distance bounds and completion probe")
    _common(met)
    _solver_flags(met)
    met.add_argument("--probe", action="store_true", default=None, help="run the completion probe (d = 3)")
    met.add_argument("--eps", type=float, action="append", help="probe eps, repeatable (config: metric.eps_ladder)")

    app = sub.add_parser("appendix", help="step-function example: build or verify")
    app.add_argument("what", choices=("build", "verify"))
    _common(app)
    _appendix_flags(app)
    return top


def merged_config(args) -> dict:
    """Config file overlaid with command-line flags, validated as one document."""
    base = load_config(args.config)
    doc = copy.deepcopy(base)
    flags = {
        "dim": ("dimension",),
        "resolution": ("resolutions",),
        "seed": ("seed",),
        "mu": ("mu",),
        "nu": ("nu",),
        "solver": ("solver", "method"),
        "probe": ("metric", "probe"),
        "eps": ("metric", "eps_ladder"),
        "M": ("appendix", "M"),
        "N": ("appendix", "N"),
        "alpha": ("appendix", "alpha"),
        "beta": ("appendix", "beta"),
    }
    for attr, path in flags.items():
        v = getattr(args, attr, None)
        if v is None:
            continue
        node = doc
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = v
    return validate(doc)


# ---------------------------------------------------------------------------
# commands


def _solve(cfg: dict, r: int):
    d = cfg["dimension"]
    g = Grid.build(d, r)
    mu = make_measure(cfg["mu"], g)
    nu = make_measure(cfg["nu"], g.mirror())
    s = cfg["solver"]
    if s["method"] == "exact":
        return solve_exact(mu, nu, cap=s["cap"])
    if s["method"] == "dual":
        return solve_dual(mu, nu, max_iter=s["max_iter"], tol=s["tol"])
    return solve_scaled(mu, nu, eps_schedule=s["eps_schedule"], max_iter=s["max_iter"])


def cmd_geometry(args, cfg, run: RunDirectory) -> list[str]:
    d = cfg["dimension"]
    lines = []
    if args.what == "census":
        census = diagnostics.singular_census(d)
        run.json("census.json", census)
        run.csv(
            "census.csv",
            ["I", "J", "count", "dimension", "singular"],
            [[r["I"], r["J"], r["count"], r["dimension"], r["singular"]] for r in census["strata"]],
        )
        lines.append(f"d={d}  |I| |J|  count  dim  singular")
        for r in census["strata"]:
            lines.append(f"      {r['I']:>3} {r['J']:>3}  {r['count']:>5}  {r['dimension']:>3}  {'yes' if r['singular'] else 'no'}")
        for k, v in census["summary"].items():
            lines.append(f"{k}: {v}")
    else:
        rows = []
        for side in (Side.A, Side.B):
            for kind in ("star", "face"):
                for i in range(d + 2):
                    c = Chart(side, kind, i, 1 if i == 0 else 0)
                    rows.append([str(c), str(c.partner), c.anchor, c.aux, " ".join(map(str, c.free_indices(d)))])
        run.csv("charts.csv", ["chart", "partner", "anchor", "aux", "free"], rows)
        lines += [f"{r[0]} -> {r[1]}" for r in rows]
    return lines


def cmd_solve(args, cfg, run: RunDirectory) -> list[str]:
    lines, failed = [], []
    for r in cfg["resolutions"]:
        sol = _solve(cfg, r)
        rep = sol.report()
        extra = {k: v for k, v in sol.diagnostics.items() if k in ("iterations", "converged", "stages", "distance_trend", "orbits", "points")}
        rep.update(extra)
        rep.update({"dimension": cfg["dimension"], "resolution": r, "spacing": sol.mu.grid.spacing})
        run.json(f"solve_r{r}.json", rep)
        run.csv(f"phi_r{r}.csv", ["alpha", "phi"], ([" ".join(map(repr, map(float, b))), v] for b, v in zip(sol.mu.grid.bary, sol.phi.as_float())))
        run.csv(f"psi_r{r}.csv", ["beta", "psi"], ([" ".join(map(repr, map(float, b))), v] for b, v in zip(sol.nu.grid.bary, sol.psi.as_float())))
        if cfg["svg"] and cfg["dimension"] <= 2:
            run.text(f"phi_r{r}.svg", svg_unfolded(sol.mu.grid.bary, sol.phi.as_float(), f"phi r={r}"))
        gap = abs(rep.get("relative_gap", 0.0))
        lines.append(f"r={r}: method={sol.method} relative_gap={gap:.3e} marginal_error={rep.get('marginal_error', float('nan')):.3e}")
        if sol.method != "entropic" and gap > cfg["tolerances"]["duality_gap"]:
            failed.append(r)
    if failed:
        raise NumericalFailure(f"duality gap above tolerance at resolutions {failed}")
    return lines


def cmd_diagnose(args, cfg, run: RunDirectory) -> list[str]:
    lines, failed = [], []
    tol = cfg["tolerances"]
    for r in cfg["resolutions"]:
        sol = _solve(cfg, r)
        suite = diagnostics.c_gradient_suite(sol, margin=tol["margin"], tie_tol=tol["tie"], seed=cfg["seed"])
        suite["pushforward"] = verify_pushforward(sol, bins="strata", margin=tol["margin"], tie_tol=tol["tie"])
        run.json(f"diagnose_r{r}.json", suite)
        status = ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in suite["passed"].items())
        lines.append(f"r={r}: {status}")
        if not all(suite["passed"].values()):
            failed.append(r)
    if failed:
        raise NumericalFailure(f"c-gradient checks failed at resolutions {failed}")
    return lines


def cmd_metric(args, cfg, run: RunDirectory) -> list[str]:
    d = cfg["dimension"]
    m = cfg["metric"]
    if m["probe"] and d != 3:
        raise ConfigError("the completion probe needs dimension 3", "metric.probe")
    lines = []
    for r in cfg["resolutions"]:
        sol = _solve(cfg, r)
        out = {"dimension": d, "resolution": r}
        chart = Chart(Side.A, "face", 0, 1)
        h = (d + 2) * sol.mu.grid.spacing / 2
        samples = interior_samples(d, chart, 2 * h)
        if len(samples):
            out["isometry"] = isometry_residual(sol.phi, sol.psi, samples, chart=chart)
        if m["jensen_segments"]:
            out["jensen"] = jensen_segments(sol.phi, sol.psi, n_segments=m["jensen_segments"], seed=cfg["seed"])
            out["jensen"].pop("rows")
        if m["bounds"] and d <= 2:
            graph = build_metric_graph(sol.phi, r, f_c=sol.psi, collar_factor=m["collar_factor"], edge_factor=m["edge_factor"])
            out["graph"] = {"nodes": len(graph), "edges": int(len(graph.edges)), "components": graph.components(), "clipped_hessians": graph.clipped_hessians}
            out["bounds"] = distance_bound_scan(graph)
            rows = ([int(u), int(v), float(L), str(graph.charts[k])] for (u, v), L, k in zip(graph.edges, graph.lengths, graph.edge_charts))
            run.csv(f"edges_r{r}.csv", ["u", "v", "length", "chart"], rows)
        run.json(f"metric_r{r}.json", out)
        iso = out.get("isometry", {}).get("max_residual")
        lines.append(f"r={r}: isometry_residual={iso if iso is None else f'{iso:.3e}'}" + (f" beta={out['bounds']['beta']:.3f} violations={out['bounds']['violations']}" if "bounds" in out else ""))
    if m["probe"]:
        sol = _solve(cfg, cfg["resolutions"][0])
        probe = completion_probe(sol.phi, sol.psi, eps_ladder=m["eps_ladder"], factor=m["probe_factor"], use_symmetry=m["probe_symmetry"])
        run.json("probe.json", probe)
        header = ["edge", "source", "trend"] + [f"eps={e}" for e in probe["eps_ladder"]]
        run.csv("probe.csv", header, ([row["edge"], row["source"], row["trend"], *row["distance"]] for row in probe["rows"]))
        lines.append(f"probe: {probe['pairs']} edge pairs, classification {probe['classification']}")
    return lines


def cmd_appendix(args, cfg, run: RunDirectory) -> list[str]:
    a = cfg["appendix"]
    if args.what == "build":
        f = build_example(a["M"], a["N"], a["alpha"], a["beta"])
        info = {"M": f.M, "N": f.N, "alpha": str(f.alpha), "beta": str(f.beta), "cells": f.cells, "high": f.M, "low": f.low, "high_cells": list(range(0, f.cells, f.M))[:100]}
        run.json("step_function.json", info)
        return [f"M={f.M} N={f.N} cells={f.cells} high={f.M} low={f.low}"]
    rep = appendix_report(a["M"], a["N"], a["alpha"], a["beta"])
    run.json("appendix.json", rep)
    b = rep["interval_bounds"]
    lines = [
        f"length={rep['length_exact'] or rep['length']!s} ({rep['length']:.6f})",
        f"interval bounds: {'pass' if b['passed'] else 'FAIL'} ({b['mode']}, {b['intervals_covered']} intervals)",
        f"worst lower margin {b['worst_lower_margin']:.3e}, worst upper margin {b['worst_upper_margin']:.3e}",
    ]
    if not rep["passed"]:
        raise NumericalFailure("interval bounds fail: " + str(b["witness"]))
    return lines


COMMANDS = {"geometry": cmd_geometry, "solve": cmd_solve, "diagnose": cmd_diagnose, "metric": cmd_metric, "appendix": cmd_appendix}


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = merged_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    command = args.command + (f" {args.what}" if hasattr(args, "what") else "")
    try:
        run = RunDirectory(args.out, command, cfg)
    except OSError as exc:
        print(f"cannot create run directory: {exc}", file=sys.stderr)
        return EXIT_IO
    status, code = "ok", EXIT_OK
    try:
        lines = COMMANDS[args.command](args, cfg, run)
    except (ConfigError, ValidationError) as exc:
        print(f"{exc.kind}: {exc}", file=sys.stderr)
        status, code, lines = "config-error", EXIT_CONFIG, []
        _try_error_report(run, exc.kind, exc)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status, code, lines = "numerical-failure", EXIT_NUMERIC, []
    except SimplexOTError as exc:
        print(f"numerical failure ({exc.kind}): {exc}", file=sys.stderr)
        status, code, lines = "numerical-failure", EXIT_NUMERIC, []
        _try_error_report(run, exc.kind, exc)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        run.manifest(status, code)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in lines:
        print(line)
    print(f"run directory: {run.path}")
    return code


def _try_error_report(run: RunDirectory, kind: str, exc: Exception) -> None:
    try:
        run.json("error.json", {"kind": kind, "message": str(exc)})
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
