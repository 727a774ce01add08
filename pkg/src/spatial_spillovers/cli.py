"""Command-line entry point.

``spillgeo <command> [--config FILE] [--key value ...]``. Flags override the
config file, which overrides built-in defaults. Exit status is 0 on success,
2 for invalid input and 3 when a solver fails to converge (partial files are
still written, flagged ``converged=false``).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import DiagramSpec, _tag, bifurcation_diagram
from .config import COMMANDS, RunConfig, merge, parse_range, parse_vector
from .dynamics import default_starts, find_equilibrium
from .errors import AssumptionError, ConvergenceError
from .model import market_state, validate_distribution
from .output import write_csv, write_json
from .stability import critical_threshold, decompose_net_force, mode_thresholds, stability_grid, uniform_stability
from .svg import emit_svg
from .wages import excess_demand, solve_wages

log = logging.getLogger("spatial_spillovers")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--family", help="two-region, two-region-asym, baseline4, equidistant4, block4, bypass4, custom")
    g.add_argument("--sigma", type=float)
    g.add_argument("--phi", help="trade freeness (a lo:hi:count range for grid/decompose)")
    g.add_argument("--psi", help="spillover freeness (a range for grid)")
    g.add_argument("--psi-prime", type=float, dest="psi_prime")
    g.add_argument("--asym-target", choices=("phi", "psi"), dest="asym_target")
    g.add_argument("--asym-exponent", type=float, dest="asym_exponent")


def build_parser():
    parser = argparse.ArgumentParser(prog="spillgeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--output-dir", dest="directory", help="where files go (default: $SPILLGEO_OUTPUT_DIR or cwd)")
    common.add_argument("--svg", action="store_const", const=True, default=None, help="also write an SVG plot")
    common.add_argument("-v", "--verbose", action="store_true")
    _model_flags(common)

    p = sub.add_parser("wages", parents=[common], help="market-clearing wages at a distribution")
    p.add_argument("--x", help="comma-separated distribution")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("equilibrate", parents=[common], help="equilibria from deterministic (and random) starts")
    p.add_argument("--x0", help="single comma-separated start")
    p.add_argument("--random-starts", type=int, dest="random_starts")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("stability", parents=[common], help="eigen report at the uniform distribution")
    p.add_argument("--path", choices=("auto", "general"))
    p.add_argument("--jacobian", choices=("analytic", "finite-difference"))

    p = sub.add_parser("threshold", parents=[common], help="critical freeness of the uniform state")
    p.add_argument("--free", choices=("phi", "psi"))
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)

    sub.add_parser("grid", parents=[common], help="omega* over a (phi, psi) grid")

    p = sub.add_parser("bifurcate", parents=[common], help="bifurcation diagram in one parameter")
    p.add_argument("--param", choices=("phi", "psi"))
    p.add_argument("--range", dest="range_", metavar="LO:HI")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--h-max", type=float, dest="h_max")
    p.add_argument("--multistart-params", dest="multistart_params", help="comma-separated parameter values")
    p.add_argument("--workers", type=int)
    p.add_argument("--svg-component", type=int, dest="svg_component")

    sub.add_parser("decompose", parents=[common], help="two-region force decomposition table")
    return parser


def _scalar(text, name):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise AssumptionError(f"--{name} must be a number for this command, got {text!r}") from exc


def resolve_config(args):
    """Defaults <- config file <- flags."""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise AssumptionError(f"cannot read config {args.config}: {exc}") from exc
        cfg = RunConfig.loads(text, command=args.command)
    else:
        cfg = RunConfig(args.command)
    model = {
        "family": args.family,
        "sigma": args.sigma,
        "psi_prime": args.psi_prime,
        "asym_target": args.asym_target,
        "asym_exponent": args.asym_exponent,
    }
    params = {}
    cmd = args.command
    if cmd == "grid":
        params["phi_values"], params["psi_values"] = args.phi, args.psi
    elif cmd == "decompose" and args.phi is not None and ":" in args.phi:
        params["phi_values"] = args.phi
        model["psi"] = _scalar(args.psi, "psi")
    else:
        model["phi"], model["psi"] = _scalar(args.phi, "phi"), _scalar(args.psi, "psi")
    for key in ("x", "x0", "tol", "random_starts", "seed", "path", "jacobian", "free", "lo", "hi", "param"):
        params[key] = getattr(args, key, None)
    params["range"] = getattr(args, "range_", None)
    for key in ("epsilon", "delta", "h_max", "multistart_params", "workers"):
        params[key] = getattr(args, key, None)
    output = {"directory": args.directory, "svg": args.svg, "svg_component": getattr(args, "svg_component", None)}
    return merge(cfg, model, params, output)


# --- commands -----------------------------------------------------------------


def _outdir(cfg):
    path = Path(cfg.output.resolve_directory())
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(cfg, key):
    if cfg.params.get(key) is None:
        raise AssumptionError(f"command {cfg.command!r} needs --{key.replace('_', '-')}")
    return cfg.params[key]


def cmd_wages(cfg):
    config = cfg.model.to_family().config()
    x = validate_distribution(parse_vector(_require(cfg, "x")), config.n, interior=True)
    converged = True
    try:
        sol = solve_wages(config, x, tol=float(cfg.params.get("tol") or 1e-12))
    except ConvergenceError as exc:
        sol, converged = exc.last, False
    state = market_state(config, x, sol.w)
    excess = excess_demand(config, x, sol.w)
    out = _outdir(cfg)
    rows = [
        (i + 1, x[i], sol.w[i], state.a[i], state.P[i], state.v[i], excess[i], converged) for i in range(config.n)
    ]
    write_csv(out / "wages.csv", ["region", "x", "w", "a", "P", "v", "excess_demand", "converged"], rows)
    write_json(
        out / "wages.json",
        {"residual": sol.residual, "iterations": sol.iterations, "converged": converged, "income": float(sol.w @ x)},
    )
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_equilibrate(cfg):
    config = cfg.model.to_family().config()
    n = config.n
    if cfg.params.get("x0") is not None:
        starts = [parse_vector(cfg.params["x0"])]
    else:
        starts = default_starts(n)
    k = int(cfg.params.get("random_starts") or 0)
    if k:
        rng = np.random.default_rng(cfg.params.get("seed"))
        starts += list(rng.dirichlet(np.ones(n), size=k))
    tol = float(cfg.params.get("tol") or 1e-10)
    found, all_ok = [], True
    for x0 in starts:
        try:
            res = find_equilibrium(config, validate_distribution(x0, n, interior=True), tol=tol)
            row = (res.x_star, res.v_star, res.payoff_spread, res.stable, res.label, res.clamped, res.converged)
        except ConvergenceError as exc:
            log.warning("equilibration failed: %s", exc)
            row = (np.asarray(x0, dtype=float), float("nan"), float("nan"), False, "failed", False, False)
        all_ok &= bool(row[-1])
        if all(np.abs(row[0] - other[0]).max() > 1e-6 for other in found):
            found.append(row)
    header = ["eq_id", *[f"x_{i + 1}" for i in range(n)], "v_star", "payoff_spread", "stable", "label", "clamped"]
    rows = [(j + 1, *r[0], *r[1:]) for j, r in enumerate(found)]
    write_csv(_outdir(cfg) / "equilibria.csv", header + ["converged"], rows)
    return EXIT_OK if all_ok else EXIT_NONCONVERGED


def cmd_stability(cfg):
    config = cfg.model.to_family().config()
    rep = uniform_stability(
        config, path=cfg.params.get("path") or "auto", jacobian=cfg.params.get("jacobian") or "analytic"
    )
    out = _outdir(cfg)
    rows = [
        (k + 1, rep.eigenvalues[k], rep.chi[k], rep.lam[k], np.asarray(rep.eigenvectors[k]))
        for k in range(len(rep.eigenvalues))
    ]
    write_csv(out / "stability.csv", ["mode", "omega", "chi", "lambda", "pattern"], rows)
    write_json(
        out / "stability.json",
        {
            "omega_star": rep.omega_star,
            "stable": rep.stable,
            "critical_index": rep.critical_index,
            "critical_pattern": rep.critical_pattern,
            "eigenvalues": rep.eigenvalues,
            "method": rep.method,
        },
    )
    return EXIT_OK


def cmd_threshold(cfg):
    fam = cfg.model.to_family()
    free = cfg.params.get("free") or "phi"
    lo = float(cfg.params.get("lo") or 1e-3)
    hi = float(cfg.params.get("hi") or 1 - 1e-3)
    res = critical_threshold(fam, free=free, lo=lo, hi=hi)
    doc = {
        f"{free}_star": res.values[-1] if res.values else None,
        "values": res.values,
        "reason": res.reason,
        "closed_form": res.closed_form,
    }
    try:
        doc["modes"] = [
            {"mode": m.mode + 1, "value": m.value, "pattern": m.pattern}
            for m in mode_thresholds(fam, free=free, lo=lo, hi=hi)
        ]
    except AssumptionError:
        pass
    write_json(_outdir(cfg) / "threshold.json", doc)
    return EXIT_OK


def cmd_grid(cfg):
    fam = cfg.model.to_family()
    phis = parse_range(cfg.params.get("phi_values") or "0.01:0.99:99")
    psis = parse_range(cfg.params.get("psi_values") or "0.01:0.99:99")
    grid = stability_grid(fam, phis, psis)
    rows = [
        (phi, psi, grid.omega_star[i, j], bool(grid.stable_mask[i, j]), int(grid.critical_pattern_index[i, j]))
        for i, phi in enumerate(grid.phi_values)
        for j, psi in enumerate(grid.psi_values)
    ]
    out = _outdir(cfg)
    write_csv(out / "grid.csv", ["phi", "psi", "omega_star", "stable", "pattern"], rows)
    if cfg.output.svg:
        emit_svg(grid, "grid-map", out / "grid.svg", title=f"{fam.kind}, sigma={fam.sigma:g}")
    return EXIT_OK


def _branch_rows(diagram_spec, branches, n):
    rows = []
    for bid, br in enumerate(branches, start=1):
        for pt in br.points:
            rows.append((bid, pt.param, *pt.x, pt.omega_max, pt.stable, "regular"))
        for sp in br.special_points:
            tag = _tag(diagram_spec, sp.param, sp.x)
            rows.append((bid, sp.param, *sp.x, tag.omega_max, tag.stable, sp.kind))
    return rows


def cmd_bifurcate(cfg):
    fam = cfg.model.to_family()
    bounds = parse_range(cfg.params.get("range") or "0.02:0.98")
    if len(bounds) != 2:
        raise AssumptionError("--range must be lo:hi")
    lo, hi = bounds
    kwargs = {}
    for key in ("epsilon", "delta", "h_max"):
        if cfg.params.get(key) is not None:
            kwargs[key] = float(cfg.params[key])
    if "h_max" in kwargs:
        kwargs["h0"] = min(1e-3, kwargs["h_max"])
        kwargs["h_min"] = min(1e-4, kwargs["h0"])
    if cfg.params.get("multistart_params") is not None:
        kwargs["multistart_params"] = tuple(parse_vector(cfg.params["multistart_params"]))
    spec = DiagramSpec(fam, parameter=cfg.params.get("param") or "phi", lo=float(lo), hi=float(hi), **kwargs)
    n = fam.n
    header = ["branch_id", "param", *[f"x_{i + 1}" for i in range(n)], "omega_max", "stable", "point_type"]
    out = _outdir(cfg)
    try:
        diagram = bifurcation_diagram(spec, workers=int(cfg.params.get("workers") or 1))
    except ConvergenceError as exc:
        log.error("continuation failed: %s", exc)
        write_csv(out / "branches.csv", header + ["converged"], [])
        return EXIT_NONCONVERGED
    write_csv(out / "branches.csv", header, _branch_rows(spec, diagram.branches, n))
    summary = [
        {
            "branch_id": bid,
            "label": br.label,
            "emergence": br.emergence,
            "pattern": br.pattern,
            "reason": br.reason,
            "points": len(br.points),
            "special_points": [{"type": s.kind, "param": s.param, "x": s.x, "note": s.note} for s in br.special_points],
        }
        for bid, br in enumerate(diagram.branches, start=1)
    ]
    write_json(
        out / "branches.json",
        {
            "parameter": spec.parameter,
            "range": [spec.lo, spec.hi],
            "break_points": [{"value": b.value, "pattern": b.pattern} for b in diagram.break_points],
            "branches": summary,
        },
    )
    if cfg.output.svg:
        emit_svg(
            diagram.branches,
            "branch-diagram",
            out / "branches.svg",
            component=int(cfg.output.svg_component or 1),
            xlim=(spec.lo, spec.hi),
            title=f"{fam.kind}, sigma={fam.sigma:g}",
        )
    return EXIT_OK


def cmd_decompose(cfg):
    fam = cfg.model.to_family()
    if fam.kind != "two-region":
        raise AssumptionError("decompose is defined for the symmetric two-region family only")
    if cfg.params.get("phi_values") is not None:
        phis = parse_range(cfg.params["phi_values"])
    else:
        phis = np.array([fam.phi])
    rows = []
    for phi in phis:
        if not 0 < phi <= 1:
            raise AssumptionError(f"phi must lie in (0, 1], got {phi}")
        d = decompose_net_force(float(phi), fam.psi, fam.sigma)
        rows.append((phi, fam.psi, fam.sigma, d.chi, d.lam, d.omega_a, d.omega_w, d.alpha_x, d.beta_x, d.omega))
    header = ["phi", "psi", "sigma", "chi", "lambda", "omega_a", "omega_w", "alpha_x", "beta_x", "omega"]
    write_csv(_outdir(cfg) / "decompose.csv", header, rows)
    return EXIT_OK


HANDLERS = {
    "wages": cmd_wages,
    "equilibrate": cmd_equilibrate,
    "stability": cmd_stability,
    "threshold": cmd_threshold,
    "grid": cmd_grid,
    "bifurcate": cmd_bifurcate,
    "decompose": cmd_decompose,
}
assert set(HANDLERS) == set(COMMANDS)


def run(cfg):
    return HANDLERS[cfg.command](cfg)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return run(resolve_config(args))
    except AssumptionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
