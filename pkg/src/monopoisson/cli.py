"""Command-line front end.

Exit codes: 0 when every certification passes, 1 on a certification
failure, 2 on usage or configuration errors.  Errors are reported on stderr
as one line ``error: <Kind>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as config_mod
from .contractive import certify_lipschitz, contractive_params, solve_contractive
from .coupling import UniformStream, check_order_preservation, simulate_coupled
from .diagnostics import StatReport, fmt, write_report
from .discrete_solver import SOLVERS, certify_monotone, poisson_residual
from .errors import CertificationFailed, ConfigError, InvalidArgument, MonoPoissonError
from .kernel import check_stochastic_monotonicity, validate_kernel, validate_reward
from .split import estimate_g, verify_assumption1

EXIT_OK, EXIT_CERT, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: usage: {message}\n")


def shipped_configs() -> list:
    root = resources.files("monopoisson") / "configs"
    return sorted(str(p) for p in root.iterdir() if p.name.endswith(".toml"))


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", path="argv") from exc


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _out_path(args, cfg):
    return args.out if args.out is not None else cfg.output.path


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args, cfg):
    k = config_mod.build_kernel(cfg)
    r = config_mod.build_reward(cfg)
    method = args.method or cfg.solver.method
    anchor = cfg.solver.anchor if args.anchor is None else args.anchor
    if method == "linear":
        sol = SOLVERS[method](k, r, anchor=anchor)
    elif method == "regenerative":
        sol = SOLVERS[method](k, r, z=anchor)
    else:
        sol = SOLVERS[method](k, r, tol=cfg.solver.tol, max_terms=cfg.solver.max_terms)
    g = sol.anchored(anchor)
    res = poisson_residual(k, g, sol.r_c)
    _emit(_csv(["state", "g", "r_c", "residual"], zip(sol.grid, g, sol.r_c, res)), _out_path(args, cfg))
    print(f"solve: method={method} pi_r={fmt(sol.pi_r)} residual_sup={fmt(sol.residual_sup)}", file=sys.stderr)
    if sol.residual_sup > 1e-8:
        raise CertificationFailed(f"residual {sol.residual_sup:.3g} exceeds 1e-8")
    if k.monotone and r.monotone:
        certify_monotone(sol)
    return EXIT_OK


def cmd_estimate(args, cfg):
    k = config_mod.build_kernel(cfg)
    r = config_mod.build_reward(cfg)
    sc = config_mod.build_split(cfg, k)
    xs = _floats(args.at) if args.at else (cfg.solver.at or [0.0, 1.0, 2.0, 4.0, 8.0])
    n = args.cycles or cfg.solver.cycles
    if n < 30:
        raise ConfigError("need at least 30 cycles", path="solver.cycles")
    sol = estimate_g(sc, k, r, np.sort(xs), n, UniformStream(cfg.effective_seed()))
    rows = zip(sol.grid, sol.g, sol.se, sol.ci_halfwidth)
    _emit(_csv(["x", "g", "se", "ci_halfwidth"], rows), _out_path(args, cfg))
    print(f"estimate: pi_r={fmt(sol.pi_r)} pi_r_se={fmt(sol.info['pi_r_se'])} cycles={n}", file=sys.stderr)
    if k.monotone and r.monotone:
        certify_monotone(sol)
    return EXIT_OK


def cmd_contractive(args, cfg):
    k = config_mod.build_kernel(cfg)
    r = config_mod.build_reward(cfg)
    spec = args.grid or cfg.solver.grid
    if spec is None:
        raise ConfigError("contractive needs --grid or solver.grid", path="solver.grid")
    grid = config_mod.parse_grid(spec)
    tol = args.tol if args.tol is not None else cfg.solver.tol
    seed = cfg.effective_seed()
    pairs = [(grid[i], grid[i + 1]) for i in range(0, grid.size - 1, max(1, (grid.size - 1) // 8))]
    params = contractive_params(k, r, pairs, grid, 10_000, UniformStream(seed, (0,)))
    sol = solve_contractive(k, r, params, grid, tol, UniformStream(seed, (1,)), n_paths=cfg.solver.paths,
                            max_terms=cfg.solver.max_terms)
    _emit(_csv(["x", "g", "ci_halfwidth"], zip(sol.grid, sol.g, sol.ci_halfwidth)), _out_path(args, cfg))
    cert = certify_lipschitz(sol, params)
    print(
        f"contractive: rho={fmt(params.rho)} terms={sol.info['terms']} tail_bound={fmt(sol.info['tail_bound'])}"
        f" lipschitz_bound={fmt(cert.bound)} max_slope={fmt(cert.max_ratio)}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_simulate(args, cfg):
    k = config_mod.build_kernel(cfg)
    xs = sorted(_floats(args.from_))
    if not xs:
        raise ConfigError("--from needs at least one state", path="argv")
    seed = args.seed if args.seed is not None else cfg.effective_seed()
    paths = simulate_coupled(k, xs, args.steps, seed)
    header = ["step"] + [f"x0={fmt(x)}" for x in xs]
    rows = ([str(t)] + [fmt(v) for v in paths.paths[:, t]] for t in range(args.steps + 1))
    _emit(_csv(header, rows), _out_path(args, cfg))
    rep = check_order_preservation(paths)
    if not rep.passed:
        raise CertificationFailed(f"{rep.violations} order violations", location=rep.first)
    return EXIT_OK


def _validation_rows(cfg, name):
    k = config_mod.build_kernel(cfg)
    r = config_mod.build_reward(cfg)
    seed = cfg.effective_seed()
    if k.discrete:
        grid = k.states().astype(float)
    elif cfg.solver.grid:
        grid = config_mod.parse_grid(cfg.solver.grid)
    else:
        grid = np.linspace(0.0, 10.0, 41)
    rows = []
    v = validate_kernel(k, grid)
    rows.append(StatReport.at_most(f"{name}:kernel_mass", v.mass_error, 1e-12, grid.size, seed))
    rows.append(StatReport.at_most(f"{name}:kernel_shape", v.cdf_violations + v.inverse_violations, 0,
                                   grid.size, seed))
    m = check_stochastic_monotonicity(k, grid)
    rows.append(StatReport.at_most(f"{name}:stochastic_monotonicity", m.worst_violation, 1e-12, grid.size, seed))
    try:
        validate_reward(r, grid)
        bad = 0
    except InvalidArgument:
        bad = 1
    rows.append(StatReport.at_most(f"{name}:reward", bad, 0, grid.size, seed))
    if cfg.split is not None:
        sc = config_mod.build_split(cfg, k)
        sgrid = grid if k.discrete else np.concatenate(
            [np.linspace(0.0, sc.b, 21), np.linspace(sc.b + 0.1, 20.0, 60)]
        )
        rep = verify_assumption1(sc, k, sgrid, r)
        for label, cond in rep.conditions.items():
            rows.append(StatReport.at_most(f"{name}:assumption_{label}", 0.0 if cond.passed else float("inf"),
                                           0.0, sgrid.size, seed))
    return rows


def cmd_validate(args, cfg):
    rows = _validation_rows(cfg, Path(args.config).stem)
    _emit(write_report(rows), _out_path(args, cfg))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_CERT


def cmd_check(args, configs):
    from .suite import run_checks

    rows = []
    for path, cfg in configs:
        rows += run_checks(cfg, Path(path).stem)
    _emit(write_report(rows), args.out)
    failed = [r.name for r in rows if not r.passed]
    for name in failed:
        print(f"check failed: {name}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_CERT


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="monopoisson", description="Poisson-equation solvers for stochastically monotone chains.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text, config_required=True):
        sp = sub.add_parser(name, help=help_text)
        if config_required:
            sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", default=None, help="output CSV path (default: stdout)")
        return sp

    sp = add("solve", "exact discrete solution of Poisson's equation")
    sp.add_argument("--anchor", type=int, default=None)
    sp.add_argument("--method", choices=sorted(SOLVERS), default=None)

    sp = add("estimate", "regenerative Monte Carlo estimate of g")
    sp.add_argument("--cycles", type=int, default=None)
    sp.add_argument("--at", default=None, help="comma-separated states")

    sp = add("contractive", "truncated-series solution for contractive chains")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--grid", default=None, help="a:b:n")

    sp = add("simulate", "coupled paths from several initial states")
    sp.add_argument("--from", dest="from_", required=True, help="comma-separated initial states")
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)

    sp = add("check", "run the check suite", config_required=False)
    sp.add_argument("--config", action="append", default=None, help="repeatable; default: shipped configs")

    add("validate", "validate kernel, reward and split assumptions")
    return p


COMMANDS = {
    "solve": cmd_solve, "estimate": cmd_estimate, "contractive": cmd_contractive,
    "simulate": cmd_simulate, "validate": cmd_validate,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "check":
            paths = args.config or shipped_configs()
            return cmd_check(args, [(p, config_mod.load_config(p)) for p in paths])
        cfg = config_mod.load_config(args.config)
        if getattr(args, "steps", 0) is not None and getattr(args, "steps", 0) < 0:
            raise ConfigError("--steps must be non-negative", path="argv")
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificationFailed as exc:
        print(f"error: CertificationFailed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (InvalidArgument, MonoPoissonError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, InvalidArgument) else EXIT_CERT


def main():
    sys.exit(run())
