"""Command-line entry point.

Subcommands: ``verify-source-sets``, ``compute-phi``, ``check-vie``,
``solve``, ``select-alpha``, ``sweep``, ``beta1-demo``.

Global flags ``--seed``, ``--out``, ``--format`` and ``--config`` may appear
before or after the subcommand. A config file holds ``key = value`` lines
named like the long flags; explicit flags win.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from typing import List, Optional, Sequence

import numpy as np

from . import piecewise as pw
from .errors import CapacityError, ExhaustedGridError, InvalidInputError, InvalidParameterError
from .experiments import power_decay, run_beta1_demo, run_rate_sweep
from .operators import OperatorModel, from_spec
from .rates import beta_of_c, default_ladder, profile_for, vie_margin
from .sequences import SeqVec, read_vector, write_csv
from .solver import SolverConfig, discrepancy_select, solve_l1_tikhonov
from .source_sets import (
    HAAR_C,
    construct_bidiagonal_candidate,
    haar_candidate_for,
    haar_norm_sum_closed_form,
    verify_candidate,
)

log = logging.getLogger("l1rates")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
GLOBAL_FLAGS = {"--seed": True, "--out": True, "--format": True, "--config": True, "-v": False, "--verbose": False}


class NumericalFailure(RuntimeError):
    pass


# -- argument parsing ----------------------------------------------------

def _int_list(text: str) -> List[int]:
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


def _float_list(text: str) -> List[float]:
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


def _add_xdag(p):
    p.add_argument("--xdag", help="file with the exact solution (plain values or index,value CSV)")
    p.add_argument("--xdag-power", type=float, help="use x_k = k**(-p) instead of a file")
    p.add_argument("--xdag-dim", type=int, default=256, help="length for --xdag-power (default 256)")


def _add_grid(p):
    p.add_argument("--dim", type=int, default=256, help="truncation dimension N")
    p.add_argument("--tau", type=float, default=1.5)
    p.add_argument("--alpha0", type=float, help="largest grid alpha (default ||A* y||_inf)")
    p.add_argument("--q", type=float, default=0.7, help="grid ratio")
    p.add_argument("--count", type=int, default=60, help="grid length")
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--optimality-tol", type=float, default=1e-9)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="file of 'key = value' lines mirroring the flags")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="l1rates", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("verify-source-sets", parents=[common], help="check an explicit source candidate")
    p.add_argument("--operator", help="must match the construction if given")
    p.add_argument("--construction", choices=("bidiagonal", "haar"), default="bidiagonal")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--c", type=float, help="column-sum bound (bidiagonal; Haar uses 1/(4-sqrt 8))")
    p.add_argument("--depth", type=int, help="number of adjoint components to check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compute-phi", parents=[common], help="tabulate the rate function")
    _add_xdag(p)
    p.add_argument("--construction", choices=("bidiagonal", "haar"), default="bidiagonal")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--n-ladder", type=_int_list, help="comma-separated n values (default powers of 2)")
    p.add_argument("--t-min", type=float, default=1e-6)
    p.add_argument("--t-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=61)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("check-vie", parents=[common], help="sample the variational-inequality margin")
    _add_xdag(p)
    p.add_argument("--operator", default="bidiagonal")
    p.add_argument("--construction", choices=("bidiagonal", "haar"), default="bidiagonal")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--n-ladder", type=_int_list)
    p.add_argument("--beta", type=float, help="default (1-c)/(1+c)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--sample-dim", type=int, default=64, help="maximal length of random x")
    p.set_defaults(func=cmd_vie)

    p = sub.add_parser("solve", parents=[common], help="minimize the l1-Tikhonov functional")
    p.add_argument("--operator", default="bidiagonal")
    p.add_argument("--y", required=False, help="data file (Haar coefficients or piecewise JSON for haar-integration)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--optimality-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("select-alpha", parents=[common], help="sequential discrepancy principle")
    p.add_argument("--operator", default="bidiagonal")
    p.add_argument("--y")
    p.add_argument("--delta", type=float)
    _add_grid(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("sweep", parents=[common], help="noise sweep against phi(delta)")
    p.add_argument("--operator", default="bidiagonal")
    _add_xdag(p)
    p.add_argument("--construction", choices=("bidiagonal", "haar"))
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--n-ladder", type=_int_list)
    p.add_argument("--deltas", type=_float_list, help="explicit descending noise levels")
    p.add_argument("--delta-max", type=float, default=1e-1)
    p.add_argument("--delta-min", type=float, default=1e-4)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--workers", type=int, default=1)
    _add_grid(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("beta1-demo", parents=[common], help="beta = 1 counterexample table")
    _add_xdag(p)
    p.add_argument("--n-values", type=_int_list, default=list(range(1, 65)))
    p.set_defaults(func=cmd_beta1)

    parser._subparsers_map = sub.choices
    return parser


def _hoist_globals(argv: Sequence[str], commands) -> List[str]:
    """Move global flags written before the subcommand to after it."""
    argv = list(argv)
    pos = next((i for i, a in enumerate(argv) if a in commands), None)
    if pos is None:
        return argv
    before, after = [], []
    i = 0
    while i < pos:
        a = argv[i]
        key = a.split("=", 1)[0]
        if key in GLOBAL_FLAGS:
            takes = GLOBAL_FLAGS[key] and "=" not in a
            after.extend(argv[i: i + 1 + takes])
            i += 1 + takes
        else:
            before.append(a)
            i += 1
    return before + [argv[pos]] + after + argv[pos + 1:]


def read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    commands = parser._subparsers_map
    argv = _hoist_globals(sys.argv[1:] if argv is None else argv, commands)
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sp = commands[args.command]
        known = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in conf.items():
            if key not in known or key in ("config", "help"):
                raise InvalidInputError(f"unknown config key {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# -- helpers --------------------------------------------------------------

def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_csv(rows: List[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def _load_xdag(args) -> tuple:
    if args.xdag:
        return read_vector(args.xdag), f"file:{args.xdag}"
    if args.xdag_power is not None:
        return power_decay(args.xdag_dim, args.xdag_power), f"k^-{args.xdag_power:g}, dim {args.xdag_dim}"
    raise InvalidInputError("give --xdag <file> or --xdag-power <p>")


def _load_image(op: OperatorModel, path: Optional[str]):
    if not path:
        raise InvalidInputError("missing --y data file")
    if op.image_space == "function_L2":
        if path.endswith(".json"):
            with open(path) as fh:
                return pw.PiecewisePoly.from_json(fh.read())
        return pw.haar_synthesis(read_vector(path).values)
    return read_vector(path)


def _profile(args, xdag):
    construction = args.construction
    c = HAAR_C if construction == "haar" else args.c
    return profile_for(xdag, construction, c, args.n_ladder)


def _solver_cfg(args, **extra) -> SolverConfig:
    kw = dict(dim=args.dim, max_iterations=args.max_iterations, optimality_tol=args.optimality_tol)
    for name in ("tau", "alpha0", "q", "count"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    kw.update(extra)
    return SolverConfig(**kw)


# -- commands -------------------------------------------------------------

def cmd_verify(args) -> int:
    if args.construction == "bidiagonal":
        if args.c is None:
            raise InvalidInputError("--c is required for the bidiagonal construction")
        cand = construct_bidiagonal_candidate(args.n, args.c)
        depth = args.depth or 4 * cand.support_depth
    else:
        if args.c is not None and not math.isclose(args.c, HAAR_C, rel_tol=1e-12):
            log.warning("Haar construction uses c = 1/(4 - sqrt 8); ignoring --c %g", args.c)
        cand = haar_candidate_for(args.n)
        depth = args.depth or (1 << ((args.n - 1).bit_length() + 8))
    if args.operator:
        op = from_spec(args.operator)
        if op.kind != cand.op.kind:
            raise InvalidInputError(f"construction {args.construction!r} needs the {cand.op.kind} operator")
    rep = verify_candidate(cand.op, cand, depth)
    payload = rep.as_dict()
    payload["construction"] = args.construction
    payload["norm_sum"] = cand.norm_sum()
    if args.construction == "haar" and args.n & (args.n - 1) == 0:
        m = args.n.bit_length() - 1
        payload["norm_sum_published"] = haar_norm_sum_closed_form(m)
    if args.format == "csv":
        _emit(args, _rows_csv([payload], list(payload)))
    else:
        _emit(args, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_phi(args) -> int:
    xdag, _ = _load_xdag(args)
    prof = _profile(args, xdag)
    if not 0 < args.t_min < args.t_max:
        raise InvalidParameterError("need 0 < t-min < t-max")
    ts = np.logspace(np.log10(args.t_min), np.log10(args.t_max), args.points)
    rows = [{"t": float(t), "phi": float(prof.phi(t)), "argmin_n": prof.argmin_n(t)} for t in ts]
    if args.format == "json":
        payload = {"c": prof.c, "beta": prof.beta, "phi_kind": "candidate upper bound",
                   "profile": prof.rows(), "rows": rows}
        _emit(args, json.dumps(payload, indent=2) + "\n")
    else:
        _emit(args, _rows_csv(rows, ["t", "phi"]))
    return EXIT_OK


def cmd_vie(args) -> int:
    xdag, _ = _load_xdag(args)
    prof = _profile(args, xdag)
    op = from_spec(args.operator)
    beta = args.beta if args.beta is not None else beta_of_c(prof.c)
    rng = np.random.default_rng(args.seed)
    margins = []
    for _ in range(args.samples):
        d = int(rng.integers(1, args.sample_dim + 1))
        margins.append(vie_margin(op, SeqVec(rng.uniform(-1, 1, d)), xdag, beta, prof))
    margins = np.array(margins)
    payload = {"c": prof.c, "beta": beta, "samples": int(args.samples), "seed": args.seed,
               "min_margin": float(margins.min()), "mean_margin": float(margins.mean())}
    if args.format == "csv":
        _emit(args, _rows_csv([payload], list(payload)))
    else:
        _emit(args, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _solution_output(args, x: SeqVec, cert: dict) -> None:
    if args.format == "json":
        _emit(args, json.dumps({"certificate": cert, "x": x.values.tolist()}, indent=2) + "\n")
        return
    _emit(args, write_csv(x))
    text = json.dumps(cert, indent=2) + "\n"
    if args.out:
        with open(args.out + ".json", "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def cmd_solve(args) -> int:
    if args.alpha is None:
        raise InvalidInputError("--alpha is required")
    op = from_spec(args.operator)
    y = _load_image(op, args.y)
    cfg = SolverConfig(dim=args.dim, max_iterations=args.max_iterations, optimality_tol=args.optimality_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = solve_l1_tikhonov(op, y, args.alpha, cfg)
    _solution_output(args, res.x, res.certificate())
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_select(args) -> int:
    if args.delta is None:
        raise InvalidInputError("--delta is required")
    op = from_spec(args.operator)
    y = _load_image(op, args.y)
    cfg = _solver_cfg(args, warn=False)
    sel = discrepancy_select(op, y, args.delta, cfg)
    cert = sel.result.certificate()
    cert.update({"delta": args.delta, "tau": cfg.tau, "q": cfg.q, "count": cfg.count,
                 "grid_index": sel.index, "previous_residual": sel.previous_residual})
    _solution_output(args, sel.x, cert)
    return EXIT_OK if sel.result.converged else EXIT_NUMERIC


def cmd_sweep(args) -> int:
    op = from_spec(args.operator)
    xdag, desc = _load_xdag(args)
    if args.construction is None:
        args.construction = "haar" if op.kind == "haar_integration" else "bidiagonal"
    prof = _profile(args, xdag)
    deltas = args.deltas or list(np.logspace(np.log10(args.delta_max), np.log10(args.delta_min), args.points))
    cfg = _solver_cfg(args)
    rep = run_rate_sweep(op, xdag, deltas, prof, cfg, seed=args.seed, workers=args.workers, descriptor=desc)
    _emit(args, rep.to_json() + "\n" if args.format == "json" else rep.to_csv())
    log.info("max l1_error/phi(delta) = %.4g", rep.max_ratio())
    if all(r["status"] != "ok" for r in rep.rows):
        raise NumericalFailure("no sweep row converged")
    return EXIT_OK


def cmd_beta1(args) -> int:
    xdag, _ = _load_xdag(args)
    table = run_beta1_demo(xdag, args.n_values)
    if args.format == "json":
        _emit(args, json.dumps(table, indent=2) + "\n")
    else:
        _emit(args, _rows_csv(table, ["n", "gap", "image_distance", "ratio"]))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, InvalidParameterError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ExhaustedGridError, NumericalFailure, CapacityError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
