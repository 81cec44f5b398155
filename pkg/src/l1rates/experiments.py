"""Noise sweeps that compare reconstruction errors with the rate function."""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, ExhaustedGridError, InvalidInputError, InvalidParameterError
from .operators import ImageVec, OperatorModel
from .rates import RateProfile, negative_witness
from .sequences import SeqVec, head_tail_split
from .solver import SolverConfig, discrepancy_select

__all__ = [
    "SWEEP_COLUMNS",
    "ExperimentReport",
    "simulate_data",
    "check_truncation",
    "run_rate_sweep",
    "run_beta1_demo",
    "power_decay",
]

SWEEP_COLUMNS = ("delta", "alpha", "l1_error", "residual", "phi_delta", "iterations", "status")
TRUNCATION_RTOL = 1e-3


def power_decay(dim: int, power: float = 2.0) -> SeqVec:
    """``x_k = k**(-power)`` for ``k = 1..dim``."""
    return SeqVec(np.arange(1, dim + 1, dtype=float) ** (-power))


def simulate_data(op: OperatorModel, xdag: SeqVec, delta: float, seed: int, dim: Optional[int] = None) -> ImageVec:
    """``A xdag + delta w / ||w||`` with a seeded random direction ``w``."""
    if delta < 0:
        raise InvalidParameterError("delta must be non-negative")
    y = op.apply(xdag)
    if delta == 0:
        return y
    rng = np.random.default_rng(seed)
    w = op.random_direction(rng, max(dim or 0, xdag.dim))
    return y + w * delta


def check_truncation(xdag: SeqVec, N: int) -> None:
    """Refuse truncations that drop more than 0.1% of ``||xdag||_1``."""
    if xdag.dim <= N:
        return
    _, tail = head_tail_split(xdag, N)
    if tail.l1 > TRUNCATION_RTOL * xdag.l1:
        raise InvalidInputError(
            f"truncation N={N} drops {tail.l1:.3e} of ||xdag||_1 = {xdag.l1:.3e} "
            f"(limit {TRUNCATION_RTOL:g} relative)"
        )


@dataclass
class ExperimentReport:
    rows: List[dict]
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def ok_rows(self) -> List[dict]:
        return [r for r in self.rows if r["status"] != "failed"]

    def max_ratio(self) -> float:
        """``max_delta l1_error / phi(delta)`` over non-failed rows."""
        rows = self.ok_rows
        if not rows:
            return float("nan")
        return max(r["l1_error"] / r["phi_delta"] if r["phi_delta"] > 0 else np.inf for r in rows)

    def fitted_slope(self) -> float:
        """Least-squares slope of ``log l1_error`` against ``log delta``."""
        rows = [r for r in self.ok_rows if r["l1_error"] > 0]
        if len(rows) < 2:
            return float("nan")
        d = np.log([r["delta"] for r in rows])
        e = np.log([r["l1_error"] for r in rows])
        return float(np.polyfit(d, e, 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = dict(self.metadata)
        payload["max_ratio"] = self.max_ratio()
        payload["rows"] = self.rows
        return json.dumps(payload, indent=2, default=_json_default)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _sweep_row(op, xdag, delta, profile, cfg, seed):
    y = simulate_data(op, xdag, delta, seed, cfg.dim)
    phi = profile.phi(delta)
    try:
        sel = discrepancy_select(op, y, delta, cfg)
    except ExhaustedGridError as exc:
        return {
            "delta": float(delta),
            "alpha": float(exc.best_alpha),
            "l1_error": float((exc.best_x - xdag).l1),
            "residual": float(exc.best_residual),
            "phi_delta": float(phi),
            "iterations": 0,
            "status": "failed",
        }
    status = "ok" if sel.result.converged else "nonconverged"
    return {
        "delta": float(delta),
        "alpha": float(sel.alpha),
        "l1_error": float((sel.x - xdag).l1),
        "residual": float(sel.residual),
        "phi_delta": float(phi),
        "iterations": int(sel.result.iterations),
        "status": status,
    }


def run_rate_sweep(
    op: OperatorModel,
    xdag: SeqVec,
    deltas: Sequence[float],
    profile: RateProfile,
    cfg: Optional[SolverConfig] = None,
    seed: int = 0,
    workers: int = 1,
    descriptor: str = "",
) -> ExperimentReport:
    """For each noise level: simulate data (seed ``seed + i``), pick alpha by
    the discrepancy principle and record the l1 error next to ``phi(delta)``.

    Rows are independent; with ``workers > 1`` they run concurrently but are
    reported in input order.
    """
    cfg = cfg or SolverConfig()
    deltas = [float(d) for d in deltas]
    if not deltas or any(d <= 0 for d in deltas):
        raise InvalidParameterError("noise levels must be positive")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise InvalidParameterError("noise levels must be strictly descending")
    check_truncation(xdag, cfg.dim)
    quiet = replace(cfg, warn=False)  # non-convergence is recorded per row instead
    jobs = [(op, xdag, d, profile, quiet, seed + i) for i, d in enumerate(deltas)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _sweep_row(*a), jobs))
    else:
        rows = [_sweep_row(*a) for a in jobs]
    meta = {
        "operator": op.kind,
        "xdag": descriptor or f"dim={xdag.dim}, l1={xdag.l1!r}",
        "c": profile.c,
        "beta": profile.beta,
        "n_ladder": [int(n) for n in profile.ns],
        "profile": profile.rows(),
        "phi_kind": "candidate upper bound",
        "seed": seed,
        "tau": cfg.tau,
        "dim": cfg.dim,
        "solver": cfg.as_dict(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return ExperimentReport(rows, meta)


def run_beta1_demo(xdag: SeqVec, n_values: Sequence[int], op: Optional[OperatorModel] = None) -> List[dict]:
    """Tabulate the beta = 1 witness: ``gap / image_distance`` grows without bound."""
    if not np.any(xdag.values):
        raise DegenerateInputError("the demonstration needs a nonzero xdag")
    table = []
    for n in n_values:
        _, gap, dist = negative_witness(xdag, int(n), op)
        table.append({"n": int(n), "gap": gap, "image_distance": dist, "ratio": gap / dist})
    return table
