"""l1-Tikhonov minimization and sequential discrepancy parameter choice.

Minimizes ``1/2 ||A x - y||^2 + alpha ||x||_1`` over sequences supported in
``1..N``. The misfit is written through the exact normal data
``G = A_N* A_N``, ``b = A_N* y`` (see :meth:`OperatorModel.normal_equations`),
so one iteration costs a single ``N x N`` product for every operator kind.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ExhaustedGridError, InvalidParameterError
from .operators import ImageVec, OperatorModel, image_norm
from .sequences import SeqVec

__all__ = [
    "SolverConfig",
    "SolveResult",
    "Selection",
    "ConvergenceWarning",
    "soft_threshold",
    "lipschitz_sq_estimate",
    "solve_l1_tikhonov",
    "discrepancy_select",
    "optimality_residual",
]

log = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class SolverConfig:
    """Truncation, stopping rule and discrepancy-grid settings.

    ``alpha0=None`` means ``||A* y||_inf``, the smallest alpha with zero solution.
    """

    dim: int = 256
    max_iterations: int = 5000
    optimality_tol: float = 1e-9
    alpha0: Optional[float] = None
    q: float = 0.7
    count: int = 60
    tau: float = 1.5
    warm_start: bool = True
    polish: bool = True
    power_iterations: int = 300
    warn: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameterError("dim must be >= 1")
        if not 0.0 < self.q < 1.0:
            raise InvalidParameterError("grid ratio q must lie in (0, 1)")
        if self.tau <= 1.0:
            raise InvalidParameterError("tau must exceed 1")
        if self.optimality_tol <= 0 or self.max_iterations < 1 or self.count < 1:
            raise InvalidParameterError("tolerances and counts must be positive")
        if self.alpha0 is not None and self.alpha0 <= 0:
            raise InvalidParameterError("alpha0 must be positive")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def soft_threshold(v, theta):
    """``sign(v) max(|v| - theta, 0)``, elementwise."""
    if np.any(np.asarray(theta) < 0):
        raise InvalidParameterError("threshold must be non-negative")
    out = np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _power_iteration(matvec, N: int, iters: int, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(N)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = matvec(v)
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return lam


def lipschitz_sq_estimate(op: OperatorModel, N: int, iters: int = 100) -> float:
    """Power-iteration estimate of ``||A_N||^2`` using forward and adjoint applications."""
    if iters < 10:
        raise InvalidParameterError("use at least 10 power iterations")
    return _power_iteration(lambda v: op.adjoint_apply(op.apply(SeqVec(v)), N).values, N, iters)


def optimality_residual(grad: np.ndarray, x: np.ndarray, alpha: float) -> float:
    """Sup-norm distance of ``-grad`` to ``alpha * subdifferential(||.||_1)(x)``."""
    nz = x != 0
    r = np.where(nz, np.abs(grad + alpha * np.sign(x)), np.maximum(np.abs(grad) - alpha, 0.0))
    return float(np.max(r)) if r.size else 0.0


@dataclass
class SolveResult:
    x: SeqVec
    alpha: float
    objective: float
    residual: float
    optimality_residual: float
    iterations: int
    converged: bool
    polished: bool = False
    objective_trace: List[float] = field(default_factory=list, repr=False)

    def certificate(self) -> dict:
        return {
            "alpha": self.alpha,
            "objective": self.objective,
            "residual": self.residual,
            "optimality_residual": self.optimality_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


class _Problem:
    """Quadratic data ``(G, b, yy)`` plus a step size, shared across alphas."""

    def __init__(self, op: OperatorModel, ydelta: ImageVec, cfg: SolverConfig):
        self.op, self.ydelta, self.cfg = op, ydelta, cfg
        G, b, yy = op.normal_equations(ydelta, cfg.dim)
        self.G, self.b, self.yy = np.asarray(G), np.asarray(b), float(yy)
        lip = _power_iteration(lambda v: self.G @ v, cfg.dim, cfg.power_iterations)
        if lip <= 0.0:
            raise InvalidParameterError("operator vanishes on the truncation")
        self.lip = lip
        self.step = 1.0 / (lip * 1.01)

    def misfit(self, x):
        return 0.5 * max(x @ (self.G @ x) - 2.0 * self.b @ x + self.yy, 0.0)

    def objective(self, x, alpha):
        return self.misfit(x) + alpha * np.sum(np.abs(x))

    def grad(self, x):
        return self.G @ x - self.b

    def residual(self, x) -> float:
        """``||A x - y||`` evaluated directly in the image space."""
        return image_norm(self.op.apply(SeqVec(x)) - self.ydelta)

    def polish(self, x, alpha):
        """Solve the KKT system on the current support with the current signs."""
        S = np.flatnonzero(x)
        if S.size == 0:
            return None
        s = np.sign(x[S])
        GS = self.G[np.ix_(S, S)]
        try:
            xs = np.linalg.solve(GS, self.b[S] - alpha * s)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.sign(xs) == s):
            return None
        out = np.zeros_like(x)
        out[S] = xs
        return out


def _solve(prob: _Problem, alpha: float, x0: Optional[np.ndarray] = None, warn: bool = True) -> SolveResult:
    cfg = prob.cfg
    N = cfg.dim
    tol = cfg.optimality_tol
    x = np.zeros(N) if x0 is None else np.array(x0, dtype=float)
    Fx = prob.objective(x, alpha)
    F0 = prob.objective(np.zeros(N), alpha)
    if Fx > F0:
        x, Fx = np.zeros(N), F0
    y, t = x.copy(), 1.0
    trace = [Fx]
    opt = optimality_residual(prob.grad(x), x, alpha)
    it = 0
    polished = False
    while opt > tol and it < cfg.max_iterations:
        it += 1
        z = soft_threshold(y - prob.step * prob.grad(y), prob.step * alpha)
        Fz = prob.objective(z, alpha)
        if Fz > Fx + 1e-15 * abs(Fx):
            # function-value restart: drop momentum, keep the best iterate
            y, t = x.copy(), 1.0
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = z + ((t - 1.0) / t_next) * (z - x)
            x, Fx, t = z, Fz, t_next
            trace.append(Fx)
            opt = optimality_residual(prob.grad(x), x, alpha)
        if cfg.polish and opt > tol and it % 25 == 0:
            xp = prob.polish(x, alpha)
            if xp is not None:
                Fp = prob.objective(xp, alpha)
                op_p = optimality_residual(prob.grad(xp), xp, alpha)
                if Fp <= Fx + 1e-14 * max(1.0, abs(Fx)) and op_p < opt:
                    x, Fx, opt, polished = xp, Fp, op_p, True
                    y, t = x.copy(), 1.0
                    trace.append(Fx)
    converged = opt <= tol
    result = SolveResult(
        x=SeqVec(x),
        alpha=alpha,
        objective=Fx,
        residual=prob.residual(x),
        optimality_residual=opt,
        iterations=it,
        converged=converged,
        polished=polished,
        objective_trace=trace,
    )
    if warn:
        _warn_if_unconverged(result, cfg)
    return result


def _warn_if_unconverged(res: SolveResult, cfg: SolverConfig):
    if not res.converged and cfg.warn:
        warnings.warn(
            f"l1 solver stopped after {res.iterations} iterations at alpha={res.alpha:.3e} "
            f"with optimality residual {res.optimality_residual:.2e}",
            ConvergenceWarning,
            stacklevel=4,
        )


def solve_l1_tikhonov(
    op: OperatorModel,
    ydelta: ImageVec,
    alpha: float,
    cfg: Optional[SolverConfig] = None,
    x0: Optional[SeqVec] = None,
) -> SolveResult:
    """Minimize ``1/2 ||A x - y||^2 + alpha ||x||_1`` over ``x`` supported in ``1..cfg.dim``.

    Accelerated proximal gradient with function-value restart and periodic
    support polishing (an exact KKT solve on the current sign pattern,
    accepted only if it lowers the optimality residual).
    """
    if alpha <= 0:
        raise InvalidParameterError("alpha must be positive")
    cfg = cfg or SolverConfig()
    prob = _Problem(op, ydelta, cfg)
    return _solve(prob, alpha, None if x0 is None else x0.padded(cfg.dim))


@dataclass
class Selection:
    alpha: float
    x: SeqVec
    residual: float
    result: SolveResult
    index: int
    previous_residual: Optional[float]
    trace: List[Tuple[float, float]]


def discrepancy_select(
    op: OperatorModel, ydelta: ImageVec, delta: float, cfg: Optional[SolverConfig] = None
) -> Selection:
    """Largest grid value ``alpha0 q**j`` with ``||A x_alpha - y|| <= tau delta``.

    The grid is walked downward; the previous grid point (if any) violated
    the bound, which is the sequential discrepancy bracket.
    """
    if delta <= 0:
        raise InvalidParameterError("the discrepancy principle needs delta > 0")
    cfg = cfg or SolverConfig()
    prob = _Problem(op, ydelta, cfg)
    alpha0 = cfg.alpha0 if cfg.alpha0 is not None else float(np.max(np.abs(prob.b)))
    if alpha0 <= 0:
        alpha0 = 1.0
    bound = cfg.tau * delta
    trace = []
    x_prev = None
    prev_res = None
    best = None
    for j in range(cfg.count):
        alpha = alpha0 * cfg.q**j
        res = _solve(prob, alpha, x_prev if cfg.warm_start else None, warn=False)
        trace.append((alpha, res.residual))
        if best is None or res.residual < best.residual:
            best = res
        if res.residual <= bound:
            _warn_if_unconverged(res, cfg)
            return Selection(alpha, res.x, res.residual, res, j, prev_res, trace)
        prev_res = res.residual
        x_prev = res.x.values
    raise ExhaustedGridError(
        f"no grid alpha reached residual <= {bound:.3e} (best {best.residual:.3e})",
        best_alpha=best.alpha,
        best_residual=best.residual,
        best_x=best.x,
    )
