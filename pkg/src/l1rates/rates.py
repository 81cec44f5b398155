"""Rate function, variational-inequality margin and the beta = 1 counterexample."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, InvalidParameterError
from .operators import BidiagonalOperator, OperatorModel, image_norm
from .sequences import SeqVec
from .source_sets import (
    SourceCandidate,
    construct_bidiagonal_candidate,
    haar_candidate_for,
)

__all__ = [
    "beta_of_c",
    "RateProfile",
    "build_rate_profile",
    "default_ladder",
    "profile_for",
    "vie_margin",
    "negative_witness",
]


def beta_of_c(c: float) -> float:
    """``(1 - c) / (1 + c)``."""
    if not 0.0 <= c < 1.0:
        raise InvalidParameterError("c must lie in [0, 1)")
    return (1.0 - c) / (1.0 + c)


@dataclass(frozen=True)
class RateProfile:
    """Tabulated ``(n, tail_n, normsum_n)`` triples for a fixed ``c``.

    ``phi(t) = 2 min_n (tail_n + t normsum_n / (1 + c))``. The minimum runs
    over the stored ``n`` and the stored candidate only, so the result is an
    upper bound for the infimum over all ``n`` and all admissible tuples.
    """

    c: float
    ns: np.ndarray
    tails: np.ndarray
    normsums: np.ndarray

    @property
    def beta(self) -> float:
        return beta_of_c(self.c)

    def _terms(self, t):
        t = np.asarray(t, dtype=float)
        return self.tails + np.multiply.outer(t, self.normsums) / (1.0 + self.c)

    def phi(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise InvalidParameterError("phi is defined for t >= 0")
        out = 2.0 * np.min(self._terms(t_arr), axis=-1)
        return float(out) if out.ndim == 0 else out

    __call__ = phi

    def argmin_n(self, t: float) -> int:
        """Smallest ``n`` attaining the minimum at ``t``."""
        return int(self.ns[int(np.argmin(self._terms(float(t))))])

    def rows(self) -> List[dict]:
        return [
            {"n": int(n), "tail": float(a), "normsum": float(b)}
            for n, a, b in zip(self.ns, self.tails, self.normsums)
        ]


def _tails(xdag: SeqVec, ns: Iterable[int]) -> np.ndarray:
    a = np.abs(xdag.values)
    # suffix sums from the far end keep small terms together
    suffix = np.cumsum(a[::-1])[::-1]
    suffix = np.append(suffix, 0.0)
    return np.array([suffix[min(n, a.size)] for n in ns])


def build_rate_profile(xdag: SeqVec, candidates: Sequence[SourceCandidate]) -> RateProfile:
    """Profile from one candidate per ``n``; all must share the same ``c``."""
    if not candidates:
        raise InvalidInputError("at least one candidate is required")
    cs = {cand.c for cand in candidates}
    if len(cs) != 1:
        raise InvalidInputError(f"candidates mix different c values: {sorted(cs)}")
    ns = [cand.n for cand in candidates]
    if len(set(ns)) != len(ns):
        raise InvalidInputError("candidate sizes must be distinct")
    order = np.argsort(ns)
    ns_sorted = np.array(ns)[order]
    sums = np.array([candidates[i].norm_sum() for i in order])
    return RateProfile(cs.pop(), ns_sorted, _tails(xdag, ns_sorted), sums)


def default_ladder(dim: int) -> List[int]:
    """Powers of two up to ``dim``."""
    out, n = [], 1
    while n <= max(dim, 1):
        out.append(n)
        n *= 2
    return out


def profile_for(
    xdag: SeqVec,
    construction: str,
    c: Optional[float] = None,
    ladder: Optional[Sequence[int]] = None,
) -> RateProfile:
    """Convenience: build the candidates of one explicit construction over a ladder."""
    ladder = list(ladder) if ladder else default_ladder(xdag.dim)
    if construction == "bidiagonal":
        if c is None:
            raise InvalidParameterError("the bidiagonal construction needs c")
        cands = [construct_bidiagonal_candidate(n, c) for n in ladder]
    elif construction == "haar":
        cands = [haar_candidate_for(n) for n in ladder]
    else:
        raise InvalidInputError(f"unknown construction {construction!r}")
    return build_rate_profile(xdag, cands)


def vie_margin(op: OperatorModel, x: SeqVec, xdag: SeqVec, beta: float, profile: RateProfile) -> float:
    """``||x||_1 - ||xdag||_1 + phi(||A x - A xdag||) - beta ||x - xdag||_1``."""
    if not 0.0 < beta <= 1.0:
        raise InvalidParameterError("beta must lie in (0, 1]")
    diff = x - xdag
    dist = image_norm(op.apply(diff))
    return x.l1 - xdag.l1 + profile.phi(dist) - beta * diff.l1


def negative_witness(xdag: SeqVec, n: int, op: Optional[OperatorModel] = None) -> Tuple[SeqVec, float, float]:
    """Shift the first ``n`` entries of ``xdag`` by ``-||xdag||_inf``.

    The shift is ``+||xdag||_inf`` when ``xdag`` has no positive entry.
    Returns ``(x_n, gap, image_distance)`` where
    ``gap = ||x_n - xdag||_1 - ||x_n||_1 + ||xdag||_1`` and the distance is
    measured under ``op`` (bidiagonal by default).
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not np.any(xdag.values):
        raise DegenerateInputError("the witness needs a nonzero xdag")
    op = op or BidiagonalOperator()
    M = xdag.sup
    sign = -1.0 if np.any(xdag.values > 0) else 1.0
    shift = np.zeros(max(n, xdag.dim))
    shift[:n] = sign * M
    xn = SeqVec(xdag.padded(shift.size) + shift)
    gap = (xn - xdag).l1 - xn.l1 + xdag.l1
    distance = image_norm(op.apply(SeqVec(shift)))
    return xn, gap, distance
