"""Source-set candidates: tuples of functionals whose adjoint images form an
identity block with small off-block column sums.

A candidate ``(f^(n,1), ..., f^(n,n))`` is admissible for ``c`` when

* ``[A* f^(n,k)]_l = delta_{kl}`` for ``l <= n``;
* ``sum_k |[A* f^(n,k)]_l| <= c`` for every ``l > n``.

Besides verification this module carries the explicit constructions for the
bidiagonal operator (any ``c`` in (0, 1)) and for the Haar/integration
operator (``c = 1 / (4 - sqrt(8))``).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import piecewise as pw
from .errors import InvalidInputError, InvalidParameterError
from .operators import (
    BidiagonalOperator,
    DiagonalOperator,
    HaarIntegrationOperator,
    ImageVec,
    OperatorModel,
    image_norm,
)
from .sequences import SeqVec, unit

__all__ = [
    "HAAR_C",
    "SourceCandidate",
    "VerificationReport",
    "verify_candidate",
    "construct_bidiagonal_candidate",
    "construct_haar_candidate",
    "construct_diagonal_candidate",
    "haar_candidate_for",
    "truncate_candidate",
    "approximate_inverse_matrix",
    "kernel_relation_residual",
    "range_test_lsq",
    "haar_coefficient_matrix",
    "haar_norm_sum_closed_form",
]

HAAR_C = 1.0 / (4.0 - math.sqrt(8.0))
ATOL = 1e-10


class SourceCandidate:
    """An ``n``-tuple of image-space functionals together with its constant ``c``.

    Rows ``A* f^(n,k)`` are computed lazily per depth and cached; a candidate
    may also be built directly from precomputed rows (``functionals=None``).
    """

    def __init__(
        self,
        op: Optional[OperatorModel],
        c: float,
        functionals: Optional[Sequence[ImageVec]] = None,
        rows: Optional[np.ndarray] = None,
        label: str = "user",
    ):
        if not 0.0 <= c < 1.0:
            raise InvalidParameterError("c must lie in [0, 1)")
        if functionals is None and rows is None:
            raise InvalidInputError("need functionals or explicit rows")
        self.op = op
        self.c = float(c)
        self.functionals = None if functionals is None else tuple(functionals)
        self.label = label
        self._explicit = None if rows is None else np.array(rows, dtype=float, ndmin=2)
        self.n = len(self.functionals) if self.functionals is not None else self._explicit.shape[0]
        self._cache = {}
        self._lock = threading.Lock()
        self._norms = None

    def __repr__(self):
        return f"SourceCandidate(label={self.label!r}, n={self.n}, c={self.c:.6g})"

    def rows(self, depth: int) -> np.ndarray:
        """``(n, depth)`` array whose row ``k`` holds ``[A* f^(n,k)]_1..depth``."""
        if self._explicit is not None:
            out = np.zeros((self.n, depth))
            m = min(depth, self._explicit.shape[1])
            out[:, :m] = self._explicit[:, :m]
            return out
        with self._lock:
            R = self._cache.get(depth)
            if R is None:
                R = np.vstack([self.op.adjoint_apply(f, depth).values for f in self.functionals])
                R.setflags(write=False)
                self._cache[depth] = R
        return R

    def functional_norms(self) -> np.ndarray:
        """``||f^(n,k)||_{Y*}`` for each ``k``."""
        if self.functionals is None:
            raise InvalidInputError("candidate built from rows has no functionals")
        if self._norms is None:
            self._norms = np.array([image_norm(f) for f in self.functionals])
        return self._norms

    def norm_sum(self) -> float:
        return float(np.sum(self.functional_norms()))


@dataclass
class VerificationReport:
    n: int
    c: float
    depth: int
    cond_i_max_error: float
    max_col_sum: float
    argmax_col: Optional[int]
    passed: bool
    col_sums: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "c": self.c,
            "cond_i_max_error": self.cond_i_max_error,
            "max_col_sum": self.max_col_sum,
            "argmax_col": self.argmax_col,
            "depth": self.depth,
            "pass": self.passed,
        }


def verify_candidate(op: OperatorModel, cand: SourceCandidate, depth: int) -> VerificationReport:
    """Check both admissibility conditions on components ``1..depth``."""
    if depth <= cand.n:
        raise InvalidParameterError(f"depth {depth} must exceed n = {cand.n}")
    if cand.op is None and cand._explicit is None:
        cand.op = op
    R = cand.rows(depth)
    n = cand.n
    err = float(np.max(np.abs(R[:, :n] - np.eye(n))))
    col = np.sum(np.abs(R[:, n:]), axis=0)
    j = int(np.argmax(col))
    maxcol = float(col[j])
    passed = err <= ATOL and maxcol <= cand.c + ATOL
    return VerificationReport(n, cand.c, depth, err, maxcol, n + j + 1, passed, col)


def _bidiagonal_ab(c: float):
    a = math.floor(1.0 / c)
    b = 1.0 - c * a
    if b < 0.0:  # rounding when 1/c is (nearly) an integer
        b = 0.0
    return a, b


def construct_bidiagonal_candidate(n: int, c: float) -> SourceCandidate:
    """Explicit candidate for ``[Ax]_k = (x_k - x_{k+1}) / k``.

    With ``a = floor(1/c)`` and ``b = 1 - c a`` the target row ``e^(n,k)``
    carries 1 at ``k``, ``-c`` at ``l n + k`` for ``l = 1..a`` and ``-b`` at
    ``(a+1) n + k``; its preimage is ``f_l = l * sum_{m<=l} e_m``, which
    vanishes beyond ``(a+2) n``.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not 0.0 < c < 1.0:
        raise InvalidParameterError("c must lie in (0, 1)")
    a, b = _bidiagonal_ab(c)
    size = (a + 2) * n
    op = BidiagonalOperator()
    funcs = []
    for k in range(1, n + 1):
        e = np.zeros(size)
        e[k - 1] = 1.0
        e[[l * n + k - 1 for l in range(1, a + 1)]] = -c
        e[(a + 1) * n + k - 1] = -b
        partial = np.cumsum(e)
        funcs.append(SeqVec(np.arange(1, size + 1) * partial))
    cand = SourceCandidate(op, c, funcs, label="bidiagonal")
    cand.a, cand.b = a, b
    cand.support_depth = size
    return cand


def construct_diagonal_candidate(op: DiagonalOperator, n: int) -> SourceCandidate:
    """Exact preimages ``e^(k) / sigma_k``; admissible with ``c = 0``."""
    funcs = [unit(k, n) * (1.0 / op.weights[k - 1]) for k in range(1, n + 1)]
    return SourceCandidate(op, 0.0, funcs, label="diagonal")


def haar_coefficient_matrix(m: int) -> np.ndarray:
    """The ``2**m x 2**m`` table ``c^(m)``: a row of ones, then for
    ``q = 2**r + s`` the pattern ``+2**(r/2)`` on ``p`` in
    ``[2**(m-r) s, 2**(m-r) (s + 1/2))`` and ``-2**(r/2)`` on the next half block."""
    n = 1 << m
    C = np.zeros((n, n))
    C[0] = 1.0
    for r in range(m):
        block = 1 << (m - r)
        for s in range(1 << r):
            q = (1 << r) + s
            lo = block * s
            C[q, lo: lo + block // 2] = 2.0 ** (r / 2)
            C[q, lo + block // 2: lo + block] = -(2.0 ** (r / 2))
    return C


def construct_haar_candidate(m: int) -> SourceCandidate:
    """Explicit candidate of size ``n = 2**m`` for the Haar/integration operator.

    ``m = 0`` gives the single functional ``f = 2``; otherwise
    ``f^(2^m, 1+q) = -2**(m/2 + 2) sum_p c^(m)_{1+q,1+p} psi_{m,p}``.
    """
    if m < 0:
        raise InvalidParameterError("m must be >= 0")
    op = HaarIntegrationOperator()
    if m == 0:
        return SourceCandidate(op, HAAR_C, [pw.constant(2.0)], label="haar")
    n = 1 << m
    C = haar_coefficient_matrix(m)
    scale = -(2.0 ** (m / 2 + 2))
    funcs = []
    for q in range(n):
        coeffs = np.zeros(2 * n)
        coeffs[n:] = scale * C[q]  # psi_{m,p} is Haar index 1 + 2**m + p
        funcs.append(pw.haar_synthesis(coeffs))
    cand = SourceCandidate(op, HAAR_C, funcs, label="haar")
    # orthonormality of the psi_{m,p}: ||f|| = |scale| * ||row of c^(m)||
    cand._norms = abs(scale) * np.linalg.norm(C, axis=1)
    return cand


def haar_norm_sum_closed_form(m: int) -> float:
    """The published closed form ``2 + 2**(2m+2) - 2**(m+2)`` for the norm sum."""
    return 2.0 + 2.0 ** (2 * m + 2) - 2.0 ** (m + 2)


def truncate_candidate(cand: SourceCandidate, n: int) -> SourceCandidate:
    """Keep the first ``n`` functionals."""
    if not 1 <= n <= cand.n:
        raise InvalidParameterError(f"cannot truncate a size-{cand.n} candidate to {n}")
    if n == cand.n:
        return cand
    if cand.functionals is None:
        return SourceCandidate(cand.op, cand.c, rows=cand._explicit[:n], label=cand.label)
    out = SourceCandidate(cand.op, cand.c, cand.functionals[:n], label=cand.label)
    if cand._norms is not None:
        out._norms = cand._norms[:n]
    return out


def haar_candidate_for(n: int) -> SourceCandidate:
    """Haar candidate of size ``n``: the ``2**m >= n`` construction, truncated."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    m = (n - 1).bit_length()
    return truncate_candidate(construct_haar_candidate(m), n)


def approximate_inverse_matrix(op: OperatorModel, cand: SourceCandidate, N: int) -> np.ndarray:
    """``N x N`` truncation of ``Q = F A``: rows ``k <= n`` are ``A* f^(n,k)``, the rest zero."""
    if N < cand.n:
        raise InvalidParameterError("N must be at least n")
    if cand.op is None and cand._explicit is None:
        cand.op = op
    Q = np.zeros((N, N))
    Q[: cand.n] = cand.rows(N)
    return Q


def kernel_relation_residual(op: OperatorModel, lam: SeqVec) -> float:
    """``|| sum_k lam_k A e^(k) ||_Y``."""
    return image_norm(op.apply(lam))


@dataclass
class RangeTestResult:
    residual: float
    functional_norm: float
    regularized: bool
    eta: np.ndarray = field(repr=False, default=None)


def range_test_lsq(op: OperatorModel, k: int, N: int) -> RangeTestResult:
    """Least-squares preimage of ``e^(k)`` under the ``N x N`` truncated adjoint.

    Minimizes ``|| M^T eta - e^(k) ||`` with ``M = truncated_matrix(N, N)``.
    Nearly singular systems get a ridge of ``1e-12`` and are flagged.
    """
    if N < k:
        raise InvalidParameterError("N must be >= k")
    M = op.truncated_matrix(N, N)
    At = M.T
    rhs = np.zeros(N)
    rhs[k - 1] = 1.0
    regularized = False
    if np.linalg.cond(At) < 1e12:
        eta = np.linalg.solve(At, rhs)
    else:
        regularized = True
        eta = np.linalg.solve(At.T @ At + 1e-12 * np.eye(N), At.T @ rhs)
    residual = float(np.linalg.norm(At @ eta - rhs))
    return RangeTestResult(residual, float(np.linalg.norm(eta)), regularized, eta)
