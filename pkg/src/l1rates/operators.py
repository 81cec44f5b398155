"""Matrix-free forward operators on coefficient sequences.

Three kinds are provided:

* :class:`DiagonalOperator` -- ``[Ax]_k = sigma_k x_k`` into l2;
* :class:`BidiagonalOperator` -- ``[Ax]_k = (x_k - x_{k+1}) / k`` into l2;
* :class:`HaarIntegrationOperator` -- Haar synthesis followed by integration
  from 0, into L2(0, 1).

:class:`MatrixOperator` wraps a dense matrix for user-supplied problems.
Inputs are zero-extended beyond their stored length, so every result is the
exact image of the finitely supported sequence under the infinite operator.
"""
from __future__ import annotations

import threading
from typing import Union

import numpy as np

from . import piecewise as pw
from .errors import InvalidInputError
from .piecewise import PiecewisePoly
from .sequences import SeqVec, duality_pair, unit

__all__ = [
    "ImageVec",
    "OperatorModel",
    "DiagonalOperator",
    "BidiagonalOperator",
    "HaarIntegrationOperator",
    "MatrixOperator",
    "image_inner",
    "image_norm",
    "from_spec",
]

ImageVec = Union[SeqVec, PiecewisePoly]

SEQUENCE_L2 = "sequence_l2"
FUNCTION_L2 = "function_L2"


def image_inner(y1: ImageVec, y2: ImageVec) -> float:
    """Inner product in the image space Y (l2 or L2(0,1))."""
    if isinstance(y1, SeqVec) and isinstance(y2, SeqVec):
        return duality_pair(y1, y2)
    if isinstance(y1, PiecewisePoly) and isinstance(y2, PiecewisePoly):
        return pw.inner_l2(y1, y2)
    raise TypeError("image vectors live in different spaces")


def image_norm(y: ImageVec) -> float:
    return y.l2


class OperatorModel:
    """Base class: subclasses implement ``apply`` and ``adjoint_apply``."""

    kind: str = ""
    image_space: str = SEQUENCE_L2

    def apply(self, x: SeqVec) -> ImageVec:
        raise NotImplementedError

    def adjoint_apply(self, y: ImageVec, L: int) -> SeqVec:
        """First ``L`` components of ``A* y``."""
        raise NotImplementedError

    def _check_image(self, y):
        expected = SeqVec if self.image_space == SEQUENCE_L2 else PiecewisePoly
        if not isinstance(y, expected):
            raise TypeError(f"{self.kind} operator expects a {expected.__name__} image vector")

    def column(self, k: int) -> ImageVec:
        """``A e^(k)``."""
        return self.apply(unit(k))

    def column_norm(self, k: int) -> float:
        return image_norm(self.column(k))

    def hs_norm_sq_partial(self, N: int) -> float:
        """``sum_{k<=N} ||A e^(k)||^2`` (squared Hilbert-Schmidt partial sum)."""
        # summing smallest terms first keeps the partial sums monotone in N
        terms = np.array([self.column_norm(k) ** 2 for k in range(1, N + 1)])
        return float(np.sum(terms[::-1]))

    def truncated_matrix(self, rows: int, cols: int) -> np.ndarray:
        """Dense block with entry ``(i, k) = [A e^(k)]_i``."""
        out = np.zeros((rows, cols))
        for k in range(1, cols + 1):
            out[:, k - 1] = self.column(k).padded(rows)
        return out

    def image_dim(self, N: int) -> int:
        """Number of image components touched by inputs supported in ``1..N``."""
        return N

    def normal_equations(self, y: ImageVec, N: int):
        """Return ``(G, b, yy)`` with ``G = A_N* A_N``, ``b = A_N* y``, ``yy = ||y||^2``.

        ``||A x - y||^2 = x.G.x - 2 b.x + yy`` for ``x`` supported in ``1..N``.
        """
        M = self.truncated_matrix(self.image_dim(N), N)
        return M.T @ M, self.adjoint_apply(y, N).values, image_norm(y) ** 2

    def random_direction(self, rng: np.random.Generator, N: int) -> ImageVec:
        """Unit-norm pseudo-random image vector (standard normal entries)."""
        w = rng.standard_normal(self.image_dim(N))
        return SeqVec(w / np.linalg.norm(w))

    def zero_image(self, N: int) -> ImageVec:
        return SeqVec.zeros(self.image_dim(N))


class DiagonalOperator(OperatorModel):
    kind = "diagonal"

    def __init__(self, weights):
        w = np.array(weights, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w == 0):
            raise InvalidInputError("diagonal weights must be finite and nonzero")
        w.setflags(write=False)
        self.weights = w

    def __repr__(self):
        return f"DiagonalOperator(dim={self.weights.size})"

    def _w(self, n):
        if n > self.weights.size:
            raise InvalidInputError(
                f"diagonal operator has {self.weights.size} weights, index {n} requested"
            )
        return self.weights[:n]

    def apply(self, x):
        return SeqVec(self._w(x.dim) * x.values)

    def adjoint_apply(self, y, L):
        self._check_image(y)
        return SeqVec(self._w(L) * y.padded(L))

    def column_norm(self, k):
        return abs(float(self._w(k)[-1]))

    def truncated_matrix(self, rows, cols):
        out = np.zeros((rows, cols))
        m = min(rows, cols)
        out[np.arange(m), np.arange(m)] = self._w(m)
        return out


class BidiagonalOperator(OperatorModel):
    """``[Ax]_k = (x_k - x_{k+1}) / k`` with adjoint
    ``[A* eta]_1 = eta_1``, ``[A* eta]_k = eta_k / k - eta_{k-1} / (k-1)``."""

    kind = "bidiagonal"

    def __repr__(self):
        return "BidiagonalOperator()"

    def apply(self, x):
        v = x.values
        nxt = np.append(v[1:], 0.0)
        return SeqVec((v - nxt) / np.arange(1, v.size + 1))

    def adjoint_apply(self, y, L):
        self._check_image(y)
        eta = y.padded(L)
        scaled = eta / np.arange(1, L + 1)
        out = scaled.copy()
        out[1:] -= scaled[:-1]
        return SeqVec(out)

    def column_norm(self, k):
        if k == 1:
            return 1.0
        return float(np.hypot(1.0 / k, 1.0 / (k - 1)))

    def hs_norm_sq_partial(self, N):
        k = np.arange(N, 0, -1, dtype=float)
        inv = 1.0 / k**2
        # sum_{k<=N} 1/k^2 + sum_{k<=N-1} 1/k^2, small terms first
        return float(np.sum(inv) + np.sum(inv[1:]))

    def truncated_matrix(self, rows, cols):
        out = np.zeros((rows, cols))
        for k in range(1, cols + 1):
            if k <= rows:
                out[k - 1, k - 1] = 1.0 / k
            if 2 <= k <= rows + 1:
                out[k - 2, k - 1] = -1.0 / (k - 1)
        return out

    def normal_equations(self, y, N):
        M = self.truncated_matrix(N, N)
        return M.T @ M, self.adjoint_apply(y, N).values, image_norm(y) ** 2


class HaarIntegrationOperator(OperatorModel):
    """``A = A~ L``: Haar synthesis ``L`` then ``(A~ f)(s) = int_0^s f``.

    The adjoint is ``A* y = (<u^(k), int_t^1 y>)_k``, computed with exact
    piecewise calculus.
    """

    kind = "haar_integration"
    image_space = FUNCTION_L2

    def __init__(self):
        self._lock = threading.Lock()
        self._gram_cache = {}

    def __repr__(self):
        return "HaarIntegrationOperator()"

    def apply(self, x):
        return pw.antiderivative(pw.haar_synthesis(x.values))

    def adjoint_apply(self, y, L):
        self._check_image(y)
        return SeqVec(pw.haar_analysis(pw.co_antiderivative(y), L))

    def truncated_matrix(self, rows, cols):
        """Entry ``(i, k) = <u^(i), A e^(k)>`` (Haar expansion of the image)."""
        out = np.zeros((rows, cols))
        for k in range(1, cols + 1):
            out[:, k - 1] = pw.haar_analysis(self.column(k), rows)
        return out

    def column_gram(self, N: int) -> np.ndarray:
        """Exact ``[<A e^(i), A e^(k)>]`` for ``i, k <= N``; cached per ``N``."""
        with self._lock:
            G = self._gram_cache.get(N)
            if G is None:
                G = pw.gram_matrix([self.column(k) for k in range(1, N + 1)])
                G.setflags(write=False)
                self._gram_cache[N] = G
        return G

    def normal_equations(self, y, N):
        return self.column_gram(N), self.adjoint_apply(y, N).values, image_norm(y) ** 2

    def random_direction(self, rng, N=64):
        """Random combination of the first 64 Haar functions, unit L2 norm."""
        c = rng.standard_normal(64)
        return pw.haar_synthesis(c / np.linalg.norm(c))

    def zero_image(self, N):
        return pw.constant(0.0)

    def image_dim(self, N):
        return N


class MatrixOperator(OperatorModel):
    """Dense matrix acting on the first ``cols`` components; zero beyond."""

    kind = "matrix"

    def __init__(self, matrix):
        M = np.array(matrix, dtype=float)
        if M.ndim != 2 or not np.all(np.isfinite(M)):
            raise InvalidInputError("matrix must be a finite 2-d array")
        M.setflags(write=False)
        self.matrix = M

    def __repr__(self):
        return f"MatrixOperator(shape={self.matrix.shape})"

    def _cols(self, n):
        if n > self.matrix.shape[1]:
            raise InvalidInputError(f"matrix has {self.matrix.shape[1]} columns, {n} requested")

    def apply(self, x):
        self._cols(x.dim)
        return SeqVec(self.matrix[:, : x.dim] @ x.values)

    def adjoint_apply(self, y, L):
        self._check_image(y)
        self._cols(L)
        return SeqVec(self.matrix[:, :L].T @ y.padded(self.matrix.shape[0]))

    def truncated_matrix(self, rows, cols):
        self._cols(cols)
        out = np.zeros((rows, cols))
        r = min(rows, self.matrix.shape[0])
        out[:r] = self.matrix[:r, :cols]
        return out

    def image_dim(self, N):
        return self.matrix.shape[0]


def from_spec(descriptor: str) -> OperatorModel:
    """Build an operator from a CLI string.

    ``bidiagonal``, ``haar-integration``, ``diagonal:<file>`` (whitespace or
    ``index,value`` weights) or ``matrix:<file>`` (whitespace-separated rows).
    """
    name, _, arg = descriptor.partition(":")
    name = name.strip().lower().replace("_", "-")
    if name == "bidiagonal":
        return BidiagonalOperator()
    if name == "haar-integration":
        return HaarIntegrationOperator()
    if name == "diagonal":
        if not arg:
            raise InvalidInputError("diagonal operator needs a weights file: diagonal:<file>")
        from .sequences import read_vector

        return DiagonalOperator(read_vector(arg).values)
    if name == "matrix":
        if not arg:
            raise InvalidInputError("matrix operator needs a file: matrix:<file>")
        try:
            M = np.loadtxt(arg, ndmin=2)
        except ValueError as exc:
            raise InvalidInputError(str(exc)) from None
        return MatrixOperator(M)
    raise InvalidInputError(f"unknown operator {descriptor!r}")
