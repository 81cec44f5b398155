"""Exact calculus for piecewise polynomials on (0, 1) with dyadic breakpoints.

Breakpoints are integers ``num`` over a common denominator ``2**level``, so
grids from different functions merge without any tolerance. Each piece holds
polynomial coefficients in ascending degree in the *global* variable ``s``.
Values at breakpoints are irrelevant for L2 purposes; :meth:`PiecewisePoly.__call__`
returns the right limit (the left limit at ``s = 1``).
"""
from __future__ import annotations

import json
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import CapacityError, InvalidInputError

__all__ = [
    "PiecewisePoly",
    "DEFAULT_MAX_DEGREE",
    "constant",
    "haar_index",
    "haar_element",
    "haar_synthesis",
    "haar_analysis",
    "antiderivative",
    "co_antiderivative",
    "derivative",
    "multiply",
    "inner_l2",
    "gram_matrix",
]

DEFAULT_MAX_DEGREE = 4
_MAX_LEVEL = 52  # keeps every breakpoint exactly representable as a double


def _trim(coeffs: np.ndarray) -> np.ndarray:
    width = coeffs.shape[1]
    while width > 1 and not np.any(coeffs[:, width - 1]):
        width -= 1
    return coeffs[:, :width]


class PiecewisePoly:
    """Piecewise polynomial on (0, 1).

    Parameters
    ----------
    breakpoints : sequence of (int, int)
        Pairs ``(numerator, log2_denominator)``; strictly increasing, first
        equal to 0 and last equal to 1.
    coeffs : array_like, shape (pieces, degree + 1)
        Ascending-degree coefficients in ``s`` for each interval.
    max_degree : int
        Degree cap; exceeding it raises :class:`CapacityError`.
    """

    __slots__ = ("_num", "_level", "_coeffs", "max_degree")

    def __init__(self, breakpoints, coeffs, max_degree: int = DEFAULT_MAX_DEGREE):
        pairs = [(int(a), int(b)) for a, b in breakpoints]
        if any(d < 0 for _, d in pairs):
            raise InvalidInputError("log2-denominators must be non-negative")
        level = max(d for _, d in pairs) if pairs else 0
        num = np.array([a << (level - d) for a, d in pairs], dtype=np.int64)
        self._setup(num, level, coeffs, max_degree)

    @classmethod
    def _from_grid(cls, num, level, coeffs, max_degree=DEFAULT_MAX_DEGREE) -> "PiecewisePoly":
        obj = cls.__new__(cls)
        obj._setup(np.asarray(num, dtype=np.int64), int(level), coeffs, max_degree)
        return obj

    def _setup(self, num, level, coeffs, max_degree):
        if level > _MAX_LEVEL:
            raise CapacityError(f"dyadic level {level} exceeds {_MAX_LEVEL}")
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if num.ndim != 1 or num.size < 2:
            raise InvalidInputError("need at least two breakpoints")
        if num[0] != 0 or num[-1] != (1 << level):
            raise InvalidInputError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(num) <= 0):
            raise InvalidInputError("breakpoints must be strictly increasing")
        if coeffs.shape[0] != num.size - 1:
            raise InvalidInputError("number of pieces must equal number of breakpoints - 1")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("non-finite coefficient")
        coeffs = _trim(coeffs)
        if coeffs.shape[1] - 1 > max_degree:
            raise CapacityError(f"degree {coeffs.shape[1] - 1} exceeds cap {max_degree}")
        # reduce to the coarsest common denominator
        while level > 0 and not np.any(num & 1):
            num = num >> 1
            level -= 1
        num.setflags(write=False)
        coeffs.setflags(write=False)
        self._num = num
        self._level = level
        self._coeffs = coeffs
        self.max_degree = max_degree

    # -- structure -------------------------------------------------------
    @property
    def level(self) -> int:
        return self._level

    @property
    def numerators(self) -> np.ndarray:
        return self._num

    @property
    def breakpoints(self) -> List[Tuple[int, int]]:
        """Breakpoints as reduced ``(numerator, log2_denominator)`` pairs."""
        out = []
        for a in self._num.tolist():
            d = self._level
            while d > 0 and a % 2 == 0:
                a //= 2
                d -= 1
            out.append((a, d))
        return out

    @property
    def edges(self) -> np.ndarray:
        return self._num / float(1 << self._level)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def pieces(self) -> int:
        return self._coeffs.shape[0]

    @property
    def degree(self) -> int:
        return self._coeffs.shape[1] - 1

    def __repr__(self):
        return f"PiecewisePoly(pieces={self.pieces}, degree={self.degree}, level={self._level})"

    # -- evaluation ------------------------------------------------------
    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.edges, s, side="right") - 1
        idx = np.clip(idx, 0, self.pieces - 1)
        c = self._coeffs[idx]
        out = np.zeros_like(s, dtype=float)
        for p in range(self._coeffs.shape[1] - 1, -1, -1):
            out = out * s + c[..., p]
        return out

    # -- arithmetic ------------------------------------------------------
    def _combine(self, other: "PiecewisePoly", op) -> "PiecewisePoly":
        num, level, a, b = _merge(self, other)
        w = max(a.shape[1], b.shape[1])
        a = np.pad(a, ((0, 0), (0, w - a.shape[1])))
        b = np.pad(b, ((0, 0), (0, w - b.shape[1])))
        return PiecewisePoly._from_grid(num, level, op(a, b), max(self.max_degree, other.max_degree))

    def __add__(self, other):
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        return self._combine(other, np.add)

    def __sub__(self, other):
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, PiecewisePoly):
            return NotImplemented
        return PiecewisePoly._from_grid(self._num, self._level, float(scalar) * self._coeffs, self.max_degree)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def l2(self) -> float:
        return float(np.sqrt(max(inner_l2(self, self), 0.0)))

    def allclose(self, other: "PiecewisePoly", atol: float = 1e-12) -> bool:
        num, level, a, b = _merge(self, other)
        w = max(a.shape[1], b.shape[1])
        a = np.pad(a, ((0, 0), (0, w - a.shape[1])))
        b = np.pad(b, ((0, 0), (0, w - b.shape[1])))
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))

    # -- serialization ---------------------------------------------------
    def to_json(self) -> str:
        """Debug dump: ``[{"interval": ["a/2^d", "b/2^d"], "coeffs": [...]}, ...]``."""
        bp = self.breakpoints
        items = [
            {
                "interval": [f"{bp[i][0]}/2^{bp[i][1]}", f"{bp[i + 1][0]}/2^{bp[i + 1][1]}"],
                "coeffs": [float(c) for c in self._coeffs[i]],
            }
            for i in range(self.pieces)
        ]
        return json.dumps(items)

    @classmethod
    def from_json(cls, text: str, max_degree: int = DEFAULT_MAX_DEGREE) -> "PiecewisePoly":
        items = json.loads(text)
        if not items:
            raise InvalidInputError("empty piece list")

        def parse(tok: str) -> Tuple[int, int]:
            a, _, d = tok.partition("/2^")
            return int(a), int(d)

        bps = [parse(items[0]["interval"][0])] + [parse(it["interval"][1]) for it in items]
        width = max(len(it["coeffs"]) for it in items)
        coeffs = np.zeros((len(items), width))
        for i, it in enumerate(items):
            coeffs[i, : len(it["coeffs"])] = it["coeffs"]
        return cls(bps, coeffs, max_degree=max_degree)


def _merge(g: PiecewisePoly, h: PiecewisePoly):
    """Common refinement of two grids with coefficient rows aligned to it."""
    level = max(g.level, h.level)
    gn = g.numerators << (level - g.level)
    hn = h.numerators << (level - h.level)
    if gn.size == hn.size and np.array_equal(gn, hn):
        return gn, level, g.coeffs, h.coeffs
    num = np.union1d(gn, hn)
    left = num[:-1]
    gi = np.searchsorted(gn, left, side="right") - 1
    hi = np.searchsorted(hn, left, side="right") - 1
    return num, level, g.coeffs[gi], h.coeffs[hi]


def _powdiff(a: np.ndarray, b: np.ndarray, top: int) -> np.ndarray:
    """``(b**(p+1) - a**(p+1)) / (p+1)`` for p = 0..top, without subtracting powers."""
    h = b - a
    out = np.empty((a.size, top + 1))
    # b^(p+1) - a^(p+1) = h * sum_{i=0}^{p} b^i a^(p-i)
    acc = np.ones_like(a)
    bp = np.ones_like(a)
    for p in range(top + 1):
        out[:, p] = h * acc / (p + 1)
        bp = bp * b
        acc = acc * a + bp
    return out


def constant(value: float = 1.0, max_degree: int = DEFAULT_MAX_DEGREE) -> PiecewisePoly:
    return PiecewisePoly._from_grid([0, 1], 0, [[float(value)]], max_degree)


def haar_index(k: int) -> Tuple[int, int]:
    """Decompose ``k = 1 + 2**l + j`` (``k >= 2``, ``0 <= j < 2**l``) into ``(l, j)``."""
    if k < 2:
        raise InvalidInputError("Haar wavelet indices start at 2")
    l = (k - 1).bit_length() - 1
    return l, k - 1 - (1 << l)


def haar_element(k: int, max_degree: int = DEFAULT_MAX_DEGREE) -> PiecewisePoly:
    """The k-th Haar basis function (1-based): constant for k = 1, else ``2**(l/2) psi(2**l s - j)``."""
    if k < 1:
        raise InvalidInputError("Haar indices start at 1")
    if k == 1:
        return constant(1.0, max_degree)
    l, j = haar_index(k)
    amp = 2.0 ** (l / 2)
    num = [0, 2 * j, 2 * j + 1, 2 * j + 2, 1 << (l + 1)]
    vals = [0.0, amp, -amp, 0.0]
    # drop degenerate end intervals
    keep_num, keep_val = [num[0]], []
    for i in range(4):
        if num[i + 1] > keep_num[-1]:
            keep_num.append(num[i + 1])
            keep_val.append(vals[i])
    return PiecewisePoly._from_grid(keep_num, l + 1, np.array(keep_val)[:, None], max_degree)


def _haar_levels(size: int) -> int:
    """Finest wavelet level needed for coefficient indices ``1..size``."""
    return -1 if size <= 1 else (size - 1).bit_length() - 1


def haar_synthesis(coeffs, max_degree: int = DEFAULT_MAX_DEGREE) -> PiecewisePoly:
    """The function ``sum_k coeffs[k-1] u^(k)`` as a piecewise constant on a uniform dyadic grid."""
    x = np.asarray(coeffs, dtype=float).ravel()
    lmax = _haar_levels(x.size)
    if lmax < 0:
        return constant(float(x[0]) if x.size else 0.0, max_degree)
    J = lmax + 1
    vals = np.full(1 << J, x[0])
    for l in range(lmax + 1):
        c = np.zeros(1 << l)
        chunk = x[(1 << l): (1 << (l + 1))]
        c[: chunk.size] = chunk
        half = 1 << (J - l - 1)
        pattern = np.concatenate([np.ones(half), -np.ones(half)])
        vals += 2.0 ** (l / 2) * np.repeat(c, 2 * half) * np.tile(pattern, 1 << l)
    return PiecewisePoly._from_grid(np.arange((1 << J) + 1), J, vals[:, None], max_degree)


def antiderivative(g: PiecewisePoly) -> PiecewisePoly:
    """``s -> integral_0^s g(t) dt``, continuous and zero at ``s = 0``."""
    c = g.coeffs
    w = c.shape[1]
    if w > g.max_degree:
        raise CapacityError(f"antiderivative would reach degree {w} > cap {g.max_degree}")
    out = np.zeros((c.shape[0], w + 1))
    out[:, 1:] = c / np.arange(1, w + 1)
    edges = g.edges
    a, b = edges[:-1], edges[1:]
    piece_int = np.sum(c * _powdiff(a, b, w - 1), axis=1)
    start = np.concatenate([[0.0], np.cumsum(piece_int)[:-1]])
    # value of the raw integral at each left edge
    raw_a = np.zeros_like(a)
    for p in range(w, -1, -1):
        raw_a = raw_a * a + out[:, p]
    out[:, 0] = start - raw_a
    return PiecewisePoly._from_grid(g.numerators, g.level, out, g.max_degree)


def co_antiderivative(g: PiecewisePoly) -> PiecewisePoly:
    """``t -> integral_t^1 g(s) ds``, zero at ``t = 1``."""
    G = antiderivative(g)
    total = float(np.sum(g.coeffs * _powdiff(g.edges[:-1], g.edges[1:], g.degree)))
    out = -G.coeffs.copy()
    out[:, 0] += total
    return PiecewisePoly._from_grid(G.numerators, G.level, out, g.max_degree)


def derivative(g: PiecewisePoly) -> PiecewisePoly:
    """Piecewise derivative (interior of each piece)."""
    c = g.coeffs
    if c.shape[1] == 1:
        return PiecewisePoly._from_grid(g.numerators, g.level, np.zeros((c.shape[0], 1)), g.max_degree)
    out = c[:, 1:] * np.arange(1, c.shape[1])
    return PiecewisePoly._from_grid(g.numerators, g.level, out, g.max_degree)


def _polymul_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], a.shape[1] + b.shape[1] - 1))
    for p in range(a.shape[1]):
        out[:, p: p + b.shape[1]] += a[:, p: p + 1] * b
    return out


def multiply(g: PiecewisePoly, h: PiecewisePoly) -> PiecewisePoly:
    """Pointwise product on the merged grid."""
    num, level, a, b = _merge(g, h)
    cap = max(g.max_degree, h.max_degree)
    if a.shape[1] + b.shape[1] - 2 > cap:
        raise CapacityError(f"product degree exceeds cap {cap}")
    return PiecewisePoly._from_grid(num, level, _polymul_rows(a, b), cap)


def inner_l2(g: PiecewisePoly, h: PiecewisePoly) -> float:
    """Exact ``integral_0^1 g h`` via the merged breakpoint grid."""
    num, level, a, b = _merge(g, h)
    if a.shape[1] + b.shape[1] - 2 > max(g.max_degree, h.max_degree):
        raise CapacityError("product degree exceeds cap")
    prod = _polymul_rows(a, b)
    edges = num / float(1 << level)
    return float(np.sum(prod * _powdiff(edges[:-1], edges[1:], prod.shape[1] - 1)))


def haar_analysis(g: PiecewisePoly, count: int) -> np.ndarray:
    """Coefficients ``<u^(k), g>`` for ``k = 1..count``.

    Every Haar function is piecewise constant, so each coefficient is a
    signed combination of values of the exact antiderivative of ``g`` at
    dyadic points.
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    G = antiderivative(g)
    lmax = _haar_levels(count)
    J = max(lmax + 1, 0)
    vals = G(np.arange((1 << J) + 1) / float(1 << J))
    vals[0] = 0.0
    out = np.zeros(count)
    out[0] = vals[-1]
    for l in range(lmax + 1):
        stride = 1 << (J - l - 1)
        left = vals[0:-1:2 * stride]
        mid = vals[stride::2 * stride]
        right = vals[2 * stride::2 * stride]
        coef = 2.0 ** (l / 2) * (2.0 * mid - left - right)
        lo = 1 << l
        hi = min(1 << (l + 1), count)
        out[lo:hi] = coef[: hi - lo]
    return out


def refine(g: PiecewisePoly, level: int) -> np.ndarray:
    """Coefficients of ``g`` on the uniform grid with ``2**level`` cells."""
    if level < g.level:
        raise InvalidInputError("refinement level is coarser than the function's grid")
    left = np.arange(1 << level)
    gn = g.numerators << (level - g.level)
    idx = np.searchsorted(gn, left, side="right") - 1
    return g.coeffs[idx]


def gram_matrix(funcs: Sequence[PiecewisePoly]) -> np.ndarray:
    """Exact Gram matrix ``[<f_i, f_j>]`` of a family of piecewise polynomials."""
    if not funcs:
        return np.zeros((0, 0))
    level = max(f.level for f in funcs)
    cap = max(f.max_degree for f in funcs)
    width = max(f.coeffs.shape[1] for f in funcs)
    if 2 * (width - 1) > cap:
        raise CapacityError("product degree exceeds cap")
    cells = 1 << level
    C = np.zeros((len(funcs), cells, width))
    for i, f in enumerate(funcs):
        r = refine(f, level)
        C[i, :, : r.shape[1]] = r
    edges = np.arange(cells + 1) / float(cells)
    mom = _powdiff(edges[:-1], edges[1:], 2 * (width - 1))
    pq = np.add.outer(np.arange(width), np.arange(width))
    M = mom[:, pq]  # (cells, width, width)
    T = np.einsum("biq,ipq->bip", C, M)
    flat = C.reshape(len(funcs), -1)
    G = flat @ T.reshape(len(funcs), -1).T
    return 0.5 * (G + G.T)
