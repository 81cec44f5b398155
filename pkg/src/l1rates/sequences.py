"""Finitely supported real sequences.

A :class:`SeqVec` stores entries ``1..N`` densely; every entry beyond ``N`` is
an implicit zero. Binary operations on vectors of different length
zero-extend the shorter one.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "SeqVec",
    "norms",
    "head_tail_split",
    "duality_pair",
    "unit",
    "read_vector",
    "write_csv",
]


@dataclass(frozen=True, eq=False)
class SeqVec:
    """Truncation of an infinite real sequence.

    Parameters
    ----------
    values : array_like
        Entries ``x_1, ..., x_N``. Copied and frozen on construction.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size == 0:
            arr = np.zeros(1)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("sequence contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, dim: int) -> "SeqVec":
        return cls(np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.values.size

    def __len__(self):
        return self.dim

    def __getitem__(self, k: int) -> float:
        """1-based component access; components beyond ``dim`` are zero."""
        if k < 1:
            raise IndexError("sequence indices start at 1")
        return float(self.values[k - 1]) if k <= self.dim else 0.0

    def padded(self, dim: int) -> np.ndarray:
        """Entries ``1..dim`` as a fresh array (zero-extended or cut)."""
        out = np.zeros(dim)
        m = min(dim, self.dim)
        out[:m] = self.values[:m]
        return out

    def _binary(self, other, op):
        if not isinstance(other, SeqVec):
            return NotImplemented
        d = max(self.dim, other.dim)
        return SeqVec(op(self.padded(d), other.padded(d)))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, SeqVec):
            return NotImplemented
        return SeqVec(float(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return SeqVec(-self.values)

    def __repr__(self):
        return f"SeqVec(dim={self.dim}, values={np.array2string(self.values, threshold=8)})"

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)))

    @property
    def l2(self) -> float:
        m = self.sup
        if m == 0.0 or not 1e-150 < m < 1e150:
            # rescale so squaring neither underflows nor overflows
            return m * float(np.linalg.norm(self.values / m)) if m else 0.0
        return float(np.linalg.norm(self.values))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def allclose(self, other: "SeqVec", atol: float = 1e-12) -> bool:
        d = max(self.dim, other.dim)
        return bool(np.allclose(self.padded(d), other.padded(d), rtol=0.0, atol=atol))


def unit(k: int, dim: int | None = None) -> SeqVec:
    """The unit sequence e^(k) (1-based), stored with ``dim >= k`` entries."""
    if k < 1:
        raise InvalidInputError("unit index must be >= 1")
    v = np.zeros(max(k, dim or k))
    v[k - 1] = 1.0
    return SeqVec(v)


def norms(x: SeqVec) -> Tuple[float, float, float]:
    """Return ``(l1, l2, sup)`` norms of ``x``."""
    return x.l1, x.l2, x.sup


def head_tail_split(x: SeqVec, n: int) -> Tuple[SeqVec, SeqVec]:
    """Split ``x`` into ``P_n x`` (entries ``k <= n``) and ``Q_n x = x - P_n x``."""
    if n < 1:
        raise InvalidInputError("split index must be >= 1")
    head = x.values.copy()
    tail = x.values.copy()
    head[n:] = 0.0
    tail[:n] = 0.0
    return SeqVec(head), SeqVec(tail)


def duality_pair(xi: SeqVec, x: SeqVec) -> float:
    """The l-infinity/l1 pairing ``sum_k xi_k x_k`` over the common support."""
    m = min(xi.dim, x.dim)
    return float(np.dot(xi.values[:m], x.values[:m]))


def read_vector(source) -> SeqVec:
    """Read a sequence from a path or file object.

    Accepts either whitespace-separated plain values or CSV rows
    ``index,value`` with 1-based indices (an optional header is skipped).
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InvalidInputError("empty vector file")
    if "," in lines[0] or (len(lines) > 1 and "," in lines[1]):
        pairs = []
        for ln in lines:
            parts = [p.strip() for p in ln.split(",")]
            if len(parts) != 2:
                raise InvalidInputError(f"bad CSV row: {ln!r}")
            try:
                pairs.append((int(parts[0]), float(parts[1])))
            except ValueError:
                if pairs:
                    raise InvalidInputError(f"bad CSV row: {ln!r}") from None
                continue  # header
        if not pairs:
            raise InvalidInputError("no data rows in CSV vector")
        idx = np.array([p[0] for p in pairs])
        if idx.min() < 1:
            raise InvalidInputError("CSV indices are 1-based")
        vals = np.zeros(idx.max())
        vals[idx - 1] = [p[1] for p in pairs]
        return SeqVec(vals)
    try:
        vals = np.array([float(tok) for ln in lines for tok in ln.split()])
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from None
    return SeqVec(vals)


def write_csv(x: SeqVec, dest=None, header: bool = True) -> str:
    """Serialize as ``index,value`` rows; returns the text and writes it if ``dest`` is given."""
    buf = io.StringIO()
    if header:
        buf.write("index,value\n")
    for k, v in enumerate(x.values, start=1):
        buf.write(f"{k},{float(v)!r}\n")
    text = buf.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)
    return text

