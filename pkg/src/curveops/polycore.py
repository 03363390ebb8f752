"""Dense polynomials, banded matrices with finite-section bookkeeping, block
matrices and a banded Cholesky factorization.

Band storage follows the LAPACK general-band layout: ``bands[upper + i - j, j]``
holds ``A[i, j]``, so every row of ``bands`` is one diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, TruncationOverflow

PIVOT_RTOL = 1e-13


@dataclass(frozen=True)
class Poly:
    """Univariate polynomial ``c_0 + c_1 x + ... + c_d x^d`` (monomial basis)."""

    coeffs: tuple

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        if len(self.coeffs) == 1 and self.coeffs[0] == 0.0:
            return -1
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def __call__(self, x):
        return poly_eval(self, x)

    def is_even(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1::2])

    @classmethod
    def from_roots(cls, roots, scale=1.0):
        c = np.array([float(scale)])
        for r in roots:
            c = np.convolve(c, [-float(r), 1.0])
        return cls(tuple(c))

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(tuple(np.convolve(self.coeffs, other.coeffs)))
        return Poly(tuple(np.asarray(self.coeffs) * float(other)))

    __rmul__ = __mul__


def poly_eval(p: Poly, x):
    """Horner evaluation; works elementwise on arrays."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, p.coeffs[-1])
    for c in reversed(p.coeffs[:-1]):
        out = out * x + c
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SparseColumn:
    """A column vector whose nonzeros live in rows ``start .. start+len(values)-1``."""

    start: int
    values: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        out[self.start:min(self.stop, n)] = self.values[:max(0, n - self.start)]
        return out

    def dot(self, other: "SparseColumn") -> float:
        lo = max(self.start, other.start)
        hi = min(self.stop, other.stop)
        if hi <= lo:
            return 0.0
        return float(self.values[lo - self.start:hi - self.start]
                     @ other.values[lo - other.start:hi - other.start])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def scaled(self, s: float) -> "SparseColumn":
        return SparseColumn(self.start, self.values * s)

    def axpy(self, a: float, other: "SparseColumn") -> "SparseColumn":
        """Return ``self + a * other`` with the union range."""
        lo = min(self.start, other.start)
        hi = max(self.stop, other.stop)
        out = np.zeros(hi - lo)
        out[self.start - lo:self.stop - lo] += self.values
        out[other.start - lo:other.stop - lo] += a * other.values
        return SparseColumn(lo, out)

    def restricted(self, lo: int, hi: int) -> tuple["SparseColumn", float]:
        """Restrict to rows ``lo..hi`` inclusive; also return the largest dropped magnitude."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.start), min(hi + 1, self.stop)
        if b > a:
            out[a - lo:b - lo] = self.values[a - self.start:b - self.start]
        mask = np.ones(len(self.values), dtype=bool)
        if b > a:
            mask[a - self.start:b - self.start] = False
        dropped = float(np.max(np.abs(self.values[mask]))) if mask.any() else 0.0
        return SparseColumn(lo, out), dropped


@dataclass(frozen=True, eq=False)
class BandedMatrix:
    """Finite section of a (possibly infinite) banded operator.

    ``exact_rows`` counts the leading rows whose every entry agrees with the
    infinite operator; consumers must not read beyond it.
    """

    nrows: int
    ncols: int
    lower: int
    upper: int
    bands: np.ndarray
    exact_rows: int
    symmetric: bool = False

    def __post_init__(self):
        if self.bands.shape != (self.lower + self.upper + 1, self.ncols):
            raise ValueError(f"band array has shape {self.bands.shape}")

    @classmethod
    def zeros(cls, nrows, ncols, lower, upper, exact_rows=None, symmetric=False):
        return cls(nrows, ncols, lower, upper, np.zeros((lower + upper + 1, ncols)),
                   nrows if exact_rows is None else exact_rows, symmetric)

    @classmethod
    def from_dense(cls, A, lower, upper, exact_rows=None, symmetric=False, check=True):
        A = np.asarray(A, dtype=float)
        n, m = A.shape
        bands = np.zeros((lower + upper + 1, m))
        for o in range(-upper, lower + 1):
            d = np.diagonal(A, -o)
            j0 = max(0, -o)
            bands[upper + o, j0:j0 + len(d)] = d
        B = cls(n, m, lower, upper, bands, n if exact_rows is None else exact_rows, symmetric)
        if check and not np.array_equal(B.to_dense(), A):
            raise ValueError("matrix has entries outside the declared bands")
        return B

    @classmethod
    def identity(cls, n):
        return cls(n, n, 0, 0, np.ones((1, n)), n, True)

    def diagonal(self, offset: int = 0) -> np.ndarray:
        """Entries ``A[j + offset, j]``... i.e. ``offset = i - j``."""
        if offset > self.lower or -offset > self.upper:
            return np.zeros(0)
        j0 = max(0, -offset)
        j1 = max(j0, min(self.ncols, self.nrows - offset))
        return self.bands[self.upper + offset, j0:j1].copy()

    def __getitem__(self, ij):
        i, j = ij
        o = i - j
        if o > self.lower or -o > self.upper or not (0 <= i < self.nrows and 0 <= j < self.ncols):
            return 0.0
        return float(self.bands[self.upper + o, j])

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.nrows, self.ncols))
        for o in range(-self.upper, self.lower + 1):
            j0 = max(0, -o)
            j1 = min(self.ncols, self.nrows - o)
            if j1 > j0:
                idx = np.arange(j0, j1)
                A[idx + o, idx] = self.bands[self.upper + o, j0:j1]
        return A

    def transpose(self) -> "BandedMatrix":
        bands = np.zeros((self.lower + self.upper + 1, self.nrows))
        for o in range(-self.upper, self.lower + 1):
            j0 = max(0, -o)
            j1 = min(self.ncols, self.nrows - o)
            if j1 > j0:
                # A[j+o, j] becomes At[j, j+o], which lives at offset -o in column j+o
                bands[self.lower - o, j0 + o:j1 + o] = self.bands[self.upper + o, j0:j1]
        return BandedMatrix(self.ncols, self.nrows, self.upper, self.lower, bands,
                            self.exact_rows, self.symmetric)

    def section(self, n: int) -> "BandedMatrix":
        """Leading ``n x n`` section; exactness is inherited, never extended."""
        n = min(n, self.nrows, self.ncols)
        bands = self.bands[:, :n].copy()
        for o in range(-self.upper, self.lower + 1):
            j1 = n - o
            if j1 < n:
                bands[self.upper + o, max(j1, 0):] = 0.0
        lost = self.upper if n < self.ncols else 0
        return BandedMatrix(n, n, self.lower, self.upper, bands,
                            min(self.exact_rows, n - lost), self.symmetric)

    def principal(self, n: int) -> "BandedMatrix":
        """Leading principal ``n x n`` block, treated as a matrix in its own right.

        Every stored entry is exact when ``n <= exact_rows``; this is what
        a Cholesky factorization needs, since row ``i`` of the factor depends
        only on the leading ``(i+1) x (i+1)`` block.
        """
        if n > self.exact_rows:
            raise TruncationOverflow(f"principal block {n} exceeds exact rows {self.exact_rows}")
        B = self.section(n)
        return BandedMatrix(n, n, B.lower, B.upper, B.bands, n, B.symmetric)

    def asymmetry(self) -> float:
        """Max ``|A_ij - A_ji|`` over the exact leading block."""
        e = self.exact_rows
        A = self.section(e).to_dense() if e < self.nrows else self.to_dense()
        return float(np.max(np.abs(A - A.T), initial=0.0))


def banded_matvec(A: BandedMatrix, v: SparseColumn) -> SparseColumn:
    """Multiply ``A`` by a column with a contiguous nonzero range.

    The input range must end at least ``A.upper`` rows before the exact
    region ends, so that every output row touched is exact.
    """
    if v.stop + A.upper > A.exact_rows or v.stop > A.ncols:
        raise TruncationOverflow(
            f"column rows [{v.start}, {v.stop}) need {v.stop + A.upper} exact rows, "
            f"operator has {A.exact_rows}")
    lo = max(0, v.start - A.upper)
    hi = min(A.nrows, v.stop + A.lower)
    out = np.zeros(hi - lo)
    cols = np.arange(v.start, v.stop)
    for o in range(-A.upper, A.lower + 1):
        rows = cols + o
        keep = (rows >= 0) & (rows < A.nrows)
        if not keep.any():
            continue
        out[rows[keep] - lo] += A.bands[A.upper + o, cols[keep]] * v.values[keep]
    return SparseColumn(lo, out)


def banded_matmul(A: BandedMatrix, B: BandedMatrix) -> BandedMatrix:
    """Product of two banded sections with exact-row propagation."""
    if A.ncols != B.nrows:
        raise ValueError("shape mismatch")
    lower, upper = A.lower + B.lower, A.upper + B.upper
    C = np.zeros((lower + upper + 1, B.ncols))
    jj = np.arange(B.ncols)
    for ob in range(-B.upper, B.lower + 1):
        kk = jj + ob
        okb = (kk >= 0) & (kk < B.nrows)
        bvals = np.where(okb, B.bands[B.upper + ob], 0.0)
        for oa in range(-A.upper, A.lower + 1):
            ii = kk + oa
            ok = okb & (ii >= 0) & (ii < A.nrows)
            if not ok.any():
                continue
            avals = A.bands[A.upper + oa, np.where(ok, kk, 0)]
            C[upper + oa + ob, ok] += (avals * bvals)[ok]
    exact = max(0, min(A.exact_rows, B.exact_rows - A.upper))
    return BandedMatrix(A.nrows, B.ncols, lower, upper, C, exact,
                        A.symmetric and B.symmetric)


def banded_add_identity(A: BandedMatrix, c: float) -> BandedMatrix:
    bands = A.bands.copy()
    n = min(A.nrows, A.ncols)
    bands[A.upper, :n] += c
    return BandedMatrix(A.nrows, A.ncols, A.lower, A.upper, bands, A.exact_rows, A.symmetric)


def cholesky_banded(A: BandedMatrix, bandwidth: int | None = None) -> BandedMatrix:
    """Lower Cholesky factor of a symmetric positive definite banded section.

    Row ``i`` of the factor only depends on the leading ``(i+1) x (i+1)``
    block, so the factor is exact on the same rows as ``A``.
    """
    b = A.lower if bandwidth is None else bandwidth
    n = A.nrows
    diag_max = float(np.max(np.abs(A.diagonal(0)))) if n else 0.0
    tol = PIVOT_RTOL * diag_max
    # W[i, t] = L[i, i - b + t]
    W = np.zeros((n, b + 1))
    for i in range(n):
        j0 = max(0, i - b)
        for j in range(j0, i):
            # overlap of rows i and j of L over columns max(i-b, j-b) .. j-1
            k0 = max(j0, j - b)
            s = A[i, j]
            if j > k0:
                s -= W[i, k0 - i + b:j - i + b] @ W[j, k0 - j + b:b]
            W[i, j - i + b] = s / W[j, b]
        piv = A[i, i] - W[i, j0 - i + b:b] @ W[i, j0 - i + b:b]
        if not piv > tol:
            raise NotPositiveDefinite(i, float(piv))
        W[i, b] = np.sqrt(piv)
    bands = np.zeros((b + 1, n))
    for t in range(b + 1):
        o = b - t  # L[i, i - o]
        bands[o, : n - o] = W[o:, t]
    return BandedMatrix(n, n, b, 0, bands, A.exact_rows)


@dataclass(eq=False)
class BlockMatrix:
    """Dense rectangular blocks addressed by block-row/block-column."""

    row_sizes: list
    col_sizes: list
    blocks: dict = field(default_factory=dict)

    @property
    def row_offsets(self):
        return np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(int)

    @property
    def col_offsets(self):
        return np.concatenate([[0], np.cumsum(self.col_sizes)]).astype(int)

    @property
    def shape(self):
        return int(sum(self.row_sizes)), int(sum(self.col_sizes))

    def __setitem__(self, IJ, block):
        I, J = IJ
        block = np.asarray(block, dtype=float)
        if block.shape != (self.row_sizes[I], self.col_sizes[J]):
            raise ValueError(f"block {IJ} has shape {block.shape}, "
                             f"expected {(self.row_sizes[I], self.col_sizes[J])}")
        self.blocks[(I, J)] = block

    def __getitem__(self, IJ):
        I, J = IJ
        if IJ in self.blocks:
            return self.blocks[IJ]
        return np.zeros((self.row_sizes[I], self.col_sizes[J]))

    def to_dense(self) -> np.ndarray:
        A = np.zeros(self.shape)
        ro, co = self.row_offsets, self.col_offsets
        for (I, J), blk in self.blocks.items():
            A[ro[I]:ro[I + 1], co[J]:co[J + 1]] = blk
        return A

    def bandwidths(self) -> tuple[int, int]:
        A = self.to_dense()
        rows, cols = np.nonzero(A)
        if len(rows) == 0:
            return 0, 0
        return int(max(0, np.max(rows - cols))), int(max(0, np.max(cols - rows)))

    def to_banded(self) -> BandedMatrix:
        lo, up = self.bandwidths()
        A = self.to_dense()
        return BandedMatrix.from_dense(A, lo, up)
