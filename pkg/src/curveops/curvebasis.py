"""Curves ``y^m = phi(x)``, their inner product, the orthonormal P-basis and the
banded operators of multiplication by ``x`` and ``y`` in that basis.

Flat row convention: for ``m = 1`` row ``j`` is ``P_{j,0} = p_j(w)``. For
``m = 2`` row 0 is ``P_{0,0}``, row ``2j-1`` is ``P_{j,0} = p_j(w)/sqrt(2)`` and
row ``2j`` is ``P_{j,1} = y p_{j-1}(phi w)/sqrt(2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import CurveInvalid, PointOffCurve
from .polycore import BandedMatrix, Poly
from .univar import (SymTridiag, WeightSpec, classical_jacobi, gauss_rule, gram_phi,
                     raise_and_semiclassical)

ON_CURVE_TOL = 1e-10
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class CurveSpec:
    """The curve ``y^m = phi(x)`` with ``x`` distributed by the weight ``w``."""

    m: int
    phi: Poly
    w: WeightSpec = WeightSpec()
    validated: bool = False

    def __post_init__(self):
        if self.m not in (1, 2):
            raise CurveInvalid(f"m must be 1 or 2, got {self.m}")
        if not isinstance(self.phi, Poly):
            object.__setattr__(self, "phi", Poly(tuple(self.phi)))
        if self.phi.degree < 1:
            raise CurveInvalid(f"deg phi must be at least 1, got {self.phi.degree}")

    @property
    def d(self) -> int:
        return self.phi.degree

    @property
    def D(self) -> int:
        """Saturated block size ``max(d, m)``."""
        return max(self.d, self.m)

    @property
    def is_even(self) -> bool:
        return self.phi.is_even() and self.w.is_even


def _positivity_samples(w: WeightSpec, density: int) -> np.ndarray:
    if w.bounded:
        q = gauss_rule(w, 200 * density)
        lo, hi = w.support
        u = np.linspace(lo, hi, 100 * density + 2)[1:-1]
        return np.concatenate([q.nodes, u])
    return gauss_rule(w, 400 * density).nodes


def validate_curve(c: CurveSpec, strict: bool = False) -> CurveSpec:
    """Check ``phi > 0`` on sample points of ``supp(w)`` when ``m = 2``.

    Samples are the nodes of a 200-point Gauss rule plus 100 interior uniform
    points (bounded support) or a 400-point Gauss rule (unbounded support).
    ``strict`` multiplies the density by 10. Zeros at the endpoints of a bounded
    support are allowed since no sample sits there.

    Raises
    ------
    CurveInvalid
        With the offending ``x`` if some sample has ``phi(x) <= 0``.
    """
    if c.m == 2:
        xs = _positivity_samples(c.w, 10 if strict else 1)
        vals = c.phi(xs)
        bad = np.flatnonzero(~(vals > 0))
        if bad.size:
            x0 = float(xs[bad[np.argmin(vals[bad])]])
            raise CurveInvalid(f"phi({x0:.6g}) = {c.phi(x0):.3e} is not positive", x=x0)
    return replace(c, validated=True)


def dim_Vn(n: int, m: int, d: int) -> int:
    """Dimension of the space of degree-``n`` orthogonal polynomials on the curve."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return min(n + 1, max(d, m))


def block_offset(n: int, m: int, d: int) -> int:
    """Number of columns in blocks ``0..n-1``."""
    D = max(d, m)
    if n <= D:
        return n * (n + 1) // 2
    return D * (D + 1) // 2 + (n - D) * D


def ell_index(n: int, k: int, m: int, d: int) -> int:
    """Flat column index of ``Y_{n,k}`` (``k`` is 1-based)."""
    if not 1 <= k <= dim_Vn(n, m, d):
        raise IndexError(f"k={k} out of range for degree {n}")
    return block_offset(n, m, d) + k - 1


def ell_inverse(ell: int, m: int, d: int) -> tuple[int, int]:
    n = 0
    while block_offset(n + 1, m, d) <= ell:
        n += 1
    return n, ell - block_offset(n, m, d) + 1


def flat_row(j: int, part: int, m: int) -> int:
    """Flat row of ``P_{j,part}``."""
    if m == 1:
        if part != 0:
            raise ValueError("m = 1 has only part 0")
        return j
    if part == 0:
        return 0 if j == 0 else 2 * j - 1
    if j < 1:
        raise ValueError("P_{j,1} needs j >= 1")
    return 2 * j


def row_index(row: int, m: int) -> tuple[int, int]:
    """Inverse of :func:`flat_row`: ``(j, part)``."""
    if m == 1:
        return row, 0
    if row == 0:
        return 0, 0
    return (row + 1) // 2, 1 - row % 2


def row_part(rows, m: int) -> np.ndarray:
    """Part (0 or 1) of each flat row; always 0 for ``m = 1``."""
    rows = np.asarray(rows)
    if m == 1:
        return np.zeros_like(rows)
    return np.where(rows == 0, 0, 1 - rows % 2)


def required_rows(N: int, m: int, d: int) -> int:
    """Exact flat rows needed to build blocks up to degree ``N``."""
    if m == 1:
        return (N + 2) * d + 2 * d
    # highest nonzero row of block N plus the bandwidth of y
    return max((N + 2) * d, 2 * N + 2) + max(2 * d - 1, 3) + 4


@dataclass(frozen=True, eq=False)
class MultOps:
    """Sections of the operators of multiplication by ``x`` and ``y``."""

    curve: CurveSpec
    X: BandedMatrix
    Y: BandedMatrix
    R: BandedMatrix | None
    Jw: SymTridiag
    Jphiw: SymTridiag | None
    exact_rows: int

    @property
    def m(self):
        return self.curve.m

    @property
    def d(self):
        return self.curve.d

    def r(self, k: int, n: int) -> float:
        """Raising entry ``r_{k,n}`` (only built for ``m = 2``)."""
        return self.R[k, n]

    def op(self, name: str) -> BandedMatrix:
        return {"x": self.X, "y": self.Y}[name]


def build_mult_ops(c: CurveSpec, N: int, rows: int | None = None) -> MultOps:
    """Assemble the operators so that at least ``rows`` flat rows are exact.

    ``rows`` defaults to :func:`required_rows`. For ``m = 1`` these are
    ``J(w)`` and ``phi(J(w))``; for ``m = 2`` the block pattern built from
    ``J(w)``, ``J(phi w)`` and the raising entries ``r_{k,n}``.
    """
    if not c.validated:
        c = validate_curve(c)
    d = c.d
    F = required_rows(N, c.m, d) if rows is None else rows
    if c.m == 1:
        M = F + d + 1
        Jw = classical_jacobi(c.w, M)
        X = Jw.to_banded()
        Y = gram_phi(Jw, c.phi)
        exact = min(X.exact_rows, Y.exact_rows)
        return MultOps(c, X, Y, None, Jw, None, exact)
    J_need = (F + 1) // 2 + 1
    Mw = J_need + 2 * d + 2
    Jw = classical_jacobi(c.w, Mw)
    sc = raise_and_semiclassical(Jw, c.phi)
    R, Jp = sc.R, sc.J
    # every P_{j,*} with j <= Jmax has an exact row in both operators
    Jmax = min(Mw - 2 * d - 1, Jp.size)
    exact = 2 * Jmax + 1
    b = max(2 * d - 1, 3)
    size = exact + b
    Xd = BandedMatrix.zeros(size, size, 2, 2, exact, True)
    Yd = BandedMatrix.zeros(size, size, b, b, exact, True)

    def put(A, i, j, v):
        if i < size and j < size:
            A.bands[A.upper + i - j, j] = v
            A.bands[A.upper + j - i, i] = v

    for j in range(0, size // 2 + 2):
        r0 = flat_row(j, 0, 2)
        if r0 < size and j < Jw.size:
            put(Xd, r0, r0, Jw.alpha[j])
            put(Xd, flat_row(j + 1, 0, 2), r0, Jw.beta[j])
        if j >= 1:
            r1 = flat_row(j, 1, 2)
            if r1 < size and j - 1 < Jp.size:
                put(Xd, r1, r1, Jp.alpha[j - 1])
                put(Xd, flat_row(j + 1, 1, 2), r1, Jp.beta[j - 1])
        # y P_{n,0} = sum_{k=n-d}^{n} r_{k,n} P_{k+1,1}
        n = j
        if r0 < size and n < R.ncols:
            for k in range(max(0, n - d), n + 1):
                put(Yd, flat_row(k + 1, 1, 2), r0, R[k, n])
    X, Y = Xd, Yd
    if exact < F:
        raise AssertionError(f"operator section has {exact} exact rows, needs {F}")
    return MultOps(c, X, Y, R, Jw, Jp, exact)


def _check_on_curve(c: CurveSpec, x, y, tol=ON_CURVE_TOL):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ph = c.phi(x)
    res = np.abs(y ** c.m - ph) / np.maximum(1.0, np.abs(ph))
    bad = np.flatnonzero(~(res <= tol))
    if bad.size:
        i = bad[0]
        raise PointOffCurve(float(x[i]), float(y[i]), float(res[i]))
    return x, y


def pbasis_eval(c: CurveSpec, ops: MultOps, x, y, jmax: int, check: bool = True) -> np.ndarray:
    """Values of the P-basis rows with degree index ``j <= jmax``.

    Returns an array of shape ``(npoints, nrows)`` ordered by flat row.
    """
    if check:
        x, y = _check_on_curve(c, x, y)
    else:
        x, y = np.atleast_1d(x).astype(float), np.atleast_1d(y).astype(float)
    pw = ops.Jw.eval_ops(x, jmax)
    if c.m == 1:
        return pw
    out = np.empty((len(x), 2 * jmax + 1))
    out[:, 0] = pw[:, 0] / SQRT2
    if jmax >= 1:
        out[:, 1::2] = pw[:, 1:] / SQRT2
        pp = ops.Jphiw.eval_ops(x, jmax - 1)
        out[:, 2::2] = y[:, None] * pp / SQRT2
    return out


def curve_nodes(c: CurveSpec, nquad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadrature nodes ``(x, y)`` on the curve and weights.

    For ``m = 2`` both branches ``y = +-sqrt(phi)`` appear with the full weight,
    matching the definition of the inner product as a sum over branches.
    """
    q = gauss_rule(c.w, nquad)
    if c.m == 1:
        return q.nodes, c.phi(q.nodes), q.weights
    s = np.sqrt(np.maximum(c.phi(q.nodes), 0.0))
    return (np.concatenate([q.nodes, q.nodes]), np.concatenate([s, -s]),
            np.concatenate([q.weights, q.weights]))


def curve_inner_product(c: CurveSpec, f, g, nquad: int) -> float:
    """``<f, g>`` on the curve by Gauss quadrature in ``x``."""
    if nquad < 1:
        raise ValueError("nquad must be positive")
    x, y, wt = curve_nodes(c, nquad)
    return float(np.sum(wt * f(x, y) * g(x, y)))


def quad_size(max_degree: int) -> int:
    """Gauss points needed for an integrand of total ``x``-degree ``max_degree``."""
    return max_degree // 2 + 2
