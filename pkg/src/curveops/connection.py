"""Connection matrix ``C`` between the P-basis and the orthonormal polynomials
``Y_{n,k}`` on the curve, and the block Jacobi matrices ``J_x``, ``J_y``.

The engine is a block Lanczos process in coefficient space: each new column
is ``Op @ C[:, src]`` (``Op`` is multiplication by ``x`` or ``y``) minus its
projections onto the two previous blocks and the earlier columns of the block
under construction, restricted to the rows that can be nonzero, normalized
with a positive normalizer and then re-orthogonalized against the few
preceding blocks whose row ranges can overlap.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .curvebasis import (CurveSpec, MultOps, block_offset, build_mult_ops, dim_Vn,
                         flat_row, pbasis_eval, required_rows, row_index, row_part,
                         validate_curve)
from .errors import Degenerate, LanczosBreakdown
from .polycore import BandedMatrix, SparseColumn, banded_matvec

BREAKDOWN_TOL = 1e-10
DEGENERATE_TOL = 1e-13
A_ASYM_TOL = 1e-11
SIGN_RTOL = 1e-10


# --------------------------------------------------------------------------- bounds

@dataclass(frozen=True)
class ZeroBounds:
    """Rows ``jmin..jmax`` outside of which a column is provably zero.

    ``part`` is the P-part (0: rows ``P_{j,0}``, 1: rows ``P_{j,1}``) the
    column lives on for ``m = 2``; ``None`` for ``m = 1``. ``obs_jmin`` and
    ``obs_jmax`` are the sharper ranges seen in practice (diagnostic only).
    """

    jmin: int
    jmax: int
    part: int | None
    obs_jmin: int
    obs_jmax: int


def _m1_bounds(d: int, n: int, k: int) -> ZeroBounds:
    if n <= d - 2:
        jmin = n + 1
        jmax = n * d if k <= n else (n * d + 1 if k == n + 1 else (n + 1) * d)
        obs = jmin if k == 1 else n + 2
    else:
        base = d * (n + 2 - d)
        jmin = d - 1 + base
        jmax = n * d if k <= d - 2 else (n * d + 1 if k == d - 1 else (n + 1) * d)
        if k == 1:
            obs = jmin
        elif k <= d - 2:
            obs = 2 * d - 2 + base
        else:
            obs = 2 * d - 1 + base
    return ZeroBounds(jmin, jmax, None, obs, jmax)


def _m2_bounds(d: int, n: int, k: int) -> ZeroBounds:
    K = dim_Vn(n + 1, 2, d)
    if d <= 2:
        row = flat_row(n + 1, k - 1, 2)
        return ZeroBounds(row, row, k - 1, row, row)
    if n <= d - 2:
        jmin = 2 * n + 1
    elif (n + 1 - d) % 2 == 0:
        jmin = 2 * d + d * (n + 1 - d)
    else:
        jmin = 2 * d - 3 + d * (n + 2 - d)
    same = (k - K) % 2 == 0
    if n % 2 == 0:
        if k == K:
            jmax = n * d + 2
        elif k == K - 1:
            jmax = n * d + 1
        elif k == K - 2:
            jmax = (n - 2) * d + 6
        else:
            jmax = (n - 2) * d + 4 if same else n * d - 1
        part = 1 if same else 0
    else:
        if k == K:
            jmax = (n + 1) * d - 1
        elif k == K - 1:
            jmax = 4 + (n - 1) * d
        elif k == K - 2:
            jmax = 3 + (n - 1) * d
        else:
            jmax = 1 + (n - 1) * d if same else 2 + (n - 1) * d
        part = 0 if same else 1
    # first row of the right parity
    if row_part(jmin, 2) != part:
        jmin += 1
    if row_part(jmax, 2) != part:
        jmax -= 1
    return ZeroBounds(jmin, jmax, part, jmin, jmax)


def zero_bounds(m: int, d: int, n1: int, k: int) -> ZeroBounds:
    """Proven zero bounds for column ``ell(n1, k)`` (``n1 >= 1``, ``k`` 1-based).

    Rows ``j < jmin`` or ``j > jmax`` are zero in exact arithmetic; for
    ``m = 2`` rows of the other part are zero as well.
    """
    if n1 == 0:
        return ZeroBounds(0, 0, 0 if m == 2 else None, 0, 0)
    if not 1 <= k <= dim_Vn(n1, m, d):
        raise IndexError(f"k={k} out of range for degree {n1}")
    return _m1_bounds(d, n1 - 1, k) if m == 1 else _m2_bounds(d, n1 - 1, k)


# --------------------------------------------------------------------------- data

@dataclass(eq=False)
class Column:
    """One column ``C[:, ell(n, k)]`` stored over its allocated row range."""

    n: int
    k: int
    ell: int
    part: int | None
    vec: SparseColumn
    bounds: ZeroBounds | None = None
    dropped: float = 0.0

    @property
    def jmin(self) -> int:
        return self.vec.start

    @property
    def jmax(self) -> int:
        return self.vec.stop - 1


@dataclass(eq=False)
class ConnectionMatrix:
    """Column blocks ``C_0, C_1, ...`` of the connection matrix."""

    m: int
    d: int
    blocks: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.blocks) - 1

    @property
    def columns(self) -> list:
        return [c for b in self.blocks for c in b]

    @property
    def ncols(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def nrows(self) -> int:
        return max(c.vec.stop for c in self.columns)

    def block_dense(self, n: int, nrows: int | None = None) -> np.ndarray:
        nrows = self.nrows if nrows is None else nrows
        return np.column_stack([c.vec.dense(nrows) for c in self.blocks[n]])

    def to_dense(self, nrows: int | None = None) -> np.ndarray:
        nrows = self.nrows if nrows is None else nrows
        return np.column_stack([c.vec.dense(nrows) for c in self.columns])

    def to_sparse(self, nrows: int | None = None, threshold: float = 0.0):
        from scipy.sparse import csc_matrix
        nrows = self.nrows if nrows is None else nrows
        rows, cols, vals = [], [], []
        for j, c in enumerate(self.columns):
            keep = np.abs(c.vec.values) > threshold
            rows.append(np.arange(c.vec.start, c.vec.stop)[keep])
            cols.append(np.full(int(keep.sum()), j))
            vals.append(c.vec.values[keep])
        return csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nrows, self.ncols))

    @classmethod
    def from_dense(cls, A: np.ndarray, m: int, d: int, N: int) -> "ConnectionMatrix":
        """Rebuild blocks from a dense array (columns in ell order)."""
        C = cls(m, d)
        j = 0
        for n in range(N + 1):
            blk = []
            for k in range(1, dim_Vn(n, m, d) + 1):
                v = A[:, j]
                nz = np.flatnonzero(v)
                lo, hi = (nz[0], nz[-1]) if nz.size else (0, 0)
                part = None if m == 1 else int(row_part(lo, 2))
                blk.append(Column(n, k, j, part, SparseColumn(int(lo), v[lo:hi + 1].copy())))
                j += 1
            C.blocks.append(blk)
        return C


@dataclass(eq=False)
class BlockJacobiPair:
    """Blocks ``A_{n,x}``, ``A_{n,y}`` (``n = 0..N``) and ``B_{n,x}``,
    ``B_{n,y}`` (``n = 0..N-1``; ``B_n`` has shape ``dim V_{n+1} x dim V_n``)."""

    Ax: list
    Ay: list
    Bx: list
    By: list
    asymmetry: float = 0.0

    @property
    def N(self) -> int:
        return len(self.Ax) - 1

    def A(self, op: str) -> list:
        return self.Ax if op == "x" else self.Ay

    def B(self, op: str) -> list:
        return self.Bx if op == "x" else self.By

    def to_dense(self, op: str, nblocks: int | None = None) -> np.ndarray:
        """Dense section of ``J_op`` made of blocks ``0..nblocks-1``."""
        A, B = self.A(op), self.B(op)
        nb = len(A) if nblocks is None else nblocks
        sizes = [A[n].shape[0] for n in range(nb)]
        off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        J = np.zeros((off[-1], off[-1]))
        for n in range(nb):
            J[off[n]:off[n + 1], off[n]:off[n + 1]] = A[n]
            if n + 1 < nb:
                J[off[n + 1]:off[n + 2], off[n]:off[n + 1]] = B[n]
                J[off[n]:off[n + 1], off[n + 1]:off[n + 2]] = B[n].T
        return J

    def to_banded(self, op: str) -> BandedMatrix:
        J = self.to_dense(op)
        r, c = np.nonzero(J)
        bw = int(np.max(np.abs(r - c), initial=0))
        return BandedMatrix.from_dense(J, bw, bw, symmetric=True)


@dataclass(eq=False)
class Diagnostics:
    max_dropped: float = 0.0
    normalizers: list = field(default_factory=list)   # (n, k, op, k_src, value)
    a_asymmetry: float = 0.0
    block_seconds: list = field(default_factory=list)
    reorth_coeff_max: float = 0.0


@dataclass(eq=False)
class ConnectionResult:
    curve: CurveSpec
    ops: MultOps
    C: ConnectionMatrix
    pair: BlockJacobiPair
    diag: Diagnostics
    options: dict


# --------------------------------------------------------------------------- sequences

def sequence(n: int, m: int, d: int, secondary: str = "y") -> list:
    """Operator and source column for each column of block ``n + 1``.

    Returns a list of ``(op, k_src)`` pairs. Below saturation the first
    ``n + 1`` columns come from ``x`` and the last from ``y``. At saturation
    every column comes from ``y`` (``secondary='y'``) or columns ``2..D`` are
    multiplied by ``x`` and the last by ``y`` (``secondary='xy'``). When
    ``d <= m`` multiplication by ``x`` never lowers the curve degree and is
    used throughout.
    """
    D = max(d, m)
    if n <= D - 2:
        return [("x", k) for k in range(1, n + 2)] + [("y", n + 1)]
    if d <= m:
        return [("x", k) for k in range(1, D + 1)]
    if secondary == "y":
        return [("y", k) for k in range(1, D + 1)]
    if secondary == "xy":
        return [("x", k) for k in range(2, D + 1)] + [("y", D)]
    raise ValueError(f"unknown secondary sequence {secondary!r}")


def reorth_window(n: int, m: int, d: int) -> int:
    """Lowest owner degree a column of degree ``n + 1`` must be re-orthogonalized against."""
    lo = n - d + (3 if m == 1 else 4)
    return max(0, min(lo, n))


# --------------------------------------------------------------------------- helpers

def _dot(a: SparseColumn, b: SparseColumn) -> float:
    return a.dot(b)


def _sub(v: SparseColumn, coef: float, c: SparseColumn) -> SparseColumn:
    """``v - coef * c`` keeping the range of ``v`` when ``c`` fits inside it."""
    if coef == 0.0:
        return v
    if c.start >= v.start and c.stop <= v.stop:
        vals = v.values.copy()
        vals[c.start - v.start:c.stop - v.start] -= coef * c.values
        return SparseColumn(v.start, vals)
    return v.axpy(-coef, c)


def _restrict(v: SparseColumn, lo: int, hi: int, part: int | None, m: int):
    out, dropped = v.restricted(lo, hi)
    if m == 2 and part is not None:
        rows = np.arange(out.start, out.stop)
        wrong = row_part(rows, 2) != part
        if wrong.any():
            dropped = max(dropped, float(np.max(np.abs(out.values[wrong]))))
            vals = out.values.copy()
            vals[wrong] = 0.0
            out = SparseColumn(out.start, vals)
    return out, dropped


def init_columns(c: CurveSpec, ops: MultOps) -> tuple[list, float]:
    """Closed-form leading blocks and their normalization entry.

    ``m = 1``: ``C_0 = e_0``, ``C_1 = (e_1, C_2)`` with
    ``C_2 = (Y_{2,0} e_2 + ... + Y_{d,0} e_d) / b`` and ``b`` its norm.
    ``m = 2``: ``C_0 = e_0``, ``C_1 = (e_1, e_2)``, ``C_2 = (e_3, e_4, C_5)`` with
    ``C_5 = (r_{0,3} e_5 + ... + r_{0,d} e_{2d-1}) / b``.

    Raises
    ------
    Degenerate
        When the normalization entry vanishes.
    """
    m, d = c.m, c.d
    e = lambda j: SparseColumn(j, np.ones(1))  # noqa: E731
    if m == 1:
        if d < 3:
            raise ValueError("closed-form initial columns need d >= 3 for m = 1")
        vals = np.array([ops.Y[j, 0] for j in range(2, d + 1)])
        b = float(np.linalg.norm(vals))
        if b < DEGENERATE_TOL:
            raise Degenerate(f"normalizer b = {b:.3e}; phi has effective degree < {d}")
        blocks = [[Column(0, 1, 0, None, e(0))],
                  [Column(1, 1, 1, None, e(1)),
                   Column(1, 2, 2, None, SparseColumn(2, vals / b))]]
        return blocks, b
    if d < 4:
        raise ValueError("closed-form initial columns need d >= 4 for m = 2")
    vals = np.zeros(2 * d - 1 - 5 + 1)
    vals[::2] = [ops.r(0, j) for j in range(3, d + 1)]
    b = float(np.linalg.norm(vals))
    if b < DEGENERATE_TOL:
        raise Degenerate(f"normalizer b = {b:.3e}; phi has effective degree < {d}")
    blocks = [[Column(0, 1, 0, 0, e(0))],
              [Column(1, 1, 1, 0, e(1)), Column(1, 2, 2, 1, e(2))],
              [Column(2, 1, 3, 0, e(3)), Column(2, 2, 4, 1, e(4)),
               Column(2, 3, 5, 0, SparseColumn(5, vals / b))]]
    return blocks, b


def _block_products(ops: MultOps, blk: list) -> dict:
    return {op: [banded_matvec(ops.op(op), col.vec) for col in blk] for op in ("x", "y")}


def _gram(cols_a: list, prods: list) -> np.ndarray:
    """``G[r, k] = cols_a[r] . prods[k]``."""
    return np.array([[ca.vec.dot(p) for p in prods] for ca in cols_a])


def _symmetrize(A: np.ndarray) -> tuple[np.ndarray, float]:
    asym = float(np.max(np.abs(A - A.T), initial=0.0))
    return 0.5 * (A + A.T), asym


def reorthogonalize(v: SparseColumn, basis: list, where=(0, 0), passes: int = 2):
    """Project ``v`` off the columns in ``basis`` and renormalize, ``passes`` times.

    Returns the new column and the largest projection coefficient seen.

    Raises
    ------
    LanczosBreakdown
        If the norm collapses below the breakdown tolerance.
    """
    hmax = 0.0
    for _ in range(passes):
        for col in basis:
            h = col.vec.dot(v)
            hmax = max(hmax, abs(h))
            v = _sub(v, h, col.vec)
        nv = v.norm()
        if not nv >= BREAKDOWN_TOL:
            raise LanczosBreakdown(where[0], where[1], nv)
        v = v.scaled(1.0 / nv)
    return v, hmax


# --------------------------------------------------------------------------- engine

def build_connection(c: CurveSpec, N: int, ops: MultOps | None = None, *,
                     reorth: bool = True, secondary: str = "y", use_init: bool = False,
                     truncate: bool = True, pad: int = 0,
                     full_reorth: bool = False) -> ConnectionResult:
    """Compute blocks ``C_0..C_N`` and Jacobi blocks ``A_0..A_N``, ``B_0..B_{N-1}``.

    Parameters
    ----------
    c : CurveSpec
    N : int
        Highest polynomial degree.
    ops : MultOps, optional
        Prebuilt operators with enough exact rows.
    reorth : bool
        Re-orthogonalize every new column twice against the overlapping window.
    secondary : {'y', 'xy'}
        Sequence used once blocks have saturated.
    use_init : bool
        Seed the leading blocks with their closed forms.
    truncate : bool
        Restrict new columns to their proven zero bounds. With ``False`` the
        natural support of the products is kept (for auditing the bounds).
    pad : int
        Widen the truncation window by ``pad`` rows on either side.
    full_reorth : bool
        Re-orthogonalize against every earlier column instead of the window.
        Costs O(N^2). Implied by ``pad > 0`` or ``truncate=False``, since the
        window only covers columns whose proven supports can overlap.
    """
    if not c.validated:
        c = validate_curve(c)
    m, d = c.m, c.d
    if ops is None:
        rows = required_rows(N, m, d)
        if not truncate:
            # untruncated supports grow by the y bandwidth per block
            rows += (N + 1) * (2 * d + 2)
        elif pad:
            rows += 2 * pad
        ops = build_mult_ops(c, N, rows)
    diag = Diagnostics()
    full_reorth = full_reorth or pad > 0 or not truncate
    options = dict(reorth=reorth, secondary=secondary, use_init=use_init,
                   truncate=truncate, pad=pad, full_reorth=full_reorth)

    if use_init and ((m == 1 and d >= 3) or (m == 2 and d >= 4)):
        blocks, _ = init_columns(c, ops)
        blocks = blocks[:N + 1]
    else:
        blocks = [[Column(0, 1, 0, 0 if m == 2 else None, SparseColumn(0, np.ones(1)),
                          zero_bounds(m, d, 0, 1))]]
    Ax, Ay, Bx, By = [], [], [], []
    A = {"x": Ax, "y": Ay}
    B = {"x": Bx, "y": By}
    prods = {}

    def finalize(n):
        prods[n] = _block_products(ops, blocks[n])
        for op in ("x", "y"):
            An, asym = _symmetrize(_gram(blocks[n], prods[n][op]))
            diag.a_asymmetry = max(diag.a_asymmetry, asym)
            if reorth and asym > A_ASYM_TOL:
                raise AssertionError(f"A_{n},{op} asymmetry {asym:.2e}")
            A[op].append(An)
            if n >= 1:
                B[op].append(_gram(blocks[n], prods[n - 1][op]))
        prods.pop(n - 2, None)

    for n in range(len(blocks)):
        finalize(n)

    for n in range(len(blocks) - 1, N):
        t0 = time.perf_counter()
        seq = sequence(n, m, d, secondary)
        lo_s = reorth_window(n, m, d)
        window = [col for s in range(lo_s, n + 1) for col in blocks[s]]
        new = []
        for kp, (op, ks) in enumerate(seq, start=1):
            v = prods[n][op][ks - 1]
            if n >= 1:
                for r, col in enumerate(blocks[n - 1]):
                    v = _sub(v, B[op][n - 1][ks - 1, r], col.vec)
            for r, col in enumerate(blocks[n]):
                v = _sub(v, A[op][n][r, ks - 1], col.vec)
            for col in new:
                v = _sub(v, col.vec.dot(v), col.vec)
            zb = zero_bounds(m, d, n + 1, kp)
            src_part = blocks[n][ks - 1].part
            part = None if m == 1 else (src_part ^ (op == "y"))
            if zb.part is not None and zb.part != part:
                raise AssertionError(f"parity mismatch for column ({n + 1},{kp})")
            if truncate:
                v, dropped = _restrict(v, max(0, zb.jmin - pad), zb.jmax + pad,
                                       part, m)
                diag.max_dropped = max(diag.max_dropped, dropped)
            nrm = v.norm()
            if not nrm >= BREAKDOWN_TOL:
                raise LanczosBreakdown(n + 1, kp, nrm)
            v = v.scaled(1.0 / nrm)
            diag.normalizers.append((n + 1, kp, op, ks, nrm))
            if reorth:
                basis = [col for b in blocks for col in b] if full_reorth else window
                v, hmax = reorthogonalize(v, basis + new, (n + 1, kp))
                diag.reorth_coeff_max = max(diag.reorth_coeff_max, hmax)
                if truncate:
                    # projections onto window columns must not widen the support
                    v, dropped = _restrict(v, max(0, zb.jmin - pad), zb.jmax + pad, part, m)
                    diag.max_dropped = max(diag.max_dropped, dropped)
            new.append(Column(n + 1, kp, block_offset(n + 1, m, d) + kp - 1, part, v, zb))
        blocks.append(new)
        finalize(n + 1)
        diag.block_seconds.append(time.perf_counter() - t0)

    C = ConnectionMatrix(m, d, blocks)
    pair = BlockJacobiPair(Ax, Ay, Bx, By, diag.a_asymmetry)
    return ConnectionResult(c, ops, C, pair, diag, options)


def assemble_jacobi(C: ConnectionMatrix, ops: MultOps, check: bool = True) -> BlockJacobiPair:
    """``A_n = C_n^T Op C_n`` and ``B_{n-1} = C_n^T Op C_{n-1}`` for both operators.

    ``A`` blocks are averaged with their transposes after checking that the
    asymmetry is below ``1e-11`` (when ``check``).
    """
    Ax, Ay, Bx, By = [], [], [], []
    worst = 0.0
    prev = None
    for n, blk in enumerate(C.blocks):
        pr = _block_products(ops, blk)
        for op, Al, Bl in (("x", Ax, Bx), ("y", Ay, By)):
            An, asym = _symmetrize(_gram(blk, pr[op]))
            worst = max(worst, asym)
            Al.append(An)
            if prev is not None:
                Bl.append(_gram(blk, prev[op]))
        prev = pr
    if check and worst > A_ASYM_TOL:
        raise AssertionError(f"A block asymmetry {worst:.2e}")
    return BlockJacobiPair(Ax, Ay, Bx, By, worst)


# --------------------------------------------------------------------------- explicit bases

def _explicit_rows(m: int, d: int, n: int, even: bool) -> list | None:
    """P-rows ``(j, part)`` of block ``n`` for the curves with closed-form bases."""
    if n == 0:
        return [(0, 0)]
    if m == 1 and d == 1:
        return [(n, 0)]
    if m == 1 and d == 2:
        return [(2 * n - 1, 0), (2 * n, 0)]
    if m == 2 and d in (1, 2):
        return [(n, 0), (n, 1)]
    if m == 2 and d == 3:
        if n == 1:
            return [(1, 0), (1, 1)]
        q, r = divmod(n, 2)
        if r == 0:
            return [(3 * q - 1, 0), (3 * q - 1, 1), (3 * q, 0)]
        return [(3 * q, 1), (3 * q + 1, 0), (3 * q + 1, 1)]
    if m == 2 and d == 4 and even:
        if n == 1:
            return [(1, 0), (1, 1)]
        if n == 2:
            return [(2, 0), (2, 1), (4, 0)]
        q, r = divmod(n - 1, 2)
        if r == 0:   # n = 2q + 1
            return [(4 * q - 1, 0), (4 * q - 1, 1), (4 * q + 1, 0), (4 * q + 1, 1)]
        return [(4 * q, 1), (4 * q + 2, 0), (4 * q + 2, 1), (4 * q + 4, 0)]
    return None


def explicit_connection(c: CurveSpec, N: int) -> ConnectionMatrix | None:
    """Permutation-type connection matrix for curves with closed-form bases, else ``None``."""
    m, d = c.m, c.d
    even = c.is_even and d == 4
    if _explicit_rows(m, d, 1, even) is None:
        return None
    C = ConnectionMatrix(m, d)
    ell = 0
    for n in range(N + 1):
        blk = []
        for k, (j, part) in enumerate(_explicit_rows(m, d, n, even), start=1):
            blk.append(Column(n, k, ell, part if m == 2 else None,
                              SparseColumn(flat_row(j, part, m), np.ones(1))))
            ell += 1
        C.blocks.append(blk)
    return C


def explicit_basis(c: CurveSpec, N: int, ops: MultOps | None = None) -> ConnectionResult | None:
    """Closed-form basis (connection matrix a permutation) with its Jacobi blocks.

    Returns ``None`` for curves without a closed-form basis.
    """
    if not c.validated:
        c = validate_curve(c)
    C = explicit_connection(c, N)
    if C is None:
        return None
    if ops is None:
        ops = build_mult_ops(c, N)
    pair = assemble_jacobi(C, ops)
    return ConnectionResult(c, ops, C, pair, Diagnostics(a_asymmetry=pair.asymmetry),
                            {"explicit": True})


# --------------------------------------------------------------------------- evaluation

def eval_Y(C: ConnectionMatrix, c: CurveSpec, ops: MultOps, x, y, N: int | None = None,
           check: bool = True) -> np.ndarray:
    """Values of ``Y_{n,k}`` (columns in ell order, degrees ``0..N``) at points ``(x, y)``."""
    N = C.N if N is None else N
    cols = [col for b in C.blocks[:N + 1] for col in b]
    top = max(col.vec.stop for col in cols) - 1
    jmax = row_index(top, c.m)[0]
    P = pbasis_eval(c, ops, x, y, jmax, check=check)
    out = np.empty((P.shape[0], len(cols)))
    for i, col in enumerate(cols):
        out[:, i] = P[:, col.vec.start:col.vec.stop] @ col.vec.values
    return out


def canonical_signs(C: np.ndarray, rtol: float = SIGN_RTOL) -> np.ndarray:
    """Flip columns so that the first entry above ``rtol * max|column|`` is positive."""
    C = np.array(C, dtype=float, copy=True)
    for j in range(C.shape[1]):
        col = C[:, j]
        big = np.flatnonzero(np.abs(col) > rtol * np.max(np.abs(col), initial=0.0))
        if big.size and col[big[0]] < 0:
            C[:, j] = -col
    return C


# --------------------------------------------------------------------------- cross-check

def entrywise_connection(c: CurveSpec, N: int, ops: MultOps | None = None,
                         secondary: str = "y") -> np.ndarray:
    """Connection matrix from the coefficient recursions written entry by entry.

    For each new column ``(n+1, k')`` generated from ``Op Y_{n,k}`` and each row
    ``j`` in its zero bounds,

        b C[j, l(n+1,k')] = sum_r Op[r, j] C[r, l(n,k)]
                            - sum_r B_{n-1}[k, r] C[j, l(n-1,r)]
                            - sum_r A_n[r, k] C[j, l(n,r)]
                            - sum_{r<k'} B_n[r, k] C[j, l(n+1,r)]

    with ``b > 0`` fixed by the unit norm. For ``m = 2`` only rows of the
    column's part enter. No re-orthogonalization; dense storage; meant for
    small ``N`` as an independent check of :func:`build_connection`.
    """
    if not c.validated:
        c = validate_curve(c)
    m, d = c.m, c.d
    if ops is None:
        ops = build_mult_ops(c, N)
    ncols = block_offset(N + 1, m, d)
    nrows = ops.exact_rows
    Cd = np.zeros((nrows, ncols))
    Cd[0, 0] = 1.0
    opmat = {"x": ops.X.to_dense()[:nrows, :nrows], "y": ops.Y.to_dense()[:nrows, :nrows]}
    Amat = {"x": [], "y": []}
    Bmat = {"x": [], "y": []}
    parts = {0: 0}

    def cols_of(n):
        return list(range(block_offset(n, m, d), block_offset(n + 1, m, d)))

    def finalize(n):
        cn = Cd[:, cols_of(n)]
        for op in ("x", "y"):
            Amat[op].append(0.5 * (cn.T @ opmat[op] @ cn + (cn.T @ opmat[op] @ cn).T))
            if n >= 1:
                Bmat[op].append(cn.T @ opmat[op] @ Cd[:, cols_of(n - 1)])

    finalize(0)
    for n in range(N):
        seq = sequence(n, m, d, secondary)
        src = cols_of(n)
        prev = cols_of(n - 1) if n >= 1 else []
        tgt = cols_of(n + 1)
        Bnew = np.zeros((len(tgt), len(src)))
        for kp, (op, ks) in enumerate(seq, start=1):
            Op = opmat[op]
            zb = zero_bounds(m, d, n + 1, kp)
            part = None if m == 1 else parts[src[ks - 1]] ^ (op == "y")
            s_col = src[ks - 1]
            # B_n[r, k] for r < k' are inner products with the new columns
            for r in range(kp - 1):
                Bnew[r, ks - 1] = Cd[:, tgt[r]] @ (Op @ Cd[:, s_col])
            vals = {}
            for j in range(zb.jmin, zb.jmax + 1):
                if m == 2 and row_part(j, 2) != part:
                    continue
                acc = 0.0
                for r in range(max(0, j - Op.shape[0]), nrows):
                    if Op[r, j] != 0.0:
                        acc += Op[r, j] * Cd[r, s_col]
                for r, cl in enumerate(prev):
                    acc -= Bmat[op][n - 1][ks - 1, r] * Cd[j, cl]
                for r, cl in enumerate(src):
                    acc -= Amat[op][n][r, ks - 1] * Cd[j, cl]
                for r in range(kp - 1):
                    acc -= Bnew[r, ks - 1] * Cd[j, tgt[r]]
                vals[j] = acc
            b = float(np.sqrt(sum(v * v for v in vals.values())))
            if not b >= BREAKDOWN_TOL:
                raise LanczosBreakdown(n + 1, kp, b)
            for j, v in vals.items():
                Cd[j, tgt[kp - 1]] = v / b
            parts[tgt[kp - 1]] = part
        finalize(n + 1)
    return Cd
