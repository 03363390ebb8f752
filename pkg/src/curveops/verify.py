"""Independent oracles and checks for the connection engine.

* :func:`monomial_oracle` orthonormalizes the degree-graded monomial basis on the
  curve, either by graded Gram-Schmidt at quadrature nodes (default) or by a
  dense Cholesky factorization of its quadrature Gram matrix.
* :func:`span_equivalence` and :func:`leakage` compare engine blocks with
  oracle blocks through their quadrature cross-Gram matrices.
* :func:`stieltjes` recomputes univariate recurrence coefficients by the
  discretized Stieltjes procedure.
* :func:`audit` collects orthonormality, recurrence, commutator, bandwidth,
  zero-pattern and parity checks into a :class:`VerificationReport`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import chebyshev
from scipy.linalg import cholesky, solve_triangular

from .connection import BlockJacobiPair, ConnectionMatrix, assemble_jacobi, eval_Y, zero_bounds
from .curvebasis import CurveSpec, MultOps, block_offset, curve_nodes, row_index, row_part
from .errors import OracleInfeasible
from .univar import QuadratureRule, SymTridiag, classical_jacobi

ORACLE_COND_MAX = 1e12
ZERO_TOL = 1e-12


# --------------------------------------------------------------------------- oracle

def monomial_exponents(n: int, m: int, d: int) -> list[tuple[int, int]]:
    """Exponents ``(a, b)`` of the degree-``n`` monomials ``x^a y^b`` on the curve.

    ``x^{n-k} y^k`` (``k = 0..n``) while ``n < d``, then ``x^{d-k} y^{n+k-d}``
    (``k = 1..d``). When ``d < m`` the powers of ``y`` are capped at ``m - 1``
    instead: ``x^{n-k} y^k`` for ``k = 0..min(n, m-1)``.
    """
    if d < m:
        return [(n - k, k) for k in range(min(n, m - 1) + 1)]
    if n <= d - 1:
        return [(n - k, k) for k in range(n + 1)]
    return [(d - k, n + k - d) for k in range(1, d + 1)]


@dataclass(eq=False)
class OracleBasis:
    """Orthonormal polynomials ``M L^{-T}`` for the graded monomial basis ``M``.

    ``values[:, i]`` holds the ``i``-th orthonormal polynomial at the quadrature
    nodes ``(x, y)`` with weights ``wt``; columns are ordered by degree, then by
    :func:`monomial_exponents`. The Cholesky variants also keep ``coef`` (the
    coefficients in the columns of ``M``) and can be evaluated anywhere.
    """

    curve: CurveSpec
    N: int
    exponents: list
    degrees: np.ndarray
    x: np.ndarray
    y: np.ndarray
    wt: np.ndarray
    values: np.ndarray
    condition: float
    kind: str
    coef: np.ndarray | None = None
    xmap: tuple = (0.0, 1.0)
    yscale: float = 1.0

    def basis_values(self, x, y) -> np.ndarray:
        if self.kind == "graded":
            raise ValueError("the graded oracle only has values at its own nodes")
        return _basis_values(self.exponents, self.kind, x, y, self.xmap, self.yscale)

    def __call__(self, x, y) -> np.ndarray:
        """Values of all oracle polynomials at ``(x, y)`` (Cholesky variants only)."""
        return self.basis_values(x, y) @ self.coef

    def block(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.degrees == n)


def _basis_values(exps, kind, x, y, xmap, yscale) -> np.ndarray:
    xs = (np.asarray(x, dtype=float) - xmap[0]) / xmap[1]
    ys = np.asarray(y, dtype=float) / yscale
    amax = max(a for a, _ in exps)
    bmax = max(b for _, b in exps)
    if kind == "chebyshev":
        Tx = chebyshev.chebvander(xs, amax)
        Ty = chebyshev.chebvander(ys, bmax)
    else:
        Tx = np.vander(xs, amax + 1, increasing=True)
        Ty = np.vander(ys, bmax + 1, increasing=True)
    return np.column_stack([Tx[:, a] * Ty[:, b] for a, b in exps])


def _x_degree(a: int, b: int, m: int, d: int) -> float:
    return a + b * d / m


def oracle_nquad(c: CurveSpec, N: int) -> int:
    """Gauss points that integrate every product of degree-``<= N`` polynomials exactly."""
    m, d = c.m, c.d
    top = max(_x_degree(a, b, m, d) for n in range(N + 1) for a, b in monomial_exponents(n, m, d))
    return int(np.ceil(top)) + 8


def _graded_parent(n: int, a: int, b: int, m: int, d: int):
    """Operator and parent monomial generating ``x^a y^b`` from degree ``n - 1``.

    Multiplying the parent's orthonormal polynomial by ``x`` (or ``y``) gives
    ``x^a y^b`` plus monomials that come earlier in the graded order, so
    Gram-Schmidt on these candidates reproduces ``M L^{-T}``.
    """
    if b >= 1 and (a, b - 1) in monomial_exponents(n - 1, m, d):
        return "y", (a, b - 1)
    return "x", (a - 1, b)


def monomial_oracle(c: CurveSpec, N: int, kind: str = "graded",
                    nquad: int | None = None, cond_max: float = ORACLE_COND_MAX) -> OracleBasis:
    """Orthonormalize the graded monomial basis of degrees ``0..N``.

    Parameters
    ----------
    kind : {'graded', 'chebyshev', 'monomial'}
        ``'monomial'`` forms the quadrature Gram matrix of ``x^a y^b`` and uses
        its Cholesky factor ``L``: the polynomials are ``M L^{-T}``.
        ``'chebyshev'`` does the same with ``T_a(x') T_b(y')`` (``x'``, ``y'``
        scaled to about ``[-1, 1]``), which has the same graded span.
        ``'graded'`` computes the same polynomials by Gram-Schmidt in the
        graded order, generating the candidate for ``x^a y^b`` as ``x`` or
        ``y`` times the already orthonormalized polynomial of its parent
        monomial. This replaces ``M`` by ``M U`` with ``U`` upper triangular,
        which leaves ``M L^{-T}`` unchanged but avoids the huge condition
        number of ``M``. Reported condition is that of the candidate Gram.
    cond_max : float
        Gate on the equilibrated Gram condition number.

    Raises
    ------
    OracleInfeasible
        When the Gram matrix has condition number above ``cond_max``.
    """
    if kind not in ("graded", "chebyshev", "monomial"):
        raise ValueError(f"unknown oracle basis {kind!r}")
    m, d = c.m, c.d
    exps, degs = [], []
    for n in range(N + 1):
        e = monomial_exponents(n, m, d)
        exps += e
        degs += [n] * len(e)
    nq = oracle_nquad(c, N) if nquad is None else nquad
    x, y, wt = curve_nodes(c, nq)
    if kind == "graded":
        return _graded_oracle(c, N, exps, np.array(degs), x, y, wt, cond_max)
    if c.w.bounded:
        lo, hi = c.w.support
        xmap = (0.5 * (lo + hi), 0.5 * (hi - lo))
    else:
        xmap = (0.0, 1.0)
    yscale = float(np.max(np.abs(y))) or 1.0
    M = _basis_values(exps, kind, x, y, xmap, yscale)
    G = (M * wt[:, None]).T @ M
    cond = _equilibrated_condition(G)
    if not cond <= cond_max:
        raise OracleInfeasible(cond, N)
    L = cholesky(G, lower=True)
    coef = solve_triangular(L, np.eye(len(exps)), lower=True).T
    return OracleBasis(c, N, exps, np.array(degs), x, y, wt, M @ coef, cond, kind,
                       coef, xmap, yscale)


def _equilibrated_condition(G: np.ndarray) -> float:
    s = 1.0 / np.sqrt(np.diag(G))
    ev = np.linalg.eigvalsh(G * s[:, None] * s[None, :])
    return float(ev[-1] / ev[0]) if ev[0] > 0 else np.inf


class _DegreeProjector:
    """Projection of node values onto functions ``A(x) + y B(x)`` with bounded
    ``deg A``, ``deg B``, using the orthonormal polynomials of ``w`` at the nodes."""

    def __init__(self, c: CurveSpec, x, y, wt):
        self.m = c.m
        nx = len(x) if c.m == 1 else len(x) // 2
        xs, ws = x[:nx], wt[:nx]
        P = classical_jacobi(c.w, nx).eval_ops(xs, nx - 1) * np.sqrt(ws)[:, None]
        self.sw = np.sqrt(ws)
        self.UA = P
        if c.m == 2:
            self.UB = np.linalg.qr(P * y[:nx, None])[0]
        self.nx = nx

    def _proj(self, U, v, deg):
        if deg < 0:
            return np.zeros_like(v)
        Uk = U[:, :deg + 1]
        return Uk @ (Uk.T @ (self.sw * v)) / self.sw

    def __call__(self, f, degA, degB):
        if self.m == 1:
            return self._proj(self.UA, f, degA)
        fp, fm = f[:self.nx], f[self.nx:]
        A = self._proj(self.UA, 0.5 * (fp + fm), degA)
        yB = self._proj(self.UB, 0.5 * (fp - fm), degB)
        return np.concatenate([A + yB, A - yB])


def _part_degrees(exps, m, d):
    """Running maxima of the x-degrees of the ``A`` and ``B`` parts of ``x^a y^b``."""
    degA, degB, outA, outB = -1, -1, [], []
    for a, b in exps:
        if m == 1:
            degA = max(degA, a + b * d)
        elif b % 2 == 0:
            degA = max(degA, a + (b // 2) * d)
        else:
            degB = max(degB, a + (b // 2) * d)
        outA.append(degA)
        outB.append(degB)
    return outA, outB


def _graded_oracle(c, N, exps, degs, x, y, wt, cond_max) -> OracleBasis:
    m, d = c.m, c.d
    index = {e: i for i, e in enumerate(exps)}
    proj = _DegreeProjector(c, x, y, wt)
    dA, dB = _part_degrees(exps, m, d)
    Q = np.zeros((len(x), len(exps)))
    Q[:, 0] = 1.0 / np.sqrt(np.sum(wt))
    worst = 1.0
    for i in range(1, len(exps)):
        a, b = exps[i]
        op, parent = _graded_parent(int(degs[i]), a, b, m, d)
        v = (x if op == "x" else y) * Q[:, index[parent]]
        v0 = np.sqrt(np.sum(wt * v * v))
        for _ in range(2):
            v = v - Q[:, :i] @ ((Q[:, :i] * wt[:, None]).T @ v)
            # span{x^a y^b : earlier} has bounded x-degree in each y-part
            v = proj(v, dA[i], dB[i])
        nv = np.sqrt(np.sum(wt * v * v))
        # ratio of candidate norm to its new component bounds the conditioning
        worst = max(worst, (v0 / nv) ** 2 if nv > 0 else np.inf)
        if not worst <= cond_max:
            raise OracleInfeasible(worst, N)
        Q[:, i] = v / nv
    return OracleBasis(c, N, exps, degs, x, y, wt, Q, worst, "graded")


# --------------------------------------------------------------------------- comparisons

def quadrature_gram(F: np.ndarray, G: np.ndarray, wt: np.ndarray) -> np.ndarray:
    """``<f_i, g_j>`` for value matrices ``F`` (npts x p) and ``G`` (npts x q)."""
    return (F * wt[:, None]).T @ G


def span_equivalence(E: np.ndarray, O: np.ndarray, wt: np.ndarray) -> float:
    """Orthogonality defect ``max |M^T M - I|`` of the cross-Gram ``M = <E, O>``.

    ``E`` and ``O`` hold values of two orthonormal families at quadrature nodes.
    The defect is near zero iff both span the same space.
    """
    M = quadrature_gram(E, O, wt)
    return float(np.max(np.abs(M.T @ M - np.eye(M.shape[1]))))


def leakage(E: np.ndarray, O_lower: np.ndarray, wt: np.ndarray) -> float:
    """Largest inner product between an engine block and lower-degree oracle blocks."""
    if O_lower.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(quadrature_gram(E, O_lower, wt))))


@dataclass
class OracleComparison:
    defects: list
    leakages: list
    condition: float

    @property
    def max_defect(self) -> float:
        return max(self.defects)

    @property
    def max_leakage(self) -> float:
        return max(self.leakages)


def compare_with_oracle(C: ConnectionMatrix, c: CurveSpec, ops: MultOps, N: int,
                        kind: str = "graded", nquad: int | None = None) -> OracleComparison:
    """Span-equivalence defect and leakage of engine blocks ``0..N`` against the oracle."""
    top = max(col.vec.stop for b in C.blocks[:N + 1] for col in b)
    nq = max(oracle_nquad(c, N), row_index(top, c.m)[0] + 8) if nquad is None else nquad
    ob = monomial_oracle(c, N, kind, nquad=nq)
    x, y, wt = ob.x, ob.y, ob.wt
    E = eval_Y(C, c, ops, x, y, N, check=False)
    O = ob.values
    defects, leaks = [], []
    for n in range(N + 1):
        cols = slice(block_offset(n, c.m, c.d), block_offset(n + 1, c.m, c.d))
        On = O[:, ob.block(n)]
        defects.append(span_equivalence(E[:, cols], On, wt))
        leaks.append(leakage(E[:, cols], O[:, ob.degrees < n], wt))
    return OracleComparison(defects, leaks, ob.condition)


def stieltjes(rule: QuadratureRule, n: int) -> SymTridiag:
    """Recurrence coefficients of the discrete measure ``rule`` by the Stieltjes procedure.

    Vectors are normalized at every step, so the first ``n`` coefficients are
    accurate as long as the rule integrates polynomials of degree ``2n + 1``.
    """
    x, w = rule.nodes, rule.weights
    mass = float(np.sum(w))
    alpha, beta = np.zeros(n), np.zeros(n)
    q_prev = np.zeros_like(x)
    q = np.full_like(x, 1.0 / np.sqrt(mass))
    b_prev = 0.0
    for k in range(n):
        alpha[k] = np.sum(w * x * q * q)
        r = (x - alpha[k]) * q - b_prev * q_prev
        beta[k] = np.sqrt(np.sum(w * r * r))
        q_prev, q, b_prev = q, r / beta[k], beta[k]
    return SymTridiag(alpha, beta, mass)


def weighted_rule(rule: QuadratureRule, f) -> QuadratureRule:
    """``rule`` with weights multiplied by ``f(nodes)``."""
    return QuadratureRule(rule.nodes, rule.weights * f(rule.nodes))


# --------------------------------------------------------------------------- audit

@dataclass
class Tolerances:
    orthonormality: float = 1e-11
    quadrature_gram: float = 1e-10
    recurrence: float = 1e-10
    commutator: float = 1e-10
    symmetry: float = 1e-12
    zero: float = ZERO_TOL
    span: float = 1e-8
    leakage: float = 1e-9

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive, got {v}")


@dataclass
class VerificationReport:
    """Results of :func:`audit`. Every field is always present; ``None`` means not run."""

    m: int
    d: int
    N: int
    orthonormality: float
    quadrature_gram: float | None
    recurrence: float
    commutator: float
    symmetry: float
    bandwidth_lower: int
    bandwidth_upper: int
    bandwidth_expected: int | None
    bandwidth_failures: list
    zero_violations: list
    zeros_in_observed: int
    parity_violations: list
    nonpositive_normalizers: list
    span_defects: list | None
    leakages: list | None
    seconds_per_degree: list
    passed: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def failures(self) -> list:
        return [k for k, v in self.passed.items() if not v]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ok"] = self.ok
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), default=float, **kw)

    @classmethod
    def from_json(cls, s: str) -> "VerificationReport":
        data = json.loads(s)
        data.pop("ok", None)
        return cls(**data)


def expected_bandwidth(m: int, d: int) -> int:
    """Bandwidth of ``C`` for degrees ``n >= d`` (zero for the closed-form cases)."""
    return max(0, (d - 2) * (d - 1) // 2 if m == 1 else d * (d - 3) // 2)


def orthonormality_residual(C: ConnectionMatrix) -> float:
    S = C.to_sparse()
    G = (S.T @ S).toarray()
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def recurrence_residual(C: ConnectionMatrix, pair: BlockJacobiPair, ops: MultOps) -> float:
    """``max |Op C_n - C_{n-1} B_{n-1}^T - C_n A_n - C_{n+1} B_n|`` over ``n < N``, both ops."""
    N = C.N
    nr = C.nrows + ops.Y.lower + 1
    worst = 0.0
    for op in ("x", "y"):
        Op = ops.op(op).to_dense()[:nr, :nr]
        A, B = pair.A(op), pair.B(op)
        for n in range(N):
            Cn = C.block_dense(n, nr)
            R = Op @ Cn - Cn @ A[n] - C.block_dense(n + 1, nr) @ B[n]
            if n >= 1:
                R -= C.block_dense(n - 1, nr) @ B[n - 1].T
            worst = max(worst, float(np.max(np.abs(R))))
    return worst


def commutator_residual(pair: BlockJacobiPair) -> float:
    """``max |J_x J_y - J_y J_x|`` on blocks ``0..N-1`` of the finite sections."""
    Jx, Jy = pair.to_dense("x"), pair.to_dense("y")
    keep = sum(a.shape[0] for a in pair.Ax[:-1])
    K = Jx @ Jy - Jy @ Jx
    return float(np.max(np.abs(K[:keep, :keep]), initial=0.0))


def _column_support(vals: np.ndarray, start: int, tol: float):
    nz = np.flatnonzero(np.abs(vals) > tol)
    return (start + nz[0], start + nz[-1]) if nz.size else (None, None)


def audit(C: ConnectionMatrix, pair: BlockJacobiPair | None, ops: MultOps, c: CurveSpec,
          N: int | None = None, *, tol: Tolerances | None = None, nquad: int | None = None,
          oracle: bool = False, oracle_N: int = 8, oracle_kind: str = "graded",
          normalizers=None, seconds=None) -> VerificationReport:
    """Run every structural and numerical check on computed blocks ``0..N``."""
    tol = Tolerances() if tol is None else tol
    m, d = c.m, c.d
    N = C.N if N is None else N
    if N < C.N:
        C = ConnectionMatrix(m, d, C.blocks[:N + 1])
    if pair is None:
        pair = assemble_jacobi(C, ops, check=False)
    ortho = orthonormality_residual(C)
    rec = recurrence_residual(C, pair, ops)
    comm = commutator_residual(pair)
    sym = max(float(np.max(np.abs(A - A.T))) for A in pair.Ax + pair.Ay)
    sym = max(sym, pair.asymmetry)

    lam = expected_bandwidth(m, d)
    lo_bw = up_bw = 0
    bw_fail, zero_viol, par_viol = [], [], []
    zeros_obs = 0
    for blk in C.blocks:
        for col in blk:
            v = col.vec
            rows = np.arange(v.start, v.stop)
            first, last = _column_support(v.values, v.start, tol.zero)
            if col.n >= 1:
                zb = zero_bounds(m, d, col.n, col.k)
                outside = (rows < zb.jmin) | (rows > zb.jmax)
                if np.any(np.abs(v.values[outside]) > tol.zero):
                    zero_viol.append([col.n, col.k])
                if m == 2:
                    wrong = row_part(rows, 2) != zb.part
                    if np.any(np.abs(v.values[wrong]) > tol.zero):
                        par_viol.append([col.n, col.k])
                for j in (zb.obs_jmin, zb.obs_jmax):
                    if v.start <= j < v.stop and abs(v.values[j - v.start]) <= tol.zero:
                        zeros_obs += 1
            if col.n >= d and first is not None:
                lo_bw = max(lo_bw, int(last - col.ell))
                up_bw = max(up_bw, int(col.ell - first))
                if last - col.ell > lam or col.ell - first > lam:
                    bw_fail.append([col.n, col.k])

    nonpos = [] if normalizers is None else [[n, k] for n, k, *_, b in normalizers if not b > 0]

    qgram = None
    if nquad is not None or oracle:
        top = max(col.vec.stop for col in C.columns)
        nq = row_index(top, m)[0] + 8 if nquad is None else nquad
        x, y, wt = curve_nodes(c, nq)
        Yv = eval_Y(C, c, ops, x, y, N, check=False)
        G = quadrature_gram(Yv, Yv, wt)
        qgram = float(np.max(np.abs(G - np.eye(G.shape[0]))))

    defects = leaks = None
    if oracle:
        cmp = compare_with_oracle(C, c, ops, min(N, oracle_N), oracle_kind)
        defects, leaks = cmp.defects, cmp.leakages

    rep = VerificationReport(
        m=m, d=d, N=N, orthonormality=ortho, quadrature_gram=qgram, recurrence=rec,
        commutator=comm, symmetry=sym, bandwidth_lower=lo_bw, bandwidth_upper=up_bw,
        bandwidth_expected=lam if N >= d else None, bandwidth_failures=bw_fail,
        zero_violations=zero_viol, zeros_in_observed=zeros_obs, parity_violations=par_viol,
        nonpositive_normalizers=nonpos, span_defects=defects, leakages=leaks,
        seconds_per_degree=list(seconds or []))
    rep.passed = {
        "orthonormality": ortho < tol.orthonormality,
        "recurrence": rec < tol.recurrence,
        "commutator": comm < tol.commutator,
        "symmetry": sym < tol.symmetry,
        "bandwidth": not bw_fail,
        "zero_bounds": not zero_viol,
        "parity": not par_viol,
        "normalizers": not nonpos,
    }
    if qgram is not None:
        rep.passed["quadrature_gram"] = qgram < tol.quadrature_gram
    if defects is not None:
        rep.passed["span_equivalence"] = max(defects) < tol.span
        rep.passed["leakage"] = max(leaks) < tol.leakage
    return rep


def audit_result(res, *, tol: Tolerances | None = None, **kw) -> VerificationReport:
    """:func:`audit` on the output of ``build_connection`` or ``explicit_basis``."""
    return audit(res.C, res.pair, res.ops, res.curve, tol=tol,
                 normalizers=res.diag.normalizers, seconds=res.diag.block_seconds, **kw)


__all__ = [
    "OracleBasis", "OracleComparison", "Tolerances", "VerificationReport", "audit",
    "audit_result", "commutator_residual", "compare_with_oracle",
    "expected_bandwidth", "leakage", "monomial_exponents", "monomial_oracle",
    "oracle_nquad", "orthonormality_residual", "quadrature_gram", "recurrence_residual",
    "span_equivalence", "stieltjes", "weighted_rule",
]
