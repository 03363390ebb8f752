"""Univariate orthonormal polynomials: classical Jacobi matrices, Gauss rules,
the Gram matrix ``phi(J(w))``, the raising matrix and the semiclassical Jacobi
matrix ``J(phi w)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy import special
from scipy.special import gammaln

from .errors import InvalidWeight, NotPositiveDefinite, PhiNotPositive, QuadratureFailure
from .polycore import (BandedMatrix, Poly, banded_add_identity, banded_matmul,
                       cholesky_banded)

FAMILIES = ("legendre", "jacobi", "laguerre", "hermite")
SEMICLASSICAL_ASYM_TOL = 1e-11


@dataclass(frozen=True)
class WeightSpec:
    """Classical weight descriptor.

    Parameters
    ----------
    family : str
        One of ``legendre``, ``jacobi``, ``laguerre``, ``hermite``.
    a, b : float
        Jacobi exponents ``(1-x)^a (1+x)^b``; Laguerre uses ``a`` for ``x^a e^{-x}``.
    """

    family: str = "legendre"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise InvalidWeight(f"unknown weight family {self.family!r}")
        if fam == "legendre" and (self.a != 0 or self.b != 0):
            raise InvalidWeight("Legendre weight takes no parameters")
        if fam in ("jacobi", "laguerre") and not self.a > -1:
            raise InvalidWeight(f"parameter a={self.a} must exceed -1")
        if fam == "jacobi" and not self.b > -1:
            raise InvalidWeight(f"parameter b={self.b} must exceed -1")
        if fam in ("laguerre", "hermite") and self.b != 0:
            raise InvalidWeight(f"{fam} weight takes no parameter b")
        if fam == "hermite" and self.a != 0:
            raise InvalidWeight("Hermite weight takes no parameters")

    @property
    def support(self) -> tuple[float, float]:
        return {"legendre": (-1.0, 1.0), "jacobi": (-1.0, 1.0),
                "laguerre": (0.0, np.inf), "hermite": (-np.inf, np.inf)}[self.family]

    @property
    def bounded(self) -> bool:
        return self.family in ("legendre", "jacobi")

    @property
    def is_even(self) -> bool:
        return self.family in ("legendre", "hermite") or (
            self.family == "jacobi" and self.a == self.b)

    @property
    def mass(self) -> float:
        """Total mass ``<1, 1>_w``."""
        if self.family in ("legendre", "jacobi"):
            a, b = self.a, self.b
            return float(np.exp((a + b + 1) * np.log(2.0) + gammaln(a + 1) + gammaln(b + 1)
                                - gammaln(a + b + 2)))
        if self.family == "laguerre":
            return float(np.exp(gammaln(self.a + 1)))
        return float(np.sqrt(np.pi))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family in ("legendre", "jacobi"):
            return (1 - x) ** self.a * (1 + x) ** self.b
        if self.family == "laguerre":
            return x ** self.a * np.exp(-x)
        return np.exp(-x * x)

    def to_dict(self) -> dict:
        return {"family": self.family, "a": self.a, "b": self.b}


@dataclass(frozen=True, eq=False)
class SymTridiag:
    """Section of a Jacobi matrix: diagonal ``alpha``, off-diagonal ``beta``.

    ``beta`` has the same length as ``alpha``; its last entry couples the
    section to the row beyond it, so a section of size ``M`` is exact on
    ``M - 1`` rows when viewed as a banded matrix and on all ``M`` rows once
    the trailing ``beta`` is used. ``mass`` is ``<1, 1>`` for the weight, which
    fixes ``p_0``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        if len(self.beta) != len(self.alpha):
            raise ValueError("alpha and beta must have equal length")
        if np.any(self.beta <= 0):
            raise ValueError("off-diagonal entries must be positive")

    @property
    def size(self) -> int:
        return len(self.alpha)

    def section(self, M: int) -> "SymTridiag":
        if M > self.size:
            raise ValueError(f"requested {M} coefficients, only {self.size} available")
        return SymTridiag(self.alpha[:M], self.beta[:M], self.mass)

    def to_banded(self) -> BandedMatrix:
        """Square ``size x size`` section; the last row misses ``beta[-1]``."""
        M = self.size
        bands = np.zeros((3, M))
        bands[0, 1:] = self.beta[:-1]
        bands[1] = self.alpha
        bands[2, :-1] = self.beta[:-1]
        return BandedMatrix(M, M, 1, 1, bands, M - 1, True)

    def to_dense(self) -> np.ndarray:
        b = self.beta[:-1]
        return np.diag(self.alpha) + np.diag(b, 1) + np.diag(b, -1)

    def eval_ops(self, x, n: int) -> np.ndarray:
        """Orthonormal polynomials ``p_0..p_n`` at ``x``; shape ``x.shape + (n+1,)``."""
        if n > self.size:
            raise ValueError(f"degree {n} needs {n} recurrence coefficients")
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (n + 1,))
        out[..., 0] = 1.0 / np.sqrt(self.mass)
        if n >= 1:
            out[..., 1] = (x - self.alpha[0]) * out[..., 0] / self.beta[0]
        for k in range(1, n):
            out[..., k + 1] = ((x - self.alpha[k]) * out[..., k]
                               - self.beta[k - 1] * out[..., k - 1]) / self.beta[k]
        return out


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))

    def __len__(self):
        return len(self.nodes)


def classical_jacobi(w: WeightSpec, M: int) -> SymTridiag:
    """Closed-form recurrence coefficients ``alpha_0..alpha_{M-1}``, ``beta_0..beta_{M-1}``
    of the orthonormal polynomials for a classical weight.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    n = np.arange(M, dtype=float)
    if w.family in ("legendre", "jacobi"):
        a, b = w.a, w.b
        s = 2 * n + a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = (b * b - a * a) / (s * (s + 2))
            beta = np.sqrt(4 * (n + 1) * (n + a + 1) * (n + b + 1) * (n + a + b + 1)
                           / ((s + 1) * (s + 2) ** 2 * (s + 3)))
        # n = 0 has removable singularities when a + b is 0 or -1
        alpha[0] = (b - a) / (a + b + 2)
        beta[0] = np.sqrt(4 * (a + 1) * (b + 1) / ((a + b + 2) ** 2 * (a + b + 3)))
    elif w.family == "laguerre":
        alpha = 2 * n + w.a + 1
        beta = np.sqrt((n + 1) * (n + w.a + 1))
    else:
        alpha = np.zeros(M)
        beta = np.sqrt((n + 1) / 2)
    return SymTridiag(alpha, beta, w.mass)


def gauss_from_jacobi(J: SymTridiag, M: int | None = None) -> QuadratureRule:
    """Golub-Welsch: eigenvalues of the ``M`` section are nodes, squared first
    eigenvector components times the mass are weights."""
    M = J.size if M is None else M
    try:
        nodes, V = eigh_tridiagonal(J.alpha[:M], J.beta[:M - 1])
    except np.linalg.LinAlgError as exc:
        raise QuadratureFailure(str(exc)) from exc
    weights = J.mass * V[0] ** 2
    if not (np.all(np.isfinite(nodes)) and np.all(weights >= 0)):
        raise QuadratureFailure("eigen-solver returned invalid nodes or weights")
    return QuadratureRule(nodes, weights)


def gauss_rule(w: WeightSpec, M: int) -> QuadratureRule:
    """``M``-point Gauss rule for ``w``, exact for degree ``2M - 1``.

    Uses scipy's classical rules, which refine nodes by Newton iteration and
    keep full relative accuracy in the tiny weights of unbounded supports.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if w.family == "legendre":
        x, wt = special.roots_legendre(M)
    elif w.family == "jacobi":
        x, wt = special.roots_jacobi(M, w.a, w.b)
    elif w.family == "laguerre":
        x, wt = special.roots_genlaguerre(M, w.a)
    else:
        x, wt = special.roots_hermite(M)
    if not (np.all(np.isfinite(x)) and np.all(wt >= 0)):
        raise QuadratureFailure(f"invalid {M}-point rule for {w.family}")
    return QuadratureRule(np.asarray(x, dtype=float), np.asarray(wt, dtype=float))


def gram_phi(J: SymTridiag, phi: Poly) -> BandedMatrix:
    """``phi(J)`` by Horner on banded sections.

    A Jacobi section of size ``M`` gives a result with ``M - d`` exact rows.
    """
    d = max(phi.degree, 0)
    Jb = J.to_banded()
    M = J.size
    out = BandedMatrix(M, M, 0, 0, np.full((1, M), phi.coeffs[-1]), M, True)
    for c in reversed(phi.coeffs[:-1]):
        out = banded_add_identity(banded_matmul(out, Jb), c)
    assert out.exact_rows == M - d or d == 0
    return out


@dataclass(frozen=True, eq=False)
class Semiclassical:
    """Raising matrix ``R`` (bandwidths ``(0, d)``) and ``J(phi w)``."""

    R: BandedMatrix
    J: SymTridiag
    asymmetry: float

    def r(self, k: int, n: int) -> float:
        if not (0 <= k <= n < self.R.ncols):
            raise IndexError(f"r[{k},{n}] outside the exact section")
        return self.R[k, n]


def raise_and_semiclassical(J: SymTridiag, phi: Poly) -> Semiclassical:
    """Factor ``phi(J(w)) = L L^T`` and form ``R = L^T`` and ``J(phi w) = R J(w) R^{-1}``.

    From ``P(w) = P(phi w) R`` and ``x P = P J`` for both families,
    ``J(phi w) R = R J(w)``; columns of ``J(phi w)`` are solved for one at a
    time by back substitution. Entries that must vanish for a tridiagonal
    result are checked, and the result is symmetrized after checking its
    asymmetry.

    Returns
    -------
    Semiclassical
        ``R`` exact on its first ``M - d`` columns and ``J(phi w)`` of size
        ``M - d - 1`` for a Jacobi section of size ``M``.
    """
    d = max(phi.degree, 0)
    Phi = gram_phi(J, phi)
    try:
        L = cholesky_banded(Phi.principal(Phi.exact_rows), d)
    except NotPositiveDefinite as exc:
        raise PhiNotPositive(exc.pivot_index, exc.pivot_value) from None
    R = L.transpose()
    Me = R.ncols
    K = Me - 1
    if K < 1:
        raise ValueError("Jacobi section too small for this phi")
    # Rd[t, n] = r_{n-t, n}
    Rd = np.zeros((d + 1, Me))
    for t in range(d + 1):
        Rd[t, t:] = R.diagonal(-t)
    alpha, beta = J.alpha, J.beta
    lo_off = d + 1
    width = d + 3
    # cols[n] holds K[n - lo_off + i, n] for i in range(width)
    cols = np.zeros((K, width))
    worst_fill = 0.0
    for n in range(K):
        v = np.zeros(width)
        # (R J)[:, n] = R[:, n-1] beta_{n-1} + R[:, n] alpha_n + R[:, n+1] beta_n
        for src, coef in ((n - 1, beta[n - 1] if n else 0.0), (n, alpha[n]), (n + 1, beta[n])):
            if src < 0 or coef == 0.0:
                continue
            for t in range(min(d, src) + 1):
                row = src - t
                v[row - n + lo_off] += Rd[t, src] * coef
        for t in range(1, min(d, n) + 1):
            k = n - t
            ck = cols[k]
            for i in range(width):
                row = k - lo_off + i
                j = row - n + lo_off
                if 0 <= j < width:
                    v[j] -= ck[i] * Rd[t, n]
        v /= Rd[0, n]
        cols[n] = v
        scale = max(1.0, abs(v[lo_off]), abs(v[lo_off + 1]))
        worst_fill = max(worst_fill, float(np.max(np.abs(v[:lo_off - 1]), initial=0.0)) / scale)
    if worst_fill > SEMICLASSICAL_ASYM_TOL:
        raise AssertionError(f"J(phi w) is not tridiagonal: fill {worst_fill:.2e}")
    a_new = cols[:, lo_off].copy()
    sub = cols[:-1, lo_off + 1]          # K[n+1, n]
    sup = cols[1:, lo_off - 1]           # K[n, n+1]
    scale = np.maximum(1.0, np.abs(sub))
    asym = float(np.max(np.abs(sub - sup) / scale, initial=0.0))
    if asym > SEMICLASSICAL_ASYM_TOL:
        raise AssertionError(f"J(phi w) asymmetry {asym:.2e}")
    b_new = np.empty(K - 1)
    b_new[:] = 0.5 * (sub + sup)
    # the last sub-diagonal entry needs no column n+1 of K
    b_last = cols[-1, lo_off + 1]
    mass = Phi[0, 0] * J.mass
    Jphi = SymTridiag(a_new[:K], np.concatenate([b_new, [b_last]]), mass)
    return Semiclassical(R, Jphi, asym)


def semiclassical_sections(w: WeightSpec, phi: Poly, M: int) -> tuple[SymTridiag, Semiclassical]:
    """Jacobi matrix of ``w`` and semiclassical data with at least ``M`` exact
    coefficients of ``J(phi w)`` and ``M`` exact columns of ``R``."""
    d = max(phi.degree, 0)
    Jw = classical_jacobi(w, M + d + 2)
    sc = raise_and_semiclassical(Jw, phi)
    return Jw, sc
