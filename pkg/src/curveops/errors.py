"""Exception types raised across the package."""


class CurveOpsError(Exception):
    """Base class for all errors raised by curveops."""


class NotPositiveDefinite(CurveOpsError):
    def __init__(self, pivot_index, pivot_value=None):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            f"non-positive pivot at index {pivot_index} (value {pivot_value!r})"
        )


class PhiNotPositive(NotPositiveDefinite):
    """Cholesky of phi(J(w)) failed: phi is not positive on supp(w)."""


class TruncationOverflow(CurveOpsError):
    """A sparse operation would read rows beyond the exact section."""


class InvalidWeight(CurveOpsError):
    pass


class QuadratureFailure(CurveOpsError):
    pass


class CurveInvalid(CurveOpsError):
    def __init__(self, message, x=None):
        self.x = x
        super().__init__(message)


class PointOffCurve(CurveOpsError):
    def __init__(self, x, y, residual):
        self.x, self.y, self.residual = x, y, residual
        super().__init__(f"point ({x!r}, {y!r}) is off the curve (residual {residual:.3e})")


class Degenerate(CurveOpsError):
    pass


class LanczosBreakdown(CurveOpsError):
    def __init__(self, n, k, norm):
        self.n, self.k, self.norm = n, k, norm
        super().__init__(f"Lanczos breakdown building Y[{n},{k}]: normalizer {norm:.3e}")


class OracleInfeasible(CurveOpsError):
    def __init__(self, condition, N):
        self.condition, self.N = condition, N
        super().__init__(
            f"oracle Gram matrix condition {condition:.3e} too large at N={N}; reduce N"
        )
