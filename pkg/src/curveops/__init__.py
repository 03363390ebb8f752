"""Orthonormal polynomials on planar algebraic curves ``y^m = phi(x)``."""
from .errors import *  # noqa: F401,F403
from .polycore import BandedMatrix, BlockMatrix, Poly, SparseColumn, poly_eval  # noqa: F401
from .univar import (QuadratureRule, SymTridiag, WeightSpec, classical_jacobi,  # noqa: F401
                     gauss_rule, gram_phi, raise_and_semiclassical)
from .curvebasis import (CurveSpec, MultOps, build_mult_ops, curve_nodes,  # noqa: F401
                         dim_Vn, ell_index, pbasis_eval, validate_curve)
from .connection import (BlockJacobiPair, ConnectionMatrix, assemble_jacobi,  # noqa: F401
                         build_connection, canonical_signs, entrywise_connection, eval_Y,
                         explicit_basis, zero_bounds)
from .verify import (Tolerances, VerificationReport, audit, audit_result,  # noqa: F401
                     compare_with_oracle, monomial_oracle, stieltjes)

__version__ = "0.1.0"
