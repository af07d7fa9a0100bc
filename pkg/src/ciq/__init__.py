"""Matrix square roots and inverse square roots of SPD operators by contour integral quadrature."""
from .ciq import (CiqOutput, invsqrt_apply, precond_sample_rotated, precond_whiten_rotated,
                  prepare_rule, sqrt_apply, sqrt_backward)
from .lanczos import SpectrumEstimate, estimate_extreme_eigenvalues, lanczos_factorize
from .linop import DenseOperator, IdentityOperator, KernelOperator, LinearOperator
from .msminres import ShiftedSolveBundle, SolverConfig, minres, msminres
from .precond import PivCholPreconditioner, build_pivoted_cholesky, build_preconditioner
from .quadrature import QuadratureRule, build_rule

__all__ = [
    "CiqOutput", "DenseOperator", "IdentityOperator", "KernelOperator", "LinearOperator",
    "PivCholPreconditioner", "QuadratureRule", "ShiftedSolveBundle", "SolverConfig",
    "SpectrumEstimate", "build_pivoted_cholesky", "build_preconditioner", "build_rule",
    "estimate_extreme_eigenvalues", "invsqrt_apply", "lanczos_factorize", "minres", "msminres",
    "precond_sample_rotated", "precond_whiten_rotated", "prepare_rule", "sqrt_apply", "sqrt_backward",
]
