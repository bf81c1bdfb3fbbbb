"""Gaussian singular integrals: Hermite calculus, kernels, quadrature and experiments."""
from . import _backend
from .analysis import (ExperimentReport, MaximalFunctionSpec, estimate_operator_norm, estimate_weak11,
                       maximal_function, verify_global_domination, verify_lemma21, verify_lemma22,
                       verify_local_claim, verify_spectral_identities)
from .hermite import (GaussianMeasure, HermiteExpansion, MultiIndex, alt_ou_apply, gauss_derivative,
                      gauss_derivative_adjoint, hermite_eval, inner_product, lp_norm, multi_indices, ou_apply)
from .kernels import (KernelSpec, cz_approx_kernel, diagonal_coefficient, kernel_general, kernel_general_alt,
                      kernel_k1, kernel_values, psi_m, varphi_m)
from .operators import (GaussianBump, SpectralOperator, apply_bump, apply_integral, apply_local_global,
                        apply_mehler, apply_spectral, calibrate_cbeta, cbeta_closed_form)
from .quadrature import IntegrationResult, QuadratureConfig, QuadratureError

BACKEND = _backend.NAME
__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ExperimentReport",
    "GaussianBump",
    "GaussianMeasure",
    "HermiteExpansion",
    "IntegrationResult",
    "KernelSpec",
    "MaximalFunctionSpec",
    "MultiIndex",
    "QuadratureConfig",
    "QuadratureError",
    "SpectralOperator",
    "alt_ou_apply",
    "apply_bump",
    "apply_integral",
    "apply_local_global",
    "apply_mehler",
    "apply_spectral",
    "calibrate_cbeta",
    "cbeta_closed_form",
    "cz_approx_kernel",
    "diagonal_coefficient",
    "estimate_operator_norm",
    "estimate_weak11",
    "gauss_derivative",
    "gauss_derivative_adjoint",
    "hermite_eval",
    "inner_product",
    "kernel_general",
    "kernel_general_alt",
    "kernel_k1",
    "kernel_values",
    "lp_norm",
    "maximal_function",
    "multi_indices",
    "ou_apply",
    "psi_m",
    "varphi_m",
    "verify_global_domination",
    "verify_lemma21",
    "verify_lemma22",
    "verify_local_claim",
    "verify_spectral_identities",
]
