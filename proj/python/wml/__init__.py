"""Matrix-weighted martingale square functions on finite filtrations."""

from ._core import (
    ConvergenceError,
    FilteredSpace,
    ValidationError,
    ap_characteristic,
    cond_expect,
    default_cgamma,
    exponent_fit,
    k_domination,
    matrix_target_exponent,
    opnorm_general,
    opnorm_p2,
    power_weight,
    rotating_weight,
    run_suite,
    scalar_target_exponent,
    square_function,
    weighted_square_function,
)

__all__ = [
    "ConvergenceError",
    "FilteredSpace",
    "ValidationError",
    "ap_characteristic",
    "cond_expect",
    "default_cgamma",
    "exponent_fit",
    "k_domination",
    "matrix_target_exponent",
    "opnorm_general",
    "opnorm_p2",
    "power_weight",
    "rotating_weight",
    "run_suite",
    "scalar_target_exponent",
    "square_function",
    "weighted_square_function",
]
