"""Stochastic floating-point arithmetic: probabilistic rounding modes
over IEEE-754 binary32/binary64, error-free transformations, a
counter-based splittable RNG, perturbable kernels, and variability
metrics, with a compiled fast path and a bit-identical pure-Python
fallback.
"""

from . import backend
from .eft import EftPair, fma, residual_div, residual_sqrt, two_prod_fma, two_sum
from .fpcore import (
    BINARY32,
    BINARY64,
    DecomposedFloat,
    FloatFormat,
    add_rn,
    bits_to_float,
    decompose,
    div_rn,
    float_to_bits,
    mul_rn,
    narrow_to,
    neighbors,
    pred,
    recompose,
    round_nearest,
    sqrt_rn,
    sub_rn,
    succ,
    ulp,
)
from .kernels import (
    KERNEL_KINDS,
    OP_NAMES,
    KernelData,
    KernelSpec,
    execute_kernel,
    harmonic_series,
    make_inputs,
    op_samples,
    op_trials,
    perturbed_axpy,
    perturbed_dot,
    perturbed_matmul,
    perturbed_sum,
    run_repetitions,
    time_scalar_op,
)
from .metrics import (
    DiceResult,
    FTestResult,
    LabelMap,
    LeveneResult,
    SampleSet,
    VariabilityReport,
    betainc_reg,
    dice_summary,
    f_dist_cdf,
    f_dist_sf,
    levene_test,
    min_pairwise_dice,
    pairwise_f_test,
    read_labelmap,
    read_labelmap_text,
    significant_digits,
    write_labelmap,
    write_labelmap_text,
)
from .rng import RngStream
from .rounding import (
    CESTAC,
    MCA_RR,
    RN,
    SR,
    UD,
    PerturbedOpContext,
    RoundingMode,
    mode_label,
    parse_mode,
    perturbed_add,
    perturbed_div,
    perturbed_fma,
    perturbed_mul,
    perturbed_sqrt,
    perturbed_sub,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend",
    # fpcore
    "FloatFormat", "DecomposedFloat", "BINARY32", "BINARY64",
    "decompose", "recompose", "narrow_to", "float_to_bits", "bits_to_float",
    "ulp", "succ", "pred", "neighbors", "round_nearest",
    "add_rn", "sub_rn", "mul_rn", "div_rn", "sqrt_rn",
    # eft
    "EftPair", "two_sum", "two_prod_fma", "residual_div", "residual_sqrt", "fma",
    # rng
    "RngStream",
    # rounding
    "RoundingMode", "PerturbedOpContext", "parse_mode", "mode_label",
    "RN", "SR", "UD", "CESTAC", "MCA_RR",
    "perturbed_add", "perturbed_sub", "perturbed_mul", "perturbed_div",
    "perturbed_sqrt", "perturbed_fma",
    # kernels
    "KernelSpec", "KernelData", "make_inputs", "harmonic_series",
    "perturbed_sum", "perturbed_dot", "perturbed_axpy", "perturbed_matmul",
    "execute_kernel", "run_repetitions", "op_trials", "op_samples",
    "time_scalar_op", "KERNEL_KINDS", "OP_NAMES",
    # metrics
    "SampleSet", "VariabilityReport", "significant_digits",
    "LabelMap", "DiceResult", "min_pairwise_dice", "dice_summary",
    "read_labelmap", "write_labelmap", "read_labelmap_text", "write_labelmap_text",
    "LeveneResult", "FTestResult", "levene_test", "pairwise_f_test",
    "betainc_reg", "f_dist_cdf", "f_dist_sf",
]
