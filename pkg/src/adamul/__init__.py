"""adamul: bit-accurate simulation of an adaptive fault-tolerant
approximate multiplier, from single arithmetic operations up to
fault-injection campaigns on a systolic-array MAC model running INT8
DNN inference."""

__version__ = "0.1.0"

from .adder import (
    AdderTap,
    FractionSumResult,
    ProtectionCase,
    TapUnit,
    cla_add,
    k_add_tmr,
    majority3,
    protected_add,
    select_case,
)
from .logmul import (
    antilog,
    exact_mul,
    lod,
    mitchell_mul,
    mitchell_mul_array,
    normalize,
    truncate,
)
from .multipliers import (
    MultiplierKind,
    MultiplyOutcome,
    Signal,
    multiply,
    multiply_signed,
    product_table,
    signed_product_table,
)

__all__ = [
    "__version__",
    "AdderTap",
    "FractionSumResult",
    "ProtectionCase",
    "TapUnit",
    "cla_add",
    "k_add_tmr",
    "majority3",
    "protected_add",
    "select_case",
    "antilog",
    "exact_mul",
    "lod",
    "mitchell_mul",
    "mitchell_mul_array",
    "normalize",
    "truncate",
    "MultiplierKind",
    "MultiplyOutcome",
    "Signal",
    "multiply",
    "multiply_signed",
    "product_table",
    "signed_product_table",
]
