"""Few-bit stochastic rounding: format emulation and exact bias analysis."""

__version__ = "0.1.0"

from .formats import BFLOAT16, BINARY8P4, P3, FloatFormat, UnpackedFloat, decode, encode, enumerate_finite, succ
from .randbits import BitSource, Counter, Fixed, SeededPrng
from .rounding import Mode, RoundingSpec, decompose, round_array, round_value
from .bias import (
    BiasResult,
    bias_closed,
    bias_enumerated,
    bias_floor_sum_srf,
    bias_floor_sum_srff,
    bias_monte_carlo,
    bias_point_exact,
)
