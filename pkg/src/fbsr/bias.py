"""Rounding bias of few-bit stochastic rounding, computed four ways.

Bias is measured in units of the destination spacing: for a remainder delta
in [0, 1) it is E_n[round up] - delta. Over finite-precision inputs the
remainders are i / 2^D for i in [0, 2^D), where D is the number of excess
input bits.

* :func:`bias_enumerated` sums every (input, draw) pair in integers.
* :func:`bias_floor_sum_srff` / :func:`bias_floor_sum_srf` evaluate the
  single floor-sum over draws.
* :func:`bias_closed` returns the closed forms and bounds.
* :func:`bias_monte_carlo` rounds real format values with seeded bits.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .formats import FloatFormat, values_between
from .randbits import SeededPrng
from .rounding import (
    Mode,
    RoundingSpec,
    decompose,
    round_array,
    src_up,
    srf_up,
    srff_up,
    ulp_at,
    _dyadic,
)

ENUMERATION_GUARD = 30
_CHUNK = 1 << 20

VARIANTS = (Mode.SRFF, Mode.SRF, Mode.SRC)


class Method(str, enum.Enum):
    ENUMERATED = "exact"
    FLOOR_SUM = "floorsum"
    CLOSED = "bound"
    MONTE_CARLO = "mc"


@dataclass(frozen=True)
class BiasResult:
    variant: Mode
    N: int
    D: int | None
    value: Fraction
    method: Method
    mc_stderr: float | None = None
    inner: Mode | None = None
    is_bound: bool = False

    def __post_init__(self):
        if self.method is not Method.MONTE_CARLO and abs(self.value) > Fraction(1, 2):
            raise ValueError(f"bias {self.value} outside [-1/2, 1/2]")


def _variant(variant) -> Mode:
    v = Mode(variant)
    if v not in VARIANTS:
        raise ValueError(f"bias variants are srff, srf, src; got {v.value}")
    return v


def _up(variant: Mode, num, frac_bits: int, n, N: int, inner: Mode):
    if variant is Mode.SRFF:
        return srff_up(num, frac_bits, n, N)
    if variant is Mode.SRF:
        return srf_up(num, frac_bits, n, N)
    return src_up(num, frac_bits, n, N, inner)


def bias_enumerated(variant, N: int, D: int, inner=Mode.TNE) -> BiasResult:
    """Brute-force bias over the 2^D input grid and all 2^N draws.

    Everything is integer: the count of round-ups, scaled by 2^D, minus the
    sum of input numerators, scaled by 2^N, over 2^(2D+N).
    """
    variant, inner = _variant(variant), Mode(inner)
    if D < 1 or N < 1:
        raise ValueError("N and D must be >= 1")
    if N + D > ENUMERATION_GUARD:
        raise ValueError(f"N + D = {N + D} exceeds the enumeration guard {ENUMERATION_GUARD}")
    ups = 0
    input_sum = 0
    for lo in range(0, 1 << D, _CHUNK):
        i = np.arange(lo, min(lo + _CHUNK, 1 << D), dtype=np.int64)
        input_sum += int(i.sum())
        for n in range(1 << N):
            ups += int(np.count_nonzero(_up(variant, i, D, n, N, inner)))
    value = Fraction((ups << D) - (input_sum << N), 1 << (2 * D + N))
    return BiasResult(variant, N, D, value, Method.ENUMERATED, inner=inner if variant is Mode.SRC else None)


def _mean_fraction_term(D: int) -> Fraction:
    # mean of i / 2^D over i in [0, 2^D)
    return Fraction((1 << D) - 1, 1 << (D + 1))


def bias_floor_sum_srff(N: int, D: int) -> BiasResult:
    if N < 1 or D < 1:
        raise ValueError("N and D must be >= 1")
    if D >= N:
        total = sum(n << (D - N) for n in range(1 << N))
    else:
        total = sum(n >> (N - D) for n in range(1 << N))
    value = Fraction(total, 1 << (N + D)) - _mean_fraction_term(D)
    return BiasResult(Mode.SRFF, N, D, value, Method.FLOOR_SUM)


def bias_floor_sum_srf(N: int, D: int) -> BiasResult:
    if N < 1 or D < 1:
        raise ValueError("N and D must be >= 1")
    # floor(n 2^(D-N) + 2^(D-N-1)) = floor((2n+1) 2^(D-N-1))
    s = D - N - 1
    if s >= 0:
        total = sum((2 * n + 1) << s for n in range(1 << N))
    else:
        total = sum((2 * n + 1) >> -s for n in range(1 << N))
    value = Fraction(total, 1 << (N + D)) - _mean_fraction_term(D)
    return BiasResult(Mode.SRF, N, D, value, Method.FLOOR_SUM)


def bias_closed(variant, N: int, D: int | None = None) -> BiasResult:
    """Closed form for infinite-precision inputs (D=None) or the finite-D bound."""
    variant = _variant(variant)
    if variant is Mode.SRC:
        raise ValueError("SRC has no closed form here; use bias_enumerated")
    if D is None:
        value = -Fraction(1, 1 << (N + 1)) if variant is Mode.SRFF else Fraction(0)
        return BiasResult(variant, N, None, value, Method.CLOSED)
    if variant is Mode.SRFF:
        value = (Fraction(1, 1 << D) - Fraction(1, 1 << N)) / 2
    else:
        value = Fraction(1, 1 << (D + 1))
    return BiasResult(variant, N, D, value, Method.CLOSED, is_bound=True)


def bias_point_exact(variant, delta, N: int, inner=Mode.TNE) -> Fraction:
    """2^-N * #{n : round up} - delta at one remainder."""
    variant, inner = _variant(variant), Mode(inner)
    num, k = _dyadic(delta)
    ups = sum(bool(_up(variant, num, k, n, N, inner)) for n in range(1 << N))
    return Fraction(ups, 1 << N) - Fraction(delta)


# --- Monte Carlo -------------------------------------------------------------


@dataclass
class MonteCarloResult:
    variant: Mode
    N: int
    x: np.ndarray
    mean: np.ndarray
    bias: np.ndarray  # mean - x, value units
    bias_ulp: np.ndarray
    var_ulp: np.ndarray  # sample variance of the rounded values, ulp^2 units
    samples_per_point: int
    exact_points: list[Fraction] = field(default_factory=list)

    @property
    def grid_bias_ulp(self) -> float:
        return float(self.bias_ulp.mean())

    @property
    def grid_bias(self) -> float:
        return float(self.bias.mean())

    @property
    def stderr_ulp(self) -> float:
        """Pooled standard error of the grid-averaged bias."""
        g = len(self.x)
        return math.sqrt(float(self.var_ulp.sum()) / self.samples_per_point) / g

    @property
    def exact_grid_bias_ulp(self) -> Fraction:
        """Average of the exact per-point bias over the same grid."""
        return sum(self.exact_points, Fraction(0)) / len(self.exact_points)

    def rows(self):
        return zip(self.x, self.mean, self.bias)


def midpoint_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return lo + (np.arange(points) + 0.5) * ((hi - lo) / points)


def mc_grid(dst: FloatFormat, lo, hi, src: FloatFormat | None = None, points: int = 1024) -> np.ndarray:
    """Every ``src`` value in [lo, hi), or a midpoint grid when ``src`` is None."""
    if src is not None:
        grid = np.array([float(v) for v in values_between(src, Fraction(lo), Fraction(hi))])
    else:
        grid = midpoint_grid(float(lo), float(hi), points) if points > 0 else np.array([])
    if grid.size == 0:
        raise ValueError(f"empty grid on [{lo}, {hi})")
    M = float(dst.max_finite)
    if grid.min() < -M or grid.max() > M:
        raise ValueError("grid leaves the destination's finite range")
    return grid


def _one_point(x: float, dst: FloatFormat, spec: RoundingSpec, samples: int, seed: int):
    draws = SeededPrng(seed).draws(spec.random_bits, samples)
    r = round_array(np.full(samples, x), dst, spec, draws)
    var = float(r.var(ddof=1)) if samples > 1 else 0.0
    return float(r.mean()), var


def bias_monte_carlo(
    variant,
    dst: FloatFormat,
    N: int,
    lo,
    hi,
    samples_per_point: int,
    seed: int = 0,
    src: FloatFormat | None = None,
    points: int = 1024,
    inner=Mode.TNE,
    threads: int = 1,
    exact_reference: bool = True,
) -> MonteCarloResult:
    """Round each grid point ``samples_per_point`` times and average.

    Point ``j`` draws from ``SeededPrng(seed ^ j)``, so the result does not
    depend on ``threads``.
    """
    variant = _variant(variant)
    if samples_per_point < 1:
        raise ValueError("samples_per_point must be >= 1")
    spec = RoundingSpec(variant, N, inner if variant is Mode.SRC else None)
    grid = mc_grid(dst, lo, hi, src, points)

    def work(j):
        return _one_point(float(grid[j]), dst, spec, samples_per_point, seed ^ j)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            stats = list(pool.map(work, range(len(grid))))
    else:
        stats = [work(j) for j in range(len(grid))]
    mean = np.array([s[0] for s in stats])
    var = np.array([s[1] for s in stats])
    ulps = np.array([float(ulp_at(Fraction(x), dst)) for x in grid])
    exact = []
    if exact_reference:
        for x in grid:
            fx = Fraction(float(x))
            if fx == 0:
                exact.append(Fraction(0))
                continue
            d = decompose(fx, dst)
            b = bias_point_exact(variant, d.delta, N, inner)
            exact.append(-b if d.sign else b)
    return MonteCarloResult(
        variant=variant,
        N=N,
        x=grid,
        mean=mean,
        bias=mean - grid,
        bias_ulp=(mean - grid) / ulps,
        var_ulp=var / ulps**2,
        samples_per_point=samples_per_point,
        exact_points=exact,
    )
