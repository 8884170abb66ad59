"""Deterministic and few-bit stochastic rounding into a :class:`FloatFormat`.

Two paths share the same semantics:

* :func:`round_value` works on exact :class:`~fractions.Fraction` inputs,
  decomposes them into (exponent, floor significand, remainder) and applies
  one of the predicates below. It is the reference.
* :func:`round_array` is a numpy kernel over binary64 arrays. It reads the
  integer significand of each input and evaluates the same predicates from
  truncated remainder bits, so its results are bit-exact as well.

Stochastic predicates are in comparison form (``delta + noise >= 1``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .formats import FloatFormat, floor_log2
from .randbits import MAX_BITS, BitSource


class Mode(str, enum.Enum):
    TA = "ta"
    TNE = "tne"
    TNO = "tno"
    SRFF = "srff"
    SRF = "srf"
    SRC = "src"

    @property
    def stochastic(self) -> bool:
        return self in (Mode.SRFF, Mode.SRF, Mode.SRC)


@dataclass(frozen=True)
class RoundingSpec:
    mode: Mode
    random_bits: int | None = None
    inner_round: Mode | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode.stochastic:
            if self.random_bits is None or not 1 <= self.random_bits <= MAX_BITS:
                raise ValueError(f"{self.mode.value} needs 1 <= random_bits <= {MAX_BITS}, got {self.random_bits}")
        elif self.random_bits is not None:
            raise ValueError(f"{self.mode.value} is deterministic and takes no random bits")
        if self.mode is Mode.SRC:
            inner = Mode(self.inner_round) if self.inner_round is not None else Mode.TNE
            if inner not in (Mode.TNE, Mode.TNO):
                raise ValueError(f"SRC inner rounding must be tne or tno, got {inner.value}")
            object.__setattr__(self, "inner_round", inner)
        elif self.inner_round is not None:
            raise ValueError("inner_round only applies to SRC")

    def __str__(self) -> str:
        s = self.mode.value
        if self.random_bits is not None:
            s += f"/N={self.random_bits}"
        if self.inner_round is not None:
            s += f"/inner={self.inner_round.value}"
        return s


@dataclass(frozen=True)
class Decomposition:
    sign: int
    exponent: int
    floor_significand: int
    delta: Fraction

    def reconstruct(self, fmt: FloatFormat) -> Fraction:
        mag = (self.floor_significand + self.delta) * fmt.ulp(self.exponent)
        return -mag if self.sign else mag


def decompose(x, fmt: FloatFormat) -> Decomposition:
    x = Fraction(x)
    if x == 0:
        raise ValueError("zero has no decomposition; it rounds to itself")
    mag = abs(x)
    if mag > fmt.max_finite:
        raise ValueError(f"|{x}| exceeds the largest finite value {fmt.max_finite}")
    e = max(floor_log2(mag), fmt.min_exponent)
    sig = mag / fmt.ulp(e)
    fl = sig.numerator // sig.denominator
    return Decomposition(int(x < 0), e, fl, sig - fl)


# --- predicates ------------------------------------------------------------
#
# The *_up helpers take delta as num / 2**frac_bits and accept Python ints or
# numpy integer arrays for ``num`` and ``n``. The Fraction-taking pred_*
# functions are thin wrappers over them.


def _dyadic(delta: Fraction) -> tuple[int, int]:
    delta = Fraction(delta)
    d = delta.denominator
    if d & (d - 1):
        raise ValueError(f"{delta} is not a dyadic rational")
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    return delta.numerator, d.bit_length() - 1


def ta_up(num, frac_bits: int):
    return 2 * num >= 1 << frac_bits


def tie_up(num, frac_bits: int, floor_sig, odd: bool = False):
    twice, one = 2 * num, 1 << frac_bits
    # odd floor_sig means the upper candidate floor_sig + 1 is even
    wants_up = (floor_sig & 1) == (0 if odd else 1)
    return (twice > one) | ((twice == one) & wants_up)


def srff_up(num, frac_bits: int, n, N: int):
    return (num << N) + (n << frac_bits) >= 1 << (frac_bits + N)


def srf_up(num, frac_bits: int, n, N: int):
    # delta + (n + 1/2) 2^-N >= 1, scaled by 2^(frac_bits + N + 1)
    return (num << (N + 1)) + ((2 * n + 1) << frac_bits) >= 1 << (frac_bits + N + 1)


def preround(num, frac_bits: int, N: int, inner: Mode = Mode.TNE):
    """Round delta = num/2^frac_bits to the nearest multiple of 2^-N, returned in units of 2^-N."""
    if frac_bits <= N:
        return num << (N - frac_bits)
    s = frac_bits - N
    q = num >> s
    r = num & ((1 << s) - 1)
    half = 1 << (s - 1)
    at_tie = (q & 1) == (1 if inner is Mode.TNE else 0)
    up = (r > half) | ((r == half) & at_tie)
    return q + up


def src_up(num, frac_bits: int, n, N: int, inner: Mode = Mode.TNE):
    k = preround(num, frac_bits, N, inner)
    # k == 2^N commits the round-up for every n
    return k + n >= 1 << N


def pred_ta(delta) -> bool:
    return bool(ta_up(*_dyadic(delta)))


def pred_tne(floor_sig: int, delta) -> bool:
    num, k = _dyadic(delta)
    return bool(tie_up(num, k, floor_sig))


def pred_tno(floor_sig: int, delta) -> bool:
    num, k = _dyadic(delta)
    return bool(tie_up(num, k, floor_sig, odd=True))


def _check_draw(n: int, N: int) -> None:
    if not 0 <= n < 1 << N:
        raise ValueError(f"draw {n} outside [0, 2^{N})")


def pred_srff(delta, n: int, N: int) -> bool:
    _check_draw(n, N)
    return bool(srff_up(*_dyadic(delta), n, N))


def pred_srf(delta, n: int, N: int) -> bool:
    _check_draw(n, N)
    return bool(srf_up(*_dyadic(delta), n, N))


def pred_src(delta, n: int, N: int, inner: Mode = Mode.TNE) -> bool:
    _check_draw(n, N)
    num, k = _dyadic(delta)
    return bool(src_up(num, k, n, N, Mode(inner)))


def round_up_decision(spec: RoundingSpec, floor_sig: int, delta, n: int | None = None) -> bool:
    m = spec.mode
    if m is Mode.TA:
        return pred_ta(delta)
    if m is Mode.TNE:
        return pred_tne(floor_sig, delta)
    if m is Mode.TNO:
        return pred_tno(floor_sig, delta)
    if n is None:
        raise ValueError(f"{m.value} needs a random draw")
    if m is Mode.SRFF:
        return pred_srff(delta, n, spec.random_bits)
    if m is Mode.SRF:
        return pred_srf(delta, n, spec.random_bits)
    return pred_src(delta, n, spec.random_bits, spec.inner_round)


def round_value(x, fmt: FloatFormat, spec: RoundingSpec, bits: BitSource | None = None) -> Fraction:
    """Round ``x`` into ``fmt``.

    Stochastic modes take exactly one draw from ``bits`` per call, whatever
    the input, so a counter source steps predictably. Magnitudes above the
    largest finite value saturate.
    """
    x = Fraction(x)
    n = None
    if spec.mode.stochastic:
        if bits is None:
            raise ValueError(f"{spec.mode.value} rounding needs a bit source")
        n = bits.next_bits(spec.random_bits)
    if x == 0:
        return Fraction(0)
    M = fmt.max_finite
    if abs(x) > M:
        return M if x > 0 else -M
    d = decompose(x, fmt)
    sig = d.floor_significand
    if d.delta and round_up_decision(spec, sig, d.delta, n):
        sig += 1
    # sig == 2^P lands on the next binade's first value without special casing
    mag = sig * fmt.ulp(d.exponent)
    return -mag if d.sign else mag


def ulp_at(x, fmt: FloatFormat) -> Fraction:
    """Spacing of the format around ``x`` (the interval x falls in)."""
    x = abs(Fraction(x))
    if x == 0:
        return fmt.ulp(fmt.min_exponent)
    return fmt.ulp(floor_log2(x))


# --- vectorized kernel -----------------------------------------------------

_MANT_BITS = 53


def _shift_right(a: np.ndarray, s: np.ndarray) -> np.ndarray:
    # numpy leaves shifts >= 64 undefined; magnitudes here are < 2^53
    return a >> np.minimum(s, 63)


def _fixed_bits(m: np.ndarray, s: np.ndarray, k: int):
    """floor(delta * 2^k) and a sticky flag for the bits below it.

    delta = (m mod 2^s) / 2^s where m < 2^53 and s >= 0 elementwise.
    """
    s_clip = np.minimum(s, 63)
    rem = np.where(s >= 63, m, m & ((np.int64(1) << s_clip) - 1))
    drop = s - k
    head = np.where(drop >= 0, _shift_right(rem, np.maximum(drop, 0)), rem << np.maximum(-drop, 0))
    below = np.where(drop > 0, rem & ((np.int64(1) << np.clip(drop, 0, 63)) - 1), 0)
    below = np.where(drop >= 63, rem, below)
    return head, below != 0


def round_array(x, fmt: FloatFormat, spec: RoundingSpec, draws=None) -> np.ndarray:
    """Vectorized :func:`round_value` for binary64 inputs.

    ``draws`` supplies one N-bit integer per element for stochastic modes.
    Requires ``fmt`` to fit inside binary64 (precision <= 53 and exponent
    range within binary64's normal range).
    """
    x = np.asarray(x, dtype=np.float64)
    if fmt.precision > _MANT_BITS or fmt.max_exponent > 1023 or fmt.min_exponent - fmt.trailing_bits < -1074:
        raise ValueError(f"{fmt.describe()} does not fit the binary64 kernel; use round_value")
    if not np.all(np.isfinite(x)):
        raise ValueError("round_array needs finite inputs")
    N = spec.random_bits
    if spec.mode.stochastic:
        if draws is None:
            raise ValueError(f"{spec.mode.value} rounding needs draws")
        draws = np.broadcast_to(np.asarray(draws, dtype=np.int64), x.shape)
        if draws.size and (draws.min() < 0 or draws.max() >= 1 << N):
            raise ValueError(f"draws must lie in [0, 2^{N})")

    mag = np.abs(x)
    frac, ex = np.frexp(mag)  # mag = frac * 2^ex, frac in [0.5, 1)
    m = np.ldexp(frac, _MANT_BITS).astype(np.int64)  # exact 53-bit integer
    low = ex - _MANT_BITS  # mag = m * 2^low
    e = np.maximum(ex - 1, fmt.min_exponent)
    s = (e - fmt.trailing_bits) - low  # fraction bits below the target ulp
    exact = s <= 0
    s_pos = np.maximum(s, 0)
    fl = _shift_right(m, s_pos)

    mode = spec.mode
    if mode in (Mode.TA, Mode.TNE, Mode.TNO):
        head, sticky = _fixed_bits(m, s_pos, 1)
        half_or_more = head == 1
        if mode is Mode.TA:
            up = half_or_more
        else:
            wants = (fl & 1) == (1 if mode is Mode.TNE else 0)
            up = half_or_more & (sticky | wants)
    elif mode is Mode.SRFF:
        head, _ = _fixed_bits(m, s_pos, N)
        up = head + draws >= 1 << N
    elif mode is Mode.SRF:
        head, _ = _fixed_bits(m, s_pos, N + 1)
        up = head + 2 * draws + 1 >= 1 << (N + 1)
    else:
        head, sticky = _fixed_bits(m, s_pos, N + 1)
        q, half_bit = head >> 1, (head & 1) == 1
        at_tie = (q & 1) == (1 if spec.inner_round is Mode.TNE else 0)
        k = q + (half_bit & (sticky | at_tie))
        up = k + draws >= 1 << N

    sig = fl + np.where(exact, 0, up)
    out = np.ldexp(sig.astype(np.float64), (e - fmt.trailing_bits).astype(np.int32))
    out = np.where(exact, mag, out)
    M = float(fmt.max_finite)
    out = np.where(mag > M, M, out)
    return np.where(x == 0, 0.0, np.copysign(out, x))
