"""Parameterized binary floating-point formats over exact rationals.

A format is the triple (precision, bias, emax). Values are decoded from
(sign, biased exponent, trailing significand) triples into exact
:class:`~fractions.Fraction` objects; no NaN or infinity encodings exist and
there is a single zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

ENUMERATION_GUARD_BITS = 24


@dataclass(frozen=True)
class FloatFormat:
    precision: int
    bias: int
    emax: int
    name: str = ""

    def __post_init__(self):
        if self.precision < 2:
            raise ValueError(f"precision must be >= 2, got {self.precision}")
        if self.emax < 1:
            raise ValueError(f"emax must be >= 1, got {self.emax}")

    @property
    def trailing_bits(self) -> int:
        return self.precision - 1

    @property
    def max_finite(self) -> Fraction:
        return max_finite(self)

    @property
    def min_normal(self) -> Fraction:
        return _pow2(1 - self.bias)

    @property
    def min_exponent(self) -> int:
        """Smallest unbiased exponent, shared by subnormals and the first normal binade."""
        return 1 - self.bias

    @property
    def max_exponent(self) -> int:
        return self.emax - self.bias

    def ulp(self, exponent: int) -> Fraction:
        """Spacing of values whose unbiased (clamped) exponent is ``exponent``."""
        return _pow2(max(exponent, self.min_exponent) - self.trailing_bits)

    def describe(self) -> str:
        label = self.name or "custom"
        return f"{label}: P={self.precision} B={self.bias} emax={self.emax} M={float(self.max_finite)!r}"


@dataclass(frozen=True)
class UnpackedFloat:
    sign: int
    biased_exponent: int
    trailing: int

    def check(self, fmt: FloatFormat) -> None:
        if self.sign not in (0, 1):
            raise ValueError(f"sign must be 0 or 1, got {self.sign}")
        if not 0 <= self.biased_exponent <= fmt.emax:
            raise ValueError(f"biased exponent {self.biased_exponent} outside [0, {fmt.emax}]")
        if not 0 <= self.trailing < (1 << fmt.trailing_bits):
            raise ValueError(f"trailing field {self.trailing} outside [0, 2^{fmt.trailing_bits})")


BFLOAT16 = FloatFormat(8, 127, 254, "bfloat16")
BINARY8P4 = FloatFormat(4, 8, 15, "binary8p4")
P3 = FloatFormat(3, 15, 30, "p3")

PRESETS: dict[str, FloatFormat] = {f.name: f for f in (BFLOAT16, BINARY8P4, P3)}


def get_format(name: str) -> FloatFormat:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; presets are {', '.join(PRESETS)}") from None


def _pow2(k: int) -> Fraction:
    return Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)


def decode(u: UnpackedFloat, fmt: FloatFormat) -> Fraction:
    u.check(fmt)
    frac = Fraction(u.trailing, 1 << fmt.trailing_bits)
    if u.biased_exponent == 0:
        value = frac * _pow2(1 - fmt.bias)
    else:
        value = (1 + frac) * _pow2(u.biased_exponent - fmt.bias)
    return -value if u.sign else value


def max_finite(fmt: FloatFormat) -> Fraction:
    return (2 - _pow2(1 - fmt.precision)) * _pow2(fmt.emax - fmt.bias)


def floor_log2(x: Fraction) -> int:
    """Exact floor(log2(x)) for a positive rational."""
    if x <= 0:
        raise ValueError("floor_log2 needs a positive value")
    n, d = x.numerator, x.denominator
    k = n.bit_length() - d.bit_length()
    # now 2^(k-1) < n/d < 2^(k+1)
    if k >= 0:
        if n < d << k:
            k -= 1
    elif n << -k < d:
        k -= 1
    return k


def encode(value: Fraction | int | float, fmt: FloatFormat) -> UnpackedFloat:
    """Inverse of :func:`decode`; raises if ``value`` is not exactly representable."""
    x = Fraction(value)
    if x == 0:
        return UnpackedFloat(0, 0, 0)
    sign = 1 if x < 0 else 0
    mag = abs(x)
    if mag > fmt.max_finite:
        raise ValueError(f"{value} exceeds the largest finite value of {fmt.describe()}")
    e = max(floor_log2(mag), fmt.min_exponent)
    sig = mag / fmt.ulp(e)
    if sig.denominator != 1:
        raise ValueError(f"{value} is not representable in {fmt.describe()}")
    sig = sig.numerator
    hidden = 1 << fmt.trailing_bits
    if sig >= hidden:
        return UnpackedFloat(sign, e + fmt.bias, sig - hidden)
    return UnpackedFloat(sign, 0, sig)


def succ(u: UnpackedFloat, fmt: FloatFormat) -> UnpackedFloat:
    """Next representable value above ``u``."""
    u.check(fmt)
    top = (1 << fmt.trailing_bits) - 1
    is_zero = u.biased_exponent == 0 and u.trailing == 0
    if is_zero:
        return UnpackedFloat(0, 0, 1)
    if u.sign == 0:
        if u.biased_exponent == fmt.emax and u.trailing == top:
            raise ValueError("the largest finite value has no successor")
        if u.trailing == top:
            return UnpackedFloat(0, u.biased_exponent + 1, 0)
        return UnpackedFloat(0, u.biased_exponent, u.trailing + 1)
    # negative: step magnitude down
    if u.trailing == 0:
        return UnpackedFloat(1, u.biased_exponent - 1, top)
    t = u.trailing - 1
    if u.biased_exponent == 0 and t == 0:
        return UnpackedFloat(0, 0, 0)
    return UnpackedFloat(1, u.biased_exponent, t)


def _check_enumerable(fmt: FloatFormat) -> None:
    if fmt.trailing_bits + fmt.emax.bit_length() > ENUMERATION_GUARD_BITS:
        raise ValueError(f"{fmt.describe()} is too large to enumerate")


def positive_encodings(fmt: FloatFormat) -> Iterator[UnpackedFloat]:
    """All strictly positive encodings in increasing order."""
    _check_enumerable(fmt)
    for e in range(fmt.emax + 1):
        for t in range(1 if e == 0 else 0, 1 << fmt.trailing_bits):
            yield UnpackedFloat(0, e, t)


def enumerate_finite(fmt: FloatFormat) -> list[Fraction]:
    """Every finite value of ``fmt``, strictly increasing, with one zero."""
    pos = [decode(u, fmt) for u in positive_encodings(fmt)]
    return [-v for v in reversed(pos)] + [Fraction(0)] + pos


def values_between(fmt: FloatFormat, lo, hi) -> list[Fraction]:
    """Representable values v with lo <= v < hi, in increasing order.

    Walks binade by binade, so it stays cheap for wide formats where
    :func:`enumerate_finite` would be refused.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    out: list[Fraction] = []
    if lo < 0:
        a = max(-hi, Fraction(0))
        out = [-w for w in reversed(_positive_between(fmt, a, -lo + _tiny(fmt))) if w > a]
    if lo <= 0 < hi:
        out.append(Fraction(0))
    if hi > 0:
        out.extend(_positive_between(fmt, max(lo, Fraction(0)), hi))
    return out


def _positive_between(fmt: FloatFormat, lo: Fraction, hi: Fraction) -> list[Fraction]:
    out: list[Fraction] = []
    hi = min(hi, fmt.max_finite + _tiny(fmt))
    e = fmt.min_exponent if lo < fmt.min_normal else floor_log2(lo)
    while e <= fmt.max_exponent:
        start = Fraction(0) if e == fmt.min_exponent else _pow2(e)
        if start >= hi:
            break
        step = fmt.ulp(e)
        k = max(-((-max(lo, start)) // step), 1)
        v = k * step
        end = min(_pow2(e + 1), hi)
        while v < end:
            out.append(v)
            v += step
        e += 1
    return out


def _tiny(fmt: FloatFormat) -> Fraction:
    return fmt.ulp(fmt.min_exponent) / 2
