from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fbsr import (
    BFLOAT16,
    BINARY8P4,
    FloatFormat,
    UnpackedFloat,
    decode,
    encode,
    enumerate_finite,
    succ,
)
from fbsr.formats import P3, floor_log2, get_format, values_between

from conftest import SMALL_FORMATS


def test_decode_normal_and_subnormal():
    f = FloatFormat(4, 7, 14)
    assert decode(UnpackedFloat(0, 7, 0), f) == 1
    assert decode(UnpackedFloat(0, 7, 4), f) == Fraction(3, 2)
    assert decode(UnpackedFloat(1, 8, 1), f) == Fraction(-9, 4)
    # subnormals share the min-normal exponent, no hidden bit
    assert decode(UnpackedFloat(0, 0, 1), f) == Fraction(1, 8) * Fraction(1, 64)
    assert decode(UnpackedFloat(0, 0, 7), f) == Fraction(7, 8) * Fraction(1, 64)


def test_field_checks():
    f = FloatFormat(4, 7, 14)
    with pytest.raises(ValueError):
        decode(UnpackedFloat(0, 15, 0), f)
    with pytest.raises(ValueError):
        decode(UnpackedFloat(0, 1, 8), f)
    with pytest.raises(ValueError):
        FloatFormat(0, 1, 1)


@pytest.mark.parametrize("fmt", [FloatFormat(4, 7, 14), FloatFormat(2, 1, 1), *SMALL_FORMATS, BINARY8P4, P3])
def test_max_finite_is_largest_enumerated(fmt):
    assert fmt.max_finite == enumerate_finite(fmt)[-1]


def test_max_finite_examples():
    assert FloatFormat(4, 7, 14).max_finite == 240
    assert FloatFormat(2, 1, 1).max_finite == Fraction(3, 2)
    assert BFLOAT16.max_finite == (2 - Fraction(1, 128)) * 2**127


@pytest.mark.parametrize("fmt", [FloatFormat(2, 1, 1), FloatFormat(3, 2, 4), *SMALL_FORMATS])
def test_enumeration_shape(fmt):
    vals = enumerate_finite(fmt)
    # one zero, (emax + 1) * 2^(P-1) - 1 positive values, mirrored
    positive = (fmt.emax + 1) * (1 << fmt.trailing_bits) - 1
    assert len(vals) == 2 * positive + 1
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals.count(0) == 1
    assert vals[0] == -vals[-1] == -fmt.max_finite


@pytest.mark.parametrize("fmt", SMALL_FORMATS, ids=lambda f: f.name)
def test_encode_decode_round_trip_and_succ(fmt):
    vals = enumerate_finite(fmt)
    for a, b in zip(vals, vals[1:]):
        u = encode(a, fmt)
        assert decode(u, fmt) == a
        assert decode(succ(u, fmt), fmt) == b
    with pytest.raises(ValueError):
        succ(encode(vals[-1], fmt), fmt)


@pytest.mark.parametrize("fmt", SMALL_FORMATS, ids=lambda f: f.name)
def test_spacing_constant_within_binade(fmt):
    vals = [v for v in enumerate_finite(fmt) if v >= 0]
    for a, b in zip(vals, vals[1:]):
        e = max(floor_log2(a), fmt.min_exponent) if a else fmt.min_exponent
        assert b - a == fmt.ulp(e)


def test_encode_rejects_unrepresentable():
    with pytest.raises(ValueError):
        encode(Fraction(17, 16), BINARY8P4)
    with pytest.raises(ValueError):
        encode(BINARY8P4.max_finite * 2, BINARY8P4)


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_finite(FloatFormat(24, 127, 254))


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=10**6))
def test_floor_log2(x):
    k = floor_log2(x)
    assert Fraction(2) ** k <= x < Fraction(2) ** (k + 1)


@pytest.mark.parametrize("fmt", SMALL_FORMATS, ids=lambda f: f.name)
@pytest.mark.parametrize("lo,hi", [(Fraction(-3), Fraction(5, 2)), (Fraction(1, 16), Fraction(7)), (-1, 0)])
def test_values_between_matches_enumeration(fmt, lo, hi):
    expect = [v for v in enumerate_finite(fmt) if lo <= v < hi]
    assert values_between(fmt, lo, hi) == expect


def test_values_between_wide_format():
    vals = values_between(BFLOAT16, 1, Fraction(5, 4))
    assert len(vals) == 32
    assert vals[1] - vals[0] == Fraction(1, 128)


def test_presets():
    assert get_format("binary8p4") == BINARY8P4
    assert (BFLOAT16.precision, BFLOAT16.bias, BFLOAT16.emax) == (8, 127, 254)
    with pytest.raises(ValueError):
        get_format("nope")
