import bisect
from fractions import Fraction

import pytest

from fbsr import FloatFormat, enumerate_finite

# Two small formats, small enough to walk every value.
SMALL_A = FloatFormat(3, 3, 6, "p3b3")
SMALL_B = FloatFormat(4, 2, 5, "p4b2")
SMALL_FORMATS = [SMALL_A, SMALL_B]


def neighbours(values, x):
    """Largest value <= x and smallest value > x, by bisection."""
    i = bisect.bisect_right(values, x)
    return values[i - 1], values[i]


def oracle_delta(values, x):
    lo, hi = neighbours(values, x)
    return lo, hi, (Fraction(x) - lo) / (hi - lo)


@pytest.fixture(params=SMALL_FORMATS, ids=lambda f: f.name)
def small_fmt(request):
    return request.param


@pytest.fixture
def small_values(small_fmt):
    return enumerate_finite(small_fmt)
