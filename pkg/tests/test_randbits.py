import numpy as np
import pytest

from fbsr.randbits import Counter, Fixed, SeededPrng, derive_seed, make_source

# Upper tail of chi-square: P(X > crit) ~ 1e-6 via Wilson-Hilferty.
def chi2_critical(dof, z=4.753):
    return dof * (1 - 2 / (9 * dof) + z * np.sqrt(2 / (9 * dof))) ** 3


def test_counter_and_fixed():
    c = Counter()
    assert [c.next_bits(2) for _ in range(6)] == [0, 1, 2, 3, 0, 1]
    assert list(Counter(2).draws(2, 4)) == [2, 3, 0, 1]
    f = Fixed(5)
    assert [f.next_bits(3) for _ in range(3)] == [5, 5, 5]
    with pytest.raises(ValueError):
        Fixed(5).next_bits(2)


@pytest.mark.parametrize("N", range(1, 9))
def test_prng_uniform(N):
    k = 1 << N
    counts = np.bincount(SeededPrng(42).draws(N, 1 << 16), minlength=k)
    assert counts.size == k
    expected = (1 << 16) / k
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < chi2_critical(k - 1)


def test_scalar_and_vector_draws_agree():
    a = SeededPrng(7)
    b = SeededPrng(7)
    assert [a.next_bits(5) for _ in range(100)] == list(b.draws(5, 100))


def test_reproducible_and_seed_sensitive():
    assert np.array_equal(SeededPrng(3).draws(8, 64), SeededPrng(3).draws(8, 64))
    assert not np.array_equal(SeededPrng(3).draws(8, 64), SeededPrng(4).draws(8, 64))


def test_bad_width():
    for N in (0, 33):
        with pytest.raises(ValueError):
            SeededPrng(0).next_bits(N)
        with pytest.raises(ValueError):
            Counter().draws(N, 2)


def test_derive_seed():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    seeds = {derive_seed(s, r) for s in (1, 2) for r in range(4)}
    assert len(seeds) == 8


def test_make_source():
    assert isinstance(make_source("prng", 1), SeededPrng)
    assert make_source("counter", 3).next_bits(4) == 3
    assert make_source("fixed", 2).next_bits(4) == 2
    with pytest.raises(ValueError):
        make_source("dice")
