"""Sources of uniform N-bit integers for stochastic rounding.

A source is single-owner mutable state. For parallel work create one source
per worker, e.g. ``SeededPrng(seed ^ index)``.
"""

from __future__ import annotations

import numpy as np

MAX_BITS = 32


def _check_bits(N: int) -> None:
    if not 1 <= N <= MAX_BITS:
        raise ValueError(f"bits per draw must be in [1, {MAX_BITS}], got {N}")


class BitSource:
    kind = "abstract"

    def next_bits(self, N: int) -> int:
        raise NotImplementedError

    def draws(self, N: int, size: int) -> np.ndarray:
        """``size`` consecutive draws as an int64 array."""
        return np.fromiter((self.next_bits(N) for _ in range(size)), dtype=np.int64, count=size)


class SeededPrng(BitSource):
    """numpy's PCG64 (PCG XSL RR 128/64) keyed by an unsigned 64-bit seed.

    Each draw consumes one 64-bit output word and keeps its top N bits.
    """

    kind = "prng"

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self._bitgen = np.random.PCG64(self.seed)

    def next_bits(self, N: int) -> int:
        _check_bits(N)
        return int(self._bitgen.random_raw()) >> (64 - N)

    def draws(self, N: int, size: int) -> np.ndarray:
        _check_bits(N)
        raw = self._bitgen.random_raw(size)
        return (raw >> np.uint64(64 - N)).astype(np.int64)


class Counter(BitSource):
    """The k-th draw is k mod 2^N; 2^N draws visit every value once."""

    kind = "counter"

    def __init__(self, start: int = 0):
        self.count = int(start)

    def next_bits(self, N: int) -> int:
        _check_bits(N)
        v = self.count % (1 << N)
        self.count += 1
        return v

    def draws(self, N: int, size: int) -> np.ndarray:
        _check_bits(N)
        out = (np.arange(self.count, self.count + size, dtype=np.int64)) % (1 << N)
        self.count += size
        return out


class Fixed(BitSource):
    kind = "fixed"

    def __init__(self, value: int):
        self.value = int(value)

    def next_bits(self, N: int) -> int:
        _check_bits(N)
        if not 0 <= self.value < 1 << N:
            raise ValueError(f"fixed draw {self.value} does not fit in {N} bits")
        return self.value

    def draws(self, N: int, size: int) -> np.ndarray:
        return np.full(size, self.next_bits(N), dtype=np.int64)


def derive_seed(seed: int, *keys: int) -> int:
    """Well-mixed 64-bit seed for stream ``keys`` under a run ``seed``.

    Unlike ``seed ^ key`` this never maps two runs onto permutations of the
    same set of streams.
    """
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *keys])
    return int(ss.generate_state(1, np.uint64)[0])


def make_source(kind: str, seed: int = 0) -> BitSource:
    if kind == "prng":
        return SeededPrng(seed)
    if kind == "counter":
        return Counter(seed)
    if kind == "fixed":
        return Fixed(seed)
    raise ValueError(f"unknown bit source {kind!r}")
