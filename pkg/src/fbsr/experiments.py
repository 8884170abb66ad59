"""Desk-scale bias sweeps and a quantization-aware training toy.

``run_figure1`` sweeps a midpoint grid of real values across one binade of
Binary8P4; ``run_figure2`` sweeps every BFloat16 value in one inter-float
interval of a precision-3 format. ``run_qat`` stores weights in a low
precision format and writes every update back through :func:`round_array`.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np

from .bias import MonteCarloResult, bias_enumerated, bias_monte_carlo
from .formats import BFLOAT16, BINARY8P4, P3, FloatFormat
from .randbits import SeededPrng, derive_seed
from .rounding import Mode, RoundingSpec, round_array, ulp_at

log = logging.getLogger(__name__)

FIG1_COLUMNS = ("x", "mean_srff", "mean_srf")
FIG2_COLUMNS = ("x", "mean_srff", "mean_srf", "mean_src")
QAT_COLUMNS = ("step", "loss", "mean_abs_weight")

STAGNATION_WINDOW = 0.25
DIVERGENCE_FACTOR = 10.0


def fmt17(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(out: TextIO, columns: Iterable[str], rows, preamble: dict | None = None) -> None:
    """``#key=value`` preamble lines, a header row, then 17-digit values."""
    for key, value in (preamble or {}).items():
        out.write(f"# {key}={value}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(columns))
    for row in rows:
        w.writerow([fmt17(v) for v in row])


@dataclass
class VariantSummary:
    variant: Mode
    bias_ulp: float
    stderr_ulp: float
    reference: Fraction
    reference_label: str

    @property
    def z(self) -> float:
        return (self.bias_ulp - float(self.reference)) / self.stderr_ulp if self.stderr_ulp else 0.0

    def line(self) -> str:
        return (
            f"{self.variant.value}: bias={self.bias_ulp:+.6f} ulp  stderr={self.stderr_ulp:.2e}  "
            f"{self.reference_label}={float(self.reference):+.6f} ({self.reference})  z={self.z:+.2f}"
        )


@dataclass
class SweepResult:
    columns: tuple[str, ...]
    x: np.ndarray
    runs: dict[Mode, MonteCarloResult]
    summaries: dict[Mode, VariantSummary]
    config: dict = field(default_factory=dict)

    def rows(self):
        means = [self.runs[v].mean for v in self.runs]
        for j, x in enumerate(self.x):
            yield (x, *(m[j] for m in means))

    def write(self, out: TextIO) -> None:
        write_csv(out, self.columns, self.rows(), self.config)


def run_figure1(
    N: int = 2,
    samples: int = 5000,
    seed: int = 0,
    fmt: FloatFormat = BINARY8P4,
    lo: float = 1.0,
    points: int = 1024,
    threads: int = 1,
) -> SweepResult:
    """SRFF and SRF means over a midpoint grid of real values in [lo, 2 lo).

    With a whole number of 2^N grid cells per destination interval the
    midpoint rule integrates the per-point bias exactly, so the grid average
    reference is the infinite-precision value.
    """
    hi = 2 * lo
    runs = {
        v: bias_monte_carlo(v, fmt, N, lo, hi, samples, seed, points=points, threads=threads)
        for v in (Mode.SRFF, Mode.SRF)
    }
    summaries = {
        v: VariantSummary(v, r.grid_bias_ulp, r.stderr_ulp, r.exact_grid_bias_ulp, "grid_exact")
        for v, r in runs.items()
    }
    config = dict(experiment="fig1", format=fmt.name or fmt.describe(), N=N, samples=samples, seed=seed,
                  lo=lo, hi=hi, points=points)
    return SweepResult(FIG1_COLUMNS, runs[Mode.SRFF].x, runs, summaries, config)


def run_figure2(
    N: int = 3,
    samples: int = 100_000,
    seed: int = 0,
    src: FloatFormat = BFLOAT16,
    dst: FloatFormat = P3,
    lo: float = 1.0,
    inner: Mode = Mode.TNE,
    threads: int = 1,
) -> SweepResult:
    """SRFF, SRF and SRC means over every ``src`` value in [lo, lo + ulp_dst)."""
    D = src.precision - dst.precision
    if D < 1:
        raise ValueError("source precision must exceed destination precision")
    lo_f = Fraction(lo)
    hi_f = lo_f + ulp_at(lo_f, dst)
    runs = {
        v: bias_monte_carlo(v, dst, N, lo_f, hi_f, samples, seed, src=src, inner=inner, threads=threads)
        for v in (Mode.SRFF, Mode.SRF, Mode.SRC)
    }
    summaries = {}
    for v, r in runs.items():
        ref = bias_enumerated(v, N, D, inner).value if N + D <= 30 else r.exact_grid_bias_ulp
        summaries[v] = VariantSummary(v, r.grid_bias_ulp, r.stderr_ulp, ref, "enumerated")
    config = dict(experiment="fig2", src=src.name or src.describe(), dst=dst.name or dst.describe(), N=N, D=D,
                  samples=samples, seed=seed, lo=lo, hi=float(hi_f), inner=Mode(inner).value)
    return SweepResult(FIG2_COLUMNS, runs[Mode.SRFF].x, runs, summaries, config)


# --- quantization-aware training --------------------------------------------


class Problem(str, enum.Enum):
    DRIFT_WALK = "drift"
    LINEAR_REGRESSION = "linreg"


@dataclass(frozen=True)
class QatConfig:
    problem: Problem = Problem.DRIFT_WALK
    mode: Mode = Mode.SRFF
    sr_bits: int = 3
    inner: Mode = Mode.TNE
    weight_format: FloatFormat = BINARY8P4
    update_precision: int = 8
    steps: int = 1000
    learning_rate: float = 0.3
    weight_decay: float = 0.0
    seed: int = 0
    replicas: int = 1
    params: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "problem", Problem(self.problem))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "inner", Mode(self.inner))
        if self.params is None:
            object.__setattr__(self, "params", 1 if self.problem is Problem.DRIFT_WALK else 32)
        if self.steps < 1 or self.replicas < 1 or self.params < 1:
            raise ValueError("steps, replicas and params must be positive")
        if self.update_precision <= self.weight_format.precision:
            raise ValueError("update precision must exceed the weight precision")
        excess = self.update_precision - self.weight_format.precision
        if self.mode.stochastic and self.sr_bits > excess:
            warnings.warn(f"sr_bits={self.sr_bits} exceeds the {excess} excess update bits", stacklevel=2)

    @property
    def rounding(self) -> RoundingSpec:
        if not self.mode.stochastic:
            return RoundingSpec(self.mode)
        return RoundingSpec(self.mode, self.sr_bits, self.inner if self.mode is Mode.SRC else None)

    @property
    def update_format(self) -> FloatFormat:
        return FloatFormat(self.update_precision, 127, 254, f"p{self.update_precision}")

    @property
    def excess_bits(self) -> int:
        return self.update_precision - self.weight_format.precision

    def as_dict(self) -> dict:
        return dict(
            experiment="qat", problem=self.problem.value, mode=str(self.rounding),
            weight_format=self.weight_format.name or self.weight_format.describe(),
            update_precision=self.update_precision, steps=self.steps, learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.seed, replicas=self.replicas, params=self.params,
            stagnation_window=STAGNATION_WINDOW, divergence_factor=DIVERGENCE_FACTOR,
        )


@dataclass
class QatTrace:
    steps: np.ndarray
    loss: np.ndarray
    mean_abs_weight: np.ndarray
    final_weights: np.ndarray  # replicas x params
    final_loss_per_replica: np.ndarray
    stagnated: bool
    diverged: bool
    config: QatConfig

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1])

    @property
    def final_mean_abs_weight(self) -> float:
        return float(self.mean_abs_weight[-1])

    @property
    def replica_means(self) -> np.ndarray:
        return self.final_weights.mean(axis=1)

    def rows(self):
        return zip(self.steps, self.loss, self.mean_abs_weight)

    def write(self, out: TextIO) -> None:
        write_csv(out, QAT_COLUMNS, self.rows(), self.config.as_dict())

    def summary(self) -> str:
        rm = self.replica_means
        se = rm.std(ddof=1) / math.sqrt(len(rm)) if len(rm) > 1 else float("nan")
        return (
            f"final_loss={self.final_loss:.6g} final_mean_abs_weight={self.final_mean_abs_weight:.6g} "
            f"mean_final_weight={rm.mean():.6g} replica_stderr={se:.3g} "
            f"stagnated={self.stagnated} diverged={self.diverged}"
        )


def ulp_of(w: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    _, ex = np.frexp(np.abs(w))
    e = np.maximum(ex - 1, fmt.min_exponent)
    return np.ldexp(1.0, (e - fmt.trailing_bits).astype(np.int32))


class _LinearProblem:
    """Fixed least-squares data shared by every replica and every seed."""

    DATA_SEED = 20240607
    SAMPLES = 128

    def __init__(self, params: int):
        rng = np.random.default_rng(self.DATA_SEED)
        self.X = rng.standard_normal((self.SAMPLES, params))
        self.w_true = rng.uniform(-1.0, 1.0, params)
        self.y = self.X @ self.w_true + 0.05 * rng.standard_normal(self.SAMPLES)

    def loss(self, W: np.ndarray) -> np.ndarray:
        r = W @ self.X.T - self.y
        return 0.5 * np.mean(r * r, axis=1)

    def grad(self, W: np.ndarray) -> np.ndarray:
        r = W @ self.X.T - self.y
        return r @ self.X / self.SAMPLES


def run_qat(config: QatConfig, threads: int = 1) -> QatTrace:
    """Train ``config.replicas`` independent copies and trace their average.

    Each step forms ``w + u`` at the update precision (ties-to-even), then
    writes it back into the weight format with the configured rounding.
    Replica ``r`` takes rounding bits from ``SeededPrng(derive_seed(seed, r))``
    and any update noise from ``default_rng([seed, r])``.
    """
    c = config
    wfmt, ufmt, spec = c.weight_format, c.update_format, c.rounding
    tne = RoundingSpec(Mode.TNE)
    R, T = c.replicas, c.steps

    P = c.params
    if c.problem is Problem.DRIFT_WALK:
        problem = None
        W = np.ones((R, P))
    else:
        problem = _LinearProblem(P)
        W = np.zeros((R, P))
    W = round_array(W, wfmt, tne)

    def draw_streams(r):
        bits = SeededPrng(derive_seed(c.seed, r)).draws(spec.random_bits, T * P).reshape(T, P) if spec.mode.stochastic else None
        noise = None
        if problem is None:
            g = np.random.default_rng([c.seed, r])
            k = g.integers(0, 1 << c.excess_bits, size=(T, P))
            sign = np.where(g.integers(0, 2, size=(T, P)) == 1, 1.0, -1.0)
            noise = sign * k
        return bits, noise

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            streams = list(pool.map(draw_streams, range(R)))
    else:
        streams = [draw_streams(r) for r in range(R)]
    bits = np.stack([s[0] for s in streams], axis=1) if spec.mode.stochastic else None  # T x R x P
    noise = np.stack([s[1] for s in streams], axis=1) if problem is None else None

    def loss_of(W):
        if problem is None:
            return np.mean((W - 1.0) ** 2, axis=1)
        return problem.loss(W)

    losses = np.empty(T + 1)
    mabs = np.empty(T + 1)
    cur = loss_of(W)
    losses[0], mabs[0] = cur.mean(), np.abs(W).mean()
    window_start = T - int(T * STAGNATION_WINDOW)
    moved_in_window = False
    for t in range(T):
        if problem is None:
            u = noise[t] * ulp_of(W, wfmt) * 2.0 ** -c.excess_bits
        else:
            u = -c.learning_rate * (problem.grad(W) + c.weight_decay * W)
        u = round_array(u, ufmt, tne)
        w16 = round_array(W + u, ufmt, tne)
        new = round_array(w16, wfmt, spec, None if bits is None else bits[t])
        if t >= window_start and not moved_in_window:
            moved_in_window = not np.array_equal(new, W)
        W = new
        cur = loss_of(W)
        losses[t + 1], mabs[t + 1] = cur.mean(), np.abs(W).mean()

    stagnated = not moved_in_window
    diverged = bool(losses[-1] > DIVERGENCE_FACTOR * losses.min())
    log.debug("qat %s: %s", spec, losses[-1])
    return QatTrace(np.arange(T + 1), losses, mabs, W, cur, stagnated, diverged, config)
