import io
import warnings

import numpy as np
import pytest

from fbsr import FloatFormat, Mode
from fbsr.experiments import QatConfig, run_figure1, run_figure2, run_qat


def test_figure1_deterministic_and_csv():
    a = run_figure1(samples=200, seed=3, points=64)
    b = run_figure1(samples=200, seed=3, points=64, threads=3)
    assert np.array_equal(a.runs[Mode.SRFF].mean, b.runs[Mode.SRFF].mean)
    buf = io.StringIO()
    a.write(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# ")
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "x,mean_srff,mean_srf"
    assert len([l for l in lines if not l.startswith("#")]) == 65


def test_stderr_halves_with_four_times_samples():
    a = run_figure1(samples=500, seed=1, points=64).summaries[Mode.SRF].stderr_ulp
    b = run_figure1(samples=2000, seed=1, points=64).summaries[Mode.SRF].stderr_ulp
    assert abs(a / b - 2) < 0.4


def test_figure2_reference_is_enumeration():
    res = run_figure2(samples=1000, seed=2)
    assert res.config["D"] == 5
    assert len(res.x) == 32
    refs = {v: float(s.reference) for v, s in res.summaries.items()}
    assert refs == {Mode.SRFF: -0.046875, Mode.SRF: 0.015625, Mode.SRC: 0.0}


def test_qat_trace_shape_and_determinism():
    cfg = QatConfig(steps=50, replicas=4, seed=9)
    t1, t2 = run_qat(cfg), run_qat(cfg, threads=2)
    assert len(t1.loss) == len(t1.steps) == 51
    assert np.array_equal(t1.loss, t2.loss)
    assert t1.final_weights.shape == (4, 1)
    other = run_qat(QatConfig(steps=50, replicas=4, seed=10))
    assert not np.array_equal(t1.loss, other.loss)


def test_qat_warns_when_bits_exceed_excess():
    with pytest.warns(UserWarning):
        QatConfig(sr_bits=6, update_precision=8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        QatConfig(sr_bits=4, update_precision=8)
    with pytest.raises(ValueError):
        QatConfig(update_precision=4)


def test_tne_stagnates_on_small_updates():
    t = run_qat(QatConfig(problem="linreg", mode="tne", steps=400, update_precision=11, weight_decay=0.05))
    assert t.stagnated
    assert not t.diverged


@pytest.mark.slow
def test_drift_wide_format_long_run():
    # 8-bit weights, 12-bit updates: room for a long walk without spread
    kw = dict(weight_format=FloatFormat(8, 127, 254), update_precision=12, steps=10_000, replicas=64, seed=4)
    srff = run_qat(QatConfig(mode="srff", **kw)).replica_means
    src = run_qat(QatConfig(mode="src", **kw)).replica_means
    se = lambda m: m.std(ddof=1) / np.sqrt(m.size)
    assert 1 - srff.mean() > 5 * se(srff)
    assert abs(src.mean() - 1) <= 3 * se(src)
