import numpy as np
import pytest

from clockbench.simcore import LocalClock, quantize


def test_identity_clock():
    c = LocalClock(offset0=0.0, skew=0.0, read_noise_sigma=0.0, granularity=1e-9)
    assert c.read(1.0) == 1.0


def test_direct_substitution():
    # offset0 + (1 + skew) * t = 0.5 + 100 * 1.00001 = 100.501, floor-quantized at 1 ns
    c = LocalClock(offset0=0.5, skew=1e-5, read_noise_sigma=0.0, granularity=1e-9)
    assert c.read(100.0) == pytest.approx(100.501, abs=1.01e-9)


def test_divergence_700us_after_50s():
    # two clocks with skews +-0.7e-5 drift apart by about 700 us over 50 s
    a = LocalClock(skew=0.7e-5, read_noise_sigma=0.0)
    b = LocalClock(skew=-0.7e-5, read_noise_sigma=0.0)
    gap = a.read(50.0) - b.read(50.0)
    assert gap == pytest.approx(700e-6, rel=1e-6)


def test_rejects_negative_time():
    c = LocalClock()
    with pytest.raises(ValueError):
        c.read(-1.0)


def test_monotone_under_noise():
    rng = np.random.default_rng(7)
    c = LocalClock(read_noise_sigma=5e-8, granularity=1e-9, rng=np.random.default_rng(3))
    t = 0.0
    prev = -np.inf
    for _ in range(500):
        t += float(rng.uniform(0, 1e-7))
        v = c.read(t)
        assert v >= prev
        prev = v


def test_rejects_backward_reads():
    c = LocalClock()
    c.read(1.0)
    with pytest.raises(ValueError):
        c.read(0.5)


def test_noise_clipped_to_4_sigma():
    sigma = 1e-6
    c = LocalClock(read_noise_sigma=sigma, granularity=1e-12, rng=np.random.default_rng(11))
    times = np.cumsum(np.full(20000, 1e-3))
    vals = c.read_sequence(times)
    err = vals - times
    assert np.max(np.abs(err)) <= 4 * sigma + 1e-12


def test_quantize_floors():
    assert quantize(5.6789e-9, 1e-9) == pytest.approx(5e-9, abs=1e-15)
    assert quantize(np.array([2.5e-9]), 1e-9)[0] == pytest.approx(2e-9, abs=1e-15)
    # exact multiples survive binary representation of the quantum
    assert quantize(7e-9, 1e-9) == pytest.approx(7e-9, abs=1e-18)
    assert quantize(1.0, 1e-9) == 1.0


def test_invert_reaches_target():
    c = LocalClock(offset0=0.25, skew=3e-6, read_noise_sigma=0.0, granularity=1e-9)
    target = 1.0
    t = c.invert(target)
    assert c.noiseless_at(t) >= target - 1e-18
    assert c.noiseless_at(t - 2e-9) < target


def test_skew_bound_enforced():
    with pytest.raises(ValueError):
        LocalClock(skew=2e-3)
