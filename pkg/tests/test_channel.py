import math

import numpy as np
import pytest

from hybridlink.channel import ChannelSpec, apply
from hybridlink.modem import SampleStream


def unit_power_stream(n=100_000, seed=0):
    rng = np.random.default_rng(seed)
    return SampleStream((rng.standard_normal(n) + 1j * rng.standard_normal(n))
                        / math.sqrt(2))


def test_identity_when_noise_disabled():
    stream = unit_power_stream(1000)
    out = apply(stream, ChannelSpec(snr_db=math.inf))
    assert np.array_equal(out.samples, stream.samples)


def test_delay_prepends_zeros():
    stream = unit_power_stream(100)
    out = apply(stream, ChannelSpec(snr_db=math.inf, delay_samples=37))
    assert len(out.samples) == 137
    assert not out.samples[:37].any()
    assert np.array_equal(out.samples[37:], stream.samples)


def test_noise_variance_at_0db():
    stream = unit_power_stream()
    out = apply(stream, ChannelSpec(snr_db=0.0, seed=1))
    noise = out.samples - stream.samples
    p_sig = np.mean(np.abs(stream.samples) ** 2)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(p_sig, rel=0.02)


@pytest.mark.parametrize("snr_db", [-5.0, 0.0, 10.0, 23.0])
def test_measured_snr_within_tenth_db(snr_db):
    stream = unit_power_stream(200_000, seed=2)
    out = apply(stream, ChannelSpec(snr_db=snr_db, seed=3))
    noise = out.samples - stream.samples
    measured = 10 * math.log10(np.mean(np.abs(stream.samples) ** 2)
                               / np.mean(np.abs(noise) ** 2))
    assert abs(measured - snr_db) <= 0.1


def test_snr_reference_is_faded_power():
    # with |h| != 1, noise must track the faded signal power
    stream = unit_power_stream(200_000, seed=4)
    spec = ChannelSpec(snr_db=7.0, fading="flat_rayleigh", seed=5)
    out = apply(stream, spec)
    h_est = np.mean(out.samples / stream.samples)
    faded = stream.samples * h_est
    noise = out.samples - faded
    measured = 10 * math.log10(np.mean(np.abs(faded) ** 2)
                               / np.mean(np.abs(noise) ** 2))
    assert abs(measured - 7.0) <= 0.15


def test_rayleigh_gain_is_one_draw_per_burst():
    stream = unit_power_stream(1000, seed=6)
    out = apply(stream, ChannelSpec(snr_db=math.inf, fading="flat_rayleigh", seed=7))
    ratio = out.samples / stream.samples
    assert np.allclose(ratio, ratio[0])
    # different fading seed, different gain
    out2 = apply(stream, ChannelSpec(snr_db=math.inf, fading="flat_rayleigh",
                                     seed=7, fading_seed=8))
    assert abs(out2.samples[0] / stream.samples[0] - ratio[0]) > 1e-6


def test_reproducible_bit_identical():
    stream = unit_power_stream(5000, seed=9)
    spec = ChannelSpec(snr_db=3.0, fading="flat_rayleigh", delay_samples=11, seed=10)
    a = apply(stream, spec)
    b = apply(stream, spec)
    assert np.array_equal(a.samples, b.samples)


def test_zero_input_stays_zero():
    out = apply(SampleStream(np.zeros(100, dtype=complex)), ChannelSpec(snr_db=10.0))
    assert not out.samples.any()


def test_bad_spec_rejected():
    with pytest.raises(ValueError):
        ChannelSpec(fading="rician")
    with pytest.raises(ValueError):
        ChannelSpec(delay_samples=-1)
