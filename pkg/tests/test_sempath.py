import numpy as np
import pytest

from hybridlink.dci import dequantize_gain, quantize_gain
from hybridlink.errors import InvalidGain
from hybridlink.sempath import denormalize_and_unpack, pack_and_normalize


def test_adjacent_pairs_become_real_and_imag():
    symbols, gain = pack_and_normalize(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(symbols / gain, [1 + 2j, 3 + 4j])


def test_34_example_gain_is_fifth():
    symbols, gain = pack_and_normalize(np.array([3.0, 4.0]))
    assert gain == pytest.approx(0.2)
    assert symbols[0] == pytest.approx(0.6 + 0.8j)


def test_zero_input_keeps_unit_gain():
    symbols, gain = pack_and_normalize(np.zeros(4))
    assert gain == 1.0
    assert np.array_equal(symbols, [0, 0])


def test_unit_mean_power_property():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.uniform(-10, 10, int(rng.integers(1, 500)))
        symbols, _ = pack_and_normalize(v)
        assert np.mean(np.abs(symbols) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_roundtrip_exact_gain():
    rng = np.random.default_rng(1)
    v = rng.uniform(-10, 10, 10_000)
    symbols, gain = pack_and_normalize(v)
    back = denormalize_and_unpack(symbols, gain, len(v))
    assert np.max(np.abs(back - v)) <= 1e-6


def test_roundtrip_quantized_gain_within_bound():
    rng = np.random.default_rng(2)
    for _ in range(20):
        v = rng.uniform(-10, 10, 2000)
        symbols, gain = pack_and_normalize(v)
        g_hat = dequantize_gain(quantize_gain(gain))
        back = denormalize_and_unpack(symbols, g_hat, len(v))
        # oracle: the scale mismatch is exactly gain/g_hat - 1
        bound = abs(gain / g_hat - 1.0) * np.linalg.norm(v) + 1e-9
        assert np.linalg.norm(back - v) <= bound


def test_odd_length_pad_dropped():
    v = np.array([1.0, -2.0, 0.5])
    symbols, gain = pack_and_normalize(v)
    assert len(symbols) == 2
    back = denormalize_and_unpack(symbols, gain, 3)
    assert np.allclose(back, v, atol=1e-12)


def test_invalid_gain_rejected():
    with pytest.raises(InvalidGain):
        denormalize_and_unpack(np.array([1 + 1j]), 0.0, 2)


def test_pack_unpack_identity_both_ways():
    rng = np.random.default_rng(3)
    v = rng.standard_normal(256)
    symbols, gain = pack_and_normalize(v)
    assert np.allclose(denormalize_and_unpack(symbols, gain, 256), v, atol=1e-12)
    # unpack then pack reproduces the symbols (same normalization state)
    symbols2, gain2 = pack_and_normalize(
        denormalize_and_unpack(symbols, gain, 256))
    assert gain2 == pytest.approx(gain)
    assert np.allclose(symbols2, symbols, atol=1e-12)


def test_awgn_mse_scales_with_inverse_gain_squared():
    # Monte Carlo oracle for the analog-transmission contract: per-axis noise
    # variance sigma2/2 on unit-power symbols becomes sigma2/(2 g^2) on v
    rng = np.random.default_rng(4)
    v = rng.uniform(-3, 3, 200_000)
    symbols, gain = pack_and_normalize(v)
    sigma2 = 0.05
    noise = (rng.standard_normal(len(symbols))
             + 1j * rng.standard_normal(len(symbols))) * np.sqrt(sigma2 / 2)
    back = denormalize_and_unpack(symbols + noise, gain, len(v))
    mse = np.mean((back - v) ** 2)
    assert mse == pytest.approx(sigma2 / (2 * gain ** 2), rel=0.05)
