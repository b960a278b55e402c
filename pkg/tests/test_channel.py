import math

import numpy as np
import pytest

from afc.channel import ChannelParams, capacity_bits, pair_complex, snr_to_sigma, transmit
from afc.rng import substream


def test_snr_to_sigma_basics():
    assert snr_to_sigma(0.0) == 1.0
    assert abs(snr_to_sigma(10.0) - 0.1) < 1e-15
    assert abs(snr_to_sigma(15.0) - 0.03162277660168379) < 1e-12


def test_per_complex_noise_halves():
    assert snr_to_sigma(0.0, per_complex_noise=True) == 0.5


def test_capacity_matches_convention():
    assert abs(capacity_bits(0.0) - 1.0) < 1e-12
    assert abs(capacity_bits(15.0) - math.log2(1 + 10**1.5)) < 1e-12


def test_noiseless_is_exact():
    c = substream(0, 1).normal(size=100)
    u = transmit(c, ChannelParams(15.0, noiseless=True), substream(0, 2))
    assert np.array_equal(u, c)
    assert u is not c


def test_noise_variance():
    params = ChannelParams(7.0)
    u = transmit(np.zeros(1_000_000), params, substream(0, 3))
    assert abs(float(np.var(u)) - params.sigma2) < 0.01 * params.sigma2


def test_fixed_seed_reproducible():
    c = np.zeros(1000)
    a = transmit(c, ChannelParams(10.0), substream(0, 4))
    b = transmit(c, ChannelParams(10.0), substream(0, 4))
    assert np.array_equal(a, b)


def test_pair_complex():
    assert pair_complex(10) == 5
    assert pair_complex(11) == 6
    assert pair_complex(0) == 0
    with pytest.raises(ValueError):
        pair_complex(-1)


def test_substream_noise_independence():
    n = 1_000_000
    a = transmit(np.zeros(n), ChannelParams(0.0), substream(9, 1))
    b = transmit(np.zeros(n), ChannelParams(0.0), substream(9, 2))
    bound = 2.58 / math.sqrt(n)  # 1% two-sided significance
    lag1 = float(np.mean(a[:-1] * a[1:]))
    cross = float(np.mean(a * b))
    assert abs(lag1) < bound
    assert abs(cross) < bound
