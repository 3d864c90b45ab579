import numpy as np
import pytest

from multicast_antsel.channel import (
    ChannelRealization,
    MulticastChannel,
    PowerDelayProfile,
    SystemDims,
    generate_multicast,
    generate_pdp_channel,
    generate_rayleigh,
)
from multicast_antsel.errors import DomainError
from multicast_antsel.seeding import substream

N_SAMPLES = 100_000


def test_system_dims_validation():
    d = SystemDims(4, [2, 3])
    assert d.num_receivers == 2
    assert d.shape(1) == (3, 4)
    with pytest.raises(DomainError):
        SystemDims(0, [2])
    with pytest.raises(DomainError):
        SystemDims(2, [])
    with pytest.raises(DomainError):
        SystemDims(2, [1, 0])


def test_rayleigh_shape_and_determinism():
    d = SystemDims.uniform(2, 2, 1)
    h = generate_rayleigh(d, 0, seed=5)
    assert h.shape == (2, 2)
    assert h == generate_rayleigh(d, 0, seed=5)
    assert not np.array_equal(h.gains, generate_rayleigh(d, 0, seed=6).gains)


def test_rayleigh_receiver_out_of_range():
    with pytest.raises(DomainError):
        generate_rayleigh(SystemDims.uniform(2, 2, 2), 2, seed=0)


def _rayleigh_sample(seed=11):
    d = SystemDims(N_SAMPLES, [1])
    return generate_rayleigh(d, 0, seed).gains.ravel()


def test_rayleigh_unit_power_within_clt_bound():
    h = _rayleigh_sample()
    p = np.abs(h) ** 2
    assert abs(p.mean() - 1.0) <= 3 * p.std() / np.sqrt(p.size)


def test_rayleigh_real_imag_variance_half():
    h = _rayleigh_sample(12)
    for part in (h.real, h.imag):
        var = part.var(ddof=1)
        # standard error of the sample variance of a Gaussian: sigma^2 sqrt(2/(n-1))
        assert abs(var - 0.5) <= 3 * 0.5 * np.sqrt(2 / (part.size - 1))
        assert abs(part.mean()) <= 3 * np.sqrt(0.5 / part.size)


def test_pdp_validation():
    with pytest.raises(DomainError):
        PowerDelayProfile((), ())
    with pytest.raises(DomainError):
        PowerDelayProfile((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(DomainError):
        PowerDelayProfile((0.0, 1e-6), (1.0, 0.0))
    pdp = PowerDelayProfile.from_taps([(0.0, 0.8), (1e-6, 0.2)])
    assert pdp.num_taps == 2
    assert pdp.total_power == pytest.approx(1.0)
    assert pdp.rms_delay_spread() == pytest.approx(0.4e-6)


def test_pdp_empty_is_domain_error():
    with pytest.raises(DomainError):
        generate_pdp_channel(SystemDims.uniform(2, 2, 1), 0, None, 0)


def test_single_unit_tap_has_flat_distribution():
    d = SystemDims(N_SAMPLES, [1])
    (tap,) = generate_pdp_channel(d, 0, PowerDelayProfile.flat(), seed=3)
    p = np.abs(tap.gains.ravel()) ** 2
    assert abs(p.mean() - 1.0) <= 3 * p.std() / np.sqrt(p.size)
    # same generator law: drawing from the tap's sub-stream reproduces it exactly
    assert np.array_equal(tap.gains, generate_rayleigh(d, 0, substream(3, 0)).gains)


def test_two_tap_powers_and_independence():
    d = SystemDims(N_SAMPLES, [1])
    taps = generate_pdp_channel(d, 0, PowerDelayProfile((0.0, 1e-6), (0.8, 0.2)), seed=9)
    for tap, target in zip(taps, (0.8, 0.2)):
        p = np.abs(tap.gains.ravel()) ** 2
        assert abs(p.mean() - target) <= 3 * p.std() / np.sqrt(p.size)
    a, b = (t.gains.ravel() for t in taps)
    corr = np.abs(np.mean(a * np.conj(b))) / np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
    assert corr < 0.02
    # Pearson correlation of the powers as well
    rho = np.corrcoef(np.abs(a) ** 2, np.abs(b) ** 2)[0, 1]
    assert abs(rho) < 3 / np.sqrt(a.size)


def test_tap_correlation_across_realizations():
    # corresponding entries, 10^4 independent realizations of a 2x2 channel
    d = SystemDims.uniform(2, 2, 1)
    pdp = PowerDelayProfile((0.0, 5e-7), (0.5, 0.5))
    n = 10_000
    draws = [generate_pdp_channel(d, 0, pdp, substream(77, i)) for i in range(n)]
    t0 = np.array([t[0].gains for t in draws]).reshape(n, -1)
    t1 = np.array([t[1].gains for t in draws]).reshape(n, -1)
    for j in range(t0.shape[1]):
        r = np.corrcoef(t0[:, j].real, t1[:, j].real)[0, 1]
        assert abs(r) < 3 / np.sqrt(n)


def test_multicast_four_receivers(dims_4x4_r4):
    ch = generate_multicast(dims_4x4_r4, seed=1)
    assert len(ch.realizations) == 4
    assert all(h.shape == (4, 4) for h in ch.realizations)
    assert ch.stacked().shape == (16, 4)


def test_multicast_single_receiver_matches_derived_seed():
    d = SystemDims.uniform(3, 2, 1)
    ch = generate_multicast(d, seed=42)
    assert ch.realization(0) == generate_rayleigh(d, 0, substream(42, 0))


def test_multicast_determinism_and_receiver_independence(dims_4x4_r4):
    a = generate_multicast(dims_4x4_r4, seed=8)
    assert a == generate_multicast(dims_4x4_r4, seed=8)
    assert a != generate_multicast(dims_4x4_r4, seed=9)
    g = [a.gains(r) for r in range(4)]
    assert all(not np.array_equal(g[0], g[r]) for r in range(1, 4))


def test_multicast_with_pdp_layout():
    d = SystemDims(3, [2, 4])
    pdp = PowerDelayProfile((0.0, 1e-7, 3e-7), (0.6, 0.3, 0.1))
    ch = generate_multicast(d, pdp, seed=0)
    assert ch.num_taps == 3 and not ch.is_flat
    assert len(ch.realizations) == 6
    assert ch.gains(1, 2).shape == (4, 3)
    assert ch.realization(1, 2).tap == 2


def test_multicast_channel_rejects_mislabelled():
    d = SystemDims.uniform(2, 2, 2)
    h = ChannelRealization(np.ones((2, 2)), 0)
    with pytest.raises(DomainError):
        MulticastChannel((h, h), d)


def test_realization_rejects_non_finite():
    with pytest.raises(DomainError):
        ChannelRealization(np.array([[np.nan]]))
