import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from multicast_antsel.capacity import AntennaSubset
from multicast_antsel.channel import MulticastChannel, SystemDims, generate_multicast
from multicast_antsel.errors import DomainError, QuadratureError
from multicast_antsel.genetic import GaConfig, evolve_multicast
from multicast_antsel.capacity import SelectionSpec
from multicast_antsel.ser import (
    LinkSimConfig,
    QamConstellation,
    SerCurve,
    SerParams,
    analytic_ser_curve,
    average_ser,
    combined_snr_pdf,
    conditional_ser_qam,
    q_function,
    simulate_link,
)

from ser_oracles import mc_qam_ser, quad_average_ser, rayleigh_qam_ser_closed_form, within_3_sigma

# -- Q function ----------------------------------------------------------------


def test_q_zero_and_symmetry():
    assert q_function(0.0) == 0.5
    x = np.linspace(-6, 6, 61)
    assert np.allclose(q_function(x) + q_function(-x), 1.0, atol=1e-15)


def test_q_against_tail_quadrature():
    tail, _ = integrate.quad(lambda u: np.exp(-u * u / 2) / np.sqrt(2 * np.pi), 1.6449, np.inf)
    assert q_function(1.6449) == pytest.approx(tail, abs=1e-12)
    assert q_function(1.6449) == pytest.approx(0.05, abs=1e-4)


def test_q_accuracy_against_mpmath():
    mpmath.mp.dps = 40
    for x in np.linspace(-8, 8, 321):
        ref = float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)
        assert abs(q_function(x) - ref) <= 1e-12


# -- conditional SER -----------------------------------------------------------


def test_conditional_ser_limits():
    assert conditional_ser_qam(0.0, 16) == pytest.approx(0.9375, abs=1e-15)
    for variant in ("standard", "paper_literal"):
        assert conditional_ser_qam(1e6, 16, variant) < 1e-300 or conditional_ser_qam(1e6, 16, variant) == 0.0
    assert conditional_ser_qam(0.0, 16, "paper_literal") == pytest.approx(1.0)  # 4*0.75*0.5 clipped


@pytest.mark.parametrize("k", [3, 8, 2, 1])
def test_conditional_ser_invalid_order(k):
    with pytest.raises(DomainError):
        conditional_ser_qam(1.0, k)


def test_conditional_ser_negative_gamma():
    with pytest.raises(DomainError):
        conditional_ser_qam(-1.0, 16)
    with pytest.raises(DomainError):
        conditional_ser_qam(1.0, 16, "union")


def test_conditional_ser_monotone_and_variant_order():
    g = np.concatenate([[0.0], np.logspace(-3, 3, 400)])
    for k in (4, 16, 64):
        std = conditional_ser_qam(g, k, "standard")
        lit = conditional_ser_qam(g, k, "paper_literal")
        assert np.all(np.diff(std) <= 0) and np.all(np.diff(lit) <= 0)
        assert np.all(lit >= std)
        assert np.all((0 <= std) & (std <= 1)) and np.all((0 <= lit) & (lit <= 1))


def test_conditional_ser_matches_awgn_monte_carlo():
    gamma = 10**1.5
    p = conditional_ser_qam(gamma, 16)
    errors, n = mc_qam_ser(16, gamma, 1, 10_000_000, seed=2024, fading=False)
    assert within_3_sigma(p, errors, n)


# -- combined SNR density ------------------------------------------------------


def test_pdf_point_values():
    assert combined_snr_pdf(0.0, 1, 1.0) == 1.0
    assert combined_snr_pdf(1.0, 2, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert combined_snr_pdf(0.0, 3, 2.0) == 0.0
    with pytest.raises(DomainError):
        combined_snr_pdf(-0.1, 2, 1.0)
    with pytest.raises(DomainError):
        combined_snr_pdf(1.0, 0, 1.0)


@pytest.mark.parametrize("L", [1, 2, 3, 4])
@pytest.mark.parametrize("gbar", [1.0, 10.0])
def test_pdf_normalised_with_mean(L, gbar):
    mass, _ = integrate.quad(combined_snr_pdf, 0, np.inf, args=(L, gbar), epsabs=1e-13, epsrel=1e-12)
    mean, _ = integrate.quad(lambda g: g * combined_snr_pdf(g, L, gbar), 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert abs(mass - 1) <= 1e-8
    assert mean == pytest.approx(L * gbar, rel=1e-6)
    assert np.all(combined_snr_pdf(np.linspace(0, 50 * gbar, 500), L, gbar) >= 0)


# -- average SER ---------------------------------------------------------------


@pytest.mark.parametrize("gbar", [0.5, 1.0, 10.0, 100.0, 1e3])
def test_average_ser_single_branch_closed_form(gbar):
    assert average_ser(SerParams(1, gbar), 16) == pytest.approx(rayleigh_qam_ser_closed_form(16, gbar), rel=1e-8)


@pytest.mark.parametrize("L,gbar", [(2, 10.0), (3, 3.0), (4, 50.0), (2, 1e3)])
def test_average_ser_against_direct_quadrature(L, gbar):
    assert average_ser(SerParams(L, gbar), 16) == pytest.approx(quad_average_ser(16, L, gbar), rel=1e-7)


def test_average_ser_degenerate_limit():
    assert average_ser(SerParams(2, 1e-14), 16) == pytest.approx(conditional_ser_qam(0.0, 16), abs=1e-6)


def test_average_ser_monotone_in_mean_snr():
    assert average_ser(SerParams(2, 10.0)) > average_ser(SerParams(2, 100.0))
    vals = [average_ser(SerParams(3, g)) for g in np.logspace(-1, 3, 15)]
    assert np.all(np.diff(vals) < 0)


def test_average_ser_variant_order():
    assert average_ser(SerParams(2, 10.0, variant="paper_literal")) >= average_ser(SerParams(2, 10.0))


def test_average_ser_matches_mrc_monte_carlo():
    p = average_ser(SerParams(2, 10.0), 16)
    errors, n = mc_qam_ser(16, 10.0, 2, 2_000_000, seed=99)
    assert within_3_sigma(p, errors, n)


def test_average_ser_reports_nonconvergence(monkeypatch):
    import multicast_antsel.ser as ser_mod

    monkeypatch.setattr(ser_mod.integrate, "quad", lambda *a, **k: (0.3, 1.0, {"neval": 21}, "roundoff"))
    with pytest.raises(QuadratureError, match="neval|evaluations=21"):
        average_ser(SerParams(2, 10.0))


def test_ser_params_validation():
    with pytest.raises(DomainError):
        SerParams(0, 1.0)
    with pytest.raises(DomainError):
        SerParams(1, 0.0)
    with pytest.raises(DomainError):
        SerParams(1, 1.0, variant="other")
    assert SerParams.ebn0_to_esn0(2.0, 16) == 8.0


# -- curves --------------------------------------------------------------------


def test_analytic_curve_single_point():
    c = analytic_ser_curve(SerParams(2, 1.0, (7.0,)), 16)
    assert len(c.points) == 1 and c.method == "analytic"


def test_analytic_curve_decreasing_and_spot_checks():
    grid = (0.0, 5.0, 10.0, 15.0, 20.0)
    c = analytic_ser_curve(SerParams(3, 1.0, grid), 16)
    assert np.all(np.diff(c.ser) < 0)
    for db, p in [c.points[0], c.points[2], c.points[4]]:
        assert p == pytest.approx(quad_average_ser(16, 3, 10 ** (db / 10)), abs=1e-6)


def test_analytic_curve_empty_grid():
    with pytest.raises(DomainError):
        analytic_ser_curve(SerParams(2, 1.0, ()), 16)


def test_ser_curve_invariants():
    with pytest.raises(DomainError):
        SerCurve(((1.0, 0.1), (1.0, 0.05)), "analytic")
    with pytest.raises(DomainError):
        SerCurve(((1.0, 1.5),), "analytic")
    with pytest.raises(DomainError):
        SerCurve(((1.0, 0.5),), "simulated")


# -- constellation -------------------------------------------------------------


@pytest.mark.parametrize("k", [4, 16, 64])
def test_constellation_energy_and_gray(k):
    c = QamConstellation(k)
    assert len(c.points) == k
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) <= 1e-12
    d = np.abs(c.points[:, None] - c.points[None, :])
    dmin = c.min_distance
    bits = c.gray_map
    pairs = np.argwhere(np.isclose(d, dmin))
    assert len(pairs) == 2 * 2 * int(np.sqrt(k)) * (int(np.sqrt(k)) - 1)
    for i, j in pairs:
        assert np.sum(bits[i] != bits[j]) == 1
    assert len({tuple(b) for b in bits}) == k


def test_constellation_detect_roundtrip():
    c = QamConstellation(16)
    labels = np.arange(16)
    assert np.array_equal(c.detect(c.modulate(labels)), labels)
    with pytest.raises(DomainError):
        QamConstellation(36)


# -- link simulation -----------------------------------------------------------


def _unit_channel():
    return MulticastChannel.from_gains([np.ones((1, 1))])


def test_link_noiseless_zero_ser():
    ch = generate_multicast(SystemDims.uniform(4, 4, 2), seed=5)
    sub = AntennaSubset((0, 2), ((1, 3), (0, 1)))
    curves = simulate_link(ch, sub, LinkSimConfig(symbols_per_block=10_000, num_blocks=10, noise_variance=1e-20))
    assert all(c.ser[0] == 0.0 and c.symbols[0] == 100_000 for c in curves)


def test_link_awgn_matches_closed_form():
    cfg = LinkSimConfig(symbols_per_block=50_000, num_blocks=4, seed=3)
    grid = [4.0, 8.0, 12.0]
    (curve,) = simulate_link(_unit_channel(), AntennaSubset((0,), ((0,),)), cfg, snr_grid_db=grid)
    for (db, _), e, n in zip(curve.points, curve.errors, curve.symbols):
        assert within_3_sigma(conditional_ser_qam(10 ** (db / 10), 16), e, n)


def test_link_low_snr_noise_dominated():
    (curve,) = simulate_link(
        _unit_channel(), AntennaSubset((0,), ((0,),)), LinkSimConfig(symbols_per_block=10_000, num_blocks=10), snr_grid_db=[-5.0, 0.0]
    )
    assert np.all(curve.ser >= 0.5)


def test_link_deterministic_and_block_order_free():
    ch = generate_multicast(SystemDims.uniform(4, 4, 1), seed=1)
    sub = AntennaSubset((0, 1), ((2, 3),))
    cfg = LinkSimConfig(symbols_per_block=500, num_blocks=6, seed=9, combining="mrc")
    a = simulate_link(ch, sub, cfg, snr_grid_db=[5.0, 10.0])
    b = simulate_link(ch, sub, cfg, snr_grid_db=[5.0, 10.0])
    assert a[0].errors == b[0].errors
    # a grid point's errors depend only on its own sub-streams
    c = simulate_link(ch, sub, cfg, snr_grid_db=[5.0])
    assert c[0].errors[0] == a[0].errors[0]


def test_link_mrc_not_worse_than_selection():
    ch = generate_multicast(SystemDims.uniform(4, 4, 1), seed=12)
    sub = AntennaSubset((0, 1), ((0, 1, 2),))
    base = dict(symbols_per_block=20_000, num_blocks=5, seed=4)
    sc = simulate_link(ch, sub, LinkSimConfig(combining="selection", **base), snr_grid_db=[6.0])[0]
    mrc = simulate_link(ch, sub, LinkSimConfig(combining="mrc", **base), snr_grid_db=[6.0])[0]
    assert mrc.ser[0] <= sc.ser[0] + 3 * sc.confidence[0]


def test_link_accepts_per_receiver_selection():
    ch = generate_multicast(SystemDims.uniform(4, 4, 2), seed=2)
    sel = evolve_multicast(ch, SelectionSpec.uniform(2, 2, 2), 10.0, GaConfig(seed=0), "asynchronous")
    curves = simulate_link(ch, sel, LinkSimConfig(symbols_per_block=1000, num_blocks=1), snr_grid_db=[10.0])
    assert [c.config["tx"] for c in curves] == list(sel.tx_indices_per_receiver)


def test_link_dimension_mismatch():
    ch = generate_multicast(SystemDims.uniform(2, 2, 1), seed=0)
    with pytest.raises(DomainError):
        simulate_link(ch, AntennaSubset((0, 5), ((0,),)), LinkSimConfig())
    with pytest.raises(DomainError):
        LinkSimConfig(combining="egc")
    with pytest.raises(DomainError):
        LinkSimConfig(noise_variance=0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1e4), st.sampled_from([4, 16, 64]))
def test_conditional_ser_in_unit_interval(g, k):
    for v in ("standard", "paper_literal"):
        assert 0.0 <= conditional_ser_qam(g, k, v) <= 1.0
