import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amber import ber
from amber import detection as det
from amber import energy_stats as es
from amber.errors import ConvergenceError, InvalidParameterError
from amber.fading import FadingParams
from amber.simkit import semi_analytic_avg_ber

from .oracles import SYMBOL_ERROR

R1, R2 = ber.ReceiverKind.R1_CSI, ber.ReceiverKind.R2_NOCSI
S = det.DetectionStrategy
PARAMS = FadingParams.from_attenuation(1.1)


def test_parse_receiver():
    assert ber.ReceiverKind.parse("r1") is R1
    assert ber.ReceiverKind.parse("R2_NOCSI") is R2
    with pytest.raises(ValueError):
        ber.ReceiverKind.parse("R3")


@pytest.mark.parametrize("mu, nu, n, t, expected", SYMBOL_ERROR)
def test_symbol_error_matches_density_quadrature(mu, nu, n, t, expected):
    link = es.LinkParams(n)
    assert ber.symbol_error_prob(mu, nu, t, link) == pytest.approx(expected, rel=1e-10)


def test_fixture_conditional_ber():
    link = es.LinkParams.from_snr_db(150, 0.0)
    p = ber.conditional_ber(R1, S.MT, 1.0, 1.625, link)
    assert p == pytest.approx(SYMBOL_ERROR[0][-1], abs=1e-8)
    assert ber.conditional_ber(R2, S.MT, 1.0, 1.625, link) == pytest.approx(2 * p * (1 - p), rel=1e-14)


@given(
    mu=st.floats(0.01, 6), nu=st.floats(0.01, 6), n=st.integers(1, 300), snr=st.floats(-10, 20),
)
def test_r2_is_two_p_one_minus_p(mu, nu, n, snr):
    link = es.LinkParams.from_snr_db(n, snr)
    for s in (S.MT, S.MLT_APP2):
        if mu == nu and s is not S.MT:
            continue
        p = ber.conditional_ber(R1, s, mu, nu, link)
        q = ber.conditional_ber(R2, s, mu, nu, link)
        assert 0.0 <= p <= 0.5 + 1e-12
        assert q == pytest.approx(2 * p * (1 - p), rel=1e-13, abs=1e-300)


def test_ties_give_half():
    link = es.LinkParams(20)
    for s in S:
        assert ber.conditional_ber(R1, s, 0.7, 0.7, link) == 0.5
        assert ber.conditional_ber(R2, s, 0.7, 0.7, link) == 0.5
    out = ber.conditional_ber(R1, S.MLT, np.array([0.7, 0.5]), np.array([0.7, 1.2]), link)
    assert out[0] == 0.5 and out[1] < 0.5


def test_conditional_ber_symmetric():
    link = es.LinkParams.from_snr_db(50, 3.0)
    for s in S:
        assert ber.conditional_ber(R1, s, 0.4, 1.1, link) == pytest.approx(
            ber.conditional_ber(R1, s, 1.1, 0.4, link), rel=1e-12
        )


def test_symbol_error_rejects_bad_threshold():
    with pytest.raises(InvalidParameterError):
        ber.symbol_error_prob(1.0, 2.0, 0.0, es.LinkParams(4))


def test_estimate_validation():
    with pytest.raises(InvalidParameterError):
        ber.BerEstimate(1.5, ber.BerMethod.ANALYTIC)
    with pytest.raises(InvalidParameterError):
        ber.BerEstimate(0.1, ber.BerMethod.ANALYTIC, ci_halfwidth=0.01)
    est = ber.BerEstimate(0.01, ber.BerMethod.MONTE_CARLO, ci_halfwidth=0.02)
    assert est.ci == (0.0, 0.03)


@pytest.mark.parametrize("n, snr, expected", [(150, 0.0, 0.124528), (150, 10.0, 0.0349940), (20, -5.0, 0.343689)])
def test_avg_ber_reference_values(n, snr, expected):
    est = ber.avg_ber(R1, S.MT, es.LinkParams.from_snr_db(n, snr), PARAMS)
    assert est.method is ber.BerMethod.ANALYTIC
    assert est.value == pytest.approx(expected, rel=1e-5)
    assert est.error_estimate <= ber.QuadratureConfig().tolerance(est.value)


def test_avg_ber_density_routes_agree():
    link = es.LinkParams.from_snr_db(20, 5.0)
    a = ber.avg_ber(R1, S.MT, link, PARAMS)
    b = ber.avg_ber(R1, S.MT, link, PARAMS, ber.QuadratureConfig(density="closed"))
    assert a.value == pytest.approx(b.value, abs=1e-8)


def test_avg_ber_raises_when_tolerance_unreachable():
    cfg = ber.QuadratureConfig(abs_tol=1e-16, rel_tol=1e-16, density="closed")
    with pytest.raises(ConvergenceError) as info:
        ber.avg_ber(R1, S.MT, es.LinkParams.from_snr_db(20, 0.0), PARAMS, cfg)
    assert "coarse" in info.value.diagnostics


def test_r2_average_is_not_a_function_of_average_p():
    # E[2p(1-p)] < 2E[p](1-E[p]) by Jensen; the average must use the former
    link = es.LinkParams.from_snr_db(150, 5.0)
    p1 = ber.avg_ber(R1, S.MT, link, PARAMS).value
    p2 = ber.avg_ber(R2, S.MT, link, PARAMS).value
    assert p2 < 2 * p1 * (1 - p1) - 1e-3
    assert p2 > p1


def test_semi_analytic_single_channel_is_conditional():
    from amber.simkit import block_streams
    from amber.fading import sample_channel

    link = es.LinkParams.from_snr_db(20, 0.0)
    est = semi_analytic_avg_ber(R1, S.MT, link, PARAMS, 1, seed=9)
    pair = sample_channel(block_streams(9, 0)["channel"], PARAMS, size=1)
    assert est.value == pytest.approx(ber.conditional_ber(R1, S.MT, pair.mu[0], pair.nu[0], link), rel=1e-14)
    assert est.std_error == 0.0


def test_semi_analytic_extends_prefix():
    link = es.LinkParams.from_snr_db(20, 0.0)
    a = semi_analytic_avg_ber(R1, S.MT, link, PARAMS, 1000, seed=4, chunk=256)
    b = semi_analytic_avg_ber(R1, S.MT, link, PARAMS, 1000, seed=4, chunk=256)
    assert a.value == b.value
    assert math.isclose(a.ci_halfwidth, 1.959963984540054 * a.std_error)


def test_fading_mass():
    assert ber.fading_mass(PARAMS) == pytest.approx(1.0, abs=1e-7)


def test_quadrature_config_validation():
    with pytest.raises(InvalidParameterError):
        ber.QuadratureConfig(abs_tol=0)
    with pytest.raises(InvalidParameterError):
        ber.QuadratureConfig(density="fast")
    assert ber.QuadratureConfig().tolerance(0.5) == pytest.approx(5e-5)
