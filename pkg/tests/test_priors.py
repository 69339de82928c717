import math

import numpy as np
import pytest
from scipy.stats import norm

import netconsist as nc


@pytest.mark.parametrize("pi_cons", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
@pytest.mark.parametrize("p", list(range(1, 31)))
def test_calibration_identity(pi_cons, p):
    pi = nc.inclusion_probability(pi_cons, p)
    assert abs((1.0 - pi) ** p - pi_cons) < 1e-12


def test_inclusion_probability_reference_values():
    assert round(nc.inclusion_probability(0.5, 3), 2) == 0.21
    assert round(nc.inclusion_probability(0.5, 7), 2) == 0.09
    assert nc.inclusion_probability(0.3, 1) == pytest.approx(0.7)


def test_inclusion_probability_domain():
    with pytest.raises(ValueError):
        nc.inclusion_probability(0.0, 3)
    with pytest.raises(ValueError):
        nc.inclusion_probability(1.0, 3)
    with pytest.raises(ValueError):
        nc.inclusion_probability(0.5, 0)


def test_naive_consistency_probability():
    assert nc.naive_consistency_probability(0.5, 3) == pytest.approx(0.125)
    assert nc.naive_consistency_probability(0.5, 1) == pytest.approx(0.5)
    assert nc.naive_consistency_probability(0.09, 7) == pytest.approx(0.91 ** 7)
    assert round(nc.naive_consistency_probability(0.09, 7), 3) == 0.517
    # round trip with the calibrated inclusion probability
    pi = nc.inclusion_probability(0.5, 7)
    assert nc.naive_consistency_probability(pi, 7) == pytest.approx(0.5, abs=1e-12)


def test_xi_closed_form_and_limit():
    assert nc.xi(10.0) == pytest.approx(200.0 * math.log(10.0) / 99.0)
    assert nc.xi(100.0) == pytest.approx(2.0 * 1e4 * math.log(100.0) / (1e4 - 1.0))
    # numeric limit c -> 1+ equals 1 (l'Hopital)
    for c in (1.01, 1.001, 1.0001):
        assert nc.xi(c) == pytest.approx(1.0, abs=5e-2 * (c - 1.0) / 0.01 + 1e-4)
    assert nc.xi(1.0 + 1e-8) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        nc.xi(1.0)
    with pytest.raises(ValueError):
        nc.xi(0.5)


def test_psi_from_threshold_reference_value():
    psi = nc.psi_from_threshold(0.2, 10.0)
    assert 0.092 <= psi <= 0.094
    assert round(psi, 1) == 0.1


def test_psi_from_threshold_linearity_and_intersection():
    assert nc.psi_from_threshold(0.4, 10.0) == pytest.approx(2 * nc.psi_from_threshold(0.2, 10.0))
    omega, c = 0.2, 10.0
    psi = nc.psi_from_threshold(omega, c)
    spike = norm.pdf(omega, scale=psi)
    slab = norm.pdf(omega, scale=c * psi)
    assert abs(spike - slab) < 1e-10
    # spike dominates strictly inside, slab strictly outside
    assert norm.pdf(0.9 * omega, scale=psi) > norm.pdf(0.9 * omega, scale=c * psi)
    assert norm.pdf(1.1 * omega, scale=psi) < norm.pdf(1.1 * omega, scale=c * psi)


def test_default_g():
    assert nc.default_g(26) == 26.0
    assert nc.default_g(1) == 1.0
    assert nc.default_g(69) == 69.0
    with pytest.raises(ValueError):
        nc.default_g(0)


def test_historical_consistency_prior():
    prior = nc.historical_consistency_prior()
    assert prior.kind == "beta"
    assert (prior.alpha, prior.beta) == (157.0, 44.0)
    assert prior.mean == pytest.approx(157.0 / 201.0)
    assert round(prior.mean, 2) == 0.78
    # Beta sd formula oracle
    a, b = 157.0, 44.0
    sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
    assert prior.sd == pytest.approx(sd)
    assert round(prior.sd, 2) == 0.03
    fixed = nc.historical_consistency_prior(kind="fixed")
    assert fixed.kind == "fixed" and fixed.pi_cons == 0.78


def test_prior_b_covariance_identity_modes():
    Z = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]])
    cfg = nc.resolve_config(nc.SpikeSlabConfig(), p=2, n_contrasts=3)
    psi = np.asarray(cfg.psi)
    cov0 = nc.prior_b_covariance(cfg, np.zeros(2, dtype=int), Z)
    assert np.allclose(cov0, np.diag(psi ** 2))
    cov1 = nc.prior_b_covariance(cfg, np.ones(2, dtype=int), Z)
    assert np.allclose(cov1, np.diag((10.0 * psi) ** 2))


def test_prior_b_covariance_zellner_single_column():
    # single factor hit by k rows: Z'Z = k, prior var = psi^2 g sigma2 / k
    k = 3
    Z = np.ones((k, 1))
    cfg = nc.resolve_config(nc.SpikeSlabConfig(correlation="zellner", g=12.0),
                            p=1, n_contrasts=k)
    psi = cfg.psi[0]
    cov = nc.prior_b_covariance(cfg, np.zeros(1, dtype=int), Z, sigma2=2.0)
    assert cov.shape == (1, 1)
    assert cov[0, 0] == pytest.approx(psi ** 2 * 12.0 * 2.0 / k)


def test_prior_b_covariance_positive_definite():
    rng = np.random.default_rng(0)
    Z = rng.choice([-1.0, 0.0, 1.0], size=(12, 3))
    while np.linalg.matrix_rank(Z) < 3:
        Z = rng.choice([-1.0, 0.0, 1.0], size=(12, 3))
    for corr in ("identity", "zellner"):
        cfg = nc.resolve_config(nc.SpikeSlabConfig(correlation=corr), p=3, n_contrasts=12)
        for mid in range(8):
            gamma = np.array([(mid >> j) & 1 for j in range(3)])
            cov = nc.prior_b_covariance(cfg, gamma, Z, sigma2=1.3)
            assert np.allclose(cov, cov.T)
            assert np.linalg.eigvalsh(cov).min() > 0


def test_correlated_region_basics():
    Z = np.ones((4, 1))
    cfg = nc.resolve_config(nc.SpikeSlabConfig(correlation="zellner", g=9.0),
                            p=1, n_contrasts=4)
    assert not nc.correlated_significance_region(np.zeros(1), cfg, Z, sigma2=1.0)
    assert nc.correlated_significance_region(np.array([10.0]), cfg, Z, sigma2=1.0)


def test_correlated_region_reduces_to_scalar_rule():
    # p = 1: quadratic-form boundary coincides with the spike/slab crossing of
    # the implied scalar prior sd psi * sqrt(g sigma2 / k)
    k, g, sigma2 = 5, 11.0, 1.7
    Z = np.ones((k, 1))
    cfg = nc.resolve_config(nc.SpikeSlabConfig(correlation="zellner", g=g), p=1, n_contrasts=k)
    psi = cfg.psi[0]
    scalar_sd = psi * math.sqrt(g * sigma2 / k)
    boundary = scalar_sd * math.sqrt(nc.xi(cfg.c))
    for scale in (0.5, 0.9, 0.999999):
        assert not nc.correlated_significance_region(np.array([scale * boundary]), cfg, Z, sigma2)
    for scale in (1.000001, 1.1, 2.0):
        assert nc.correlated_significance_region(np.array([scale * boundary]), cfg, Z, sigma2)
    # numeric agreement of the two rules within 1e-8 at the boundary
    quad = (boundary / psi) ** 2 * k
    assert quad == pytest.approx(g * sigma2 * nc.xi(cfg.c), rel=1e-8)
    # boundary itself belongs to the spike
    assert not nc.correlated_significance_region(np.array([boundary]), cfg, Z, sigma2)


def test_calibrated_sigma2_reduces_to_identity_for_p1():
    Z = np.ones((4, 1))
    cfg = nc.resolve_config(nc.SpikeSlabConfig(correlation="zellner"), p=1, n_contrasts=4)
    sigma2 = nc.priors.calibrated_sigma2(cfg, Z)
    cov = nc.prior_b_covariance(cfg, np.zeros(1, dtype=int), Z, sigma2=sigma2)
    assert cov[0, 0] == pytest.approx(cfg.psi[0] ** 2)


def test_config_validation():
    with pytest.raises(ValueError):
        nc.SpikeSlabConfig(c=1.0)
    with pytest.raises(ValueError):
        nc.SpikeSlabConfig(omega=-0.1)
    with pytest.raises(ValueError):
        nc.SpikeSlabConfig(correlation="other")
    with pytest.raises(ValueError):
        nc.ConsistencyPrior.fixed(1.5)
    with pytest.raises(ValueError):
        nc.ConsistencyPrior.from_beta(-1.0, 2.0)
    with pytest.raises(ValueError):
        nc.resolve_config(nc.SpikeSlabConfig(psi=(0.1, 0.1)), p=3, n_contrasts=5)


def test_pilot_psi_properties(triangle_network):
    X = nc.build_design_matrix(triangle_network)
    spec = nc.place_lu_ades(triangle_network)
    cfg_a = nc.McmcConfig(chains=2, iterations=6000, burn_in=1000, seed=21)
    cfg_b = nc.McmcConfig(chains=2, iterations=6000, burn_in=1000, seed=22)
    res_a = nc.pilot_psi(triangle_network, X.entries, spec.Z, cfg_a)
    res_b = nc.pilot_psi(triangle_network, X.entries, spec.Z, cfg_b)
    assert all(v > 0 for v in res_a.psi)
    # two seeds agree within 10% relative
    for va, vb in zip(res_a.psi, res_b.psi):
        assert abs(va - vb) / va < 0.10
    # deterministic given the seed
    res_a2 = nc.pilot_psi(triangle_network, X.entries, spec.Z, cfg_a)
    assert res_a.psi == res_a2.psi
