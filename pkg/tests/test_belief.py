import math

import numpy as np
import pytest

import ejsim as ej
from ejsim.errors import DimensionMismatch, ImpossibleObservation

from helpers import random_channel, random_posterior, spiked_posterior


def test_belief_validates_and_normalizes():
    b = ej.Belief(np.array([0.25, 0.25, 0.5]))
    assert b.num_messages == 3 and b.step == 0
    with pytest.raises(DimensionMismatch):
        ej.Belief(np.array([0.5, -0.1, 0.6]))
    with pytest.raises(DimensionMismatch):
        ej.Belief(np.array([0.5, 0.6]))


def test_belief_is_immutable():
    b = ej.uniform_belief(3)
    with pytest.raises(ValueError):
        b.rho[0] = 1.0


# -- predictive law ---------------------------------------------------------------

def test_predictive_uniform_split(bsc01):
    pred = ej.predictive_distribution(ej.uniform_belief(2), bsc01, (0, 1))
    assert np.allclose(pred, [0.5, 0.5], atol=1e-15)


def test_predictive_point_mass(bsc01):
    b = ej.Belief(np.array([1.0, 0.0]))
    pred = ej.predictive_distribution(b, bsc01, (0, 1))
    assert np.allclose(pred, [0.9, 0.1], atol=1e-15)


def test_predictive_mixture(bsc01):
    b = ej.Belief(np.array([0.75, 0.25]))
    pred = ej.predictive_distribution(b, bsc01, (0, 1))
    assert np.allclose(pred, [0.7, 0.3], atol=1e-15)


def test_predictive_dimension_mismatch(bsc01):
    with pytest.raises(DimensionMismatch):
        ej.predictive_distribution(ej.uniform_belief(3), bsc01, (0, 1))


# -- Bayes update -----------------------------------------------------------------

def test_bayes_update_bsc(bsc01):
    got = ej.bayes_update(ej.uniform_belief(2), bsc01, (0, 1), 0)
    assert np.allclose(got.rho, [0.9, 0.1], atol=1e-15)
    assert got.step == 1


def test_bayes_update_constant_map_is_inert(bsc01):
    b = ej.Belief(np.array([0.3, 0.2, 0.5]))
    got = ej.bayes_update(b, bsc01, (1, 1, 1), 0)
    assert np.allclose(got.rho, b.rho, atol=1e-15)


def test_bayes_update_opposite_observations_cancel(bsc01):
    b0 = ej.uniform_belief(2)
    b2 = ej.bayes_update(ej.bayes_update(b0, bsc01, (0, 1), 0), bsc01, (0, 1), 1)
    assert np.allclose(b2.rho, [0.5, 0.5], atol=1e-15)
    assert b2.step == 2


def test_bayes_update_impossible_observation():
    ch = ej.validate_channel([[1.0, 0.0], [0.0, 1.0]])
    b = ej.Belief(np.array([1.0, 0.0]))
    with pytest.raises(ImpossibleObservation):
        ej.bayes_update(b, ch, (0, 0), 1)


def test_bayes_update_posterior_martingale():
    rng = np.random.default_rng(0)
    for _ in range(100):
        ch = random_channel(rng, int(rng.integers(2, 4)), int(rng.integers(2, 5)))
        m = int(rng.integers(2, 7))
        b = ej.Belief(random_posterior(rng, m))
        gamma = tuple(int(v) for v in rng.integers(0, ch.num_inputs, size=m))
        pred = ej.predictive_distribution(b, ch, gamma)
        avg = sum(pred[y] * ej.bayes_update(b, ch, gamma, y).rho
                  for y in range(ch.num_outputs) if pred[y] > 0)
        assert np.max(np.abs(avg - b.rho)) <= 1e-12


# -- MAP decode --------------------------------------------------------------------

def test_map_decode_unique_max():
    assert ej.map_decode(ej.Belief(np.array([0.2, 0.5, 0.3]))) == (1, 0.5)


def test_map_decode_tie_takes_lowest_index():
    assert ej.map_decode(ej.Belief(np.array([0.5, 0.5]))) == (0, 0.5)


def test_map_decode_certainty():
    assert ej.map_decode(ej.Belief(np.array([1.0, 0.0, 0.0]))) == (0, 1.0)


# -- threshold parameters ------------------------------------------------------------

def test_threshold_params_small_example():
    tp = ej.threshold_params(2, 0.25)
    # max(log2 2, log2 4) = 2, so rho_tilde = 1 - 1/3
    assert tp.rho_tilde == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert tp.log_odds_threshold == pytest.approx(1.0, abs=1e-12)


def test_threshold_at_least_half():
    for m in (2, 3, 16, 1024):
        for eps in (0.9, 0.5, 1e-2, 1e-6):
            assert ej.threshold_params(m, eps).rho_tilde >= 0.5


def test_threshold_params_domain():
    with pytest.raises(DimensionMismatch):
        ej.threshold_params(1, 0.1)
    with pytest.raises(DimensionMismatch):
        ej.threshold_params(4, 0.0)


# -- shifted log-likelihood -----------------------------------------------------------

def test_u_tilde_uniform_pair():
    tp = ej.threshold_params(2, 0.25)
    assert ej.u_tilde(ej.uniform_belief(2), tp) == pytest.approx(-1.0, abs=1e-12)


def test_u_tilde_at_threshold_posterior():
    tp = ej.threshold_params(2, 0.25)
    rho_t = tp.rho_tilde
    got = ej.u_tilde(ej.Belief(np.array([rho_t, 1 - rho_t])), tp)
    # algebraic evaluation: (2 rho_t - 1) log2(rho_t/(1-rho_t)) - shift
    expected = (2 * rho_t - 1) * math.log2(rho_t / (1 - rho_t)) - tp.log_odds_threshold
    assert got == pytest.approx(expected, abs=1e-12)


def test_u_tilde_boundary_infinity():
    tp = ej.threshold_params(3, 0.1)
    assert ej.u_tilde(ej.Belief(np.array([1.0, 0.0, 0.0])), tp) == math.inf


def test_u_tilde_nonnegative_implies_dominant_message():
    rng = np.random.default_rng(1)
    tp = ej.threshold_params(6, 0.05)
    seen = 0
    for _ in range(400):
        rho = (spiked_posterior(rng, 6, 0.8) if rng.random() < 0.5
               else random_posterior(rng, 6))
        val = ej.u_tilde(ej.Belief(rho), tp)
        if val >= 0:
            seen += 1
            assert rho.max() >= tp.rho_tilde
        if val >= math.log2(1.0 / tp.epsilon):
            assert rho.max() >= 1.0 - tp.epsilon
    assert seen > 0


# -- one-step identities ---------------------------------------------------------------

def test_drift_identity_random():
    # expected next-step u_tilde = current u_tilde + EJS of the step
    rng = np.random.default_rng(2)
    tp = ej.threshold_params(5, 0.1)
    for _ in range(100):
        ch = random_channel(rng, int(rng.integers(2, 4)), int(rng.integers(2, 5)))
        m = int(rng.integers(2, 6))
        b = ej.Belief(random_posterior(rng, m))
        gamma = tuple(int(v) for v in rng.integers(0, ch.num_inputs, size=m))
        pred = ej.predictive_distribution(b, ch, gamma)
        expected_next = math.fsum(
            pred[y] * ej.u_tilde(ej.bayes_update(b, ch, gamma, y), tp)
            for y in range(ch.num_outputs) if pred[y] > 0)
        step_gain, _ = ej.ejs_of_encoder(b.rho, ch, gamma)
        assert expected_next == pytest.approx(ej.u_tilde(b, tp) + step_gain, abs=1e-9)


def test_jump_bounds_random():
    rng = np.random.default_rng(3)
    for _ in range(100):
        ch = random_channel(rng, 2, int(rng.integers(2, 5)))
        consts = ej.derive_constants(ch)
        log_c2 = math.log2(consts.c2)
        m = int(rng.integers(2, 6))
        b = ej.Belief(random_posterior(rng, m))
        gamma = tuple(int(v) for v in rng.integers(0, 2, size=m))
        for y in range(ch.num_outputs):
            nxt = ej.bayes_update(b, ch, gamma, y)
            r0, r1 = b.rho, nxt.rho
            inner = (r0 > 0) & (r0 < 1) & (r1 > 0) & (r1 < 1)
            odds_jump = np.abs(ej.belief.log_odds(r1[inner]) - ej.belief.log_odds(r0[inner]))
            assert np.all(odds_jump <= log_c2 + 1e-9)
            cap = np.minimum(r0 * (1 - r0), r1 * (1 - r1)) * consts.c2
            assert np.all(np.abs(r1 - r0) <= cap + 1e-9)
