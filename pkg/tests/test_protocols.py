import numpy as np
import pytest

from _support import constant_reward_game, make_subpop
from mfg_evolve import (BNN, IMITATIVE, SMITH, ProtocolSpec, check_rate_bound,
                        excess_payoff, net_flow, positive_correlation_probe,
                        switch_rates)
from mfg_evolve.game import GameSpec


def test_smith_rates_follow_payoff_advantage():
    rho = switch_rates(ProtocolSpec(SMITH), np.array([0.0, 1.0]),
                       np.array([0.5, 0.5]))
    assert rho[0, 1] == pytest.approx(1.0)
    assert rho[1, 0] == 0.0


def test_constant_payoffs_give_zero_rates():
    F = np.array([0.4, 0.4, 0.4])
    sigma = np.array([0.2, 0.3, 0.5])
    for variant in (SMITH, IMITATIVE, BNN):
        rho = switch_rates(ProtocolSpec(variant), F, sigma)
        assert np.all(rho == 0.0)


def test_bnn_rates_from_excess_payoffs():
    F = np.array([0.0, 1.0])
    sigma = np.array([0.5, 0.5])
    fhat = excess_payoff(F, sigma)
    assert np.allclose(fhat, [-0.5, 0.5])
    rho = switch_rates(ProtocolSpec(BNN), F, sigma)
    assert rho[1, 0] == 0.0
    assert rho[0, 1] == pytest.approx(0.5)


def test_bnn_zero_mass_uses_zero_excess():
    fhat = excess_payoff(np.array([1.0, -2.0]), np.zeros(2))
    assert np.all(fhat == 0.0)


def test_excess_payoff_orthogonal_to_mass(rng):
    for _ in range(200):
        n = int(rng.integers(2, 8))
        F = rng.standard_normal(n)
        sigma = rng.dirichlet(np.ones(n)) * rng.uniform(0.1, 1.0)
        assert abs(excess_payoff(F, sigma) @ sigma) <= 1e-12


def test_imitation_needs_a_role_model(rng):
    for _ in range(100):
        n = int(rng.integers(2, 6))
        F = rng.standard_normal(n)
        sigma = rng.dirichlet(np.ones(n))
        dead = int(rng.integers(0, n))
        sigma[dead] = 0.0
        rho = switch_rates(ProtocolSpec(IMITATIVE), F, sigma)
        assert np.all(rho[:, dead] == 0.0)


def test_bnn_rates_independent_of_current_policy(rng):
    for _ in range(50):
        n = int(rng.integers(2, 6))
        rho = switch_rates(ProtocolSpec(BNN), rng.standard_normal(n),
                           rng.dirichlet(np.ones(n)))
        off = ~np.eye(n, dtype=bool)
        for v in range(n):
            col = rho[:, v][off[:, v]]
            assert np.all(col == col[0])


def test_smith_sign_preservation(rng):
    for _ in range(100):
        n = int(rng.integers(2, 6))
        F = rng.standard_normal(n)
        rho = switch_rates(ProtocolSpec(SMITH), F, rng.dirichlet(np.ones(n)))
        for u in range(n):
            for v in range(n):
                if u != v:
                    assert (rho[u, v] > 0) == (F[v] > F[u])


def test_net_flow_zero_for_zero_mass():
    V = net_flow(ProtocolSpec(IMITATIVE), np.array([0.0, 1.0]), np.zeros(2))
    assert np.all(V == 0.0)


def test_net_flow_smith_example():
    V = net_flow(ProtocolSpec(SMITH), np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert np.allclose(V, [-1.0, 1.0])


def test_net_flow_telescopes_to_zero(rng):
    for variant in (SMITH, IMITATIVE, BNN):
        proto = ProtocolSpec(variant)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            V = net_flow(proto, rng.standard_normal(n),
                         rng.dirichlet(np.ones(n)) * rng.uniform(0.0, 1.0))
            assert abs(V.sum()) <= 1e-13


def test_kappa_scales_rates(rng):
    F = rng.standard_normal(4)
    sigma = rng.dirichlet(np.ones(4))
    for variant in (SMITH, IMITATIVE, BNN):
        base = switch_rates(ProtocolSpec(variant), F, sigma)
        scaled = switch_rates(ProtocolSpec(variant, kappa=2.5), F, sigma)
        assert np.allclose(scaled, 2.5 * base)


def test_rate_bound_zero_reward_passes():
    game = constant_reward_game(value=0.0, p=2, beta=0.5)
    report = check_rate_bound(game, ProtocolSpec(SMITH))
    assert report.passed
    assert report.per_sub[0].rate_sum_bound == 0.0


def _unit_bound_game(revision_rate):
    # one state, three actions, |base| = 1, beta = 0.5: payoff bound B = 1
    probs = np.ones((1, 3, 1))
    base = np.array([[1.0, -1.0, 1.0]])
    sub = make_subpop("x", 1.0, ["s"], ["a", "b", "c"], [(0, 1, 2)], probs,
                      base=base, revision_rate=revision_rate)
    return GameSpec(beta=0.5, subpops=(sub,))


def test_rate_bound_formula_passes():
    report = check_rate_bound(_unit_bound_game(10.0), ProtocolSpec(SMITH))
    assert report.per_sub[0].payoff_bound == pytest.approx(1.0)
    assert report.per_sub[0].rate_sum_bound == pytest.approx(0.4)
    assert report.passed


def test_rate_bound_reports_minimal_rate():
    report = check_rate_bound(_unit_bound_game(0.1), ProtocolSpec(SMITH))
    assert not report.passed
    assert report.per_sub[0].min_revision_rate == pytest.approx(4.0)


@pytest.mark.parametrize("variant", [SMITH, IMITATIVE, BNN])
def test_positive_correlation_probe(variant):
    report = positive_correlation_probe(ProtocolSpec(variant), n=4,
                                        samples=1000, seed=7)
    assert report.violations == 0


def test_probe_requires_samples():
    with pytest.raises(ValueError):
        positive_correlation_probe(ProtocolSpec(SMITH), n=3, samples=0, seed=0)


def test_protocol_spec_validation():
    with pytest.raises(ValueError):
        ProtocolSpec("replicator")
    with pytest.raises(ValueError):
        ProtocolSpec(SMITH, kappa=0.0)
