import numpy as np
import pytest

from _support import dirichlet_rows, make_subpop, random_dist, random_game
from mfg_evolve import (InfeasibleAction, PolicyExplosion, StateActionDist,
                        StatePolicyDist, enumerate_policies, evaluate_reward,
                        game_policies, project_state_action, validate_game)
from mfg_evolve.game import GameSpec, MacSinr, reward_table, TransitionKernel


def test_singleton_feasible_sets_give_one_policy():
    probs = np.zeros((2, 1, 2))
    probs[:, 0, :] = 0.5
    sub = make_subpop("x", 1.0, ["s0", "s1"], ["a"], [(0,), (0,)], probs)
    pset = enumerate_policies(sub)
    assert len(pset) == 1
    assert pset[0].choice == (0, 0)


def test_product_count_and_lexicographic_order():
    probs = dirichlet_rows(np.random.default_rng(0), (2, 3, 2))
    sub = make_subpop("x", 1.0, ["s0", "s1"], ["a", "b", "c"],
                      [(0, 1), (0, 1, 2)], probs)
    pset = enumerate_policies(sub)
    assert len(pset) == 6
    choices = [u.choice for u in pset]
    assert choices == sorted(choices)          # lexicographic
    assert len(set(choices)) == 6              # no duplicates
    assert choices[0] == (0, 0) and choices[-1] == (1, 2)


def test_mac_policies_match_canonical_numbering(mac_game, mac_policies):
    sub = mac_game.subpops[0]
    pset = mac_policies[0]
    assert len(pset) == 4
    aL, aH = sub.action_index("L"), sub.action_index("H")
    sAF, sF = sub.state_index("AF"), sub.state_index("F")
    table = [(u.choice[sAF], u.choice[sF]) for u in pset]
    assert table == [(aL, aL), (aL, aH), (aH, aL), (aH, aH)]


def test_policy_cap_enforced():
    p, q = 5, 4
    probs = dirichlet_rows(np.random.default_rng(1), (p, q, p))
    sub = make_subpop("big", 1.0, [f"s{i}" for i in range(p)], list("abcd"),
                      [tuple(range(q))] * p, probs)
    with pytest.raises(PolicyExplosion):
        enumerate_policies(sub, policy_cap=1000)


def test_projection_single_policy_point_mass():
    probs = dirichlet_rows(np.random.default_rng(2), (2, 2, 2))
    sub = make_subpop("x", 1.0, ["s0", "s1"], ["a", "b"], [(0,), (0, 1)], probs)
    game = GameSpec(beta=0.5, subpops=(sub,))
    pset = enumerate_policies(sub)
    mu = np.zeros((2, 2))
    mu[0, 0] = 0.3
    mu[1, 1] = 0.7
    dist = StatePolicyDist((mu,))
    sa = project_state_action(dist, [pset])
    assert sa.per_sub[0][0, 0] == pytest.approx(0.3)
    # policy 1 chooses action b in state s1
    assert sa.per_sub[0][1, pset[1].choice[1]] == pytest.approx(0.7)


def test_projection_adds_masses_of_agreeing_policies():
    probs = dirichlet_rows(np.random.default_rng(3), (2, 2, 2))
    sub = make_subpop("x", 1.0, ["s0", "s1"], ["a", "b"], [(0,), (0, 1)], probs)
    pset = enumerate_policies(sub)
    # both policies pick action a in state s0
    mu = np.array([[0.2, 0.1], [0.4, 0.3]])
    sa = project_state_action(StatePolicyDist((mu,)), [pset])
    assert sa.per_sub[0][0, 0] == pytest.approx(0.3)


def test_projection_preserves_mass_exactly(rng):
    for _ in range(50):
        game = random_game(rng)
        policies = game_policies(game)
        mu = random_dist(rng, game, policies)
        sa = project_state_action(mu, policies)
        for arr, sarr, sub in zip(mu.per_sub, sa.per_sub, game.subpops):
            assert abs(arr.sum() - sarr.sum()) <= 1e-14


def test_affine_reward_with_zero_weights_returns_base(rng):
    game = random_game(rng, max_subpops=1, max_states=2, max_actions=2,
                       weight_scale=0.0)
    policies = game_policies(game)
    sa = project_state_action(random_dist(rng, game, policies), policies)
    sub = game.subpops[0]
    for s in range(sub.n_states):
        for a in sub.feasible[s]:
            assert evaluate_reward(game, 0, s, a, sa) == pytest.approx(
                sub.reward.base[s, a])


def test_mac_reward_zero_power_and_zero_interference(mac_game):
    sub = mac_game.subpops[0]
    spec = sub.reward
    sa = np.zeros((4, 3))
    sa[sub.state_index("E"), sub.action_index("N")] = 1.0   # nobody transmits
    dist = StateActionDist((sa,))
    assert evaluate_reward(mac_game, 0, sub.state_index("E"),
                           sub.action_index("N"), dist) == 0.0
    r = reward_table(mac_game, 0, dist)
    for name, power in (("L", spec.P_L), ("H", spec.P_H)):
        a = sub.action_index(name)
        assert r[0, a] == pytest.approx(power / spec.sigma2
                                        - spec.beta_price * power)


def test_infeasible_action_raises(mac_game, mac_policies):
    sub = mac_game.subpops[0]
    sa = project_state_action(
        StatePolicyDist.uniform(mac_game, mac_policies), mac_policies)
    with pytest.raises(InfeasibleAction):
        evaluate_reward(mac_game, 0, sub.state_index("E"),
                        sub.action_index("H"), sa)


def test_validate_game_passes_on_mac(mac_game):
    report = validate_game(mac_game)
    assert report.all_passed, report.failed()


def test_validate_flags_substochastic_kernel_row():
    probs = np.zeros((2, 1, 2))
    probs[0, 0, 0] = 0.9                       # row sums to 0.9
    probs[1, 0, 1] = 1.0
    sub = make_subpop("x", 1.0, ["s0", "s1"], ["a"], [(0,), (0,)], probs)
    report = validate_game(GameSpec(beta=0.5, subpops=(sub,)))
    failed = {c.name for c in report.failed()}
    assert "kernel_stochastic" in failed


def test_validate_flags_beta_out_of_range():
    probs = np.full((1, 1, 1), 1.0)
    sub = make_subpop("x", 1.0, ["s"], ["a"], [(0,)], probs)
    report = validate_game(GameSpec(beta=1.0, subpops=(sub,)))
    failed = {c.name for c in report.failed()}
    assert "beta_range" in failed


def test_affine_reward_lipschitz_bound(rng):
    game = random_game(rng, max_subpops=2, max_states=3, max_actions=3)
    policies = game_policies(game)
    for c, sub in enumerate(game.subpops):
        L = np.abs(sub.reward.weights).sum(axis=2).max()
        for _ in range(25):
            nu1 = project_state_action(random_dist(rng, game, policies), policies)
            nu2 = project_state_action(random_dist(rng, game, policies), policies)
            gap = np.abs(nu1.flat() - nu2.flat()).sum()
            for s in range(sub.n_states):
                for a in sub.feasible[s]:
                    diff = abs(evaluate_reward(game, c, s, a, nu1)
                               - evaluate_reward(game, c, s, a, nu2))
                    assert diff <= L * gap + 1e-12


def test_uniform_dist_is_valid(mac_game, mac_policies):
    from mfg_evolve.game import validate_dist
    mu = StatePolicyDist.uniform(mac_game, mac_policies)
    validate_dist(mac_game, mac_policies, mu)
    assert mu.mass(0) == pytest.approx(1.0)


def test_flat_roundtrip(mac_game, mac_policies, rng):
    mu = random_dist(rng, mac_game, mac_policies)
    again = StatePolicyDist.from_flat(mu.flat(), mu.shapes())
    assert mu.l1_distance(again) == 0.0


def test_kernel_shape_validation():
    with pytest.raises(ValueError):
        TransitionKernel(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        TransitionKernel(np.zeros((2, 3, 4)))


def test_mac_sinr_requires_named_actions():
    # reward evaluation keys transmit powers by the action names N, L, H
    spec = MacSinr(P_L=1.0, P_H=2.0, sigma2=1.0, Cbar=1.0, beta_price=0.0,
                   T_msg=1.0)
    assert spec.P_H > spec.P_L
