import numpy as np
import pytest

from _support import constant_reward_game, random_dist, random_game
from mfg_evolve import (IMITATIVE, SMITH, ProtocolSpec, StatePolicyDist,
                        StepRejected, WrongProtocol, game_policies,
                        growth_rates, integrate, lyapunov_monitor,
                        rest_residual, solve_msne, stationary_table,
                        vector_field)
from mfg_evolve.equilibria import MarginalPolicyDist, assemble_mu
from mfg_evolve.meanfield import _guarded_step, vector_field_components
from mfg_evolve.trajectory import (Trajectory, column_names,
                                   write_trajectory_csv)

SMITH_SPEC = ProtocolSpec(SMITH)
IMITATIVE_SPEC = ProtocolSpec(IMITATIVE)


def test_field_identities_on_random_games(rng):
    for _ in range(100):
        game = random_game(rng)
        policies = game_policies(game)
        mu = random_dist(rng, game, policies)
        for variant in ("imitative", "bnn", "smith"):
            drift, revision = vector_field_components(
                game, policies, ProtocolSpec(variant), mu)
            for d, r in zip(drift.per_sub, revision.per_sub):
                assert abs((d + r).sum()) <= 1e-12          # tangency
                assert np.abs(d.sum(axis=0)).max() <= 1e-12  # per-policy drift
                assert np.abs(r.sum(axis=1)).max() <= 1e-12  # per-state flow


def test_equilibrium_is_rest_point(mac_game, mac_policies):
    mu_star = solve_msne(mac_game, mac_policies).candidate
    for variant in ("imitative", "bnn", "smith"):
        assert rest_residual(mac_game, mac_policies, ProtocolSpec(variant),
                             mu_star) <= 1e-10


def test_constant_rewards_rest_at_stationary_profile():
    game = constant_reward_game(value=0.3, p=3, beta=0.6)
    policies = game_policies(game)
    eta = stationary_table(game, policies)
    n = len(policies[0])
    x = MarginalPolicyDist((np.full(n, 1.0 / n),))
    mu = assemble_mu(x, eta)
    for variant in ("imitative", "bnn", "smith"):
        assert rest_residual(game, policies, ProtocolSpec(variant), mu) <= 1e-12


def test_random_interior_point_is_not_at_rest(mac_game, mac_policies, rng):
    mu = random_dist(rng, mac_game, mac_policies)
    assert rest_residual(mac_game, mac_policies, IMITATIVE_SPEC, mu) > 1e-6


def test_integrate_stays_at_equilibrium(mac_game, mac_policies):
    mu_star = solve_msne(mac_game, mac_policies).candidate
    traj = integrate(mac_game, mac_policies, SMITH_SPEC, mu_star, 100.0,
                     dt=0.05, record_every=200)
    assert traj.final().l1_distance(mu_star) <= 1e-8


def test_integrate_conserves_mass(mac_game, mac_policies, rng):
    mu0 = random_dist(rng, mac_game, mac_policies)
    traj = integrate(mac_game, mac_policies, SMITH_SPEC, mu0, 100.0,
                     dt=0.05, record_every=100)
    for snap in traj.snapshots:
        for arr, sub in zip(snap.per_sub, mac_game.subpops):
            assert abs(arr.sum() - sub.mass) <= 1e-10
            assert arr.min() >= 0.0


def test_imitative_best_policy_mass_is_monotone(mac_game, mac_policies):
    mu0 = StatePolicyDist.uniform(mac_game, mac_policies)
    traj = integrate(mac_game, mac_policies, IMITATIVE_SPEC, mu0, 40.0,
                     dt=0.05, record_every=10)
    mass = traj.policy_mass(0)[:, 0]
    assert np.all(np.diff(mass) >= -1e-12)
    assert mass[-1] > mass[0] + 0.5


def test_imitative_support_invariance(mac_game, mac_policies):
    mu0_arr = StatePolicyDist.uniform(mac_game, mac_policies).per_sub[0].copy()
    dropped = 2
    mu0_arr[:, 0] += mu0_arr[:, dropped]
    mu0_arr[:, dropped] = 0.0
    traj = integrate(mac_game, mac_policies, IMITATIVE_SPEC,
                     StatePolicyDist((mu0_arr,)), 20.0, dt=0.05,
                     record_every=10)
    for snap in traj.snapshots:
        assert snap.per_sub[0][:, dropped].sum() <= 1e-12


def test_growth_rate_identities(mac_game, mac_policies, rng):
    mu = random_dist(rng, mac_game, mac_policies)
    table = growth_rates(mac_game, mac_policies, IMITATIVE_SPEC, mu)
    for arr, G in zip(mu.per_sub, table.per_sub):
        assert np.abs((arr * G).sum(axis=1)).max() <= 1e-10


def test_growth_rates_vanish_for_constant_payoffs(rng):
    game = constant_reward_game(value=0.4, p=2, beta=0.5)
    policies = game_policies(game)
    mu = random_dist(rng, game, policies)
    table = growth_rates(game, policies, IMITATIVE_SPEC, mu)
    assert np.abs(table.per_sub[0]).max() <= 1e-12


def test_growth_rates_are_monotone_in_payoff(mac_game, mac_policies, rng):
    from mfg_evolve.payoff import ValueEngine
    engine = ValueEngine(mac_game, mac_policies)
    for _ in range(20):
        mu = random_dist(rng, mac_game, mac_policies)
        values = engine.value_tables(mu)[0]
        G = growth_rates(mac_game, mac_policies, IMITATIVE_SPEC, mu).per_sub[0]
        for s in range(G.shape[0]):
            order = np.argsort(values[:, s])
            assert np.all(np.diff(G[s, order]) >= -1e-12)


def test_growth_rates_require_imitative(mac_game, mac_policies, rng):
    with pytest.raises(WrongProtocol):
        growth_rates(mac_game, mac_policies, SMITH_SPEC,
                     random_dist(rng, mac_game, mac_policies))


def test_growth_rates_factor_the_revision_flow(mac_game, mac_policies, rng):
    mu = random_dist(rng, mac_game, mac_policies)
    _, revision = vector_field_components(mac_game, mac_policies,
                                          IMITATIVE_SPEC, mu)
    G = growth_rates(mac_game, mac_policies, IMITATIVE_SPEC, mu)
    for arr, flow, rates in zip(mu.per_sub, revision.per_sub, G.per_sub):
        assert np.abs(flow - arr * rates).max() <= 1e-10


def test_lyapunov_monitor_zero_at_equilibrium(mac_game, mac_policies):
    mu_star = solve_msne(mac_game, mac_policies).candidate
    traj = Trajectory(np.array([0.0, 1.0]), (mu_star, mu_star), {})
    samples = lyapunov_monitor(traj, mu_star, K=2.0)
    assert all(s.value == 0.0 for s in samples)


def test_lyapunov_requires_k_above_one(mac_game, mac_policies):
    mu_star = solve_msne(mac_game, mac_policies).candidate
    traj = Trajectory(np.array([0.0, 1.0]), (mu_star, mu_star), {})
    with pytest.raises(ValueError):
        lyapunov_monitor(traj, mu_star, K=1.0)


def test_lyapunov_decreases_near_equilibrium(mac_game, mac_policies):
    from mfg_evolve.diagnostics import perturb_within_simplex
    mu_star = solve_msne(mac_game, mac_policies).candidate
    rng = np.random.default_rng(0)
    start = perturb_within_simplex(mu_star, [1.0], 0.01, rng)
    assert start.l1_distance(mu_star) == pytest.approx(0.01, abs=1e-12)
    traj = integrate(mac_game, mac_policies, SMITH_SPEC, start, 50.0,
                     dt=0.05, record_every=20)
    values = [s.value for s in lyapunov_monitor(traj, mu_star, K=2.0)]
    assert all(b <= a + 1e-10 for a, b in zip(values, values[1:]))


def test_rk4_order_on_smooth_segment(mac_game, mac_policies):
    mu0 = StatePolicyDist.uniform(mac_game, mac_policies)
    sols = {}
    for dt in (0.2, 0.1, 0.025):
        sols[dt] = integrate(mac_game, mac_policies, IMITATIVE_SPEC, mu0, 2.0,
                             dt=dt, record_every=10 ** 9).final()
    e1 = sols[0.2].l1_distance(sols[0.025])
    e2 = sols[0.1].l1_distance(sols[0.025])
    assert 8.0 <= e1 / e2 <= 32.0


def test_guard_clamps_small_negatives():
    arr = np.array([[0.5, -1e-13], [0.25, 0.25]])
    hits, worst = _guarded_step([arr], [1.0])
    assert hits == 1
    assert worst == pytest.approx(1e-13)
    assert arr.min() >= 0.0
    assert arr.sum() == pytest.approx(1.0)


def test_guard_rejects_large_negatives():
    arr = np.array([[0.5, -1e-3], [0.25, 0.25]])
    with pytest.raises(StepRejected):
        _guarded_step([arr], [1.0])


def test_trajectory_csv_format(tmp_path, mac_game, mac_policies):
    mu0 = StatePolicyDist.uniform(mac_game, mac_policies)
    traj = integrate(mac_game, mac_policies, SMITH_SPEC, mu0, 1.0, dt=0.1,
                     record_every=2)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, mac_game, mac_policies, path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    assert header[1:] == column_names(mac_game, mac_policies)
    assert header[1] == "terminals.E.1"
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    assert data.shape == (len(traj), 17)
    # masses sum to the subpopulation mass on every row
    assert np.abs(data[:, 1:].sum(axis=1) - 1.0).max() <= 1e-10
    # 17 significant digits round-trip
    assert data[1, 1] == traj.snapshots[1].per_sub[0][0, 0]


def test_integrate_rejects_bad_dt(mac_game, mac_policies):
    mu0 = StatePolicyDist.uniform(mac_game, mac_policies)
    with pytest.raises(ValueError):
        integrate(mac_game, mac_policies, SMITH_SPEC, mu0, 1.0, dt=0.0)


def test_vector_field_norm_matches_residual(mac_game, mac_policies, rng):
    mu = random_dist(rng, mac_game, mac_policies)
    field = vector_field(mac_game, mac_policies, SMITH_SPEC, mu)
    assert field.inf_norm() == rest_residual(mac_game, mac_policies,
                                             SMITH_SPEC, mu)
