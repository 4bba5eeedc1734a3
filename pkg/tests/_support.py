"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's solve-based value path:
values come from truncated power sums or Monte Carlo rollouts, stationary
distributions from closed forms.
"""

from __future__ import annotations

import numpy as np

from mfg_evolve.game import (AffineCongestion, GameSpec, SubpopSpec,
                             TransitionKernel)


def dirichlet_rows(rng, shape):
    """Random stochastic array over the last axis."""
    flat = rng.gamma(1.0, size=shape)
    return flat / flat.sum(axis=-1, keepdims=True)


def make_subpop(name, mass, states, actions, feasible, probs, base=None,
                weights=None, dim=None, decision_rate=1.0, revision_rate=8.0):
    p, q = len(states), len(actions)
    if base is None:
        base = np.zeros((p, q))
    if dim is None:
        dim = p * q
    if weights is None:
        weights = np.zeros((p, q, dim))
    return SubpopSpec(
        name=name, mass=mass, decision_rate=decision_rate,
        revision_rate=revision_rate, states=tuple(states), actions=tuple(actions),
        feasible=tuple(tuple(f) for f in feasible),
        kernel=TransitionKernel(probs),
        reward=AffineCongestion(base=base, weights=weights),
    )


def single_policy_game(p=3, beta=0.6, seed=0):
    """One subpopulation, one feasible action per state: a single policy."""
    rng = np.random.default_rng(seed)
    states = [f"s{i}" for i in range(p)]
    probs = dirichlet_rows(rng, (p, 1, p))
    base = rng.uniform(-1, 1, size=(p, 1))
    sub = make_subpop("only", 1.0, states, ["a"], [(0,)] * p, probs, base=base)
    return GameSpec(beta=beta, subpops=(sub,))


def constant_reward_game(value=0.7, p=2, beta=0.5):
    """Two actions, uniform kernels, constant reward: all policies tie."""
    states = [f"s{i}" for i in range(p)]
    probs = np.full((p, 2, p), 1.0 / p)
    base = np.full((p, 2), value)
    sub = make_subpop("flat", 1.0, states, ["a", "b"], [(0, 1)] * p, probs,
                      base=base)
    return GameSpec(beta=beta, subpops=(sub,))


def twin_action_game(beta=0.5):
    """One state, two actions with identical rows and rewards: the two
    policies are indistinguishable in payoff."""
    probs = np.ones((1, 2, 1))
    base = np.array([[0.3, 0.3]])
    sub = make_subpop("twin", 1.0, ["s"], ["a", "b"], [(0, 1)], probs, base=base)
    return GameSpec(beta=beta, subpops=(sub,))


def random_game(rng, max_subpops=2, max_states=3, max_actions=3,
                beta_choices=(0.5, 0.7, 0.9), weight_scale=0.3):
    """Random multi-subpopulation game with affine congestion rewards."""
    n_subs = int(rng.integers(1, max_subpops + 1))
    masses = dirichlet_rows(rng, (n_subs,))
    shapes = []
    for c in range(n_subs):
        p = int(rng.integers(1, max_states + 1))
        q = int(rng.integers(1, max_actions + 1))
        shapes.append((p, q))
    dim = sum(p * q for p, q in shapes)
    subs = []
    for c, (p, q) in enumerate(shapes):
        feasible = []
        for s in range(p):
            size = int(rng.integers(1, q + 1))
            feasible.append(tuple(sorted(rng.choice(q, size=size, replace=False))))
        probs = dirichlet_rows(rng, (p, q, p))
        base = rng.uniform(-1.0, 1.0, size=(p, q))
        weights = rng.uniform(-weight_scale, weight_scale, size=(p, q, dim))
        subs.append(make_subpop(
            f"c{c}", float(masses[c]), [f"s{i}" for i in range(p)],
            [f"a{j}" for j in range(q)], feasible, probs, base=base,
            weights=weights, dim=dim,
            decision_rate=float(rng.uniform(0.5, 2.0)),
            revision_rate=float(rng.uniform(0.5, 2.0))))
    return GameSpec(beta=float(rng.choice(beta_choices)), subpops=tuple(subs))


def random_dist(rng, game, policies):
    """Random valid state-policy distribution."""
    from mfg_evolve.game import StatePolicyDist
    arrays = []
    for sub, pset in zip(game.subpops, policies):
        cells = dirichlet_rows(rng, (sub.n_states * len(pset),))
        arrays.append(sub.mass * cells.reshape(sub.n_states, len(pset)))
    return StatePolicyDist(tuple(arrays))


def truncated_value(P, r, beta, tol=1e-12):
    """Independent oracle: V = sum_{k>=1} beta^k P^k r, truncated when the
    geometric tail bound drops below ``tol``."""
    P = np.asarray(P, dtype=float)
    r = np.asarray(r, dtype=float)
    acc = np.zeros_like(r)
    term = r.copy()
    factor = 1.0
    rmax = float(np.abs(r).max()) if r.size else 0.0
    k = 0
    while True:
        k += 1
        term = P @ term
        factor *= beta
        acc += factor * term
        if factor * beta * rmax / (1.0 - beta) < tol or k > 100000:
            return acc


def mc_value(P, r, beta, s0, n_paths, rng, rel_tail=0.02):
    """Monte Carlo rollout oracle for the value from one start state.

    Returns (estimate, standard error, truncation bound). Paths run until
    the remaining discounted tail is below ``rel_tail`` of a crude standard
    error scale, so the bias is negligible against the noise.
    """
    P = np.asarray(P, dtype=float)
    r = np.asarray(r, dtype=float)
    p = P.shape[0]
    rmax = float(np.abs(r).max()) + 1e-15
    se_scale = rmax * beta / (1.0 - beta) / np.sqrt(n_paths)
    K = 1
    while beta ** (K + 1) * rmax / (1.0 - beta) > rel_tail * se_scale and K < 4000:
        K += 1
    cum = np.cumsum(P, axis=1)
    states = np.full(n_paths, s0, dtype=np.int64)
    totals = np.zeros(n_paths)
    factor = 1.0
    for _ in range(K):
        draws = rng.random(n_paths)
        states = (cum[states] < draws[:, None]).sum(axis=1)
        factor *= beta
        totals += factor * r[states]
    tail = beta ** (K + 1) * rmax / (1.0 - beta)
    return float(totals.mean()), float(totals.std(ddof=1) / np.sqrt(n_paths)), tail


def two_state_stationary(x, y):
    """Closed-form stationary distribution of [[1-x, x], [y, 1-y]]."""
    return np.array([y, x]) / (x + y)
