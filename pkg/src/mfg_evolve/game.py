"""Declarative game model: subpopulations, kernels, rewards, policies, distributions.

A game is a collection of subpopulations. Each subpopulation has a finite
state set, per-state feasible actions, a controlled Markov transition kernel,
a reward specification, and Poisson clock rates for decisions and policy
revisions. The central dynamical variable is a nonnegative mass distribution
over (state, deterministic policy) cells, one array per subpopulation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .errors import InfeasibleAction, PolicyExplosion

DEFAULT_POLICY_CAP = 10000

MASS_TOL = 1e-10
KERNEL_TOL = 1e-12


def _frozen_array(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TransitionKernel:
    """Controlled state-transition probabilities.

    ``probs[s_from, a, s_to]`` is the probability of landing in ``s_to`` when
    taking action ``a`` in state ``s_from``. Rows for infeasible (state,
    action) pairs are placeholders and never read.
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen_array(self.probs))
        if self.probs.ndim != 3 or self.probs.shape[0] != self.probs.shape[2]:
            raise ValueError("kernel must have shape (n_states, n_actions, n_states)")


@dataclass(frozen=True)
class AffineCongestion:
    """Reward affine in the population's state-action distribution.

    ``r(s, a, mu_sa) = base[s, a] + weights[s, a] @ vec(mu_sa)`` where ``vec``
    concatenates every subpopulation's (state, action) masses in canonical
    order. Affine dependence keeps the reward globally Lipschitz with constant
    bounded by the largest absolute row sum of ``weights``.
    """

    base: np.ndarray      # (p, q)
    weights: np.ndarray   # (p, q, D), D = sum over subpops of p'*q'

    def __post_init__(self):
        object.__setattr__(self, "base", _frozen_array(self.base))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        if self.weights.shape[:2] != self.base.shape:
            raise ValueError("weights must extend base shape")


@dataclass(frozen=True)
class MacSinr:
    """Expected-SINR reward with a linear power price.

    ``r(s, a, mu_sa) = P_a / (sigma2 + Rd*T_msg*Cbar * sum_x P_x * mass_x) -
    beta_price * P_a`` where the sum runs over the transmitting actions
    ``L, H`` and ``mass_x`` is the total population mass currently paired with
    action ``x``. Requires actions named ``N``, ``L``, ``H``; their transmit
    powers are ``0``, ``P_L``, ``P_H``. The denominator is bounded below by
    ``sigma2 > 0``, so the reward is Lipschitz on the compact set of
    state-action distributions.
    """

    P_L: float
    P_H: float
    sigma2: float
    Cbar: float
    beta_price: float
    T_msg: float


RewardSpec = Union[AffineCongestion, MacSinr]

# Fixed transmit-power mapping for MacSinr rewards.
MAC_ACTIONS = ("N", "L", "H")


@dataclass(frozen=True)
class SubpopSpec:
    """One subpopulation: mass, clock rates, state/action structure, reward."""

    name: str
    mass: float
    decision_rate: float
    revision_rate: float
    states: tuple[str, ...]
    actions: tuple[str, ...]
    feasible: tuple[tuple[int, ...], ...]   # per state, sorted action indices
    kernel: TransitionKernel
    reward: RewardSpec

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_index(self, name: str) -> int:
        return self.states.index(name)

    def action_index(self, name: str) -> int:
        return self.actions.index(name)


@dataclass(frozen=True)
class GameSpec:
    """A full game: discount factor plus an ordered list of subpopulations."""

    beta: float
    subpops: tuple[SubpopSpec, ...]

    @property
    def n_subpops(self) -> int:
        return len(self.subpops)

    def sub_index(self, name: str) -> int:
        for i, sub in enumerate(self.subpops):
            if sub.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class DeterministicPolicy:
    """A fixed state-to-action map; ``choice[s]`` is an action index."""

    choice: tuple[int, ...]

    def action(self, state: int) -> int:
        return self.choice[state]


@dataclass(frozen=True)
class PolicySet:
    """All deterministic policies of one subpopulation, canonically ordered.

    The canonical order is lexicographic over (state index, action index):
    the cartesian product of the per-state feasible action lists with the
    last state's action varying fastest. Every table, CSV column, and report
    in this package indexes policies this way.
    """

    policies: tuple[DeterministicPolicy, ...]
    n_actions: int

    def __len__(self) -> int:
        return len(self.policies)

    def __getitem__(self, i: int) -> DeterministicPolicy:
        return self.policies[i]

    def __iter__(self):
        return iter(self.policies)

    @cached_property
    def action_index(self) -> np.ndarray:
        """(n, p) int array; row u is policy u's action choice per state."""
        return _frozen_array([u.choice for u in self.policies], dtype=np.int64)

    @cached_property
    def choice_onehot(self) -> np.ndarray:
        """(n, p, q) indicator; [u, s, a] = 1 iff policy u picks a in s."""
        n = len(self.policies)
        p = self.action_index.shape[1]
        out = np.zeros((n, p, self.n_actions))
        for u in range(n):
            out[u, np.arange(p), self.action_index[u]] = 1.0
        out.flags.writeable = False
        return out


def enumerate_policies(sub: SubpopSpec, policy_cap: int = DEFAULT_POLICY_CAP) -> PolicySet:
    """All deterministic policies of ``sub`` in canonical order.

    Raises PolicyExplosion when the product of feasible-set sizes exceeds
    ``policy_cap``; exhaustive enumeration is the backbone of every other
    module, so larger games are rejected up front.
    """
    count = 1
    for s, acts in enumerate(sub.feasible):
        if not acts:
            raise ValueError(f"{sub.name}: state {sub.states[s]!r} has no feasible action")
        count *= len(acts)
        if count > policy_cap:
            raise PolicyExplosion(
                f"{sub.name}: {count}+ deterministic policies exceed cap {policy_cap}"
            )
    policies = tuple(DeterministicPolicy(c) for c in itertools.product(*sub.feasible))
    return PolicySet(policies, n_actions=sub.n_actions)


def game_policies(game: GameSpec, policy_cap: int = DEFAULT_POLICY_CAP) -> tuple[PolicySet, ...]:
    return tuple(enumerate_policies(sub, policy_cap) for sub in game.subpops)


@dataclass(frozen=True)
class StatePolicyDist:
    """Per-subpopulation nonnegative mass over (state, policy) cells.

    ``per_sub[c]`` has shape (p_c, n_c) and sums to the subpopulation mass.
    """

    per_sub: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_sub", tuple(_frozen_array(a) for a in self.per_sub))

    @classmethod
    def uniform(cls, game: GameSpec, policies) -> "StatePolicyDist":
        """Mass spread uniformly over all (state, policy) cells per subpopulation."""
        arrays = []
        for sub, pset in zip(game.subpops, policies):
            shape = (sub.n_states, len(pset))
            arrays.append(np.full(shape, sub.mass / (shape[0] * shape[1])))
        return cls(tuple(arrays))

    @classmethod
    def from_flat(cls, vec: np.ndarray, shapes) -> "StatePolicyDist":
        arrays, k = [], 0
        for p, n in shapes:
            arrays.append(np.asarray(vec[k:k + p * n], dtype=float).reshape(p, n))
            k += p * n
        return cls(tuple(arrays))

    def shapes(self) -> tuple[tuple[int, int], ...]:
        return tuple(a.shape for a in self.per_sub)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.per_sub])

    def mass(self, c: int) -> float:
        return float(self.per_sub[c].sum())

    def policy_marginal(self, c: int) -> np.ndarray:
        """Total mass per policy within subpopulation ``c``."""
        return self.per_sub[c].sum(axis=0)

    def l1_distance(self, other: "StatePolicyDist") -> float:
        return float(sum(np.abs(a - b).sum() for a, b in zip(self.per_sub, other.per_sub)))


@dataclass(frozen=True)
class StateActionDist:
    """Per-subpopulation mass over (state, action) cells; shape (p_c, q_c)."""

    per_sub: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_sub", tuple(_frozen_array(a) for a in self.per_sub))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.per_sub])


def validate_dist(game: GameSpec, policies, mu: StatePolicyDist, mass_tol: float = MASS_TOL) -> None:
    """Raise ValueError unless ``mu`` is a valid state-policy distribution."""
    if len(mu.per_sub) != game.n_subpops:
        raise ValueError("distribution has wrong number of subpopulations")
    for sub, pset, arr in zip(game.subpops, policies, mu.per_sub):
        if arr.shape != (sub.n_states, len(pset)):
            raise ValueError(f"{sub.name}: distribution shape {arr.shape} mismatches "
                             f"({sub.n_states}, {len(pset)})")
        if np.any(arr < 0):
            raise ValueError(f"{sub.name}: negative mass entry {arr.min():.3e}")
        drift = abs(arr.sum() - sub.mass)
        if drift > mass_tol:
            raise ValueError(f"{sub.name}: mass drift {drift:.3e} exceeds {mass_tol:.1e}")


def project_state_action(mu: StatePolicyDist, policies) -> StateActionDist:
    """Collapse policies onto the actions they choose per state.

    ``mu_sa[s, a] = sum over policies u with u(s) = a of mu[s, u]``; the
    per-subpopulation mass is preserved (same summands, regrouped).
    """
    out = []
    for arr, pset in zip(mu.per_sub, policies):
        out.append(np.einsum("su,usa->sa", arr, pset.choice_onehot))
    return StateActionDist(tuple(out))


def _mac_powers(spec: MacSinr, actions: tuple[str, ...]) -> np.ndarray:
    return np.array([{"N": 0.0, "L": spec.P_L, "H": spec.P_H}[a] for a in actions])


def reward_table_arrays(game: GameSpec, c: int, sa_arrays) -> np.ndarray:
    """Dense (p, q) single-stage rewards of subpopulation ``c``.

    ``sa_arrays`` is the per-subpopulation sequence of (state, action) mass
    arrays. Entries at infeasible (state, action) pairs are computed from the
    same formula but carry no meaning.
    """
    sub = game.subpops[c]
    spec = sub.reward
    if isinstance(spec, AffineCongestion):
        flat = np.concatenate([np.asarray(a).ravel() for a in sa_arrays])
        return spec.base + spec.weights @ flat
    # MacSinr: interference aggregates transmit power over all subpopulations.
    interference = 0.0
    for other, arr in zip(game.subpops, sa_arrays):
        for name, power in (("L", spec.P_L), ("H", spec.P_H)):
            if name in other.actions:
                interference += power * arr[:, other.actions.index(name)].sum()
    denom = spec.sigma2 + sub.decision_rate * spec.T_msg * spec.Cbar * interference
    powers = _mac_powers(spec, sub.actions)
    per_action = powers / denom - spec.beta_price * powers
    return np.tile(per_action, (sub.n_states, 1))


def reward_table(game: GameSpec, c: int, mu_sa: StateActionDist) -> np.ndarray:
    """Dense (p, q) single-stage rewards of subpopulation ``c`` at ``mu_sa``."""
    return reward_table_arrays(game, c, mu_sa.per_sub)


def evaluate_reward(game: GameSpec, c: int, s: int, a: int, mu_sa: StateActionDist) -> float:
    """Single-stage reward of one (state, action) pair at ``mu_sa``."""
    sub = game.subpops[c]
    if a not in sub.feasible[s]:
        raise InfeasibleAction(
            f"{sub.name}: action {sub.actions[a]!r} infeasible in state {sub.states[s]!r}"
        )
    return float(reward_table(game, c, mu_sa)[s, a])


def reward_bound(game: GameSpec, c: int) -> float:
    """Conservative bound on |r| over all feasible cells and distributions.

    Interval arithmetic: each foreign subpopulation contributes at most its
    whole mass to any single cell it can occupy.
    """
    sub = game.subpops[c]
    spec = sub.reward
    if isinstance(spec, MacSinr):
        worst = 0.0
        for power in (spec.P_L, spec.P_H):
            worst = max(worst, spec.beta_price * power, power / spec.sigma2)
        return worst
    bound = 0.0
    splits = np.cumsum([0] + [o.n_states * o.n_actions for o in game.subpops])
    for s in range(sub.n_states):
        for a in sub.feasible[s]:
            w = np.abs(spec.weights[s, a])
            acc = abs(float(spec.base[s, a]))
            for j, other in enumerate(game.subpops):
                block = w[splits[j]:splits[j + 1]]
                if block.size:
                    acc += other.mass * float(block.max())
            bound = max(bound, acc)
    return bound


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if not c.passed)


def validate_game(game: GameSpec, protocol=None,
                  policy_cap: int = DEFAULT_POLICY_CAP) -> ValidationReport:
    """Structural validation; returns a per-check report, never raises.

    Checks: discount range, mass normalization, feasibility, kernel
    stochasticity on feasible rows, irreducibility of every policy-induced
    state chain, and (when ``protocol`` is given) the conservative
    revision-rate bound.
    """
    from . import payoff, protocols as protocols_mod

    checks = []
    checks.append(CheckResult(
        "beta_range", 0.0 < game.beta < 1.0, f"beta={game.beta!r}"))

    masses = [sub.mass for sub in game.subpops]
    mass_ok = all(m > 0 for m in masses) and abs(sum(masses) - 1.0) <= 1e-12
    checks.append(CheckResult(
        "mass_normalization", mass_ok, f"masses={masses!r} sum={sum(masses)!r}"))

    feas_ok, feas_detail = True, "all feasible sets nonempty"
    for sub in game.subpops:
        for s, acts in enumerate(sub.feasible):
            if not acts:
                feas_ok, feas_detail = False, f"{sub.name}:{sub.states[s]} empty"
    checks.append(CheckResult("feasibility", feas_ok, feas_detail))

    kern_ok, kern_detail = True, ""
    for sub in game.subpops:
        probs = sub.kernel.probs
        rates_ok = sub.decision_rate > 0 and sub.revision_rate > 0
        if not rates_ok:
            kern_ok, kern_detail = False, f"{sub.name}: nonpositive clock rate"
        for s in range(sub.n_states):
            for a in sub.feasible[s]:
                row = probs[s, a]
                if np.any(row < -KERNEL_TOL) or np.any(row > 1 + KERNEL_TOL):
                    kern_ok = False
                    kern_detail = f"{sub.name}:{sub.states[s]},{sub.actions[a]} out of [0,1]"
                elif abs(row.sum() - 1.0) > KERNEL_TOL:
                    kern_ok = False
                    kern_detail = (f"{sub.name}:{sub.states[s]},{sub.actions[a]} "
                                   f"row sums to {row.sum()!r}")
    checks.append(CheckResult("kernel_stochastic", kern_ok, kern_detail or "rows stochastic"))

    irr_ok, irr_detail = True, "every policy chain strongly connected"
    if feas_ok and kern_ok:
        for sub in game.subpops:
            try:
                pset = enumerate_policies(sub, policy_cap)
            except PolicyExplosion as exc:
                irr_ok, irr_detail = False, str(exc)
                continue
            for i, u in enumerate(pset):
                if not payoff.check_irreducibility(payoff.policy_kernel(sub, u)):
                    irr_ok = False
                    irr_detail = f"{sub.name}: policy u{i + 1} chain not irreducible"
                    break
    else:
        irr_ok, irr_detail = False, "skipped (structure invalid)"
    checks.append(CheckResult("irreducibility", irr_ok, irr_detail))

    if protocol is not None:
        report = protocols_mod.check_rate_bound(game, protocol, policy_cap=policy_cap)
        checks.append(CheckResult("rate_bound", report.passed, report.detail))

    return ValidationReport(tuple(checks))
