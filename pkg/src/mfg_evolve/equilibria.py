"""Stationary-equilibrium verification and a damped best-response search.

An equilibrium distribution must (a) put mass only on policies whose
discounted payoff from every occupied state ties the best achievable and
(b) be stationary along each policy's induced state chain. The checker
verifies both conditions with explicit tolerances; the solver iterates a
damped discrete best response over policy marginals, assembling candidates
from precomputed per-policy stationary distributions, and certifies every
candidate through the checker (never through its own convergence flag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated, NotMsne
from .game import GameSpec, StatePolicyDist
from .payoff import (PAPER_LITERAL, StationaryTable, ValueEngine,
                     check_irreducibility, policy_kernel, stationary_table)

EPS_PAY = 1e-6
EPS_STAT = 1e-8
EPS_MASS = 1e-10
TIE_TOL = 1e-9


@dataclass(frozen=True)
class OptimalityViolation:
    sub: str
    state: str
    policy: int          # 1-based canonical index
    gap: float           # payoff shortfall vs the state's best policy


@dataclass(frozen=True)
class StationarityViolation:
    sub: str
    state: str
    policy: int          # 1-based canonical index
    residual: float


@dataclass(frozen=True)
class MsneVerdict:
    passed: bool
    optimality_violations: tuple[OptimalityViolation, ...]
    stationarity_violations: tuple[StationarityViolation, ...]
    max_stationarity_residual: float
    payoff_scale: tuple[float, ...]
    tolerances: dict

    def to_jsonable(self) -> dict:
        return {
            "passed": self.passed,
            "optimality_violations": [vars(v) for v in self.optimality_violations],
            "stationarity_violations": [vars(v) for v in self.stationarity_violations],
            "max_stationarity_residual": self.max_stationarity_residual,
            "payoff_scale": list(self.payoff_scale),
            "tolerances": dict(self.tolerances),
        }


def check_msne(game: GameSpec, policies, mu: StatePolicyDist,
               eps_pay: float = EPS_PAY, eps_stat: float = EPS_STAT,
               eps_mass: float = EPS_MASS,
               value_convention: str = PAPER_LITERAL) -> MsneVerdict:
    """Verify the two equilibrium conditions at explicit tolerances.

    Optimality is relative: a supported policy may trail the state's best
    payoff by at most ``eps_pay * max(1, |values|_inf)`` (scale computed per
    subpopulation). Stationarity is the absolute per-cell balance residual.
    """
    engine = ValueEngine(game, policies, value_convention)
    values = engine.value_tables(mu)
    opt_viol, stat_viol = [], []
    scales = []
    max_resid = 0.0
    for sub, pset, arr, vals, K in zip(game.subpops, policies, mu.per_sub,
                                       values, engine.kernels):
        scale = max(1.0, float(np.abs(vals).max()))
        scales.append(scale)
        best = vals.max(axis=0)                                  # per state
        flow = np.einsum("uab,au->bu", K, arr)                   # (p, n)
        resid = np.abs(arr - flow)
        max_resid = max(max_resid, float(resid.max()))
        for s in range(sub.n_states):
            for u in range(len(pset)):
                if arr[s, u] > eps_mass:
                    gap = float(best[s] - vals[u, s])
                    if gap > eps_pay * scale:
                        opt_viol.append(OptimalityViolation(
                            sub.name, sub.states[s], u + 1, gap))
                if resid[s, u] > eps_stat:
                    stat_viol.append(StationarityViolation(
                        sub.name, sub.states[s], u + 1, float(resid[s, u])))
    return MsneVerdict(
        passed=not opt_viol and not stat_viol,
        optimality_violations=tuple(opt_viol),
        stationarity_violations=tuple(stat_viol),
        max_stationarity_residual=max_resid,
        payoff_scale=tuple(scales),
        tolerances={"eps_pay": eps_pay, "eps_stat": eps_stat, "eps_mass": eps_mass},
    )


@dataclass(frozen=True)
class StrictVerdict:
    strict: bool
    min_gap: float               # +inf when no alternative policy exists
    winners: tuple[int, ...]     # 1-based policy index per subpopulation
    detail: str


def check_strict_msne(game: GameSpec, policies, mu: StatePolicyDist,
                      eps_pay: float = EPS_PAY, eps_stat: float = EPS_STAT,
                      eps_mass: float = EPS_MASS,
                      value_convention: str = PAPER_LITERAL) -> StrictVerdict:
    """Strictness on top of the equilibrium check.

    Each subpopulation must support exactly one policy, and that policy must
    beat every alternative from every state by more than the payoff
    tolerance. Raises NotMsne when the base check fails.
    """
    base = check_msne(game, policies, mu, eps_pay, eps_stat, eps_mass,
                      value_convention)
    if not base.passed:
        raise NotMsne("distribution fails the equilibrium check")
    engine = ValueEngine(game, policies, value_convention)
    values = engine.value_tables(mu)
    winners = []
    min_gap = math.inf
    for sub, pset, arr, vals in zip(game.subpops, policies, mu.per_sub, values):
        support = np.flatnonzero(arr.sum(axis=0) > eps_mass)
        if len(support) != 1:
            return StrictVerdict(False, 0.0, (),
                                 f"{sub.name}: support size {len(support)} != 1")
        w = int(support[0])
        winners.append(w + 1)
        if len(pset) > 1:
            others = np.delete(np.arange(len(pset)), w)
            gap = float((vals[w] - vals[others].max(axis=0)).min())
            min_gap = min(min_gap, gap)
            scale = max(1.0, float(np.abs(vals).max()))
            if gap <= eps_pay * scale:
                return StrictVerdict(False, gap, tuple(winners),
                                     f"{sub.name}: gap {gap:.3e} not strict")
    return StrictVerdict(True, min_gap, tuple(winners), "strict")


@dataclass(frozen=True)
class MarginalPolicyDist:
    """Per-subpopulation mass over policies only; sums to each mass."""

    per_sub: tuple[np.ndarray, ...]


def assemble_mu(x: MarginalPolicyDist, eta: StationaryTable) -> StatePolicyDist:
    """Product assembly: cell mass = policy marginal times its state distribution.

    When the state rows are stationary the result is stationary by
    construction, so only optimality remains to check.
    """
    arrays = []
    for marg, rows in zip(x.per_sub, eta.per_sub):
        arrays.append((rows * np.asarray(marg)[:, None]).T.copy())
    return StatePolicyDist(tuple(arrays))


@dataclass(frozen=True)
class SolverResult:
    candidate: StatePolicyDist
    verdict: MsneVerdict
    iterations: int
    restarts_used: int
    converged: bool


def _best_response(scores: np.ndarray, mass: float, tie_tol: float) -> np.ndarray:
    scale = max(1.0, float(np.abs(scores).max()))
    ties = scores >= scores.max() - tie_tol * scale
    out = np.where(ties, 1.0, 0.0)
    return mass * out / out.sum()


def solve_msne(game: GameSpec, policies, damping: float = 0.2,
               max_iter: int = 5000, restarts: int = 16, seed: int = 0,
               tol: float = 1e-12, eps_pay: float = EPS_PAY,
               eps_stat: float = EPS_STAT, eps_mass: float = EPS_MASS,
               value_convention: str = PAPER_LITERAL) -> SolverResult:
    """Damped best-response iteration over policy marginals.

    Every policy's stationary state distribution is precomputed once (unique
    under irreducibility, independent of the marginals), which reduces the
    search to the policy marginals alone. Scores are values averaged over a
    uniform initial state; ties split uniformly. The iteration is a
    heuristic: a fixed point exists, but this scheme may cycle on games with
    only mixed equilibria, in which case the failure is reported. The
    verdict always comes from the checker, never from convergence itself.
    """
    for sub, pset in zip(game.subpops, policies):
        for i, u in enumerate(pset):
            if not check_irreducibility(policy_kernel(sub, u)):
                raise AssumptionViolated(
                    f"{sub.name}: policy u{i + 1} chain not irreducible")
    eta = stationary_table(game, policies)
    engine = ValueEngine(game, policies, value_convention)
    masses = [sub.mass for sub in game.subpops]
    sizes = [len(pset) for pset in policies]
    rng = np.random.default_rng(seed)

    total_iters = 0
    best_failure = None
    for attempt in range(restarts + 1):
        if attempt == 0:
            x = [np.full(n, m / n) for n, m in zip(sizes, masses)]
        else:
            x = [m * rng.dirichlet(np.ones(n)) for n, m in zip(sizes, masses)]
        stable = 0
        for _ in range(max_iter):
            total_iters += 1
            mu = assemble_mu(MarginalPolicyDist(tuple(x)), eta)
            values = engine.value_tables(mu)
            delta = 0.0
            new_x = []
            for marg, vals, m in zip(x, values, masses):
                scores = vals.mean(axis=1)       # value from a uniform start
                target = _best_response(scores, m, TIE_TOL)
                nxt = (1.0 - damping) * marg + damping * target
                delta = max(delta, float(np.abs(nxt - marg).max()))
                new_x.append(nxt)
            x = new_x
            stable = stable + 1 if delta < tol else 0
            if stable >= 25:
                break
        candidate = assemble_mu(MarginalPolicyDist(tuple(x)), eta)
        verdict = check_msne(game, policies, candidate, eps_pay, eps_stat,
                             eps_mass, value_convention)
        if verdict.passed:
            return SolverResult(candidate, verdict, total_iters, attempt, True)
        best_failure = SolverResult(candidate, verdict, total_iters, attempt, False)
    return best_failure


def pure_candidates(game: GameSpec, policies,
                    value_convention: str = PAPER_LITERAL):
    """Exhaustive scan of single-policy profiles against the checker.

    For every joint choice of one policy per subpopulation, build the
    candidate with all mass on that policy at its stationary state
    distribution and run the equilibrium check. Returns a list of
    (profile, candidate, verdict) triples in lexicographic profile order.
    Intended for small games; used as the certification oracle.
    """
    import itertools

    eta = stationary_table(game, policies)
    masses = [sub.mass for sub in game.subpops]
    sizes = [len(pset) for pset in policies]
    results = []
    for profile in itertools.product(*(range(n) for n in sizes)):
        x = []
        for n, m, w in zip(sizes, masses, profile):
            marg = np.zeros(n)
            marg[w] = m
            x.append(marg)
        candidate = assemble_mu(MarginalPolicyDist(tuple(x)), eta)
        verdict = check_msne(game, policies, candidate,
                             value_convention=value_convention)
        results.append((profile, candidate, verdict))
    return results
