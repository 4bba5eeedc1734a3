"""Composite diagnostics: stability probes, contraction monitors, rate checks.

These procedures combine the equilibrium checker, the mean-field integrator,
and the protocol layer into report-shaped results for the CLI and the test
suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .equilibria import (MarginalPolicyDist, assemble_mu, check_msne,
                         check_strict_msne, pure_candidates, solve_msne)
from .errors import MfgEvolveError
from .game import GameSpec, StatePolicyDist
from .meanfield import (integrate, lyapunov_monitor, rest_residual)
from .payoff import PAPER_LITERAL, ValueEngine, stationary_table
from .protocols import IMITATIVE, ProtocolSpec

REST_TOL = 1e-9


@dataclass(frozen=True)
class InstabilityReport:
    rest_point: StatePolicyDist
    rest_residual: float
    msne_failed: bool
    incumbent: tuple[int, ...]       # 1-based policy per subpopulation
    injected: tuple[int, ...]        # 1-based optimal policy per subpopulation
    injected_mass: float
    escaped: bool
    exit_time: float | None
    monotone_growth: bool
    mass_curve: tuple[tuple[float, float], ...]   # (t, injected-policy mass)

    def to_jsonable(self, game: GameSpec) -> dict:
        from .trajectory import dist_to_jsonable
        return {
            "rest_point": dist_to_jsonable(self.rest_point, game),
            "rest_residual": self.rest_residual,
            "msne_failed": self.msne_failed,
            "incumbent": list(self.incumbent),
            "injected": list(self.injected),
            "injected_mass": self.injected_mass,
            "escaped": self.escaped,
            "exit_time": self.exit_time,
            "monotone_growth": self.monotone_growth,
            "mass_curve": [list(p) for p in self.mass_curve],
        }


def _optimal_profile(game: GameSpec, policies, mu: StatePolicyDist,
                     value_convention: str, tie_tol: float = 1e-9):
    """Per subpopulation, a policy maximizing the payoff from every state at
    frozen ``mu``; None when no single policy tops every state."""
    engine = ValueEngine(game, policies, value_convention)
    values = engine.value_tables(mu)
    profile = []
    for vals in values:
        scale = max(1.0, float(np.abs(vals).max()))
        best = vals.max(axis=0)
        uniform_winners = np.flatnonzero(
            (vals >= best[None, :] - tie_tol * scale).all(axis=1))
        if len(uniform_winners) == 0:
            return None
        profile.append(int(uniform_winners[0]))
    return tuple(profile)


def instability_probe(game: GameSpec, policies, kappa: float = 1.0,
                      injected_mass: float = 1e-3, ball_radius: float = 0.05,
                      t_end: float = 400.0, dt: float = 0.02,
                      value_convention: str = PAPER_LITERAL) -> InstabilityReport:
    """Escape of imitation dynamics from a support-restricted rest point.

    Builds a rest point with zero mass on the equilibrium policy (every
    single-policy profile is a rest point of imitation, because imitation
    cannot adopt an unused policy), verifies it fails the equilibrium check,
    injects a small mass on the policy that is optimal there, and integrates
    until the trajectory leaves the given L1 ball.
    """
    protocol = ProtocolSpec(IMITATIVE, kappa)
    solved = solve_msne(game, policies, value_convention=value_convention)
    if not solved.converged:
        raise MfgEvolveError("probe needs a solver-certified equilibrium")
    star_profile = [int(np.argmax(arr.sum(axis=0))) for arr in solved.candidate.per_sub]

    eta = stationary_table(game, policies)
    masses = [sub.mass for sub in game.subpops]
    sizes = [len(pset) for pset in policies]
    if any(n < 2 for n in sizes):
        raise MfgEvolveError("probe needs at least two policies per subpopulation")

    # Scan single-policy profiles avoiding each subpopulation's equilibrium
    # policy; keep the first one that fails the equilibrium check and is
    # escapable (a uniformly optimal unused policy exists there).
    options = [[u for u in range(n) if u != star] for n, star in zip(sizes, star_profile)]
    chosen = None
    for profile in itertools.product(*options):
        x = []
        for n, m, w in zip(sizes, masses, profile):
            marg = np.zeros(n)
            marg[w] = m
            x.append(marg)
        candidate = assemble_mu(MarginalPolicyDist(tuple(x)), eta)
        verdict = check_msne(game, policies, candidate,
                             value_convention=value_convention)
        if verdict.passed:
            continue
        target = _optimal_profile(game, policies, candidate, value_convention)
        if target is None or all(t == w for t, w in zip(target, profile)):
            continue
        chosen = (profile, candidate, target)
        break
    if chosen is None:
        raise MfgEvolveError("no escapable support-restricted rest point found")
    profile, rest, target = chosen
    residual = rest_residual(game, policies, protocol, rest, value_convention)

    # Inject mass onto the optimal policy, preserving each state's total.
    arrays = [arr.copy() for arr in rest.per_sub]
    for arr, m, w, tgt in zip(arrays, masses, profile, target):
        if tgt == w:
            continue
        share = injected_mass / m
        moved = share * arr[:, w]
        arr[:, w] -= moved
        arr[:, tgt] += moved
    start = StatePolicyDist(tuple(arrays))

    traj = integrate(game, policies, protocol, start, t_end, dt=dt,
                     record_every=max(1, int(round(1.0 / dt))),
                     value_convention=value_convention)
    injected_cols = [tgt for tgt in target]
    mass_curve = []
    exit_time = None
    for t, snap in zip(traj.times, traj.snapshots):
        tracked = sum(float(snap.per_sub[c][:, tgt].sum())
                      for c, tgt in enumerate(injected_cols))
        mass_curve.append((float(t), tracked))
        if exit_time is None and snap.l1_distance(rest) > ball_radius:
            exit_time = float(t)
    inside = [m for (t, m) in mass_curve
              if exit_time is None or t <= exit_time]
    monotone = all(b >= a - 1e-12 for a, b in zip(inside, inside[1:]))

    return InstabilityReport(
        rest_point=rest,
        rest_residual=residual,
        msne_failed=True,
        incumbent=tuple(w + 1 for w in profile),
        injected=tuple(t + 1 for t in target),
        injected_mass=injected_mass,
        escaped=exit_time is not None,
        exit_time=exit_time,
        monotone_growth=monotone,
        mass_curve=tuple(mass_curve),
    )


@dataclass(frozen=True)
class StabilityRun:
    seed: int
    lyapunov_monotone: bool
    max_lyapunov_rise: float
    final_distance: float
    samples: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class StabilityReport:
    protocol: str
    perturbation: float
    t_end: float
    runs: tuple[StabilityRun, ...]

    @property
    def all_monotone(self) -> bool:
        return all(r.lyapunov_monotone for r in self.runs)

    def to_jsonable(self) -> dict:
        return {
            "protocol": self.protocol,
            "perturbation": self.perturbation,
            "t_end": self.t_end,
            "runs": [{
                "seed": r.seed,
                "lyapunov_monotone": r.lyapunov_monotone,
                "max_lyapunov_rise": r.max_lyapunov_rise,
                "final_distance": r.final_distance,
            } for r in self.runs],
        }


def perturb_within_simplex(mu_star: StatePolicyDist, masses, size: float,
                           rng: np.random.Generator) -> StatePolicyDist:
    """Random valid distribution at L1 distance ``size`` from a single-policy
    equilibrium: moves half the budget off the supported column onto random
    other cells, state totals free to change."""
    arrays = []
    for arr, m in zip(mu_star.per_sub, masses):
        out = arr.copy()
        w = int(np.argmax(arr.sum(axis=0)))
        budget = size / (2.0 * len(mu_star.per_sub))
        col = out[:, w]
        take = budget * col / col.sum()
        take = np.minimum(take, col)           # keep entries nonnegative
        out[:, w] -= take
        weights = np.ones(out.shape)
        weights[:, w] = 0.0
        weights = rng.random(out.shape) * weights
        weights /= weights.sum()
        out += take.sum() * weights
        arrays.append(out)
    return StatePolicyDist(tuple(arrays))


def stability_report(game: GameSpec, policies, protocol: ProtocolSpec,
                     mu_star: StatePolicyDist, seeds, perturbation: float = 0.01,
                     t_end: float = 500.0, dt: float = 0.05, K: float = 2.0,
                     lyapunov_slack: float = 1e-10,
                     value_convention: str = PAPER_LITERAL) -> StabilityReport:
    """Perturb a strict equilibrium and monitor the contraction function."""
    check_strict_msne(game, policies, mu_star, value_convention=value_convention)
    masses = [sub.mass for sub in game.subpops]
    runs = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        start = perturb_within_simplex(mu_star, masses, perturbation, rng)
        traj = integrate(game, policies, protocol, start, t_end, dt=dt,
                         record_every=max(1, int(round(1.0 / dt))),
                         value_convention=value_convention)
        samples = lyapunov_monitor(traj, mu_star, K=K)
        values = [s.value for s in samples]
        rises = [b - a for a, b in zip(values, values[1:])]
        max_rise = max(rises) if rises else 0.0
        runs.append(StabilityRun(
            seed=int(seed),
            lyapunov_monotone=max_rise <= lyapunov_slack,
            max_lyapunov_rise=float(max_rise),
            final_distance=traj.final().l1_distance(mu_star),
            samples=tuple((s.time, s.value) for s in samples),
        ))
    return StabilityReport(protocol.variant, perturbation, t_end, tuple(runs))


def certified_equilibrium(game: GameSpec, policies,
                          value_convention: str = PAPER_LITERAL):
    """Solve, verify strictness, and return (candidate, strict verdict)."""
    result = solve_msne(game, policies, value_convention=value_convention)
    if not result.converged:
        raise MfgEvolveError("solver did not certify an equilibrium")
    strict = check_strict_msne(game, policies, result.candidate,
                               value_convention=value_convention)
    return result.candidate, strict


def oracle_log(game: GameSpec, policies, value_convention: str = PAPER_LITERAL) -> list[str]:
    """Human-readable pure-candidate scan, one line per profile."""
    lines = []
    for profile, _, verdict in pure_candidates(game, policies, value_convention):
        label = "+".join(f"u{w + 1}" for w in profile)
        if verdict.passed:
            lines.append(f"{label}: PASS")
        else:
            worst = max((v.gap for v in verdict.optimality_violations), default=0.0)
            lines.append(f"{label}: FAIL (optimality violations="
                         f"{len(verdict.optimality_violations)}, max gap={worst:.6g}, "
                         f"stationarity violations={len(verdict.stationarity_violations)})")
    return lines
