"""Exact event-driven simulation of the finite-population game.

One aggregate exponential clock drives all agents (statistically identical
to independent per-agent clocks by superposition). A decision event moves
one agent's state along its policy's kernel; a revision event lets one
agent switch policies with probabilities given by the revision protocol
evaluated at the current empirical distribution. Everything is
deterministic given the seed.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import game_hash
from .errors import RateBoundViolated
from .game import GameSpec, StatePolicyDist, game_policies
from .payoff import PAPER_LITERAL, ValueEngine
from .protocols import BNN, IMITATIVE, SMITH, ProtocolSpec, check_rate_bound
from .trajectory import Trajectory, sup_l1_gap
from . import meanfield

THREADS_ENV = "MFG_EVOLVE_THREADS"


@dataclass(frozen=True)
class AgentState:
    """One agent: subpopulation, current state, current policy (indices)."""

    subpop: int
    state: int
    policy: int


@dataclass(frozen=True)
class SimConfig:
    n_players: int
    t_end: float
    seed: int
    record_times: np.ndarray
    payoff_refresh: int = 1      # recompute payoffs at most every k events

    def __post_init__(self):
        grid = np.asarray(self.record_times, dtype=float)
        object.__setattr__(self, "record_times", grid)
        if self.n_players < 1:
            raise ValueError("need at least one player")
        if self.payoff_refresh < 1:
            raise ValueError("payoff_refresh must be >= 1")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > self.t_end:
            raise ValueError("record grid must be increasing within [0, t_end]")


def largest_remainder(targets: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``targets``.

    Floors first, then hands remaining units to the largest fractional
    parts; ties break toward lower index (canonical order).
    """
    targets = np.asarray(targets, dtype=float)
    if targets.sum() <= 0:
        raise ValueError("targets must have positive total")
    scaled = targets * (total / targets.sum())
    counts = np.floor(scaled).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = scaled - counts
        order = np.lexsort((np.arange(len(frac)), -frac))
        counts[order[:short]] += 1
    return counts


def subpop_counts(game: GameSpec, n_players: int) -> np.ndarray:
    return largest_remainder(np.array([sub.mass for sub in game.subpops]), n_players)


def init_population(game: GameSpec, policies, mu0: StatePolicyDist,
                    n_players: int, seed=None) -> list[AgentState]:
    """Deterministic quota initialization matching ``mu0`` as closely as
    integer counts allow (within-subpopulation largest-remainder rounding).

    ``seed`` is accepted for interface stability; the construction draws no
    randomness.
    """
    del seed
    per_sub = subpop_counts(game, n_players)
    agents = []
    for c, (arr, count) in enumerate(zip(mu0.per_sub, per_sub)):
        counts = largest_remainder(arr.ravel(), int(count)).reshape(arr.shape)
        for s in range(arr.shape[0]):
            for u in range(arr.shape[1]):
                agents.extend(AgentState(c, s, u) for _ in range(counts[s, u]))
    return agents


def _empirical(shapes, states, policies_idx, n_players) -> StatePolicyDist:
    arrays = []
    for (p, n), st, po in zip(shapes, states, policies_idx):
        counts = np.zeros((p, n))
        np.add.at(counts, (st, po), 1.0)
        arrays.append(counts / n_players)
    return StatePolicyDist(tuple(arrays))


def _switch_row(protocol: ProtocolSpec, F: np.ndarray, sigma: np.ndarray,
                u: int) -> np.ndarray:
    """Rates out of policy ``u`` for one state; diagonal entry zero."""
    k = protocol.kappa
    if protocol.variant == SMITH:
        row = k * np.maximum(F - F[u], 0.0)
    elif protocol.variant == IMITATIVE:
        total = sigma.sum()
        share = sigma / total if total > 0 else np.zeros_like(sigma)
        row = k * np.maximum(F - F[u], 0.0) * share
    else:  # BNN
        total = sigma.sum()
        fhat = F - (F @ sigma) / total if total > 0 else np.zeros_like(F)
        row = k * np.maximum(fhat, 0.0)
    row[u] = 0.0
    return row


def simulate(game: GameSpec, policies, protocol: ProtocolSpec,
             agents: list[AgentState], cfg: SimConfig,
             value_convention: str = PAPER_LITERAL) -> Trajectory:
    """Run the jump process to ``t_end``, recording the empirical
    distribution at the grid times (piecewise-constant interpolation).

    Requires the conservative revision-rate bound to hold up front; a
    runtime violation (total switch probability above one) aborts the run.
    """
    bound = check_rate_bound(game, protocol)
    if not bound.passed:
        raise RateBoundViolated(f"conservative pre-check failed: {bound.detail}")

    n_players = cfg.n_players
    if len(agents) != n_players:
        raise ValueError("agent list does not match n_players")
    engine = ValueEngine(game, policies, value_convention)
    rng = np.random.default_rng(cfg.seed)
    C = game.n_subpops
    shapes = [(sub.n_states, len(pset)) for sub, pset in zip(game.subpops, policies)]

    states = [np.array([a.state for a in agents if a.subpop == c], dtype=np.int64)
              for c in range(C)]
    policy_idx = [np.array([a.policy for a in agents if a.subpop == c], dtype=np.int64)
                  for c in range(C)]
    counts = []
    for (p, n), st, po in zip(shapes, states, policy_idx):
        m = np.zeros((p, n))
        np.add.at(m, (st, po), 1.0)
        counts.append(m)

    act_idx = [pset.action_index for pset in policies]
    kernel_cum = [np.cumsum(sub.kernel.probs, axis=2) for sub in game.subpops]
    rates_dec = np.array([sub.decision_rate for sub in game.subpops])
    rates_rev = np.array([sub.revision_rate for sub in game.subpops])
    n_per_sub = np.array([len(s) for s in states], dtype=float)
    class_rates = n_per_sub * (rates_dec + rates_rev)
    total_rate = float(class_rates.sum())
    class_cum = np.cumsum(class_rates) / total_rate
    dec_share = rates_dec / (rates_dec + rates_rev)

    # Empirical state-action masses, maintained incrementally per event.
    inv_n = 1.0 / n_players
    sa_arrays = []
    for c, (sub, (p, n)) in enumerate(zip(game.subpops, shapes)):
        sa = np.zeros((p, sub.n_actions))
        for s in range(p):
            for u in range(n):
                sa[s, act_idx[c][u, s]] += counts[c][s, u]
        sa_arrays.append(sa * inv_n)

    grid = cfg.record_times
    grid_i = 0
    recorded = []

    def snapshot():
        return StatePolicyDist(tuple(m * inv_n for m in counts))

    value_cache = None
    events_since_refresh = 0
    n_events = n_decisions = n_revisions = 0
    t = 0.0
    while True:
        t_next = t + rng.exponential(1.0 / total_rate)
        while grid_i < len(grid) and grid[grid_i] <= min(t_next, cfg.t_end):
            recorded.append(snapshot())
            grid_i += 1
        if t_next > cfg.t_end:
            break
        t = t_next
        c = int(np.searchsorted(class_cum, rng.random())) if C > 1 else 0
        st, po, cnt, sa = states[c], policy_idx[c], counts[c], sa_arrays[c]
        j = int(rng.integers(len(st)))
        n_events += 1
        events_since_refresh += 1
        if rng.random() < dec_share[c]:
            n_decisions += 1
            s = st[j]
            u = po[j]
            a = act_idx[c][u, s]
            s2 = int(np.searchsorted(kernel_cum[c][s, a], rng.random()))
            if s2 != s:
                cnt[s, u] -= 1.0
                cnt[s2, u] += 1.0
                sa[s, a] -= inv_n
                sa[s2, act_idx[c][u, s2]] += inv_n
                st[j] = s2
        else:
            n_revisions += 1
            s = int(st[j])
            u = int(po[j])
            if value_cache is None or events_since_refresh >= cfg.payoff_refresh:
                value_cache = engine.value_tables_sa(sa_arrays)
                events_since_refresh = 0
            F = value_cache[c][:, s]
            sigma = cnt[s] * inv_n
            probs = _switch_row(protocol, F, sigma, u) / rates_rev[c]
            total_prob = float(probs.sum())
            if total_prob > 1.0 + 1e-12:
                raise RateBoundViolated(
                    f"switch probabilities sum to {total_prob:.6f} at runtime")
            r = rng.random()
            if r < total_prob:
                v = int(np.searchsorted(np.cumsum(probs), r))
                cnt[s, u] -= 1.0
                cnt[s, v] += 1.0
                sa[s, act_idx[c][u, s]] -= inv_n
                sa[s, act_idx[c][v, s]] += inv_n
                po[j] = v

    times = grid[:len(recorded)]
    metadata = {
        "kind": "population",
        "protocol": protocol.variant,
        "kappa": protocol.kappa,
        "n_players": n_players,
        "seed": cfg.seed,
        "payoff_refresh": cfg.payoff_refresh,
        "t_end": cfg.t_end,
        "events": n_events,
        "decision_events": n_decisions,
        "revision_events": n_revisions,
        "game_hash": game_hash(game),
    }
    return Trajectory(times, tuple(recorded), metadata)


@dataclass(frozen=True)
class ErrorTable:
    """Sup-L1 gaps to the mean-field reference per (population size, seed)."""

    rows: tuple[tuple[int, int, float], ...]     # (N, seed, error)
    medians: dict
    slope: float | None

    def to_jsonable(self) -> dict:
        return {
            "rows": [list(r) for r in self.rows],
            "medians": {str(k): v for k, v in self.medians.items()},
            "slope": self.slope,
        }


def max_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _convergence_job(args):
    (game, protocol, mu0, n, seed, t_end, grid, payoff_refresh, convention) = args
    policies = game_policies(game)
    agents = init_population(game, policies, mu0, n)
    cfg = SimConfig(n_players=n, t_end=t_end, seed=seed, record_times=grid,
                    payoff_refresh=payoff_refresh)
    return simulate(game, policies, protocol, agents, cfg, convention)


def convergence_experiment(game: GameSpec, policies, protocol: ProtocolSpec,
                           mu0: StatePolicyDist, Ns, seeds, t_end: float,
                           grid_step: float = 0.5, dt: float = 0.01,
                           payoff_refresh: int = 1,
                           value_convention: str = PAPER_LITERAL,
                           workers: int | None = None) -> ErrorTable:
    """Gap between empirical and mean-field trajectories as players grow.

    For each population size and seed the error is the largest L1 distance
    over the shared record grid. Returns per-size medians and the fitted
    log-log slope (None with fewer than two sizes).
    """
    t_end = round(t_end / grid_step) * grid_step     # align endpoint to the grid
    grid = np.round(np.arange(0.0, t_end + grid_step / 2, grid_step), 12)
    steps_per_cell = max(1, int(round(grid_step / dt)))
    record_every = steps_per_cell
    fine_dt = grid_step / steps_per_cell
    reference = meanfield.integrate(game, policies, protocol, mu0, t_end,
                                    dt=fine_dt, record_every=record_every,
                                    value_convention=value_convention)
    jobs = [(game, protocol, mu0, int(n), int(seed), t_end, grid,
             payoff_refresh, value_convention)
            for n in Ns for seed in seeds]
    n_workers = workers if workers is not None else max_workers()
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            trajectories = list(pool.map(_convergence_job, jobs))
    else:
        trajectories = [_convergence_job(job) for job in jobs]

    rows = []
    for (g, p, m, n, seed, *_), traj in zip(jobs, trajectories):
        rows.append((n, seed, sup_l1_gap(traj, reference)))
    medians = {}
    for n in sorted({int(x) for x in Ns}):
        errors = [e for nn, _, e in rows if nn == n]
        medians[n] = float(np.median(errors))
    slope = None
    if len(medians) >= 2:
        xs = np.log(np.array(sorted(medians)))
        ys = np.log(np.array([medians[n] for n in sorted(medians)]))
        slope = float(np.polyfit(xs, ys, 1)[0])
    return ErrorTable(tuple(rows), medians, slope)


def write_error_table(table: ErrorTable, path) -> None:
    with open(path, "w") as fh:
        fh.write("N,seed,sup_l1_error\n")
        for n, seed, err in table.rows:
            fh.write(f"{n},{seed},{err:.17g}\n")
