"""The mean dynamic of the population and its integration and monitors.

The vector field has two parts per (subpopulation, state, policy) cell:
a decision drift moving state mass along each policy's induced chain at the
decision clock rate, and a revision flow moving policy mass within each
state according to the revision protocol evaluated at the current payoffs.
Both parts conserve subpopulation mass, so trajectories live on a product
of scaled simplices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, StepRejected, WrongProtocol
from .game import GameSpec, StatePolicyDist
from .payoff import PAPER_LITERAL, ValueEngine
from .protocols import IMITATIVE, ProtocolSpec, net_flows, rate_matrices
from .trajectory import Trajectory

DEFAULT_DT = 0.01
REST_POINT_TOL = 1e-9
GUARD_REJECT = -1e-6


@dataclass(frozen=True)
class VectorField:
    """Time derivative of a state-policy distribution; same shapes as one."""

    per_sub: tuple[np.ndarray, ...]

    def inf_norm(self) -> float:
        return max(float(np.abs(a).max()) for a in self.per_sub)


class MeanFieldModel:
    """Bundles the precomputed pieces needed to evaluate the field quickly."""

    def __init__(self, game: GameSpec, policies, protocol: ProtocolSpec,
                 value_convention: str = PAPER_LITERAL):
        self.game = game
        self.policies = policies
        self.protocol = protocol
        self.engine = ValueEngine(game, policies, value_convention)

    def component_arrays(self, mu: StatePolicyDist):
        """(drift, revision) array lists; the field is their sum."""
        values = self.engine.value_tables(mu)
        drifts, revisions = [], []
        for sub, arr, K, vals in zip(self.game.subpops, mu.per_sub,
                                     self.engine.kernels, values):
            # Drift: each policy's state mass flows along its own chain.
            drifts.append(sub.decision_rate * (np.einsum("uab,au->bu", K, arr) - arr))
            # Revision: per-state net flow between policies.
            rho = rate_matrices(self.protocol, vals.T, arr)
            revisions.append(net_flows(arr, rho))
        return drifts, revisions

    def field_arrays(self, mu: StatePolicyDist) -> list[np.ndarray]:
        drifts, revisions = self.component_arrays(mu)
        return [d + r for d, r in zip(drifts, revisions)]


def vector_field(game: GameSpec, policies, protocol: ProtocolSpec,
                 mu: StatePolicyDist,
                 value_convention: str = PAPER_LITERAL) -> VectorField:
    model = MeanFieldModel(game, policies, protocol, value_convention)
    return VectorField(tuple(model.field_arrays(mu)))


def vector_field_components(game: GameSpec, policies, protocol: ProtocolSpec,
                            mu: StatePolicyDist,
                            value_convention: str = PAPER_LITERAL):
    """(drift, revision) as VectorFields; drift sums to zero over states per
    policy, revision sums to zero over policies per state."""
    model = MeanFieldModel(game, policies, protocol, value_convention)
    drifts, revisions = model.component_arrays(mu)
    return VectorField(tuple(drifts)), VectorField(tuple(revisions))


def rest_residual(game: GameSpec, policies, protocol: ProtocolSpec,
                  mu: StatePolicyDist,
                  value_convention: str = PAPER_LITERAL) -> float:
    """Sup-norm of the field; a rest point reads (numerically) zero."""
    return vector_field(game, policies, protocol, mu, value_convention).inf_norm()


def _guarded_step(arrays: list[np.ndarray], masses: list[float]):
    """Clamp stray negatives and rescale each subpopulation to its mass.

    Returns (guard activations, largest correction applied). Entries below
    the rejection threshold abort the step.
    """
    activations = 0
    worst = 0.0
    for arr, m in zip(arrays, masses):
        low = float(arr.min())
        if low < GUARD_REJECT:
            raise StepRejected(f"entry {low:.3e} below {GUARD_REJECT:.1e}; reduce dt")
        if low < 0.0:
            activations += 1
            worst = max(worst, -low)
            np.maximum(arr, 0.0, out=arr)
        arr *= m / arr.sum()
    return activations, worst


def integrate(game: GameSpec, policies, protocol: ProtocolSpec,
              mu0: StatePolicyDist, t_end: float, dt: float = DEFAULT_DT,
              record_every: int = 1,
              value_convention: str = PAPER_LITERAL) -> Trajectory:
    """Classical fixed-step RK4 with a per-step projection guard.

    Snapshots are recorded every ``record_every`` steps plus the endpoint.
    The guard clamps entries in [-1e-12, 0) to zero and rescales each
    subpopulation to its mass; activations are counted in the metadata.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = MeanFieldModel(game, policies, protocol, value_convention)
    masses = [sub.mass for sub in game.subpops]
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        n_steps = int(np.ceil(t_end / dt))

    current = [a.copy() for a in mu0.per_sub]
    times = [0.0]
    snapshots = [StatePolicyDist(tuple(a.copy() for a in current))]
    guard_count = 0
    guard_worst = 0.0

    def f(arrays):
        return model.field_arrays(StatePolicyDist(tuple(arrays)))

    for step in range(1, n_steps + 1):
        k1 = f(current)
        k2 = f([a + 0.5 * dt * k for a, k in zip(current, k1)])
        k3 = f([a + 0.5 * dt * k for a, k in zip(current, k2)])
        k4 = f([a + dt * k for a, k in zip(current, k3)])
        current = [a + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
                   for a, a1, a2, a3, a4 in zip(current, k1, k2, k3, k4)]
        hits, worst = _guarded_step(current, masses)
        guard_count += hits
        guard_worst = max(guard_worst, worst)
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            snapshots.append(StatePolicyDist(tuple(a.copy() for a in current)))

    metadata = {
        "kind": "meanfield",
        "protocol": protocol.variant,
        "kappa": protocol.kappa,
        "dt": dt,
        "t_end": n_steps * dt,
        "record_every": record_every,
        "value_convention": value_convention,
        "guard_activations": guard_count,
        "max_guard_correction": guard_worst,
    }
    return Trajectory(np.array(times), tuple(snapshots), metadata)


@dataclass(frozen=True)
class GrowthRateTable:
    """Per (subpopulation, state, policy) growth rates under imitation.

    The imitative revision flow factors as ``mass * growth``; rates are zero
    at states carrying no mass.
    """

    per_sub: tuple[np.ndarray, ...]


def growth_rates(game: GameSpec, policies, protocol: ProtocolSpec,
                 mu: StatePolicyDist,
                 value_convention: str = PAPER_LITERAL) -> GrowthRateTable:
    """Growth-rate decomposition of the imitative revision flow.

    For pairwise proportional imitation the growth rate of a policy at a
    state is ``kappa * (payoff - state's mass-weighted average payoff)``.
    The factorization ``flow = mass * growth`` is verified to 1e-10.
    """
    if protocol.variant != IMITATIVE:
        raise WrongProtocol("growth rates are defined for the imitative protocol")
    engine = ValueEngine(game, policies, value_convention)
    values = engine.value_tables(mu)
    out = []
    for arr, vals in zip(mu.per_sub, values):
        totals = arr.sum(axis=1, keepdims=True)
        avg = np.divide((vals.T * arr).sum(axis=1, keepdims=True), totals,
                        out=np.zeros_like(totals), where=totals > 0)
        G = np.where(totals > 0, protocol.kappa * (vals.T - avg), 0.0)
        flows = net_flows(arr, rate_matrices(protocol, vals.T, arr))
        gap = float(np.abs(flows - arr * G).max())
        if gap > 1e-10:
            raise NumericalFailure(f"growth decomposition residual {gap:.3e}")
        out.append(G)
    return GrowthRateTable(tuple(out))


@dataclass(frozen=True)
class LyapunovSample:
    time: float
    value: float


def lyapunov_value(mu: StatePolicyDist, mu_star: StatePolicyDist,
                   winners, K: float) -> float:
    total = 0.0
    for arr, ref, w in zip(mu.per_sub, mu_star.per_sub, winners):
        diff = np.abs(arr - ref)
        total += diff[:, w].sum()
        total += K * (diff.sum() - diff[:, w].sum())
    return float(total)


def lyapunov_monitor(traj: Trajectory, mu_star: StatePolicyDist,
                     K: float = 2.0) -> list[LyapunovSample]:
    """Candidate contraction function along a trajectory near a strict rest point.

    ``mu_star`` must put each subpopulation's mass on a single policy; the
    off-equilibrium policy distances are weighted by ``K > 1``.
    """
    if not K > 1.0:
        raise ValueError("K must exceed 1")
    winners = [int(np.argmax(arr.sum(axis=0))) for arr in mu_star.per_sub]
    return [LyapunovSample(float(t), lyapunov_value(snap, mu_star, winners, K))
            for t, snap in zip(traj.times, traj.snapshots)]
