"""Time-stamped distribution sequences and their CSV/JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, StatePolicyDist


@dataclass(frozen=True)
class Trajectory:
    """Strictly increasing times with one distribution snapshot each."""

    times: np.ndarray
    snapshots: tuple[StatePolicyDist, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", t)

    def __len__(self) -> int:
        return len(self.snapshots)

    def policy_mass(self, c: int) -> np.ndarray:
        """(T, n) total mass per policy of subpopulation ``c`` over time."""
        return np.array([snap.policy_marginal(c) for snap in self.snapshots])

    def final(self) -> StatePolicyDist:
        return self.snapshots[-1]


def sup_l1_gap(a: Trajectory, b: Trajectory) -> float:
    """Largest L1 distance between two trajectories on a shared time grid."""
    if len(a) != len(b) or np.abs(a.times - b.times).max() > 1e-9:
        raise ValueError("trajectories are on different time grids")
    return max(x.l1_distance(y) for x, y in zip(a.snapshots, b.snapshots))


def column_names(game: GameSpec, policies) -> list[str]:
    """Canonical CSV columns ``<sub>.<state>.<policyIndex>`` (1-based index)."""
    names = []
    for sub, pset in zip(game.subpops, policies):
        for state in sub.states:
            for u in range(len(pset)):
                names.append(f"{sub.name}.{state}.{u + 1}")
    return names


def write_trajectory_csv(traj: Trajectory, game: GameSpec, policies, path) -> None:
    """One row per snapshot, floats at 17 significant digits."""
    header = ",".join(["t"] + column_names(game, policies))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, snap in zip(traj.times, traj.snapshots):
            row = [f"{t:.17g}"] + [f"{v:.17g}" for v in snap.flat()]
            fh.write(",".join(row) + "\n")


def write_metadata(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        json.dump(traj.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dist_to_jsonable(mu: StatePolicyDist, game: GameSpec) -> dict:
    """Dense JSON form: subpopulation name -> (states x policies) rows."""
    return {sub.name: arr.tolist() for sub, arr in zip(game.subpops, mu.per_sub)}


def dist_from_jsonable(data: dict, game: GameSpec) -> StatePolicyDist:
    arrays = []
    for sub in game.subpops:
        if sub.name not in data:
            raise ValueError(f"distribution file misses subpopulation {sub.name!r}")
        arrays.append(np.asarray(data[sub.name], dtype=float))
    return StatePolicyDist(tuple(arrays))
