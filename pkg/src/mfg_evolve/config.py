"""JSON game-configuration loading, emission, and hashing.

A game configuration is a JSON document with top-level keys ``beta`` and
``subpops``. Each subpopulation carries ``name``, ``mass``,
``decision_rate``, ``revision_rate``, ``states``, ``actions``, ``feasible``
(state -> action list), ``kernel`` (state -> action -> state -> probability)
and ``reward`` (``{"type": "affine", ...}`` or ``{"type": "mac", ...}``).
Unknown keys are an error anywhere in the document. Affine reward tables are
keyed by names, with weight entries addressed as ``"<sub>.<state>.<action>"``;
omitted entries are zero.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .game import (AffineCongestion, GameSpec, MacSinr, SubpopSpec,
                   TransitionKernel)

_SUBPOP_KEYS = {"name", "mass", "decision_rate", "revision_rate", "states",
                "actions", "feasible", "kernel", "reward"}
_MAC_KEYS = {"type", "P_L", "P_H", "sigma2", "Cbar", "beta_price", "T_msg"}
_AFFINE_KEYS = {"type", "base", "weights"}


def _require_keys(obj: dict, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _name_list(value, where: str) -> tuple[str, ...]:
    if (not isinstance(value, list) or not value
            or any(not isinstance(v, str) for v in value)):
        raise ConfigError(f"{where}: expected a nonempty array of strings")
    if len(set(value)) != len(value):
        raise ConfigError(f"{where}: duplicate names")
    return tuple(value)


def _flat_slices(raw_subpops) -> dict:
    """Offsets of each subpopulation's (state, action) block in the
    concatenated distribution vector."""
    offsets, k = {}, 0
    for raw in raw_subpops:
        p, q = len(raw["states"]), len(raw["actions"])
        offsets[raw["name"]] = (k, tuple(raw["states"]), tuple(raw["actions"]))
        k += p * q
    return offsets, k


def _parse_reward(raw, sub_name, states, actions, offsets, dim):
    where = f"subpops[{sub_name}].reward"
    if not isinstance(raw, dict) or "type" not in raw:
        raise ConfigError(f"{where}: expected an object with a 'type' key")
    if raw["type"] == "mac":
        _require_keys(raw, _MAC_KEYS, _MAC_KEYS, where)
        for a in ("N", "L", "H"):
            if a not in actions:
                raise ConfigError(f"{where}: mac reward requires action {a!r}")
        return MacSinr(P_L=_number(raw["P_L"], where), P_H=_number(raw["P_H"], where),
                       sigma2=_number(raw["sigma2"], where),
                       Cbar=_number(raw["Cbar"], where),
                       beta_price=_number(raw["beta_price"], where),
                       T_msg=_number(raw["T_msg"], where))
    if raw["type"] != "affine":
        raise ConfigError(f"{where}: unknown reward type {raw['type']!r}")
    _require_keys(raw, _AFFINE_KEYS, {"type"}, where)
    p, q = len(states), len(actions)
    base = np.zeros((p, q))
    for state, row in (raw.get("base") or {}).items():
        if state not in states:
            raise ConfigError(f"{where}.base: unknown state {state!r}")
        for action, value in row.items():
            if action not in actions:
                raise ConfigError(f"{where}.base: unknown action {action!r}")
            base[states.index(state), actions.index(action)] = _number(
                value, f"{where}.base.{state}.{action}")
    weights = np.zeros((p, q, dim))
    for state, row in (raw.get("weights") or {}).items():
        if state not in states:
            raise ConfigError(f"{where}.weights: unknown state {state!r}")
        for action, cells in row.items():
            if action not in actions:
                raise ConfigError(f"{where}.weights: unknown action {action!r}")
            for key, value in cells.items():
                parts = key.split(".")
                if len(parts) != 3 or parts[0] not in offsets:
                    raise ConfigError(f"{where}.weights: bad cell key {key!r}")
                off, o_states, o_actions = offsets[parts[0]]
                if parts[1] not in o_states or parts[2] not in o_actions:
                    raise ConfigError(f"{where}.weights: bad cell key {key!r}")
                flat = off + o_states.index(parts[1]) * len(o_actions) \
                    + o_actions.index(parts[2])
                weights[states.index(state), actions.index(action), flat] = \
                    _number(value, f"{where}.weights.{key}")
    return AffineCongestion(base=base, weights=weights)


def _parse_subpop(raw, offsets, dim) -> SubpopSpec:
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("subpop: missing or invalid 'name'")
    where = f"subpops[{name}]"
    _require_keys(raw, _SUBPOP_KEYS, _SUBPOP_KEYS, where)
    states = _name_list(raw["states"], f"{where}.states")
    actions = _name_list(raw["actions"], f"{where}.actions")

    feasible = []
    feas_raw = raw["feasible"]
    if not isinstance(feas_raw, dict) or set(feas_raw) != set(states):
        raise ConfigError(f"{where}.feasible: must map every state to an action list")
    for state in states:
        acts = feas_raw[state]
        if not isinstance(acts, list) or not acts:
            raise ConfigError(f"{where}.feasible.{state}: expected a nonempty list")
        idx = []
        for a in acts:
            if a not in actions:
                raise ConfigError(f"{where}.feasible.{state}: unknown action {a!r}")
            idx.append(actions.index(a))
        feasible.append(tuple(sorted(set(idx))))

    p, q = len(states), len(actions)
    probs = np.zeros((p, q, p))
    probs[:, :, :] = 0.0
    for s in range(p):
        for a in range(q):
            probs[s, a, s] = 1.0          # placeholder for unspecified rows
    kern_raw = raw["kernel"]
    if not isinstance(kern_raw, dict):
        raise ConfigError(f"{where}.kernel: expected an object")
    for state, by_action in kern_raw.items():
        if state not in states:
            raise ConfigError(f"{where}.kernel: unknown state {state!r}")
        for action, row in by_action.items():
            if action not in actions:
                raise ConfigError(f"{where}.kernel.{state}: unknown action {action!r}")
            s, a = states.index(state), actions.index(action)
            probs[s, a] = 0.0
            for target, value in row.items():
                if target not in states:
                    raise ConfigError(
                        f"{where}.kernel.{state}.{action}: unknown state {target!r}")
                probs[s, a, states.index(target)] = _number(
                    value, f"{where}.kernel.{state}.{action}.{target}")

    return SubpopSpec(
        name=name,
        mass=_number(raw["mass"], f"{where}.mass"),
        decision_rate=_number(raw["decision_rate"], f"{where}.decision_rate"),
        revision_rate=_number(raw["revision_rate"], f"{where}.revision_rate"),
        states=states,
        actions=actions,
        feasible=tuple(feasible),
        kernel=TransitionKernel(probs),
        reward=_parse_reward(raw["reward"], name, states, actions, offsets, dim),
    )


def game_from_config(cfg: dict) -> GameSpec:
    _require_keys(cfg, {"beta", "subpops"}, {"beta", "subpops"}, "config")
    raw_subpops = cfg["subpops"]
    if not isinstance(raw_subpops, list) or not raw_subpops:
        raise ConfigError("config.subpops: expected a nonempty array")
    for raw in raw_subpops:
        if not isinstance(raw, dict) or "name" not in raw:
            raise ConfigError("config.subpops: each entry needs a 'name'")
        for key in ("states", "actions"):
            if key not in raw:
                raise ConfigError(f"subpops[{raw.get('name')}]: missing {key!r}")
    names = [raw["name"] for raw in raw_subpops]
    if len(set(names)) != len(names):
        raise ConfigError("config.subpops: duplicate subpopulation names")
    offsets, dim = _flat_slices(raw_subpops)
    subpops = tuple(_parse_subpop(raw, offsets, dim) for raw in raw_subpops)
    return GameSpec(beta=_number(cfg["beta"], "config.beta"), subpops=subpops)


def load_game(path) -> GameSpec:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read game config {path}: {exc}") from exc
    return game_from_config(cfg)


def game_to_config(game: GameSpec) -> dict:
    """Emit the canonical JSON form; loading it reproduces the game."""
    subpops = []
    for sub in game.subpops:
        kernel = {}
        for s, state in enumerate(sub.states):
            by_action = {}
            for a in sub.feasible[s]:
                row = {sub.states[t]: float(sub.kernel.probs[s, a, t])
                       for t in range(sub.n_states) if sub.kernel.probs[s, a, t] != 0.0}
                by_action[sub.actions[a]] = row
            kernel[state] = by_action
        reward = sub.reward
        if isinstance(reward, MacSinr):
            reward_cfg = {"type": "mac", "P_L": reward.P_L, "P_H": reward.P_H,
                          "sigma2": reward.sigma2, "Cbar": reward.Cbar,
                          "beta_price": reward.beta_price, "T_msg": reward.T_msg}
        else:
            flat_names = []
            for other in game.subpops:
                for state in other.states:
                    for action in other.actions:
                        flat_names.append(f"{other.name}.{state}.{action}")
            base_cfg, weights_cfg = {}, {}
            for s, state in enumerate(sub.states):
                base_row = {sub.actions[a]: float(reward.base[s, a])
                            for a in sub.feasible[s] if reward.base[s, a] != 0.0}
                if base_row:
                    base_cfg[state] = base_row
                w_row = {}
                for a in sub.feasible[s]:
                    cells = {flat_names[j]: float(v)
                             for j, v in enumerate(reward.weights[s, a]) if v != 0.0}
                    if cells:
                        w_row[sub.actions[a]] = cells
                if w_row:
                    weights_cfg[state] = w_row
            reward_cfg = {"type": "affine", "base": base_cfg, "weights": weights_cfg}
        subpops.append({
            "name": sub.name,
            "mass": sub.mass,
            "decision_rate": sub.decision_rate,
            "revision_rate": sub.revision_rate,
            "states": list(sub.states),
            "actions": list(sub.actions),
            "feasible": {state: [sub.actions[a] for a in sub.feasible[s]]
                         for s, state in enumerate(sub.states)},
            "kernel": kernel,
            "reward": reward_cfg,
        })
    return {"beta": game.beta, "subpops": subpops}


def canonical_dump(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_dump(cfg).encode()).hexdigest()


def game_hash(game: GameSpec) -> str:
    return config_hash(game_to_config(game))
