"""Built-in medium-access game: four battery states, three transmit powers.

Terminals share a wireless channel. Battery levels order F > AF > AE > E;
transmitting drains one level with probability proportional to the power
used plus a fixed per-decision drain, an empty battery can only recharge,
and the reward is the expected SINR minus a linear power price.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParams
from .game import GameSpec, MacSinr, SubpopSpec, TransitionKernel

STATES = ("E", "AE", "AF", "F")
ACTIONS = ("N", "L", "H")
SUBPOP_NAME = "terminals"


@dataclass(frozen=True)
class MacParams:
    """Parameters of the built-in medium-access game."""

    P_L: float           # low transmit power
    P_H: float           # high transmit power, > P_L
    sigma2: float        # noise power
    Cbar: float          # channel/load constant in the interference term
    beta_price: float    # linear power price
    alpha: float         # drain probability per unit transmit power
    gamma: float         # fixed per-decision drain
    p_F: float           # recharge probability from empty
    T_msg: float         # message duration
    Rd: float            # decision clock rate
    Rr: float            # revision clock rate
    beta: float          # discount factor
    mass: float = 1.0    # single subpopulation of unit mass

    def validate(self) -> None:
        problems = []
        if not 0.0 < self.P_L < self.P_H:
            problems.append("powers must satisfy 0 < P_L < P_H")
        if not self.sigma2 > 0:
            problems.append("sigma2 must be positive")
        if not self.Cbar > 0:
            problems.append("Cbar must be positive")
        if self.beta_price < 0:
            problems.append("beta_price must be nonnegative")
        if not self.alpha > 0:
            problems.append("alpha must be positive")
        if not self.gamma > 0:
            problems.append("gamma must be positive")
        if self.alpha * self.P_H + self.gamma > 1.0:
            problems.append("alpha*P_H + gamma must not exceed 1")
        if not 0.0 < self.p_F <= 1.0:
            problems.append("p_F must lie in (0, 1]")
        if not self.T_msg > 0:
            problems.append("T_msg must be positive")
        if not self.Rd > 0 or not self.Rr > 0:
            problems.append("clock rates must be positive")
        if not 0.0 < self.beta < 1.0:
            problems.append("beta must lie in (0, 1)")
        if self.mass != 1.0:
            problems.append("mass must be 1 (single subpopulation)")
        if problems:
            raise InvalidParams("; ".join(problems))


def build_mac(params: MacParams) -> GameSpec:
    """Assemble the game. Policy enumeration yields four policies; in
    canonical order they choose (AF, F) = (L,L), (L,H), (H,L), (H,H)."""
    params.validate()
    p, q = len(STATES), len(ACTIONS)
    probs = np.zeros((p, q, p))
    # Placeholder self-loops for infeasible (state, action) rows; never read.
    for s in range(p):
        for a in range(q):
            probs[s, a, s] = 1.0
    # Empty battery: recharge to full with probability p_F, else stay.
    probs[0, 0] = 0.0
    probs[0, 0, 3] = params.p_F
    probs[0, 0, 0] = 1.0 - params.p_F
    # Battery states drain one level when transmitting.
    for s, lower in ((1, 0), (2, 1), (3, 2)):
        for a, power in ((1, params.P_L), (2, params.P_H)):
            drain = params.alpha * power + params.gamma
            probs[s, a] = 0.0
            probs[s, a, lower] = drain
            probs[s, a, s] = 1.0 - drain
    sub = SubpopSpec(
        name=SUBPOP_NAME,
        mass=params.mass,
        decision_rate=params.Rd,
        revision_rate=params.Rr,
        states=STATES,
        actions=ACTIONS,
        feasible=((0,), (1,), (1, 2), (1, 2)),
        kernel=TransitionKernel(probs),
        reward=MacSinr(P_L=params.P_L, P_H=params.P_H, sigma2=params.sigma2,
                       Cbar=params.Cbar, beta_price=params.beta_price,
                       T_msg=params.T_msg),
    )
    return GameSpec(beta=params.beta, subpops=(sub,))


def default_params() -> MacParams:
    """The certified default parameter set, stored as package data.

    The values were selected by a documented grid search
    (scripts/certify_mac_defaults.py) and certified so that putting all mass
    on the first canonical policy at its stationary state distribution is a
    strict equilibrium; the certification log ships with the repository.
    """
    ref = importlib.resources.files("mfg_evolve").joinpath("data/mac_defaults.json")
    data = json.loads(ref.read_text())
    return MacParams(**data)


def params_to_jsonable(params: MacParams) -> dict:
    return asdict(params)
