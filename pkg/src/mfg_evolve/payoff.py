"""Per-policy Markov chains and exact discounted policy evaluation.

The payoff vector of a state collects, for every deterministic policy, the
discounted infinite-horizon value of following that policy forever from that
state while the population distribution stays frozen. Values come from dense
linear solves; the default convention collects the first reward at the
post-transition state (``V = beta*P*(I - beta*P)^-1 r``), with the
pre-transition alternative (``V = beta*(I - beta*P)^-1 r``) behind the
``value_convention`` switch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import NotIrreducible, NumericalFailure
from .game import (GameSpec, StatePolicyDist, SubpopSpec, project_state_action,
                   reward_table_arrays)

PAPER_LITERAL = "paper_literal"
PRE_TRANSITION = "pre_transition"
CONVENTIONS = (PAPER_LITERAL, PRE_TRANSITION)

SOLVE_TOL = 1e-9
STATIONARY_TOL = 1e-10


def policy_kernel(sub: SubpopSpec, policy) -> np.ndarray:
    """(p, p) state chain induced by a deterministic policy.

    ``P[s_from, s_to]`` is the transition probability when the policy's
    action for ``s_from`` is applied.
    """
    acts = np.asarray(policy.choice, dtype=np.int64)
    return sub.kernel.probs[np.arange(sub.n_states), acts, :].copy()


def policy_kernels(sub: SubpopSpec, pset) -> np.ndarray:
    """(n, p, p) stacked policy kernels in canonical policy order."""
    idx = pset.action_index
    p = sub.n_states
    return sub.kernel.probs[np.arange(p)[None, :], idx, :].copy()


def discounted_values(P: np.ndarray, rewards: np.ndarray, beta: float,
                      value_convention: str = PAPER_LITERAL) -> np.ndarray:
    """Per-state discounted value of one policy at frozen per-state rewards.

    Solves ``(I - beta*P) y = rewards`` by a dense direct solve, then applies
    the convention factor. Raises NumericalFailure if the solve residual
    exceeds tolerance (cannot happen for well-scaled stochastic P, beta < 1).
    """
    P = np.asarray(P, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    A = np.eye(P.shape[0]) - beta * P
    y = np.linalg.solve(A, rewards)
    resid = float(np.abs(A @ y - rewards).max())
    if resid > SOLVE_TOL:
        raise NumericalFailure(f"value solve residual {resid:.3e}")
    if value_convention == PAPER_LITERAL:
        return beta * (P @ y)
    if value_convention == PRE_TRANSITION:
        return beta * y
    raise ValueError(f"unknown value convention {value_convention!r}")


@dataclass(frozen=True)
class PayoffTable:
    """Discounted values of every policy from every state, per subpopulation.

    ``values[c][u, s]`` is the value of policy u started in state s. The
    per-state payoff vector over policies is the column ``values[c][:, s]``.
    """

    values: tuple[np.ndarray, ...]

    def state_vector(self, c: int, s: int) -> np.ndarray:
        return self.values[c][:, s]


# The per-policy value table and the per-state payoff vectors are two views
# of the same array; ValueTable is kept as an alias for call sites that read
# values policy-major.
ValueTable = PayoffTable


def expected_value(table: PayoffTable, c: int, u: int, eta0: np.ndarray) -> float:
    """Value of policy ``u`` under an initial state distribution ``eta0``."""
    return float(np.asarray(eta0) @ table.values[c][u])


class ValueEngine:
    """Precomputed per-policy value operators for one game.

    The state kernels do not depend on the population distribution, so the
    map from per-state rewards to values, ``M_u = beta*P_u*(I - beta*P_u)^-1``
    (or ``beta*(I - beta*P_u)^-1``), is factored once per policy and reused
    for every distribution. Residuals are checked at factorization time.
    """

    def __init__(self, game: GameSpec, policies,
                 value_convention: str = PAPER_LITERAL):
        if value_convention not in CONVENTIONS:
            raise ValueError(f"unknown value convention {value_convention!r}")
        self.game = game
        self.policies = policies
        self.value_convention = value_convention
        self.kernels = []
        self.operators = []
        self._gather_rows = []
        for sub, pset in zip(game.subpops, policies):
            K = policy_kernels(sub, pset)                      # (n, p, p)
            p = sub.n_states
            A = np.eye(p)[None, :, :] - game.beta * K
            X = np.linalg.solve(A, np.broadcast_to(np.eye(p), A.shape).copy())
            resid = float(np.abs(A @ X - np.eye(p)).max())
            if resid > SOLVE_TOL:
                raise NumericalFailure(f"{sub.name}: value operator residual {resid:.3e}")
            M = game.beta * (K @ X if value_convention == PAPER_LITERAL else X)
            self.kernels.append(K)
            self.operators.append(M)
            self._gather_rows.append(np.arange(p)[None, :])

    def value_tables_sa(self, sa_arrays) -> list[np.ndarray]:
        """Per-subpopulation (n, p) value arrays at given state-action masses."""
        out = []
        for c, (pset, M, rows) in enumerate(zip(self.policies, self.operators,
                                                self._gather_rows)):
            rewards = reward_table_arrays(self.game, c, sa_arrays)    # (p, q)
            r_u = rewards[rows, pset.action_index]                    # (n, p)
            out.append(np.einsum("ust,ut->us", M, r_u))
        return out

    def value_tables(self, mu: StatePolicyDist) -> list[np.ndarray]:
        """Per-subpopulation (n, p) value arrays at the projected distribution."""
        return self.value_tables_sa(project_state_action(mu, self.policies).per_sub)


def payoff_table(game: GameSpec, policies, mu: StatePolicyDist,
                 value_convention: str = PAPER_LITERAL) -> PayoffTable:
    """Discounted values of every policy from every state at frozen ``mu``."""
    engine = ValueEngine(game, policies, value_convention)
    return PayoffTable(tuple(engine.value_tables(mu)))


def check_irreducibility(P: np.ndarray) -> bool:
    """True iff the digraph of strictly positive entries is strongly connected."""
    P = np.asarray(P)
    if P.shape[0] == 1:
        return True
    graph = sp.csr_matrix((P > 0).astype(np.int8))
    n_comp, _ = connected_components(graph, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary distribution of an irreducible row-stochastic chain.

    Solves the rank-deficient balance system with the normalization row
    appended (least squares), then renormalizes exactly.
    """
    P = np.asarray(P, dtype=float)
    if not check_irreducibility(P):
        raise NotIrreducible("policy chain is not irreducible")
    p = P.shape[0]
    A = np.vstack([P.T - np.eye(p), np.ones((1, p))])
    b = np.zeros(p + 1)
    b[-1] = 1.0
    eta, *_ = np.linalg.lstsq(A, b, rcond=None)
    eta = np.maximum(eta, 0.0)
    eta /= eta.sum()
    resid = float(np.abs(eta @ P - eta).max())
    if resid > STATIONARY_TOL:
        raise NumericalFailure(f"stationary solve residual {resid:.3e}")
    return eta


@dataclass(frozen=True)
class StationaryTable:
    """Stationary state distribution per (subpopulation, policy); (n, p) arrays."""

    per_sub: tuple[np.ndarray, ...]


def stationary_table(game: GameSpec, policies) -> StationaryTable:
    out = []
    for sub, pset in zip(game.subpops, policies):
        rows = [stationary_distribution(policy_kernel(sub, u)) for u in pset]
        out.append(np.array(rows))
    return StationaryTable(tuple(out))
