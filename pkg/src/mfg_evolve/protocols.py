"""Canonical revision-protocol instances and their feasibility diagnostics.

Three families are shipped, one textbook representative each:

* ``imitative`` -- pairwise proportional imitation: the conditional rate of
  copying a policy is the positive part of the payoff advantage, weighted by
  the share of the local population already using it.
* ``bnn`` -- separable excess-payoff rates: switch toward policies whose
  payoff exceeds the local population average.
* ``smith`` -- pairwise comparison: switch at the positive part of the
  payoff advantage, regardless of who uses what.

All rates act per state: the payoff vector compares policies started from
the revising player's current state, and the policy-mass vector is the
state's own slice of the distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import DEFAULT_POLICY_CAP, GameSpec, enumerate_policies, reward_bound

IMITATIVE = "imitative"
BNN = "bnn"
SMITH = "smith"
VARIANTS = (IMITATIVE, BNN, SMITH)


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol family plus a global rate scale ``kappa > 0``."""

    variant: str
    kappa: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown protocol variant {self.variant!r}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


def excess_payoff(F: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Payoffs relative to the sigma-weighted average; zeros when sigma == 0."""
    F = np.asarray(F, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    total = sigma.sum()
    if total <= 0:
        return np.zeros_like(F)
    return F - (F @ sigma) / total


def rate_matrices(protocol: ProtocolSpec, F_rows: np.ndarray,
                  sigma_rows: np.ndarray) -> np.ndarray:
    """Switch-rate matrices for a batch of states.

    ``F_rows`` and ``sigma_rows`` are (p, n): one payoff vector and one
    policy-mass vector per state. Returns (p, n, n) nonnegative rates with
    zero diagonals; entry [s, u, v] is the rate of switching u -> v in
    state s.
    """
    F_rows = np.asarray(F_rows, dtype=float)
    sigma_rows = np.asarray(sigma_rows, dtype=float)
    p, n = F_rows.shape
    k = protocol.kappa
    if protocol.variant in (SMITH, IMITATIVE):
        advantage = np.maximum(F_rows[:, None, :] - F_rows[:, :, None], 0.0)
        if protocol.variant == SMITH:
            rho = k * advantage
        else:
            total = sigma_rows.sum(axis=1, keepdims=True)
            share = np.divide(sigma_rows, total,
                              out=np.zeros_like(sigma_rows), where=total > 0)
            rho = k * advantage * share[:, None, :]
    else:
        total = sigma_rows.sum(axis=1, keepdims=True)
        avg = np.divide((F_rows * sigma_rows).sum(axis=1, keepdims=True), total,
                        out=np.zeros_like(total), where=total > 0)
        fhat = np.where(total > 0, F_rows - avg, 0.0)
        rho = np.broadcast_to(k * np.maximum(fhat, 0.0)[:, None, :], (p, n, n)).copy()
    rho[:, np.arange(n), np.arange(n)] = 0.0
    return rho


def switch_rates(protocol: ProtocolSpec, F: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """(n, n) switch-rate matrix for one state; diagonal is zero."""
    return rate_matrices(protocol, np.asarray(F, dtype=float)[None, :],
                         np.asarray(sigma, dtype=float)[None, :])[0]


def net_flows(sigma_rows: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """(p, n) net revision flow per state: inflow minus outflow."""
    inflow = np.einsum("su,suv->sv", sigma_rows, rho)
    outflow = sigma_rows * rho.sum(axis=2)
    return inflow - outflow


def net_flow(protocol: ProtocolSpec, F: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Net revision flow for one state; components sum to zero exactly."""
    F = np.asarray(F, dtype=float)[None, :]
    sigma = np.asarray(sigma, dtype=float)[None, :]
    return net_flows(sigma, rate_matrices(protocol, F, sigma))[0]


@dataclass(frozen=True)
class SubpopBound:
    name: str
    n_policies: int
    payoff_bound: float
    rate_sum_bound: float
    revision_rate: float
    min_revision_rate: float

    @property
    def passed(self) -> bool:
        return self.rate_sum_bound <= 1.0


@dataclass(frozen=True)
class BoundReport:
    per_sub: tuple[SubpopBound, ...]
    detail: str

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.per_sub)


def check_rate_bound(game: GameSpec, protocol: ProtocolSpec,
                     policy_cap: int = DEFAULT_POLICY_CAP) -> BoundReport:
    """Conservative check that total switch probabilities stay below one.

    Payoff magnitudes are bounded by ``B = beta*r_max/(1-beta)`` with
    ``r_max`` the interval bound of the reward spec; every pairwise rate is
    then at most ``kappa*2B`` and at most ``n-1`` alternatives aggregate.
    A pass guarantees well-defined switch probabilities; a failure is a
    warning reporting the smallest revision rate that would pass.
    """
    rows = []
    for c, sub in enumerate(game.subpops):
        n = len(enumerate_policies(sub, policy_cap))
        B = game.beta * reward_bound(game, c) / (1.0 - game.beta)
        worst = (n - 1) * 2.0 * protocol.kappa * B
        rows.append(SubpopBound(
            name=sub.name, n_policies=n, payoff_bound=B,
            rate_sum_bound=worst / sub.revision_rate,
            revision_rate=sub.revision_rate, min_revision_rate=worst))
    report = BoundReport(tuple(rows), "")
    if report.passed:
        detail = "conservative rate bound holds for every subpopulation"
    else:
        bad = [f"{b.name}: bound {b.rate_sum_bound:.3g} > 1, "
               f"needs revision_rate >= {b.min_revision_rate:.3g}"
               for b in rows if not b.passed]
        detail = "; ".join(bad)
    return BoundReport(tuple(rows), detail)


@dataclass(frozen=True)
class ProbeReport:
    variant: str
    n: int
    samples: int
    violations: int
    min_inner: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


FLOW_ACTIVE_TOL = 1e-9
INNER_POSITIVE_TOL = 1e-12


def positive_correlation_probe(protocol: ProtocolSpec, n: int, samples: int,
                               seed: int) -> ProbeReport:
    """Sampled check that nonzero net flows point up the payoff gradient.

    Draws (sigma, F) pairs with sigma uniform on the simplex and F standard
    normal; a violation is a sample with ``||V||_inf > 1e-9`` but
    ``V @ F <= 1e-12``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    violations = 0
    min_inner = math.inf
    for _ in range(samples):
        sigma = rng.dirichlet(np.ones(n))
        F = rng.standard_normal(n)
        V = net_flow(protocol, F, sigma)
        if np.abs(V).max() > FLOW_ACTIVE_TOL:
            inner = float(V @ F)
            min_inner = min(min_inner, inner)
            if inner <= INNER_POSITIVE_TOL:
                violations += 1
    return ProbeReport(protocol.variant, n, samples, violations,
                       min_inner if min_inner < math.inf else float("nan"))
