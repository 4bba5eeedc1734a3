"""Evolutionary dynamics for finite-state dynamic population games.

Players occupy discrete states, act on Poisson clocks, collect rewards that
depend on the population's state-action distribution, and revise their
deterministic policies through imitation, excess-payoff, or pairwise
comparison protocols. The package provides the mean-field ODE of the
resulting dynamics, an exact finite-population simulator, discounted payoff
evaluation, stationary-equilibrium checking and search, and diagnostics.
"""

from .errors import (AssumptionViolated, ConfigError, InfeasibleAction,
                     InvalidParams, MfgEvolveError, NotIrreducible, NotMsne,
                     NumericalFailure, PolicyExplosion, RateBoundViolated,
                     StepRejected, WrongProtocol)
from .game import (AffineCongestion, DeterministicPolicy, GameSpec, MacSinr,
                   StateActionDist, StatePolicyDist, SubpopSpec,
                   TransitionKernel, enumerate_policies, evaluate_reward,
                   game_policies, project_state_action, validate_game)
from .payoff import (PayoffTable, StationaryTable, ValueEngine,
                     check_irreducibility, discounted_values, payoff_table,
                     policy_kernel, stationary_distribution, stationary_table)
from .protocols import (BNN, IMITATIVE, SMITH, ProtocolSpec, check_rate_bound,
                        excess_payoff, net_flow, positive_correlation_probe,
                        switch_rates)
from .meanfield import (growth_rates, integrate, lyapunov_monitor,
                        rest_residual, vector_field)
from .trajectory import Trajectory, sup_l1_gap, write_trajectory_csv
from .population import (AgentState, SimConfig, convergence_experiment,
                         init_population, simulate)
from .equilibria import (MsneVerdict, SolverResult, assemble_mu, check_msne,
                         check_strict_msne, pure_candidates, solve_msne)
from .mac import MacParams, build_mac, default_params

__all__ = [name for name in dir() if not name.startswith("_")]
