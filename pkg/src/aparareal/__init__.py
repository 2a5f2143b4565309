"""Synchronous and asynchronous parareal for European call pricing.

The Black-Scholes problem is mapped to the heat equation on a truncated
log-price interval, discretised with centred finite differences and
integrated by backward Euler at both the coarse and the fine level.
"""

from .asynchronous import (AsyncRunStats, ConvergenceDetector, DetectionParams,
                           InterfaceBuffer, async_solve, detect_convergence, worker_update)
from .fd import (SpatialGrid, StateVector, TridiagonalSystem, backward_euler_step, build_grid,
                 initial_state, interpolate_at, propagate, solve_tridiagonal)
from .pricing import (MarketOption, TransformedProblem, boundary_values, derive_transform,
                      exact_price, initial_condition, recover_price, std_normal_cdf)
from .schedule import (Schedule, admissible, check_schedule, random_schedule,
                       simulate_schedule, synchronous_schedule)
from .sync import (PararealConfig, PararealResult, TimeDecomposition, coarse_G, fine_F,
                   initialize_coarse, make_config, parareal_solve, residual,
                   sequential_reference)

__version__ = "0.1.0"
