"""Synchronous parareal iteration and the sequential fine reference.

Both propagators are backward Euler. The coarse one takes a single step
across a whole time slice, the fine one takes ``dT/dt`` steps.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fd import SpatialGrid, StateVector, build_grid, initial_state, interpolate_at, propagate
from .pricing import MarketOption, TransformedProblem, derive_transform, recover_price

__all__ = [
    "TimeDecomposition",
    "PararealConfig",
    "PararealResult",
    "make_config",
    "coarse_G",
    "fine_F",
    "correct",
    "initialize_coarse",
    "parareal_solve",
    "residual",
    "sequential_reference",
    "price_from_state",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


def integer_ratio(num: float, den: float, what: str = "dT/dt") -> int:
    """``num / den`` as an exact positive integer; raises if it is not one."""
    ratio = num / den
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{what} = {ratio!r} is not a positive integer")
    return int(k)


@dataclass(frozen=True)
class TimeDecomposition:
    n_slices: int
    delta_T_fin: float
    dt_fin: float
    delta_tau: float
    dtau_fine: float
    fine_steps_per_slice: int

    @classmethod
    def from_financial(cls, n_slices: int, delta_T: float, dt: float, sigma: float):
        if n_slices < 1:
            raise ValueError(f"need at least one slice, got {n_slices}")
        steps = integer_ratio(delta_T, dt)
        s2 = sigma * sigma
        return cls(int(n_slices), delta_T, dt, 0.5 * s2 * delta_T, 0.5 * s2 * dt, steps)

    @property
    def maturity(self) -> float:
        return self.n_slices * self.delta_T_fin

    def slice_time(self, n: int) -> float:
        return n * self.delta_tau

    def slice_index(self, tau: float) -> int:
        n = round(tau / self.delta_tau)
        if n < 0 or n > self.n_slices or abs(tau - n * self.delta_tau) > 1e-9 * self.delta_tau:
            raise ValueError(f"tau={tau!r} is not a slice boundary")
        return int(n)


@dataclass(frozen=True)
class PararealConfig:
    decomposition: TimeDecomposition
    grid: SpatialGrid
    problem: TransformedProblem
    option: MarketOption
    tol: float = DEFAULT_TOL
    max_iter: int | None = None
    # frozen (left, right) Dirichlet values instead of the option's boundary data
    boundary: tuple | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter!r}")
        if abs(self.decomposition.n_slices * self.decomposition.delta_tau
               - self.problem.tau_max) > 1e-12 * max(1.0, self.problem.tau_max):
            raise ValueError("slices do not tile [0, tau_max]")

    @property
    def n_slices(self) -> int:
        return self.decomposition.n_slices

    @property
    def iteration_cap(self) -> int:
        # parareal is exact after N iterations, more can never help
        return self.n_slices if self.max_iter is None else self.max_iter


def make_config(*, spot: float, strike: float, delta_T: float, n_slices: int, m: int,
                dt: float = 0.001, sigma: float = 0.2, rate: float = 0.05,
                tol: float = DEFAULT_TOL, max_iter: int | None = None) -> PararealConfig:
    """Configuration for maturity ``n_slices * delta_T`` financial years."""
    decomposition = TimeDecomposition.from_financial(n_slices, delta_T, dt, sigma)
    option = MarketOption(sigma, rate, spot, strike, decomposition.maturity)
    problem = derive_transform(option)
    return PararealConfig(decomposition, build_grid(problem, m), problem, option,
                          tol=tol, max_iter=max_iter)


@dataclass
class PararealResult:
    lambdas: list
    iterations: int
    residual_trace: list
    price: float
    converged: bool
    tol: float
    history: list | None = field(default=None, repr=False)


def _slice_start(lam: StateVector, cfg: PararealConfig) -> tuple[int, StateVector]:
    n = cfg.decomposition.slice_index(lam.tau)
    if n >= cfg.n_slices:
        raise ValueError(f"no slice starts at tau={lam.tau!r} (tau_max reached)")
    start = cfg.decomposition.slice_time(n)
    if lam.tau != start:
        lam = StateVector(start, lam.values)
    return n, lam


def _stamp(s: StateVector, n: int, cfg: PararealConfig) -> StateVector:
    return StateVector(cfg.decomposition.slice_time(n), s.values)


def coarse_G(lam: StateVector, cfg: PararealConfig) -> StateVector:
    """One backward-Euler step across the slice starting at ``lam.tau``."""
    n, lam = _slice_start(lam, cfg)
    out = propagate(lam, 1, cfg.decomposition.delta_tau, cfg.grid, cfg.problem,
                    boundary=cfg.boundary)
    return _stamp(out, n + 1, cfg)


def fine_F(lam: StateVector, cfg: PararealConfig) -> StateVector:
    """``dT/dt`` backward-Euler steps across the slice starting at ``lam.tau``."""
    n, lam = _slice_start(lam, cfg)
    d = cfg.decomposition
    out = propagate(lam, d.fine_steps_per_slice, d.dtau_fine, cfg.grid, cfg.problem,
                    boundary=cfg.boundary)
    return _stamp(out, n + 1, cfg)


def correct(g_new: StateVector, f_old: StateVector, g_old: StateVector) -> StateVector:
    """Predictor-corrector combination ``G(new) + F(old) - G(old)``."""
    return StateVector(g_new.tau, g_new.values + f_old.values - g_old.values)


def initialize_coarse(u0: StateVector, cfg: PararealConfig) -> list:
    if u0.tau != 0.0:
        raise ValueError("initial state must sit at tau = 0")
    lambdas = [u0]
    for _ in range(cfg.n_slices):
        lambdas.append(coarse_G(lambdas[-1], cfg))
    return lambdas


def residual(prev, new) -> float:
    """Largest relative sup-norm change of the interfaces ``1..N``."""
    if len(prev) != len(new):
        raise ValueError(f"interface counts differ: {len(prev)} vs {len(new)}")
    worst = 0.0
    for a, b in zip(prev[1:], new[1:]):
        va = a.values if isinstance(a, StateVector) else np.asarray(a)
        vb = b.values if isinstance(b, StateVector) else np.asarray(b)
        if va.shape != vb.shape:
            raise ValueError(f"state shapes differ: {va.shape} vs {vb.shape}")
        worst = max(worst, local_residual(va, vb))
    return worst


def local_residual(old: np.ndarray, new: np.ndarray) -> float:
    if new.size == 0:
        return 0.0
    return float(np.max(np.abs(new - old)) / max(float(np.max(np.abs(new))), 1.0))


def price_from_state(s: StateVector, cfg: PararealConfig) -> float:
    """Option price read from the final interface by linear interpolation at ``x0``."""
    tp = cfg.problem
    u = interpolate_at(s, cfg.grid, tp.x0, tp, boundary=cfg.boundary)
    return recover_price(u, tp, cfg.option.strike)


def sequential_reference(cfg: PararealConfig) -> tuple[list, float]:
    """Serial fine solve over all slices; returns interfaces and price."""
    lambdas = [initial_state(cfg.grid, cfg.problem)]
    for _ in range(cfg.n_slices):
        lambdas.append(fine_F(lambdas[-1], cfg))
    return lambdas, price_from_state(lambdas[-1], cfg)


def parareal_solve(cfg: PararealConfig, workers: int = 1, record_history: bool = False,
                   u0: StateVector | None = None) -> PararealResult:
    """Run the synchronous parareal iteration.

    Stops when the relative interface increment drops below ``cfg.tol`` or
    after ``cfg.iteration_cap`` iterations. Without an explicit ``max_iter``
    the cap is N, where the iterate equals the fine solution and the run
    counts as converged. ``workers > 1`` evaluates the fine solves of one
    iteration on a thread pool; the result is bitwise the same.
    """
    N = cfg.n_slices
    if u0 is None:
        u0 = initial_state(cfg.grid, cfg.problem)
    lambdas = initialize_coarse(u0, cfg)
    history = [lambdas] if record_history else None
    trace = []
    converged = False
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        k = 0
        while k < cfg.iteration_cap:
            if pool is None:
                fine = [fine_F(lambdas[n], cfg) for n in range(N)]
            else:
                fine = list(pool.map(lambda lam: fine_F(lam, cfg), lambdas[:N]))
            coarse_old = [coarse_G(lambdas[n], cfg) for n in range(N)]
            new = [lambdas[0]]
            for n in range(N):
                new.append(correct(coarse_G(new[n], cfg), fine[n], coarse_old[n]))
            k += 1
            r = residual(lambdas, new)
            trace.append(r)
            lambdas = new
            if record_history:
                history.append(lambdas)
            log.log(5, "sync iteration %d residual %.3e", k, r)
            if r < cfg.tol or (cfg.max_iter is None and k >= N):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    log.info("sync parareal: %d iterations, converged=%s", k, converged)
    return PararealResult(lambdas, k, trace, price_from_state(lambdas[-1], cfg),
                          converged, cfg.tol, history)
