"""Uniform-grid finite differences and backward Euler for ``u_tau = u_xx``.

States store only the ``m - 1`` interior nodes. Boundary values are rebuilt
from the heat time whenever they are needed, so a state handed between
threads can never carry stale Dirichlet data.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .pricing import TransformedProblem, boundary_values, initial_condition, right_boundary

__all__ = [
    "SpatialGrid",
    "StateVector",
    "TridiagonalSystem",
    "SingularSystemError",
    "build_grid",
    "initial_state",
    "backward_euler_matrix",
    "backward_euler_step",
    "propagate",
    "solve_tridiagonal",
    "interpolate_at",
]


class SingularSystemError(ArithmeticError):
    """Zero pivot met while eliminating a tridiagonal system."""


@dataclass(frozen=True)
class SpatialGrid:
    x_minus: float
    x_plus: float
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 sub-intervals, got m={self.m}")
        if not self.x_plus > self.x_minus:
            raise ValueError("x_plus must exceed x_minus")

    @property
    def h(self) -> float:
        return (self.x_plus - self.x_minus) / self.m

    @property
    def nodes(self) -> np.ndarray:
        """All ``m + 1`` node coordinates, boundaries included."""
        return self.x_minus + self.h * np.arange(self.m + 1)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Interior u-values at heat time ``tau``. The array is made read-only."""

    tau: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("state values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("state values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class TridiagonalSystem:
    """Bands of an n-by-n tridiagonal matrix.

    All three bands have length n; ``sub[0]`` and ``sup[-1]`` lie outside
    the matrix and are ignored.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n or len(self.sup) != n:
            raise ValueError("tridiagonal bands must share one length")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.diag) * x
        y[1:] += np.asarray(self.sub)[1:] * x[:-1]
        y[:-1] += np.asarray(self.sup)[:-1] * x[1:]
        return y

    def is_diagonally_dominant(self) -> bool:
        off = np.abs(self.sub).astype(float)
        off[0] = 0.0
        upper = np.abs(self.sup).astype(float)
        upper[-1] = 0.0
        return bool(np.all(np.abs(self.diag) > off + upper))


def build_grid(tp: TransformedProblem, m: int) -> SpatialGrid:
    if int(m) != m:
        raise ValueError(f"m must be an integer, got {m!r}")
    return SpatialGrid(tp.x_minus, tp.x_plus, int(m))


def initial_state(grid: SpatialGrid, tp: TransformedProblem) -> StateVector:
    return StateVector(0.0, initial_condition(grid.interior, tp))


# -- Thomas algorithm ------------------------------------------------------

@njit(cache=True, nogil=True)
def _factor(sub, diag, sup):
    n = diag.shape[0]
    cp = np.empty(n)
    inv = np.empty(n)
    if diag[0] == 0.0:
        return cp, inv, False
    inv[0] = 1.0 / diag[0]
    cp[0] = sup[0] * inv[0]
    for i in range(1, n):
        den = diag[i] - sub[i] * cp[i - 1]
        if den == 0.0:
            return cp, inv, False
        inv[i] = 1.0 / den
        cp[i] = sup[i] * inv[i]
    return cp, inv, True


@njit(cache=True, nogil=True)
def _substitute(sub, cp, inv, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] * inv[0]
    for i in range(1, n):
        out[i] = (rhs[i] - sub[i] * out[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


def solve_tridiagonal(sys: TridiagonalSystem, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` by forward elimination and back substitution."""
    sub = np.ascontiguousarray(sys.sub, dtype=np.float64)
    diag = np.ascontiguousarray(sys.diag, dtype=np.float64)
    sup = np.ascontiguousarray(sys.sup, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != diag.shape:
        raise ValueError(f"rhs shape {rhs.shape} does not match system size {diag.shape}")
    cp, inv, ok = _factor(sub, diag, sup)
    if not ok:
        raise SingularSystemError("zero pivot in tridiagonal elimination")
    out = np.empty_like(rhs)
    _substitute(sub, cp, inv, rhs, out)
    return out


# -- backward Euler --------------------------------------------------------

def backward_euler_matrix(n: int, mu: float) -> TridiagonalSystem:
    """``I + mu * tridiag(-1, 2, -1)`` of size ``n``."""
    if not mu > 0:
        raise ValueError(f"mesh ratio must be positive, got {mu!r}")
    off = np.full(n, -mu)
    system = TridiagonalSystem(off, np.full(n, 1.0 + 2.0 * mu), off.copy())
    assert system.is_diagonally_dominant()
    return system


@njit(cache=True, nogil=True)
def _implicit_steps(u0, n_steps, mu, sub, cp, inv, left, right):
    u = u0.copy()
    rhs = np.empty_like(u)
    last = u.shape[0] - 1
    for s in range(n_steps):
        rhs[:] = u
        rhs[0] += mu * left[s]
        rhs[last] += mu * right[s]
        _substitute(sub, cp, inv, rhs, u)
    return u


def _step_times(tau0: float, n_steps: int, dtau: float) -> np.ndarray:
    # repeated addition, so splitting a run into pieces reproduces the same times
    taus = np.empty(n_steps)
    tau = tau0
    for i in range(n_steps):
        tau = tau + dtau
        taus[i] = tau
    return taus


def _boundary_series(taus, tp, boundary):
    if boundary is not None:
        left, right = boundary
        return np.full(taus.shape, float(left)), np.full(taus.shape, float(right))
    if taus[-1] > tp.tau_max * (1.0 + 1e-10):
        raise ValueError(f"propagation to tau={taus[-1]!r} passes tau_max={tp.tau_max!r}")
    left = np.zeros_like(taus)
    right = np.array([right_boundary(min(t, tp.tau_max), tp) for t in taus])
    return left, right


def propagate(s: StateVector, n_steps: int, dtau: float, grid: SpatialGrid,
              tp: TransformedProblem, boundary=None) -> StateVector:
    """Apply ``n_steps`` backward-Euler steps of size ``dtau`` to ``s``.

    Dirichlet data is taken at the new time level of each step. Passing
    ``boundary=(left, right)`` freezes the two boundary values instead.
    """
    if n_steps < 1 or int(n_steps) != n_steps:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps!r}")
    if not dtau > 0:
        raise ValueError(f"dtau must be positive, got {dtau!r}")
    if len(s) != grid.m - 1:
        raise ValueError(f"state has {len(s)} values, grid needs {grid.m - 1}")
    n_steps = int(n_steps)
    mu = dtau / grid.h ** 2
    system = backward_euler_matrix(grid.m - 1, mu)
    cp, inv, ok = _factor(system.sub, system.diag, system.sup)
    if not ok:
        raise SingularSystemError("backward Euler matrix lost diagonal dominance")
    taus = _step_times(s.tau, n_steps, dtau)
    left, right = _boundary_series(taus, tp, boundary)
    u = _implicit_steps(s.values, n_steps, mu, system.sub, cp, inv, left, right)
    return StateVector(float(taus[-1]), u)


def backward_euler_step(s: StateVector, dtau: float, grid: SpatialGrid,
                        tp: TransformedProblem, boundary=None) -> StateVector:
    return propagate(s, 1, dtau, grid, tp, boundary=boundary)


def interpolate_at(s: StateVector, grid: SpatialGrid, x: float,
                   tp: TransformedProblem | None = None, boundary=None) -> float:
    """Piecewise-linear value of the full solution (boundaries included) at ``x``.

    Boundary values come from ``boundary`` when given, else from ``tp`` at
    ``s.tau``. With neither, only points between interior nodes are allowed.
    """
    lo, hi = grid.x_minus, grid.x_plus
    if not (lo <= x <= hi):
        raise ValueError(f"x={x!r} outside grid [{lo!r}, {hi!r}]")
    h = grid.h
    j = min(int(math.floor((x - lo) / h)), grid.m - 1)
    w = (x - (lo + j * h)) / h
    if w == 0.0:
        return _node_value(s, grid, j, tp, boundary)
    if abs(w - 1.0) < 1e-12:
        return _node_value(s, grid, j + 1, tp, boundary)
    a = _node_value(s, grid, j, tp, boundary)
    b = _node_value(s, grid, j + 1, tp, boundary)
    return (1.0 - w) * a + w * b


def _node_value(s, grid, i, tp, boundary):
    if 0 < i < grid.m:
        return float(s.values[i - 1])
    if boundary is None:
        if tp is None:
            raise ValueError("boundary node requested without boundary data")
        boundary = boundary_values(min(s.tau, tp.tau_max), tp)
    return float(boundary[0] if i == 0 else boundary[1])
