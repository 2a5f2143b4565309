"""Black-Scholes European call in heat-equation coordinates.

The substitution ``S = E exp(x)``, ``t = T - 2 tau / sigma**2`` and
``V = E exp(-alpha x - beta**2 tau) u(x, tau)`` turns the Black-Scholes
equation into ``u_tau = u_xx``. Pricing at ``t = 0`` reads ``u`` at
``x0 = ln(S/E)`` and ``tau = tau_max``.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarketOption",
    "TransformedProblem",
    "derive_transform",
    "initial_condition",
    "boundary_values",
    "recover_price",
    "exact_price",
    "std_normal_cdf",
]

LOG4 = math.log(4.0)

# relative slack on tau_max for accumulated step round-off
_TAU_SLACK = 1e-10


@dataclass(frozen=True)
class MarketOption:
    """A European call: volatility, risk-free rate, spot, strike, maturity (years)."""

    sigma: float
    rate: float
    spot: float
    strike: float
    maturity: float

    def __post_init__(self):
        for name in ("sigma", "spot", "strike", "maturity"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be non-negative, got {self.rate!r}")


@dataclass(frozen=True)
class TransformedProblem:
    kappa: float
    alpha: float
    beta: float
    x0: float
    x_minus: float
    x_plus: float
    tau_max: float


def derive_transform(mo: MarketOption) -> TransformedProblem:
    """Dimensionless heat problem for ``mo`` on the truncated log-price domain."""
    if not isinstance(mo, MarketOption):
        raise TypeError("expected a MarketOption")
    s2 = mo.sigma * mo.sigma
    kappa = 2.0 * mo.rate / s2
    x0 = math.log(mo.spot / mo.strike)
    return TransformedProblem(
        kappa=kappa,
        alpha=0.5 * (kappa - 1.0),
        beta=0.5 * (kappa + 1.0),
        x0=x0,
        x_minus=min(x0, 0.0) - LOG4,
        x_plus=max(x0, 0.0) + LOG4,
        tau_max=0.5 * mo.maturity * s2,
    )


def initial_condition(x, tp: TransformedProblem):
    """Transformed payoff ``max(exp(beta x) - exp(alpha x), 0)``; accepts arrays."""
    if np.ndim(x) == 0:
        return max(math.exp(tp.beta * x) - math.exp(tp.alpha * x), 0.0)
    x = np.asarray(x, dtype=float)
    return np.maximum(np.exp(tp.beta * x) - np.exp(tp.alpha * x), 0.0)


def right_boundary(tau: float, tp: TransformedProblem) -> float:
    b, a, xp = tp.beta, tp.alpha, tp.x_plus
    return math.exp(b * xp + b * b * tau) - math.exp(a * xp + a * a * tau)


def boundary_values(tau: float, tp: TransformedProblem) -> tuple[float, float]:
    """Dirichlet data ``(u(x_minus, tau), u(x_plus, tau))``."""
    if not (-_TAU_SLACK * tp.tau_max <= tau <= tp.tau_max * (1.0 + _TAU_SLACK)):
        raise ValueError(f"tau={tau!r} outside [0, {tp.tau_max!r}]")
    return 0.0, right_boundary(tau, tp)


def recover_price(u_at_x0: float, tp: TransformedProblem, strike: float) -> float:
    """Option value at ``t = 0`` from the heat solution sampled at ``(x0, tau_max)``."""
    scale = math.exp(-tp.alpha * tp.x0 - tp.beta * tp.beta * tp.tau_max)
    return strike * scale * u_at_x0


def std_normal_cdf(z: float) -> float:
    # erfc keeps full relative precision in the lower tail
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def exact_price(mo: MarketOption) -> float:
    """Closed-form Black-Scholes call value at ``t = 0``."""
    vol = mo.sigma * math.sqrt(mo.maturity)
    d1 = (math.log(mo.spot / mo.strike)
          + (mo.rate + 0.5 * mo.sigma ** 2) * mo.maturity) / vol
    d2 = d1 - vol
    return (mo.spot * std_normal_cdf(d1)
            - mo.strike * math.exp(-mo.rate * mo.maturity) * std_normal_cdf(d2))
