"""Core SIQRB cholera model: parameters, state, vector fields, running cost.

The model tracks four human compartments (susceptible S, infective I,
quarantined Q, recovered R) and the free bacterial concentration B in the
water reservoir.  Infection pressure is a saturating (Holling type II)
function of B, and -- the distinguishing feature of this model -- the
bacteria ingested by susceptibles are removed from the reservoir through
the uptake term rho*B*S/(kappa+B).

The control u in [0, u_max] is the fraction of susceptibles protected by
chlorine water tablets; it scales the infection flux by (1 - u) in the S
and I equations only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "SystemState",
    "FeasibleRegion",
    "uncontrolled_rhs",
    "controlled_rhs",
    "cost_integrand",
    "feasible_region",
]


@dataclass(frozen=True)
class ModelParams:
    """Rate constants, control cost weight and control bound.

    All rates are per day; kappa is the half-saturation bacterial
    concentration (cell/ml); eta and rho convert persons to shed/ingested
    cells per ml per day.  Validation happens once at construction; the
    instance is immutable and safe to share between threads.
    """

    Lambda: float  # recruitment rate (person/day)
    mu: float      # natural death rate (1/day)
    beta: float    # ingestion rate (1/day)
    kappa: float   # half-saturation constant (cell/ml)
    omega: float   # immunity waning rate (1/day)
    delta: float   # quarantine rate (1/day)
    epsilon: float  # recovery rate (1/day)
    alpha1: float  # disease death rate, infective (1/day)
    alpha2: float  # disease death rate, quarantined (1/day)
    eta: float     # shedding rate (cell/ml/day/person)
    d: float       # bacterial death rate (1/day)
    rho: float     # uptake/contact rate (cell/ml/day/person)
    c: float = 1.0       # control cost weight
    u_max: float = 1.0   # maximum control fraction

    def __post_init__(self) -> None:
        nonneg = (
            ("Lambda", self.Lambda), ("beta", self.beta), ("omega", self.omega),
            ("delta", self.delta), ("epsilon", self.epsilon),
            ("alpha1", self.alpha1), ("alpha2", self.alpha2),
            ("eta", self.eta), ("rho", self.rho), ("c", self.c),
        )
        for name, value in nonneg:
            if not value >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.d > 0.0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0.0 <= self.u_max <= 1.0:
            raise ValueError(f"u_max must be in [0, 1], got {self.u_max}")

    @property
    def a1(self) -> float:
        """Exit rate of the infective compartment, delta + alpha1 + mu."""
        return self.delta + self.alpha1 + self.mu

    @property
    def a2(self) -> float:
        """Exit rate of the quarantined compartment, epsilon + alpha2 + mu."""
        return self.epsilon + self.alpha2 + self.mu

    @property
    def a3(self) -> float:
        """Exit rate of the recovered compartment, omega + mu."""
        return self.omega + self.mu


@dataclass(frozen=True)
class SystemState:
    """Compartment values at one instant: S, I, Q, R (person), B (cell/ml).

    Nonnegativity is not enforced here; integrated trajectories are checked
    against the invariant region instead (floating-point dust near
    extinction would otherwise make every trajectory invalid).
    """

    S: float
    I: float
    Q: float
    R: float
    B: float

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.I, self.Q, self.R, self.B], dtype=float)

    @classmethod
    def from_array(cls, x) -> "SystemState":
        S, I, Q, R, B = (float(v) for v in x)
        return cls(S, I, Q, R, B)

    @property
    def human_total(self) -> float:
        return self.S + self.I + self.Q + self.R


@dataclass(frozen=True)
class FeasibleRegion:
    """Caps of the positively invariant box: humans <= Lambda/mu in total,
    bacteria <= Lambda*eta/(mu*d)."""

    human_cap: float
    bacteria_cap: float


def _vector_field(p: ModelParams):
    """Build the controlled right-hand side as a scalar-arithmetic closure.

    Single source of the five model equations; the integrators call the
    returned function in their inner loops, so it works on plain floats
    (small-ndarray overhead dominates otherwise).
    """
    Lam, mu, beta, kappa = p.Lambda, p.mu, p.beta, p.kappa
    omega, delta, epsilon = p.omega, p.delta, p.epsilon
    a1, a2, a3 = p.a1, p.a2, p.a3
    eta, d, rho = p.eta, p.d, p.rho

    def deriv(s, i, q, r, b, u):
        sat = b / (kappa + b)
        flux = beta * sat * s * (1.0 - u)
        return (
            Lam - flux + omega * r - mu * s,
            flux - a1 * i,
            delta * i - a2 * q,
            epsilon * q - a3 * r,
            eta * i - d * b - rho * sat * s,
        )

    return deriv


def uncontrolled_rhs(x: SystemState, p: ModelParams) -> np.ndarray:
    """Time derivative of (S, I, Q, R, B) without intervention."""
    return np.array(_vector_field(p)(x.S, x.I, x.Q, x.R, x.B, 0.0))


def controlled_rhs(x: SystemState, u: float, p: ModelParams) -> np.ndarray:
    """Time derivative with a fraction u of susceptibles protected.

    The infection flux is scaled by (1 - u) in the S and I equations; the
    Q, R and B equations are unchanged.  Raises ValueError for u outside
    [0, u_max].
    """
    if not 0.0 <= u <= p.u_max:
        raise ValueError(f"control {u} outside [0, {p.u_max}]")
    return np.array(_vector_field(p)(x.S, x.I, x.Q, x.R, x.B, u))


def cost_integrand(x: SystemState, u: float, p: ModelParams) -> float:
    """Running cost: rate of new infections under control, plus c*u."""
    return p.beta * x.B * x.S / (p.kappa + x.B) * (1.0 - u) + p.c * u


def feasible_region(p: ModelParams) -> FeasibleRegion:
    """Caps of the invariant region: (Lambda/mu, Lambda*eta/(mu*d))."""
    return FeasibleRegion(
        human_cap=p.Lambda / p.mu,
        bacteria_cap=p.Lambda * p.eta / (p.mu * p.d),
    )
