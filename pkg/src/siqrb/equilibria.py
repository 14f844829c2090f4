"""Equilibria, reproduction number, local stability and bifurcation structure.

Everything here is closed-form except the eigenvalue computation, which is
numerical (LAPACK via numpy) with the residual of every returned pair
verified.  The analytic factorizations known for special cases are used as
test oracles, not as code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, SystemState

__all__ = [
    "CompositeRates",
    "EquilibriumReport",
    "BifurcationReport",
    "InfeasibleEquilibrium",
    "EigensolverError",
    "basic_reproduction_number",
    "disease_free_equilibrium",
    "endemic_equilibrium",
    "endemic_force_of_infection",
    "jacobian",
    "eigenvalues",
    "classify_stability",
    "bifurcation_coefficients",
]

# Eigenvalue real parts within this fraction of the matrix norm of zero are
# treated as marginal: no stability verdict (floating-point zero mode at the
# bifurcation point).
MARGINAL_BAND = 1e-12


class InfeasibleEquilibrium(ValueError):
    """Endemic equilibrium does not exist; `condition` names the failure."""

    def __init__(self, condition: str):
        super().__init__(f"endemic equilibrium infeasible: {condition}")
        self.condition = condition


class EigensolverError(RuntimeError):
    """Eigenvalue computation failed to converge or verify."""


@dataclass(frozen=True)
class CompositeRates:
    """Compound exit rates and endemic force of infection.

    a1, a2, a3 are the total exit rates of I, Q, R; lambda_star is the
    force of infection beta*B*/(kappa+B*) at the endemic point, and D the
    common positive denominator of the equilibrium components.
    """

    a1: float
    a2: float
    a3: float
    lambda_star: float
    D: float


@dataclass(frozen=True)
class EquilibriumReport:
    """Both equilibria with numerical stability verdicts.

    Stability verdicts are None when the dominant eigenvalue sits inside
    the marginal band around zero (e.g. exactly at the bifurcation), and
    the endemic fields are None when that equilibrium is infeasible.
    """

    R0: float
    dfe: SystemState
    ee: SystemState | None
    ee_feasible: bool
    composite: CompositeRates | None
    dfe_eigenvalues: np.ndarray
    ee_eigenvalues: np.ndarray | None
    dfe_stable: bool | None
    ee_stable: bool | None


@dataclass(frozen=True)
class BifurcationReport:
    """Critical ingestion rate and transcritical normal-form coefficients."""

    beta_star: float
    a_coeff: float
    b_coeff: float


def basic_reproduction_number(p: ModelParams) -> float:
    """R0 = beta*Lambda*eta / (a1 * (mu*kappa*d + rho*Lambda))."""
    return p.beta * p.Lambda * p.eta / (p.a1 * (p.mu * p.kappa * p.d + p.rho * p.Lambda))


def disease_free_equilibrium(p: ModelParams) -> SystemState:
    """The infection-free steady state (Lambda/mu, 0, 0, 0, 0)."""
    return SystemState(p.Lambda / p.mu, 0.0, 0.0, 0.0, 0.0)


def endemic_force_of_infection(p: ModelParams) -> float:
    """Closed-form force of infection lambda* at the endemic equilibrium."""
    R0 = basic_reproduction_number(p)
    a1, a2, a3 = p.a1, p.a2, p.a3
    num = p.beta * (R0 - 1.0) * a1 * a2 * a3 * (p.rho * p.Lambda + p.mu * p.kappa * p.d)
    den = (
        p.Lambda * (p.beta * p.eta - p.rho * a1) * a2 * a3
        + p.kappa * p.beta * p.d * (a1 * a2 * a3 - p.delta * p.epsilon * p.omega)
    )
    return num / den


def _composite_rates(p: ModelParams, lambda_star: float) -> CompositeRates:
    D = p.a1 * p.a2 * p.a3 * (lambda_star + p.mu) - p.delta * p.epsilon * p.omega * lambda_star
    return CompositeRates(p.a1, p.a2, p.a3, lambda_star, D)


def endemic_equilibrium(p: ModelParams) -> SystemState:
    """Interior steady state E*, from the closed-form lambda*.

    B* is recovered by inverting lambda* = beta*B*/(kappa+B*); the direct
    equilibrium expression for B* serves as an independent cross-check in
    the test suite.  Raises InfeasibleEquilibrium when R0 <= 1 or
    beta*eta <= rho*a1.
    """
    if not p.beta * p.eta > p.rho * p.a1:
        raise InfeasibleEquilibrium("beta*eta <= rho*a1")
    R0 = basic_reproduction_number(p)
    if not R0 > 1.0:
        raise InfeasibleEquilibrium("R0 <= 1")
    lam = endemic_force_of_infection(p)
    rates = _composite_rates(p, lam)
    D = rates.D
    S = p.Lambda * p.a1 * p.a2 * p.a3 / D
    I = p.Lambda * p.a2 * p.a3 * lam / D
    Q = p.Lambda * p.delta * p.a3 * lam / D
    R = p.Lambda * p.delta * p.epsilon * lam / D
    B = p.kappa * lam / (p.beta - lam)
    return SystemState(S, I, Q, R, B)


def jacobian(x: SystemState, p: ModelParams) -> np.ndarray:
    """Analytic Jacobian of the uncontrolled vector field at x (5x5, 1/day)."""
    sat = x.B / (p.kappa + x.B)
    dsat = p.kappa / (p.kappa + x.B) ** 2  # d(sat)/dB
    J = np.zeros((5, 5))
    J[0, 0] = -p.beta * sat - p.mu
    J[0, 3] = p.omega
    J[0, 4] = -p.beta * x.S * dsat
    J[1, 0] = p.beta * sat
    J[1, 1] = -p.a1
    J[1, 4] = p.beta * x.S * dsat
    J[2, 1] = p.delta
    J[2, 2] = -p.a2
    J[3, 2] = p.epsilon
    J[3, 3] = -p.a3
    J[4, 0] = -p.rho * sat
    J[4, 1] = p.eta
    J[4, 4] = -p.d - p.rho * x.S * dsat
    return J


def eigenvalues(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real 5x5 (or general square) matrix.

    Each returned pair is verified: ||m v - lam v|| <= 1e-8 ||m||.
    Raises EigensolverError on non-convergence or residual failure rather
    than returning silently wrong values.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise EigensolverError("matrix has non-finite entries")
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    norm = np.linalg.norm(m)
    resid = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    if norm > 0 and np.any(resid > 1e-8 * norm):
        raise EigensolverError(f"eigenpair residual {resid.max():.3e} exceeds 1e-8*||m||")
    return vals


def _stability_verdict(eigs: np.ndarray, norm: float) -> bool | None:
    band = MARGINAL_BAND * norm
    top = eigs.real.max()
    if top < -band:
        return True
    if top > band:
        return False
    return None  # marginal: zero mode within floating-point resolution


def classify_stability(p: ModelParams) -> EquilibriumReport:
    """Numerical stability verdicts for both equilibria.

    The DFE verdict is cross-checked against the R0 < 1 threshold; the
    endemic fields are filled only when the equilibrium is feasible.
    """
    R0 = basic_reproduction_number(p)
    dfe = disease_free_equilibrium(p)
    J_dfe = jacobian(dfe, p)
    dfe_eigs = eigenvalues(J_dfe)
    dfe_stable = _stability_verdict(dfe_eigs, float(np.linalg.norm(J_dfe)))

    ee = None
    ee_eigs = None
    ee_stable = None
    composite = None
    try:
        ee = endemic_equilibrium(p)
        feasible = True
    except InfeasibleEquilibrium:
        feasible = False
    if feasible:
        composite = _composite_rates(p, endemic_force_of_infection(p))
        J_ee = jacobian(ee, p)
        ee_eigs = eigenvalues(J_ee)
        ee_stable = _stability_verdict(ee_eigs, float(np.linalg.norm(J_ee)))

    return EquilibriumReport(
        R0=R0,
        dfe=dfe,
        ee=ee,
        ee_feasible=feasible,
        composite=composite,
        dfe_eigenvalues=dfe_eigs,
        ee_eigenvalues=ee_eigs,
        dfe_stable=dfe_stable,
        ee_stable=ee_stable,
    )


def bifurcation_coefficients(p: ModelParams) -> BifurcationReport:
    """Critical beta* (where R0 = 1) and the transcritical coefficients a, b.

    The center-manifold reduction gives a < 0 and b > 0 whenever
    beta* * eta > rho * a1, so the endemic branch emanating at R0 = 1 is
    locally stable.  Raises InfeasibleEquilibrium when that hypothesis
    fails (only possible for degenerate parameter sets).
    """
    if p.Lambda <= 0.0 or p.eta <= 0.0:
        raise InfeasibleEquilibrium("beta* undefined: Lambda*eta = 0")
    mix = p.rho * p.Lambda + p.mu * p.kappa * p.d
    beta_star = p.a1 * mix / (p.Lambda * p.eta)
    if not beta_star * p.eta > p.rho * p.a1:
        raise InfeasibleEquilibrium("beta* * eta <= rho * a1")
    a1, a2, a3 = p.a1, p.a2, p.a3
    a_coeff = (2.0 * p.mu * (beta_star * p.eta - p.rho * a1) / mix) * (
        (p.delta * p.epsilon * p.omega - a1 * a2 * a3) / (a2 * a3 * p.mu)
        - p.Lambda * p.eta / mix
    )
    b_coeff = p.Lambda * p.eta / mix
    return BifurcationReport(beta_star=beta_star, a_coeff=a_coeff, b_coeff=b_coeff)
