"""Pontryagin necessary conditions and the forward-backward sweep solver.

The objective is linear in the control, so the minimality condition
collapses to a bang-bang law driven by the sign of the switching function
phi = c + beta*S*B/(kappa+B) * (l1 - l2 - 1).  The sweep alternates
forward state integration, backward adjoint integration, and a damped
control update until the schedule (or the cost) stops moving, then
re-evaluates once with the pure bang-bang schedule so the reported
control takes only its extreme values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .integrate import TimeGrid, Trajectory, integrate_forward
from .model import ModelParams, SystemState, cost_integrand, _vector_field

__all__ = [
    "AdjointState",
    "SwitchingRecord",
    "OcpSolution",
    "SingularArcError",
    "hamiltonian",
    "adjoint_rhs",
    "integrate_adjoint_backward",
    "switching_function",
    "control_update",
    "cost",
    "forward_backward_sweep",
    "detect_switching",
    "peak_infective",
    "control_end_time",
]

logger = logging.getLogger(__name__)

# A stretch of >= SINGULAR_RUN nodes with |phi| < SINGULAR_TOL*c is treated
# as a singular arc, which this solver does not handle.
SINGULAR_TOL = 1e-6
SINGULAR_RUN = 5


class SingularArcError(RuntimeError):
    """The switching function vanished on an interval; control is singular."""


@dataclass(frozen=True)
class AdjointState:
    """Costates paired with (S, I, Q, R, B); all zero at the final time."""

    l1: float
    l2: float
    l3: float
    l4: float
    l5: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l1, self.l2, self.l3, self.l4, self.l5])

    @classmethod
    def from_array(cls, l) -> "AdjointState":
        l1, l2, l3, l4, l5 = (float(v) for v in l)
        return cls(l1, l2, l3, l4, l5)


@dataclass(frozen=True)
class SwitchingRecord:
    """A simple zero of phi: time, slope there, and control jump direction."""

    t_switch: float
    phi_slope: float
    direction: str  # "u_max->0" or "0->u_max"


@dataclass
class OcpSolution:
    """Converged extremal: schedule, trajectories, phi series and cost."""

    params: ModelParams
    control: np.ndarray
    state_traj: Trajectory
    adjoint_traj: np.ndarray
    phi: np.ndarray
    cost: float
    converged: bool
    iterations: int
    switching: list[SwitchingRecord] = field(default_factory=list)

    @property
    def grid(self) -> TimeGrid:
        return self.state_traj.grid


def hamiltonian(x: SystemState, u: float, l: AdjointState, p: ModelParams) -> float:
    """H = running cost + <costates, controlled vector field>."""
    f = _vector_field(p)(x.S, x.I, x.Q, x.R, x.B, u)
    return (
        cost_integrand(x, u, p)
        + l.l1 * f[0] + l.l2 * f[1] + l.l3 * f[2] + l.l4 * f[3] + l.l5 * f[4]
    )


def _adjoint_field(p: ModelParams):
    """Costate derivative closure; needs only S and B from the state."""
    beta, kappa, mu, omega = p.beta, p.kappa, p.mu, p.omega
    delta, epsilon, eta, d, rho = p.delta, p.epsilon, p.eta, p.d, p.rho
    a1, a2, a3 = p.a1, p.a2, p.a3

    def deriv(s, b, u, l1, l2, l3, l4, l5):
        bk = kappa + b
        shared = beta * (l1 - l2 - 1.0) * (1.0 - u) + rho * l5
        return (
            b / bk * shared + mu * l1,
            a1 * l2 - delta * l3 - eta * l5,
            a2 * l3 - epsilon * l4,
            -omega * l1 + a3 * l4,
            kappa * s / (bk * bk) * shared + d * l5,
        )

    return deriv


def adjoint_rhs(x: SystemState, l: AdjointState, u: float, p: ModelParams) -> np.ndarray:
    """The five costate derivatives, d(lambda)/dt = -dH/dx."""
    return np.array(_adjoint_field(p)(x.S, x.B, u, l.l1, l.l2, l.l3, l.l4, l.l5))


def switching_function(x: SystemState, l: AdjointState, p: ModelParams) -> float:
    """phi = dH/du = c + beta*S*B/(kappa+B) * (l1 - l2 - 1)."""
    return p.c + p.beta * x.S * x.B / (p.kappa + x.B) * (l.l1 - l.l2 - 1.0)


def control_update(phi: float, u_max: float) -> float:
    """Bang-bang law: u_max where phi < 0, 0 where phi > 0.

    Exact zeros take u_max; the tie is a measure-zero convention and does
    not affect the cost.
    """
    return u_max if phi <= 0.0 else 0.0


def _phi_series(states: np.ndarray, adjoints: np.ndarray, p: ModelParams) -> np.ndarray:
    S = states[:, 0]
    B = states[:, 4]
    return p.c + p.beta * S * B / (p.kappa + B) * (adjoints[:, 0] - adjoints[:, 1] - 1.0)


def _schedule_like(u, grid: TimeGrid) -> np.ndarray:
    if np.isscalar(u):
        return np.full(grid.n_nodes, float(u))
    sched = np.asarray(u, dtype=float)
    if sched.shape != (grid.n_nodes,):
        raise ValueError(f"schedule length {sched.shape} != grid nodes {grid.n_nodes}")
    return sched


def integrate_adjoint_backward(state_traj: Trajectory, u, p: ModelParams) -> np.ndarray:
    """RK4 backward from lambda(T) = 0 on the state trajectory's grid.

    State values at the RK stages come from the stored nodes: the first
    two stages of each backward step use the right node, the last two the
    left node (the half-step state errors then cancel in the 1-2-2-1
    stage combination); the control is the left-node value of the
    interval, as in the forward pass.
    """
    grid = state_traj.grid
    sched = _schedule_like(u, grid)
    deriv = _adjoint_field(p)
    X = state_traj.states
    h = grid.h
    half = 0.5 * h
    sixth = h / 6.0

    out = np.zeros((grid.n_nodes, 5))
    l1 = l2 = l3 = l4 = l5 = 0.0
    for k in range(grid.n_steps, 0, -1):
        uk = sched[k - 1]
        sR, bR = X[k, 0], X[k, 4]
        sL, bL = X[k - 1, 0], X[k - 1, 4]
        d1 = deriv(sR, bR, uk, l1, l2, l3, l4, l5)
        d2 = deriv(sR, bR, uk, l1 - half * d1[0], l2 - half * d1[1],
                   l3 - half * d1[2], l4 - half * d1[3], l5 - half * d1[4])
        d3 = deriv(sL, bL, uk, l1 - half * d2[0], l2 - half * d2[1],
                   l3 - half * d2[2], l4 - half * d2[3], l5 - half * d2[4])
        d4 = deriv(sL, bL, uk, l1 - h * d3[0], l2 - h * d3[1],
                   l3 - h * d3[2], l4 - h * d3[3], l5 - h * d3[4])
        l1 -= sixth * (d1[0] + 2.0 * (d2[0] + d3[0]) + d4[0])
        l2 -= sixth * (d1[1] + 2.0 * (d2[1] + d3[1]) + d4[1])
        l3 -= sixth * (d1[2] + 2.0 * (d2[2] + d3[2]) + d4[2])
        l4 -= sixth * (d1[3] + 2.0 * (d2[3] + d3[3]) + d4[3])
        l5 -= sixth * (d1[4] + 2.0 * (d2[4] + d3[4]) + d4[4])
        if not (l1 - l1 == 0.0 and l2 - l2 == 0.0 and l3 - l3 == 0.0
                and l4 - l4 == 0.0 and l5 - l5 == 0.0):
            raise RuntimeError(f"non-finite costate at t = {grid.t0 + (k - 1) * h:g}")
        out[k - 1] = (l1, l2, l3, l4, l5)
    return out


def cost(state_traj: Trajectory, u, p: ModelParams) -> float:
    """Composite trapezoidal quadrature of the running cost over [t0, tf]."""
    grid = state_traj.grid
    sched = _schedule_like(u, grid)
    S = state_traj.states[:, 0]
    B = state_traj.states[:, 4]
    g = p.beta * B * S / (p.kappa + B) * (1.0 - sched) + p.c * sched
    return float(grid.h * (0.5 * g[0] + g[1:-1].sum() + 0.5 * g[-1]))


def forward_backward_sweep(
    p: ModelParams,
    x0: SystemState,
    grid: TimeGrid,
    damping: float = 0.5,
    tol_u: float = 1e-6,
    tol_cost: float = 1e-8,
    max_iterations: int = 500,
) -> OcpSolution:
    """Solve the optimal control problem by damped fixed-point sweeps.

    Each iteration integrates the state forward under the current
    schedule, the costate backward, evaluates phi, and blends the
    bang-bang update into the schedule with the given damping.  Iteration
    stops when the undamped update agrees with the schedule to
    tol_u*u_max at every node, or the relative cost change falls below
    tol_cost; the final solution is then rebuilt from the pure bang-bang
    schedule, so the reported control takes only the values {0, u_max}
    and switching records are attached.

    Hitting max_iterations returns the lowest-cost iterate seen, with
    converged=False and no switching records.
    """
    if not 0.0 < p.u_max <= 1.0:
        raise ValueError(f"u_max must be in (0, 1] for the control problem, got {p.u_max}")
    u = np.zeros(grid.n_nodes)
    best_u = u
    best_cost = np.inf
    prev_cost = np.inf
    converged = False
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        traj = integrate_forward(p, x0, u, grid)
        adj = integrate_adjoint_backward(traj, u, p)
        phi = _phi_series(traj.states, adj, p)
        u_new = np.where(phi <= 0.0, p.u_max, 0.0)
        J = cost(traj, u, p)
        if J < best_cost:
            best_cost = J
            best_u = u
        du = float(np.abs(u_new - u).max())
        dJ = abs(J - prev_cost) / max(abs(J), 1e-300)
        if du <= tol_u * p.u_max or dJ <= tol_cost:
            converged = True
            best_u = u_new
            break
        u = damping * u_new + (1.0 - damping) * u
        prev_cost = J

    if not converged:
        logger.warning("sweep did not converge within %d iterations", max_iterations)

    traj = integrate_forward(p, x0, best_u, grid)
    adj = integrate_adjoint_backward(traj, best_u, p)
    solution = OcpSolution(
        params=p,
        control=best_u,
        state_traj=traj,
        adjoint_traj=adj,
        phi=_phi_series(traj.states, adj, p),
        cost=cost(traj, best_u, p),
        converged=converged,
        iterations=iterations,
    )
    if converged:
        solution.switching = detect_switching(solution)
    return solution


def detect_switching(solution: OcpSolution) -> list[SwitchingRecord]:
    """Locate simple zeros of phi by linear interpolation between nodes.

    The slope at each crossing is the finite difference over the
    bracketing cell.  A run of >= 5 consecutive nodes with |phi| < 1e-6*c
    raises SingularArcError: the strict bang-bang property fails there
    and this solver does not synthesize singular controls.
    """
    phi = solution.phi
    grid = solution.grid
    h = grid.h
    c = solution.params.c
    if c > 0.0:
        run = 0
        for small in np.abs(phi) < SINGULAR_TOL * c:
            run = run + 1 if small else 0
            if run >= SINGULAR_RUN:
                raise SingularArcError(
                    f"|phi| < {SINGULAR_TOL:g}*c on {SINGULAR_RUN}+ consecutive nodes"
                )
    records: list[SwitchingRecord] = []
    for k in range(len(phi) - 1):
        a, b = phi[k], phi[k + 1]
        crosses = a * b < 0.0
        if a == 0.0 and b != 0.0 and k > 0:
            crosses = phi[k - 1] * b < 0.0  # exact node zero between opposite signs
        if crosses:
            t_switch = grid.t0 + (k + a / (a - b)) * h
            slope = (b - a) / h
            direction = "u_max->0" if a < b else "0->u_max"
            records.append(SwitchingRecord(float(t_switch), float(slope), direction))
    return records


def peak_infective(traj: Trajectory) -> tuple[float, float]:
    """Time and height of the maximum of I(t); ties break to the earliest node."""
    idx = int(np.argmax(traj.states[:, 1]))
    return float(traj.t[idx]), float(traj.states[idx, 1])


def control_end_time(solution: OcpSolution) -> float:
    """Time at which the control schedule shuts off.

    Returns the last u_max->0 crossing of phi when the schedule ends
    inactive; the horizon end when the control is still active at T (a
    terminal drop forced by the transversality conditions is not an
    interior switch); and the horizon start when the control is never
    active.
    """
    if solution.control.max() <= 0.0:
        return solution.grid.t0
    if solution.control[-1] > 0.0:
        return solution.grid.tf
    offs = [r.t_switch for r in solution.switching if r.direction == "u_max->0"]
    if offs:
        return offs[-1]
    last_on = int(np.nonzero(solution.control > 0.0)[0].max())
    return float(solution.grid.times[min(last_on + 1, solution.grid.n_steps)])
