"""Fixed-step RK4 integration of the (un)controlled system, region checks.

The paper-scale runs use h = 0.01 day (100 grid nodes per day); switching
times are read off this grid, so the step is kept fixed rather than
adaptive.  Controls are piecewise constant per step, frozen at the left
node for all four RK stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, SystemState, _vector_field, feasible_region

__all__ = [
    "TimeGrid",
    "Trajectory",
    "RegionVerdict",
    "BlowUpError",
    "integrate_forward",
    "check_invariant_region",
    "uptake_term_series",
]

logger = logging.getLogger(__name__)

# Relative slack for "numerically zero" undershoot and cap overshoot.
NEGATIVE_SLACK = 1e-9
CAP_SLACK = 1e-6


class BlowUpError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state at t = {time:g}")
        self.time = time


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t0, tf] with n_steps intervals (n_steps+1 nodes)."""

    t0: float
    tf: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.tf > self.t0:
            raise ValueError(f"tf must exceed t0, got [{self.t0}, {self.tf}]")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def h(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_nodes)

    @classmethod
    def with_density(cls, tf: float, nodes_per_day: float = 100.0, t0: float = 0.0) -> "TimeGrid":
        """Grid with the given node density, e.g. 100/day gives h = 0.01."""
        return cls(t0, tf, max(1, round(nodes_per_day * (tf - t0))))


@dataclass
class Trajectory:
    """Integrated solution: states (n_nodes, 5) and optional control nodes."""

    grid: TimeGrid
    states: np.ndarray
    controls: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.grid.n_nodes, 5):
            raise ValueError(
                f"states shape {self.states.shape} != ({self.grid.n_nodes}, 5)"
            )
        if self.controls is not None:
            self.controls = np.asarray(self.controls, dtype=float)
            if self.controls.shape != (self.grid.n_nodes,):
                raise ValueError("controls length must match grid nodes")

    @property
    def t(self) -> np.ndarray:
        return self.grid.times

    @property
    def S(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def I(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def Q(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def R(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def B(self) -> np.ndarray:
        return self.states[:, 4]

    def state_at(self, node: int) -> SystemState:
        return SystemState.from_array(self.states[node])


@dataclass(frozen=True)
class RegionVerdict:
    """Outcome of the invariant-region check; node/time of first violation."""

    passed: bool
    node: int | None = None
    time: float | None = None
    reason: str | None = None


def _control_schedule(u, grid: TimeGrid, u_max: float) -> np.ndarray:
    if np.isscalar(u):
        sched = np.full(grid.n_nodes, float(u))
    else:
        sched = np.asarray(u, dtype=float)
        if sched.shape != (grid.n_nodes,):
            raise ValueError(
                f"control schedule length {sched.shape} != grid nodes {grid.n_nodes}"
            )
    if sched.size and (sched.min() < 0.0 or sched.max() > u_max):
        raise ValueError(f"control values outside [0, {u_max}]")
    return sched


def integrate_forward(
    p: ModelParams,
    x0: SystemState,
    u,
    grid: TimeGrid,
) -> Trajectory:
    """Classical RK4 with fixed step; u is a constant or per-node schedule.

    The control is held at the left-node value through all stages of each
    step.  Undershoot below -1e-9 of the compartment cap is clamped to
    zero with a logged warning (floating-point dust near extinction);
    non-finite states raise BlowUpError with the offending time.
    """
    sched = _control_schedule(u, grid, p.u_max)
    deriv = _vector_field(p)
    caps = feasible_region(p)
    floor_h = -NEGATIVE_SLACK * caps.human_cap
    floor_b = -NEGATIVE_SLACK * caps.bacteria_cap

    n = grid.n_steps
    h = grid.h
    out = np.empty((n + 1, 5))
    s, i, q, r, b = x0.S, x0.I, x0.Q, x0.R, x0.B
    out[0] = (s, i, q, r, b)
    half = 0.5 * h
    sixth = h / 6.0
    clamp_warned = False

    for k in range(n):
        uk = sched[k]
        d1 = deriv(s, i, q, r, b, uk)
        d2 = deriv(s + half * d1[0], i + half * d1[1], q + half * d1[2],
                   r + half * d1[3], b + half * d1[4], uk)
        d3 = deriv(s + half * d2[0], i + half * d2[1], q + half * d2[2],
                   r + half * d2[3], b + half * d2[4], uk)
        d4 = deriv(s + h * d3[0], i + h * d3[1], q + h * d3[2],
                   r + h * d3[3], b + h * d3[4], uk)
        s += sixth * (d1[0] + 2.0 * (d2[0] + d3[0]) + d4[0])
        i += sixth * (d1[1] + 2.0 * (d2[1] + d3[1]) + d4[1])
        q += sixth * (d1[2] + 2.0 * (d2[2] + d3[2]) + d4[2])
        r += sixth * (d1[3] + 2.0 * (d2[3] + d3[3]) + d4[3])
        b += sixth * (d1[4] + 2.0 * (d2[4] + d3[4]) + d4[4])

        if not (s - s == 0.0 and i - i == 0.0 and q - q == 0.0
                and r - r == 0.0 and b - b == 0.0):  # NaN or +-inf
            raise BlowUpError(grid.t0 + (k + 1) * h)
        if s < floor_h or i < floor_h or q < floor_h or r < floor_h or b < floor_b:
            if not clamp_warned:
                logger.warning(
                    "negative undershoot clamped to 0 at t = %g", grid.t0 + (k + 1) * h
                )
                clamp_warned = True
            if s < floor_h:
                s = 0.0
            if i < floor_h:
                i = 0.0
            if q < floor_h:
                q = 0.0
            if r < floor_h:
                r = 0.0
            if b < floor_b:
                b = 0.0
        out[k + 1] = (s, i, q, r, b)

    return Trajectory(grid=grid, states=out, controls=sched)


def check_invariant_region(traj: Trajectory, p: ModelParams) -> RegionVerdict:
    """Verify the trajectory stays in the invariant box (with fp slack).

    Passes iff at every node each compartment is >= -1e-9 of its cap, the
    human total is <= Lambda/mu and B <= Lambda*eta/(mu*d), both within a
    1e-6 relative slack.
    """
    caps = feasible_region(p)
    X = traj.states
    low = np.array([-NEGATIVE_SLACK * caps.human_cap] * 4 + [-NEGATIVE_SLACK * caps.bacteria_cap])
    neg = X < low
    human = X[:, :4].sum(axis=1)
    over_h = human > caps.human_cap * (1.0 + CAP_SLACK)
    over_b = X[:, 4] > caps.bacteria_cap * (1.0 + CAP_SLACK)

    bad = neg.any(axis=1) | over_h | over_b
    if not bad.any():
        return RegionVerdict(passed=True)
    node = int(np.argmax(bad))
    if neg[node].any():
        comp = "SIQRB"[int(np.argmax(neg[node]))]
        reason = f"{comp} negative beyond slack"
    elif over_h[node]:
        reason = "human total exceeds Lambda/mu"
    else:
        reason = "B exceeds Lambda*eta/(mu*d)"
    return RegionVerdict(passed=False, node=node, time=float(traj.t[node]), reason=reason)


def uptake_term_series(traj: Trajectory, p: ModelParams) -> np.ndarray:
    """Bacteria removed by susceptible ingestion, rho*B*S/(kappa+B), per node."""
    S = traj.states[:, 0]
    B = traj.states[:, 4]
    return p.rho * B * S / (p.kappa + B)
