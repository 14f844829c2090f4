"""Least-squares calibration of the ingestion rate against weekly case counts.

Only beta is fitted; every other rate stays at its scenario value.  The
comparison target is the model's infective curve I(t) sampled at the
observation times: with the quarantine rate dominating the other exit
rates, I(t) is approximately the weekly reported count divided by
delta + alpha1 + mu (about 1.15 for the bundled scenario), so the two are
directly comparable.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .integrate import BlowUpError, TimeGrid, Trajectory, integrate_forward
from .model import ModelParams, SystemState

__all__ = [
    "EpidemicSeries",
    "FitResult",
    "SeriesFormatError",
    "load_series",
    "serialize_series",
    "model_cases",
    "fit_beta",
]

logger = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class SeriesFormatError(ValueError):
    """Malformed surveillance CSV; message carries the offending line number."""


@dataclass(frozen=True)
class EpidemicSeries:
    """Weekly (or arbitrary) case counts at day offsets from outbreak start."""

    times: np.ndarray
    cases: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "cases", np.asarray(self.cases, dtype=float))
        if self.times.size == 0:
            raise SeriesFormatError("series is empty")
        if self.times.shape != self.cases.shape or self.times.ndim != 1:
            raise SeriesFormatError("times and cases must be 1-d and equal length")
        if np.any(np.diff(self.times) <= 0):
            raise SeriesFormatError("times must be strictly increasing")
        if np.any(self.cases < 0):
            raise SeriesFormatError("case counts must be nonnegative")

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class FitResult:
    """Fitted ingestion rate, its residual, and the number of SSE evaluations."""

    beta_hat: float
    sse: float
    evaluations: int


def load_series(source, label: str = "") -> EpidemicSeries:
    """Parse a `t_days,cases` CSV (UTF-8, '#' comments) into a series.

    `source` may be a path or an open text/binary file object.  Malformed
    rows, non-increasing times and negative counts are reported with
    their line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw

    times: list[float] = []
    cases: list[float] = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            cols = [c.strip() for c in stripped.split(",")]
            if cols != ["t_days", "cases"]:
                raise SeriesFormatError(
                    f"line {lineno}: expected header 't_days,cases', got {stripped!r}"
                )
            header_seen = True
            continue
        parts = stripped.split(",")
        if len(parts) != 2:
            raise SeriesFormatError(f"line {lineno}: expected 2 fields, got {len(parts)}")
        try:
            t = float(parts[0])
            n = float(parts[1])
        except ValueError as exc:
            raise SeriesFormatError(f"line {lineno}: non-numeric field ({exc})") from exc
        if times and t <= times[-1]:
            raise SeriesFormatError(f"line {lineno}: time {t} not increasing")
        if n < 0:
            raise SeriesFormatError(f"line {lineno}: negative case count {n}")
        times.append(t)
        cases.append(n)
    if not header_seen:
        raise SeriesFormatError("no header line found")
    if not times:
        raise SeriesFormatError("no observations found")
    return EpidemicSeries(np.array(times), np.array(cases), label=label)


def serialize_series(series: EpidemicSeries) -> str:
    """Inverse of load_series (round-trip identity on valid series)."""
    lines = ["t_days,cases"]
    for t, n in zip(series.times, series.cases):
        lines.append(f"{t:g},{n:g}")
    return "\n".join(lines) + "\n"


def model_cases(traj: Trajectory, p: ModelParams, times) -> np.ndarray:
    """Sample I(t) at the requested day offsets by linear interpolation.

    The rates in p are not consulted: weekly counts are compared to I(t)
    directly, which the dominance of the quarantine rate justifies.
    Times outside the trajectory span raise ValueError.
    """
    times = np.asarray(times, dtype=float)
    t = traj.t
    if times.size and (times.min() < t[0] or times.max() > t[-1]):
        raise ValueError(
            f"requested times outside trajectory span [{t[0]:g}, {t[-1]:g}]"
        )
    return np.interp(times, t, traj.states[:, 1])


def _sse(beta: float, series: EpidemicSeries, p: ModelParams,
         x0: SystemState, grid: TimeGrid) -> float:
    candidate = dataclasses.replace(p, beta=beta)
    traj = integrate_forward(candidate, x0, 0.0, grid)
    resid = model_cases(traj, candidate, series.times) - series.cases
    return float(resid @ resid)


def fit_beta(
    series: EpidemicSeries,
    p: ModelParams,
    x0: SystemState,
    beta_range: tuple[float, float],
    n_grid: int = 33,
    grid: TimeGrid | None = None,
    refine_tol: float = 1e-6,
) -> FitResult:
    """Fit beta by SSE grid scan plus golden-section refinement.

    The scan covers [beta_lo, beta_hi] with n_grid points; golden-section
    search then shrinks the bracket around the best scan point to
    refine_tol.  Candidates whose integration blows up are skipped with a
    warning; if every candidate fails, RuntimeError is raised.  The beta
    field of p is ignored.
    """
    lo, hi = beta_range
    if not 0.0 < lo < hi:
        raise ValueError(f"need 0 < beta_lo < beta_hi, got [{lo}, {hi}]")
    if n_grid < 3:
        raise ValueError(f"n_grid must be >= 3, got {n_grid}")
    if grid is None:
        grid = TimeGrid.with_density(float(series.times.max()))

    evaluations = 0

    def objective(beta: float) -> float:
        nonlocal evaluations
        evaluations += 1
        try:
            return _sse(beta, series, p, x0, grid)
        except BlowUpError as exc:
            logger.warning("beta = %g skipped: %s", beta, exc)
            return np.inf

    betas = np.linspace(lo, hi, n_grid)
    scores = np.array([objective(b) for b in betas])
    if not np.isfinite(scores).any():
        raise RuntimeError("every candidate beta failed to integrate")
    j = int(np.argmin(scores))

    # Golden-section on the bracket around the best scan point.
    a = betas[max(j - 1, 0)]
    b = betas[min(j + 1, n_grid - 1)]
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while b - a > refine_tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = objective(x2)

    candidates = [(scores[j], betas[j]), (f1, x1), (f2, x2)]
    best_sse, best_beta = min(candidates, key=lambda pair: pair[0])
    return FitResult(beta_hat=float(best_beta), sse=float(best_sse), evaluations=evaluations)
