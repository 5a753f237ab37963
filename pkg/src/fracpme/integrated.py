"""The primitive ``v(x,t) = int_{-inf}^x u`` and its monotone scheme.

In one dimension the density equation integrates to the degenerate
Hamilton-Jacobi-type problem ``v_t = -|v_x|^{m-1} (-Delta)^alpha v`` with
``alpha = 1 - s``.  The scheme below is monotone (nondecreasing in every
input value) under its CFL condition, so it preserves order, the range
``[0, M]`` and monotonicity in ``x``; those are the discrete stand-ins for the
comparison principle of viscosity solutions.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fracops
from .evolve import CFLViolation
from .fracops import Grid, TailSpec

log = logging.getLogger(__name__)

__all__ = [
    "IntegratedState",
    "IntegratedTrajectory",
    "MonotonicityViolation",
    "cumulative",
    "density",
    "heaviside_state",
    "integrated_operator",
    "cfl_dt_integrated",
    "step_integrated",
    "run_integrated",
    "consistency_check",
    "holder_time_modulus",
]

_BISECTION_ITERS = 60


class MonotonicityViolation(RuntimeError):
    """The integrated state stopped being nondecreasing in ``x``."""


@dataclass(frozen=True)
class IntegratedState:
    """Nondecreasing primitive sampled at the right edge of every cell."""

    grid: Grid
    v: np.ndarray
    mass: float
    alpha: float

    def __post_init__(self) -> None:
        v = self.grid.check(self.v)
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "v", v)

    def is_monotone(self, slack: float = 1e-10) -> bool:
        return bool(np.all(np.diff(self.v) >= -slack * max(self.mass, 1e-300)))

    def in_range(self, slack: float = 1e-10) -> bool:
        tol = slack * max(self.mass, 1e-300)
        return bool(self.v.min() >= -tol and self.v.max() <= self.mass + tol)


def cumulative(u: np.ndarray, grid: Grid, alpha: float) -> IntegratedState:
    """Prefix sums ``v_i = h sum_{k <= i} u_k``."""
    u = grid.check(u)
    if np.any(u < 0.0):
        raise ValueError("cumulative expects a nonnegative density")
    v = np.cumsum(u) * grid.h
    return IntegratedState(grid, v, float(v[-1]) if v.size else 0.0, alpha)


def density(state: IntegratedState) -> np.ndarray:
    """Backward differences of ``v`` divided by ``h`` (inverse of :func:`cumulative`)."""
    return np.diff(state.v, prepend=0.0) / state.grid.h


def heaviside_state(grid: Grid, alpha: float, mass: float = 1.0, jump: float = 0.0) -> IntegratedState:
    """Step from 0 to ``mass`` at the first cell edge at or right of ``jump``."""
    edges = grid.x + 0.5 * grid.h
    v = np.where(edges >= jump - 1e-12 * grid.h, mass, 0.0)
    return IntegratedState(grid, v, mass, alpha)


@lru_cache(maxsize=16)
def integrated_operator(grid: Grid, alpha: float) -> fracops.OperatorKernel:
    """Quadrature ``(-Delta)^alpha`` with zero continuation left and flat right."""
    return fracops.build_frac_laplacian(grid, alpha, tail_model="zero")


_TAILS = TailSpec("zero", "flat")


def _laplacian(state: IntegratedState) -> np.ndarray:
    kern = integrated_operator(state.grid, state.alpha)
    return fracops.apply(kern, state.v, tail=_TAILS)


def _slopes(v: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    padded = np.concatenate([[0.0], v, [v[-1]]])
    back = (padded[1:-1] - padded[:-2]) / h
    fwd = (padded[2:] - padded[1:-1]) / h
    return np.maximum(back, 0.0), np.maximum(fwd, 0.0)


def cfl_dt_integrated(state: IntegratedState, m: float, cfl: float = 0.5) -> float:
    """Largest ``dt`` with ``dt * max|v_x|^{m-1} * diag(L) <= cfl``."""
    if not 0.0 < cfl <= 1.0:
        raise ValueError("cfl must lie in (0, 1]")
    back, fwd = _slopes(state.v, state.grid.h)
    gmax = float(np.max(np.maximum(back, fwd))) ** (m - 1.0)
    diag = integrated_operator(state.grid, state.alpha).diag
    if gmax <= 0.0:
        return float("inf")
    return cfl / (gmax * diag)


def step_integrated(
    state: IntegratedState, m: float, dt: float, cfl: float = 1.0, check: bool = True
) -> IntegratedState:
    """One step of the locally implicit monotone scheme.

    Where ``L v > 0`` the value moves down and the backward slope is used;
    where ``L v < 0`` it moves up and the forward slope is used.  Each cell
    solves its own scalar equation, e.g. ``y = v_i - dt L_i ((y - v_{i-1})/h)^{m-1}``,
    by bisection on ``[v_{i-1}, v_i]``.  Treating the slope implicitly keeps
    the update monotone even though ``|p|^{m-1}`` is not Lipschitz at 0 when
    ``m < 2``.  The ends stay pinned at 0 and ``M``.
    """
    if not 1.0 <= m < 3.0:
        raise ValueError(f"m={m} outside [1, 3)")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    bound = cfl_dt_integrated(state, m, cfl)
    if check and dt > bound * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds the integrated-scheme bound {bound:.3e}")
    grid = state.grid
    h = grid.h
    v = state.v
    lap = _laplacian(state)
    left = np.concatenate([[0.0], v[:-1]])
    right = np.concatenate([v[1:], [state.mass]])

    down = lap > 0.0
    up = lap < 0.0
    lo = np.where(down, np.minimum(left, v), v)
    hi = np.where(up, np.maximum(right, v), v)
    coef = dt * np.abs(lap)
    expo = m - 1.0

    def residual(y):
        g_down = np.maximum(y - left, 0.0) / h
        g_up = np.maximum(right - y, 0.0) / h
        return np.where(
            down, y - v + coef * g_down**expo, np.where(up, y - v - coef * g_up**expo, 0.0)
        )

    a, b = lo.copy(), hi.copy()
    for _ in range(_BISECTION_ITERS):
        mid = 0.5 * (a + b)
        r = residual(mid)
        pos = r > 0.0
        b = np.where(pos, mid, b)
        a = np.where(pos, a, mid)
    new = np.where(down | up, 0.5 * (a + b), v)
    new[0] = v[0]
    new[-1] = state.mass
    out = IntegratedState(grid, new, state.mass, state.alpha)
    if check and not out.is_monotone():
        worst = int(np.argmin(np.diff(new)))
        raise MonotonicityViolation(f"v decreases between cells {worst} and {worst + 1}")
    return out


@dataclass
class IntegratedTrajectory:
    grid: Grid
    m: float
    alpha: float
    mass: float
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0

    def as_array(self) -> np.ndarray:
        return np.vstack(self.states)

    def __len__(self) -> int:
        return len(self.times)


def run_integrated(
    state: IntegratedState,
    m: float,
    t_end: float,
    snapshot_every: float,
    cfl: float = 0.5,
    dt_max: float = 1e-2,
    snapshot_times=None,
) -> IntegratedTrajectory:
    """Integrate the primitive to ``t_end``; snapshots at multiples of ``snapshot_every``.

    ``snapshot_times`` overrides the uniform schedule (strictly increasing,
    positive, the last one ``t_end``).
    """
    traj = IntegratedTrajectory(state.grid, m, state.alpha, state.mass)
    traj.times.append(0.0)
    traj.states.append(state.v.copy())
    if snapshot_times is None:
        count = max(1, int(np.ceil(t_end / snapshot_every - 1e-9)))
        snapshot_times = [min((k + 1) * snapshot_every, t_end) for k in range(count)]
    t = 0.0
    for t_snap in snapshot_times:
        while t < t_snap * (1.0 - 1e-14):
            dt = min(cfl_dt_integrated(state, m, cfl), dt_max, t_snap - t)
            state = step_integrated(state, m, dt, cfl=cfl)
            t = t_snap if t + dt >= t_snap * (1.0 - 1e-14) else t + dt
            traj.steps += 1
        t = t_snap
        traj.times.append(t)
        traj.states.append(state.v.copy())
    return traj


def consistency_check(u_traj, v_traj: IntegratedTrajectory) -> dict:
    """Compare the primitive of the density run with the integrated run.

    Returns ``max_t |cumulative(u(t)) - v(t)|_inf / M`` together with the
    per-snapshot series.
    """
    if u_traj.grid != v_traj.grid:
        raise ValueError("trajectories live on different grids")
    if len(u_traj.times) != len(v_traj.times) or not np.allclose(u_traj.times, v_traj.times):
        raise ValueError("trajectories have different snapshot times")
    mass = v_traj.mass
    if mass <= 0.0:
        return {"max_rel": 0.0, "series": [0.0] * len(v_traj.times)}
    series = []
    for u, v in zip(u_traj.snapshots, v_traj.states):
        prim = np.cumsum(u) * u_traj.grid.h
        series.append(float(np.max(np.abs(prim - v)) / mass))
    return {"max_rel": max(series), "series": series}


FLAT = "flat"


def holder_time_modulus(v_traj: IntegratedTrajectory, skip_first: bool = True):
    """Log-log fit of ``sup_x |v(t1) - v(t0)|`` against ``|t1 - t0|`` over all pairs.

    Returns the fitted exponent, or the string ``"flat"`` when the state does
    not move.  With ``skip_first`` the ``t = 0`` slice is left out, because a
    jump datum makes the first increments reflect the initial layer.
    """
    if len(v_traj.times) < 8:
        raise ValueError("need at least 8 snapshots")
    times = np.asarray(v_traj.times)
    states = v_traj.as_array()
    start = 1 if skip_first else 0
    dts, dvs = [], []
    for i, j in itertools.combinations(range(start, len(times)), 2):
        dv = float(np.max(np.abs(states[j] - states[i])))
        dts.append(times[j] - times[i])
        dvs.append(dv)
    dvs = np.asarray(dvs)
    scale = max(v_traj.mass, 1e-300)
    if np.all(dvs <= 1e-14 * scale):
        return FLAT
    keep = dvs > 1e-14 * scale
    slope, _ = np.polyfit(np.log(np.asarray(dts)[keep]), np.log(dvs[keep]), 1)
    return float(slope)
