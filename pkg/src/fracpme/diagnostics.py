"""Scalar functionals, energy bookkeeping and front/tail measurements on trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from . import fracops
from .evolve import Trajectory
from .fracops import Grid

__all__ = [
    "EnergyReport",
    "FrontTrace",
    "INSUFFICIENT_MOTION",
    "FLAT",
    "f_mu_density",
    "f_mu_integral",
    "hs_energy",
    "energy_reports",
    "first_energy_residual",
    "second_energy_check",
    "sign_of_u3m_drift",
    "front_trace",
    "tail_probe",
    "self_similar_exponents",
    "classify_propagation",
]

INSUFFICIENT_MOTION = "insufficient motion"
FLAT = "flat"


@dataclass
class EnergyReport:
    t: float
    mass: float
    linf: float
    lp: dict
    f_mu: float
    hs_sq: float
    diss_grad_hs: float
    diss_pressure: float


@dataclass
class FrontTrace:
    threshold: float
    times: np.ndarray
    left_edge: np.ndarray
    right_edge: np.ndarray
    r0: float
    predicted_exponent: float
    fitted_exponent: float | str = INSUFFICIENT_MOTION
    bound_constant: float | None = None
    bound_holds: bool | None = None
    window: list = field(default_factory=list)


# ---------------------------------------------------------------- first energy


def f_mu_density(u, m: float, mu: float):
    """Pointwise ``F_mu(u)`` with ``F'' = 1/d_mu`` and ``F(0) = F'(0) = 0``.

    With ``mu = 0`` and ``2 < m < 3`` the linear term ``-mu^{2-m} u/(2-m)`` is
    infinite; it only shifts the integral by a multiple of the conserved mass,
    so it is dropped.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise ValueError("F_mu is evaluated on nonnegative densities")
    if m in (2.0, 3.0) and mu <= 0.0:
        raise ValueError(f"the m={m:g} branch of F_mu needs mu > 0")
    if m == 2.0:
        return (u + mu) * np.log1p(u / mu) - u
    if m == 3.0:
        return u / mu - np.log1p(u / mu)
    a, b = 2.0 - m, 3.0 - m
    if mu == 0.0:
        return u**b / (a * b)
    return ((u + mu) ** b - mu**b) / (a * b) - mu**a * u / a


def f_mu_integral(u: np.ndarray, grid: Grid, m: float, mu: float) -> float:
    return float(np.sum(f_mu_density(grid.check(u), m, mu)) * grid.h)


def f_mu_quadrature(func, a: float, b: float, m: float, mu: float) -> float:
    """Adaptive integral of ``F_mu(func(x))`` over ``[a, b]`` (test oracle helper)."""
    val, _ = integrate.quad(lambda x: float(f_mu_density(func(x), m, mu)), a, b, limit=400, epsabs=1e-13)
    return val


@lru_cache(maxsize=16)
def _potential(grid: Grid, s: float, eps: float) -> fracops.OperatorKernel:
    return fracops.build_potential_kernel(grid, s, eps)


def hs_energy(u: np.ndarray, grid: Grid, s: float, eps: float = 0.0) -> float:
    """``<u, K_s u>``, which equals ``int |H_s u|^2`` for ``s < 1/2``.

    For ``s >= 1/2`` the one-dimensional integral diverges for positive mass
    and the value is the renormalized one (kernel defined up to a constant);
    its time derivative is still the physical one.
    """
    u = grid.check(u)
    return float(np.sum(u * fracops.apply(_potential(grid, s, eps), u)) * grid.h)


def energy_reports(traj: Trajectory, ps: Sequence[float] = (2.0, 3.0)) -> list[EnergyReport]:
    prm = traj.params
    grid = traj.grid
    mu_ok = not (prm.m in (2.0, 3.0) and prm.mu == 0.0)
    out = []
    for k, (t, u) in enumerate(zip(traj.times, traj.snapshots)):
        out.append(
            EnergyReport(
                t=float(t),
                mass=float(u.sum() * grid.h),
                linf=float(u.max()),
                lp={p: float((np.sum(u**p) * grid.h) ** (1.0 / p)) for p in ps},
                f_mu=f_mu_integral(u, grid, prm.m, prm.mu) if mu_ok else float("nan"),
                hs_sq=hs_energy(u, grid, prm.s, prm.eps),
                diss_grad_hs=float(traj.diss_grad_hs[k]),
                diss_pressure=float(traj.diss_pressure[k]),
            )
        )
    return out


def first_energy_residual(traj: Trajectory) -> dict:
    """Closure of ``F(t) + delta D_u(t) + D_H(t) = F(0)`` along the trajectory."""
    prm = traj.params
    if not traj.diss_grad_hs:
        raise ValueError("trajectory carries no dissipation accumulators")
    grid = traj.grid
    f = np.array([f_mu_integral(u, grid, prm.m, prm.mu) for u in traj.snapshots])
    r = f + prm.delta * np.asarray(traj.diss_u) + np.asarray(traj.diss_grad_hs) - f[0]
    scale = abs(f[0])
    rel = float(np.max(np.abs(r)) / scale) if scale > 0.0 else float(np.max(np.abs(r)))
    return {"max_residual": rel, "series": r.tolist(), "f_mu": f.tolist(), "relative": scale > 0.0}


def second_energy_check(traj: Trajectory, tol: float = 0.02) -> dict:
    """``1/2 |H_s u(t)|^2 + delta D_H(t) + D_p(t) <= 1/2 |H_s u_0|^2`` with relative slack."""
    prm = traj.params
    grid = traj.grid
    hs = np.array([hs_energy(u, grid, prm.s, prm.eps) for u in traj.snapshots])
    lhs = 0.5 * hs + prm.delta * np.asarray(traj.diss_grad_hs) + np.asarray(traj.diss_pressure)
    rhs = 0.5 * hs[0]
    scale = abs(rhs)
    slack = tol * scale
    holds = bool(np.all(lhs <= rhs + slack))
    increments = np.diff(hs)
    monotone = bool(np.all(increments <= 2.0 * slack))
    return {
        "lhs": lhs.tolist(),
        "rhs": float(rhs),
        "holds": holds,
        "hs_sq": hs.tolist(),
        "hs_monotone": monotone,
        "max_excess": float(np.max(lhs - rhs) / scale) if scale > 0 else float(np.max(lhs - rhs)),
    }


def sign_of_u3m_drift(traj: Trajectory, m: float | None = None) -> dict:
    """Direction in which ``int u^{3-m}`` moves between consecutive snapshots."""
    m = traj.params.m if m is None else m
    if m in (2.0, 3.0):
        raise ValueError("the u^{3-m} functional is degenerate for m = 2 and m = 3")
    grid = traj.grid
    series = np.array([np.sum(u ** (3.0 - m)) * grid.h for u in traj.snapshots])
    diffs = np.diff(series)
    scale = max(float(np.max(np.abs(series))), 1e-300)
    moving = np.abs(diffs) > 1e-13 * scale
    if diffs.size == 0 or not moving.any():
        return {"classification": FLAT, "monotone_fraction": 1.0, "series": series.tolist()}
    dec = float(np.mean(diffs < 0.0))
    inc = float(np.mean(diffs > 0.0))
    label = "decreasing" if dec >= inc else "increasing"
    return {"classification": label, "monotone_fraction": max(dec, inc), "series": series.tolist()}


# ---------------------------------------------------------------- fronts and tails


def _edges(u: np.ndarray, grid: Grid, threshold: float) -> tuple[float, float]:
    above = np.nonzero(u > threshold)[0]
    if above.size == 0:
        return float("nan"), float("nan")
    return float(grid.x[above[0]] - 0.5 * grid.h), float(grid.x[above[-1]] + 0.5 * grid.h)


def front_trace(
    traj: Trajectory,
    threshold: float | None = None,
    skip: int = 5,
    boundary_cells: int = 10,
    min_motion_cells: float = 5.0,
) -> FrontTrace:
    """Track the outermost cells above ``threshold`` and fit their growth.

    The fit of ``log(edge - R0)`` against ``log t`` uses snapshots after the
    first ``skip`` ones, away from the box edge, where the front has moved by
    at least ``min_motion_cells`` cells.  The bound constant ``C`` is the
    largest ``(edge - R0)/t^beta`` from the start up to the middle of that window, with
    ``beta = 1/(2-2s)``; ``bound_holds`` checks every snapshot against
    ``R0 + C t^beta`` (plus one cell).
    """
    grid = traj.grid
    prm = traj.params
    u0 = traj.snapshots[0]
    if threshold is None:
        threshold = 1e-8 * float(np.max(u0)) if np.max(u0) > 0 else 1e-300
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    times = np.asarray(traj.times, dtype=float)
    lr = np.array([_edges(u, grid, threshold) for u in traj.snapshots])
    left, right = lr[:, 0], lr[:, 1]
    r0 = right[0]
    beta = 1.0 / (2.0 - 2.0 * prm.s)
    trace = FrontTrace(threshold, times, left, right, r0, beta)
    if not np.isfinite(r0):
        return trace
    h = grid.h
    limit = grid.x_max - boundary_cells * h
    moved = right - r0
    window = [
        k
        for k in range(len(times))
        if k >= skip and times[k] > 0 and right[k] <= limit and moved[k] >= min_motion_cells * h
    ]
    trace.window = window
    if len(window) < 3:
        return trace
    tw, mw = times[window], moved[window]
    slope, _ = np.polyfit(np.log(tw), np.log(mw), 1)
    trace.fitted_exponent = float(slope)
    # the bound constant comes from every positive time up to the middle of
    # the fit window; the second half of the run is then a genuine check
    cutoff = times[window[max(0, len(window) // 2 - 1)]]
    head = (times > 0) & (times <= cutoff) & np.isfinite(moved)
    C = float(np.max(moved[head] / times[head] ** beta))
    trace.bound_constant = C
    positive = times > 0
    bound = r0 + C * np.where(positive, times, 0.0) ** beta + h
    trace.bound_holds = bool(np.all(right[positive] <= bound[positive]))
    return trace


def tail_probe(
    u: np.ndarray,
    grid: Grid,
    region: tuple[float, float],
    scale: float | None = None,
    fit: bool = False,
) -> dict:
    """Extrema of ``u`` over ``region`` and a positivity flag.

    ``positivity_flag`` means every sample in the region exceeds
    ``100 * unit_roundoff * scale`` (``scale`` defaults to ``max|u|``).  With
    ``fit=True`` the slope of ``log u`` against ``log |x|`` is returned too.
    """
    u = grid.check(u)
    a, b = sorted(region)
    if a < grid.x_min or b > grid.x_max:
        raise ValueError(f"region {region} leaves the grid [{grid.x_min}, {grid.x_max}]")
    mask = (grid.x >= a) & (grid.x <= b)
    if not mask.any():
        raise ValueError("region contains no grid nodes")
    vals = u[mask]
    if scale is None:
        scale = float(np.max(np.abs(u)))
    floor = 100.0 * np.finfo(float).eps * scale
    out = {
        "min": float(vals.min()),
        "max": float(vals.max()),
        "floor": float(floor),
        "positivity_flag": bool(vals.min() > floor),
    }
    if fit:
        xs = np.abs(grid.x[mask])
        good = (vals > floor) & (xs > 0)
        if good.sum() >= 3:
            slope, _ = np.polyfit(np.log(xs[good]), np.log(vals[good]), 1)
            out["tail_exponent"] = float(-slope)
        else:
            out["tail_exponent"] = None
    return out


def self_similar_exponents(m: float, alpha: float) -> dict:
    """Time exponent ``b`` and tail exponent ``gamma`` of the primitive's scaling solutions."""
    b = 1.0 / (m - 1.0 + 2.0 * alpha)
    gamma = (2.0 * alpha + m) / (2.0 - m) if m < 2.0 else math.inf
    return {"b": b, "gamma": gamma}


def classify_propagation(
    u_traj: Trajectory,
    v_states: Sequence[np.ndarray] | None = None,
    v_times: Sequence[float] | None = None,
    probe_factor: float = 2.0,
) -> dict:
    """Label a run ``finite``, ``infinite`` or ``indeterminate``.

    ``infinite``: the primitive is strictly positive at ``-probe_factor R0``
    and ``1 - v/M`` is positive at ``+probe_factor R0`` at every snapshot after
    the start.  ``finite``: the front bound holds and neither probe is
    positive at the final snapshot.
    """
    grid = u_traj.grid
    u0 = u_traj.snapshots[0]
    mass = float(u0.sum() * grid.h)
    left0, right0 = _edges(u0, grid, 1e-8 * float(np.max(u0)))
    r0 = max(abs(left0), abs(right0))
    if v_states is None:
        v_states = [np.cumsum(u) * grid.h for u in u_traj.snapshots]
        v_times = u_traj.times
    xl, xr = -probe_factor * r0, probe_factor * r0
    il = int(np.clip(np.searchsorted(grid.x + 0.5 * grid.h, xl), 0, grid.n - 1))
    ir = int(np.clip(np.searchsorted(grid.x + 0.5 * grid.h, xr), 0, grid.n - 1))
    floor = 100.0 * np.finfo(float).eps * mass
    pos = []
    for t, v in zip(v_times, v_states):
        if t <= 0:
            continue
        pos.append(bool(v[il] > floor and (mass - v[ir]) > floor))
    trace = front_trace(u_traj)
    if pos and all(pos):
        label = "infinite"
    elif trace.bound_holds and pos and not pos[-1]:
        label = "finite"
    else:
        label = "indeterminate"
    return {
        "label": label,
        "positivity": pos,
        "front_exponent": trace.fitted_exponent,
        "front_bound_holds": trace.bound_holds,
        "r0": r0,
    }
