"""Explicit conservative time stepping for the regularized nonlocal porous medium flow.

The density obeys ``u_t = delta u_xx + (d_mu(u) p_x)_x`` with ``p = K_s^eps[u]``.
Space is a finite-volume grid: the pressure gradient lives on cell
interfaces, the mobility is taken from the upwind cell, and a cell can never
export more than it holds, so the update is conservative and nonnegative.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import fracops
from .fracops import Grid

log = logging.getLogger(__name__)

__all__ = [
    "SimParams",
    "Trajectory",
    "StepInfo",
    "CFLViolation",
    "NonFiniteState",
    "mobility",
    "pressure_gradient",
    "step",
    "advance",
    "cfl_dt",
    "run",
    "regularization_sweep",
]


class CFLViolation(ValueError):
    """Raised when a step is requested with a time step above the stability bound."""


class NonFiniteState(FloatingPointError):
    """Raised when a step produces NaN or inf; carries the first bad cell."""

    def __init__(self, cell: int, t: float | None = None):
        self.cell = cell
        self.t = t
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"non-finite density in cell {cell}{where}")


@dataclass(frozen=True)
class SimParams:
    """Physical, regularization and time-stepping parameters of one run."""

    m: float
    s: float
    grid: Grid
    t_end: float
    eps: float = 0.0
    delta: float = 0.0
    mu: float = 0.0
    cfl: float = 0.4
    snapshot_every: float = 0.1
    dt_max: float = 1e-2
    linear_override: bool = False

    def __post_init__(self) -> None:
        lo_ok = self.m > 1.0 or (self.linear_override and self.m >= 1.0)
        if not (lo_ok and self.m < 3.0):
            raise ValueError(
                f"m={self.m} outside the existence range 1 < m < 3 "
                "(m = 1 needs linear_override=True)"
            )
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s={self.s} must lie in (0, 1)")
        for name in ("eps", "delta", "mu"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.t_end < 0.0 or self.snapshot_every <= 0.0 or self.dt_max <= 0.0:
            raise ValueError("need t_end >= 0, snapshot_every > 0, dt_max > 0")

    def with_(self, **changes) -> "SimParams":
        return replace(self, **changes)


@dataclass
class StepInfo:
    """Bookkeeping produced by one explicit step."""

    dt: float
    outflow: float = 0.0
    clipped: float = 0.0
    limited_cells: int = 0


@dataclass
class Trajectory:
    """Snapshots of a run together with time-integrated dissipation.

    Every per-snapshot series has one entry per snapshot; cumulative
    quantities are integrated with the trapezoid rule over every step.
    """

    params: SimParams
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diss_grad_hs: list = field(default_factory=list)
    diss_pressure: list = field(default_factory=list)
    diss_u: list = field(default_factory=list)
    outflow: list = field(default_factory=list)
    clipped: list = field(default_factory=list)
    steps: int = 0
    limited_steps: int = 0
    error: str | None = None

    @property
    def grid(self) -> Grid:
        return self.params.grid

    def __len__(self) -> int:
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.vstack(self.snapshots) if self.snapshots else np.zeros((0, self.grid.n))

    def masses(self) -> np.ndarray:
        return self.as_array().sum(axis=1) * self.grid.h

    def mass_drift(self) -> float:
        """Largest relative change of mass once boundary outflow is added back."""
        mass = self.masses()
        if mass.size == 0 or mass[0] == 0.0:
            return 0.0
        return float(np.max(np.abs(mass + np.asarray(self.outflow) - mass[0])) / mass[0])

    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def mobility(u_value, m: float, mu: float):
    """Regularized mobility ``(u + mu)^{m-1}``."""
    u_arr = np.asarray(u_value, dtype=float)
    if np.any(u_arr < 0.0):
        raise ValueError("mobility is defined for nonnegative densities only")
    out = (u_arr + mu) ** (m - 1.0)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=32)
def _grad_kernel(grid: Grid, s: float, eps: float) -> fracops.OperatorKernel:
    return fracops.build_grad_riesz(grid, s, eps)


def pressure_gradient(u: np.ndarray, params: SimParams) -> np.ndarray:
    """``(K_s^eps u)_x`` on the ``n+1`` cell interfaces."""
    return fracops.interface_values(_grad_kernel(params.grid, params.s, params.eps), u)


def _self_coupling(params: SimParams) -> float:
    """Diagonal coefficient of ``-(g_{i+1/2} - g_{i-1/2})/h`` in ``u_i``."""
    kern = _grad_kernel(params.grid, params.s, params.eps)
    w, n = kern.weights, params.grid.n
    return float(abs(w[n - 1] - w[n]) / params.grid.h)


def _mobility_lipschitz(u: np.ndarray, params: SimParams) -> float:
    m, mu = params.m, params.mu
    umax = float(np.max(u)) if u.size else 0.0
    if m == 1.0 or umax <= 0.0:
        return 0.0
    if m >= 2.0:
        return (m - 1.0) * (umax + mu) ** (m - 2.0)
    # the mobility is not Lipschitz at 0 for m < 2; the flux limiter covers
    # the tiny densities and the bound is taken at one percent of the peak
    return (m - 1.0) * (1e-2 * umax + mu) ** (m - 2.0)


def cfl_dt(u: np.ndarray, params: SimParams, grad: np.ndarray | None = None, parts: bool = False):
    """Stable explicit time step.

    The bound sums three rates: diffusion ``2 delta/h^2``, the self-coupling
    of the nonlocal term ``max d * stiffness``, and upwind transport
    ``Lip(d) max|p_x| / h``.  With ``parts=True`` the individual rates are
    returned as well.
    """
    grid = params.grid
    u = grid.check(u)
    if grad is None:
        grad = pressure_gradient(u, params)
    h = grid.h
    gmax = float(np.max(np.abs(grad)))
    dmax = float(mobility(max(float(np.max(u)), 0.0), params.m, params.mu)) if u.size else 0.0
    if params.m == 1.0:
        dmax = 1.0
    rates = {
        "diffusion": 2.0 * params.delta / h**2,
        "nonlocal": dmax * _self_coupling(params),
        "transport": _mobility_lipschitz(u, params) * gmax / h,
    }
    total = sum(rates.values())
    dt = params.dt_max if total <= 0.0 else min(params.dt_max, params.cfl / total)
    return (dt, rates) if parts else dt


def _fluxes(u: np.ndarray, grad: np.ndarray, params: SimParams) -> tuple[np.ndarray, np.ndarray]:
    """Upwind interface fluxes ``d(u_up) p_x`` and the upwind cell index."""
    n = u.size
    k = np.arange(n + 1)
    upwind = np.where(grad > 0.0, k, k - 1)  # velocity is -p_x
    ghost = (upwind < 0) | (upwind >= n)
    u_up = np.where(ghost, 0.0, u[np.clip(upwind, 0, n - 1)])
    flux = mobility(u_up, params.m, params.mu) * grad
    # boundary interfaces only let mass out of the box: inflow from a ghost is dropped
    flux[ghost] = 0.0
    return flux, upwind


def advance(
    u: np.ndarray, params: SimParams, dt: float, grad: np.ndarray | None = None, check_cfl: bool = True
) -> tuple[np.ndarray, StepInfo]:
    """One forward-Euler step; returns the new field and its bookkeeping."""
    grid = params.grid
    u = grid.check(u)
    n, h = grid.n, grid.h
    if grad is None:
        grad = pressure_gradient(u, params)
    if check_cfl:
        bound = cfl_dt(u, params, grad)
        if dt > bound * (1.0 + 1e-12):
            raise CFLViolation(f"dt={dt:.3e} exceeds the stability bound {bound:.3e}")
    flux, upwind = _fluxes(u, grad, params)
    lam = params.delta * dt / h**2

    # positivity: a cell may not export more than it holds after diffusion
    out_rate = np.zeros(n)
    np.add.at(out_rate, np.clip(upwind, 0, n - 1), np.where((upwind >= 0) & (upwind < n), np.abs(flux), 0.0))
    budget = np.maximum(u * (1.0 - 2.0 * lam), 0.0) * h / dt
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(out_rate > budget, budget / out_rate, 1.0)
    limited = int(np.count_nonzero(theta < 1.0))
    if limited:
        valid = (upwind >= 0) & (upwind < n)
        flux = flux * np.where(valid, theta[np.clip(upwind, 0, n - 1)], 1.0)

    new = u + (dt / h) * (flux[1:] - flux[:-1])
    outflow = dt * (flux[0] - flux[-1])
    if lam > 0.0:
        padded = np.concatenate([[0.0], u, [0.0]])
        new += lam * (padded[2:] - 2.0 * u + padded[:-2])
        outflow += lam * h * (u[0] + u[-1])

    bad = ~np.isfinite(new)
    if bad.any():
        raise NonFiniteState(int(np.argmax(bad)))
    neg = new < 0.0
    clipped = 0.0
    if neg.any():
        clipped = float(-new[neg].sum() * h)
        new[neg] = 0.0
    return new, StepInfo(dt=dt, outflow=float(outflow), clipped=clipped, limited_cells=limited)


def step(u: np.ndarray, params: SimParams, dt: float) -> np.ndarray:
    """Advance ``u`` by ``dt`` (must respect :func:`cfl_dt`)."""
    return advance(u, params, dt)[0]


def _rates(u: np.ndarray, grad: np.ndarray, params: SimParams) -> tuple[float, float, float]:
    """Instantaneous dissipation rates for the accumulators.

    ``sum g (Du) h`` is the discrete ``int |(H_s u)_x|^2`` obtained by summation
    by parts with the same interface gradient the step uses.
    """
    h = params.grid.h
    padded = np.concatenate([[0.0], u, [0.0]])
    du = np.diff(padded) / h
    grad_hs = float(np.sum(grad * du) * h)
    flux, _ = _fluxes(u, grad, params)
    pressure = float(np.sum(flux * grad) * h)
    diss_u = 0.0
    if params.delta > 0.0 and params.mu > 0.0:
        mid = 0.5 * (padded[1:] + padded[:-1])
        diss_u = float(np.sum(du**2 / mobility(mid, params.m, params.mu)) * h)
    return grad_hs, pressure, diss_u


def run(u0: np.ndarray, params: SimParams, max_steps: int = 10_000_000) -> Trajectory:
    """Integrate from ``u0`` to ``params.t_end`` with adaptive steps.

    Snapshots are taken at exact multiples of ``snapshot_every`` (and at
    ``t_end``).  On a step error the trajectory keeps every snapshot taken so
    far and records the message in ``error``.
    """
    grid = params.grid
    u = grid.check(u0).copy()
    if np.any(u < 0.0):
        raise ValueError("initial datum must be nonnegative")
    if not np.all(np.isfinite(u)):
        raise ValueError("initial datum must be finite")
    traj = Trajectory(params)
    acc = np.zeros(5)  # grad_hs, pressure, diss_u, outflow, clipped

    def record(t: float, state: np.ndarray) -> None:
        traj.times.append(t)
        traj.snapshots.append(state.copy())
        traj.diss_grad_hs.append(acc[0])
        traj.diss_pressure.append(acc[1])
        traj.diss_u.append(acc[2])
        traj.outflow.append(acc[3])
        traj.clipped.append(acc[4])

    t = 0.0
    record(t, u)
    grad = pressure_gradient(u, params)
    rates = np.array(_rates(u, grad, params))
    k_next = 1
    t_end = params.t_end
    while t < t_end * (1.0 - 1e-14) and traj.steps < max_steps:
        t_snap = min(k_next * params.snapshot_every, t_end)
        dt = min(cfl_dt(u, params, grad), t_snap - t)
        try:
            u, info = advance(u, params, dt, grad, check_cfl=False)
        except NonFiniteState as exc:
            exc.t = t
            traj.error = str(exc)
            log.error("run aborted: %s", exc)
            break
        t = t_snap if t + dt >= t_snap * (1.0 - 1e-14) else t + dt
        traj.steps += 1
        traj.limited_steps += bool(info.limited_cells)
        grad = pressure_gradient(u, params)
        new_rates = np.array(_rates(u, grad, params))
        acc[:3] += 0.5 * dt * (rates + new_rates)
        acc[3] += info.outflow
        acc[4] += info.clipped
        rates = new_rates
        if t >= t_snap * (1.0 - 1e-14):
            t = t_snap
            record(t, u)
            k_next += 1
    else:
        if traj.steps >= max_steps and t < t_end:
            traj.error = f"step budget {max_steps} exhausted at t={t:.6g}"
    if acc[3] > 0.0:
        log.info("boundary outflow %.3e over the run", acc[3])
    if acc[4] > 0.0:
        log.info("clipped negative mass %.3e over the run", acc[4])
    return traj


def _embed(u: np.ndarray, src: Grid, dst: Grid) -> np.ndarray:
    """Zero-pad a field from ``src`` onto an enlarged ``dst`` with the same cell width."""
    if src == dst:
        return u
    if not math.isclose(src.h, dst.h, rel_tol=1e-12):
        raise ValueError("grid enlargement must keep the cell width")
    offset = round((src.x_min - dst.x_min) / dst.h)
    if offset < 0 or offset + src.n > dst.n:
        raise ValueError("enlarged grid must contain the original one")
    out = np.zeros(dst.n)
    out[offset : offset + src.n] = u
    return out


def regularization_sweep(
    u0: np.ndarray, base: SimParams, ladder: Sequence[dict]
) -> tuple[list[Trajectory], list[float]]:
    """Run a sequence of parameter sets and report successive final-time L1 gaps.

    ``ladder`` entries override fields of ``base``; the intended order removes
    the regularizations as eps, then the box (``grid``), then mu, then delta.
    When an entry enlarges the grid, the datum is zero-padded onto it and
    earlier final states are compared on the larger grid.
    """
    trajs: list[Trajectory] = []
    gaps: list[float] = []
    for rung in ladder:
        params = base.with_(**rung)
        start = _embed(u0, base.grid, params.grid)
        traj = run(start, params)
        if trajs:
            prev = trajs[-1]
            a = _embed(prev.final(), prev.grid, params.grid)
            gaps.append(float(np.sum(np.abs(traj.final() - a)) * params.grid.h))
        trajs.append(traj)
    return trajs, gaps
