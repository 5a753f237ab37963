"""Reference solutions used to anchor the solver.

* the linear limit ``m -> 1``, where the flow is the fractional heat equation
  ``u_t = -(-Delta)^{1-s} u`` and has an exact Fourier solution;
* the explicit algebraic self-similar profile available at the special
  exponent ``m_ex(s) = (6s - 1)/(1 + 2s)``;
* the ``m = 2`` model, checked against its known invariants.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft
from scipy.special import gamma as gamma_fn

from . import diagnostics, fracops
from .evolve import SimParams, Trajectory, run
from .fracops import Grid

log = logging.getLogger(__name__)

__all__ = [
    "ReferenceCase",
    "fractional_heat_reference",
    "m_ex",
    "self_similar_rate",
    "huang_lambda",
    "huang_profile",
    "huang_stationary_residual",
    "self_similar_decay_check",
    "near_linear_check",
    "cv_regression",
    "reference_cases",
    "run_validation",
    "write_report",
]


def fractional_heat_reference(u0: np.ndarray, grid: Grid, s: float, t: float, pad: int = 8) -> np.ndarray:
    """Exact solution of ``u_t = -(-Delta)^{1-s} u`` on the line, sampled on ``grid``.

    ``u0`` is zero-padded to ``pad`` times its length so the periodic images
    of the FFT are far away.  The zero mode is untouched, so mass is kept.
    """
    u0 = grid.check(u0)
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return u0.copy()
    size = fft.next_fast_len(max(2, pad) * grid.n)
    freq = 2.0 * np.pi * fft.rfftfreq(size, grid.h)
    spec = fft.rfft(u0, size) * np.exp(-t * freq ** (2.0 * (1.0 - s)))
    return fft.irfft(spec, size)[: grid.n]


def m_ex(s: float) -> float:
    """Exponent with an explicit algebraic self-similar profile in one dimension."""
    return (6.0 * s - 1.0) / (1.0 + 2.0 * s)


def self_similar_rate(m: float, s: float) -> float:
    """Mass-preserving decay rate ``1/(m + 1 - 2s)`` of ``|u(t)|_inf``."""
    return 1.0 / (m + 1.0 - 2.0 * s)


def huang_lambda(R: float, s: float) -> float:
    """Amplitude making ``lambda (R^2 + x^2)^{-(1+2s)/2}`` the profile at time 1.

    The profile must satisfy ``d/dx K_s F = -rate * x F^{2-m}``; with
    ``K_s (R^2+x^2)^{-(1+2s)/2}`` proportional to ``(R^2+x^2)^{(2s-1)/2}`` this
    fixes ``lambda^{m-1} = rate * c R^{2s} / (1 - 2s)`` with
    ``c = 4^s Gamma((1+2s)/2) / Gamma((1-2s)/2)``.
    """
    m = m_ex(s)
    if not 1.0 < m < 3.0 or s == 0.5:
        raise ValueError(f"no algebraic profile with 1 < m_ex < 3 at s={s}")
    c = 4.0**s * gamma_fn((1.0 + 2.0 * s) / 2.0) / gamma_fn((1.0 - 2.0 * s) / 2.0)
    base = self_similar_rate(m, s) * c * R ** (2.0 * s) / (1.0 - 2.0 * s)
    if base <= 0.0:
        raise ValueError(f"profile amplitude is not real at s={s}")
    return base ** (1.0 / (m - 1.0))


def huang_profile(lam: float, R: float, s: float, x) -> np.ndarray:
    """``lam (R^2 + x^2)^{-(1+2s)/2}``."""
    if lam <= 0.0 or R <= 0.0:
        raise ValueError("lambda and R must be positive")
    x = np.asarray(x, dtype=float)
    return lam * (R * R + x * x) ** (-(1.0 + 2.0 * s) / 2.0)


def huang_stationary_residual(s: float, R: float = 1.0, box: float = 200.0, n: int = 8192, window: float = 10.0) -> float:
    """Relative residual of the profile equation on ``|x| <= window`` (spectral pressure)."""
    grid = Grid(-box, box, n)
    m = m_ex(s)
    F = huang_profile(huang_lambda(R, s), R, s, grid.x)
    grad = fracops.apply(fracops.spectral_grad_riesz(grid, s), F)
    want = -self_similar_rate(m, s) * grid.x * F ** (2.0 - m)
    mask = np.abs(grid.x) <= window
    return float(np.max(np.abs(grad - want)[mask]) / np.max(np.abs(want)))


def self_similar_decay_check(traj: Trajectory, s: float, t_shift: float = 1.0, skip: int = 2, span: float = 20.0) -> dict:
    """Fit the decay rate and measure the collapse of rescaled snapshots.

    The run is assumed to start from the self-similar profile at time
    ``t_shift``; snapshot ``k`` is rescaled as ``T^a u(y T^a)`` with
    ``T = t_k + t_shift`` and ``a`` the predicted rate.  The collapse is the
    largest pairwise L1 distance after the first ``skip`` snapshots,
    relative to the L1 norm of the first rescaled profile.
    """
    m = traj.params.m
    rate = self_similar_rate(m, s)
    times = np.asarray(traj.times) + t_shift
    if len(times) - skip < 3 or times[-1] / times[skip] < 2.0:
        raise ValueError("insufficient decay window for a rate fit")
    peaks = np.array([float(u.max()) for u in traj.snapshots])
    slope = np.polyfit(np.log(times[skip:]), np.log(peaks[skip:]), 1)[0]
    x = traj.grid.x
    width = span * max(float(np.sum(traj.snapshots[0]) * traj.grid.h / (2.0 * peaks[0])), traj.grid.h)
    y = np.linspace(-width, width, 2001)
    prof = [T**rate * np.interp(y * T**rate, x, u) for T, u in zip(times, traj.snapshots)]
    norm = float(np.trapezoid(np.abs(prof[0]), y))
    pairs = itertools.combinations(range(skip, len(prof)), 2)
    collapse = max(float(np.trapezoid(np.abs(prof[i] - prof[j]), y)) / norm for i, j in pairs)
    fitted = -float(slope)
    return {
        "fitted_rate": fitted,
        "predicted_rate": rate,
        "rate_rel_error": abs(fitted - rate) / rate,
        "collapse": collapse,
    }


def near_linear_check(
    s: float, n: int = 2048, half_width: float = 24.0, t: float = 0.5, m: float = 1.0001, dt_max: float = 2e-4
) -> dict:
    """Run the solver close to the linear limit and compare with the exact heat flow.

    Returns the L2 error relative to ``|u0|_2`` for a unit Gaussian.
    """
    grid = Grid(-half_width, half_width, n)
    u0 = np.exp(-grid.x**2)
    params = SimParams(m=m, s=s, grid=grid, t_end=t, snapshot_every=t, dt_max=dt_max)
    traj = run(u0, params)
    ref = fractional_heat_reference(u0, grid, s, t)
    err = float(np.linalg.norm(traj.final() - ref) / np.linalg.norm(u0))
    return {"error": err, "steps": traj.steps, "traj": traj, "reference": ref}


def cv_regression(u0: np.ndarray, grid: Grid, s: float = 0.25, t_end: float = 0.5, snapshots: int = 64, cfl: float = 0.4) -> dict:
    """The ``m = 2`` invariant suite: mass, ``L^inf`` decay and finite propagation."""
    params = SimParams(m=2.0, s=s, grid=grid, t_end=t_end, snapshot_every=t_end / snapshots, cfl=cfl)
    traj = run(u0, params)
    sup = np.array([u.max() for u in traj.snapshots])
    trace = diagnostics.front_trace(traj)
    predicted = 1.0 / (2.0 - 2.0 * s)
    fitted = trace.fitted_exponent
    exponent_ok = isinstance(fitted, float) and abs(fitted - predicted) <= 0.15 * predicted
    return {
        "mass_drift": traj.mass_drift(),
        "linf_nonincreasing": bool(np.all(np.diff(sup) <= 1e-12)),
        "front_bound_holds": bool(trace.bound_holds),
        "fitted_exponent": fitted,
        "predicted_exponent": predicted,
        "exponent_ok": bool(exponent_ok),
        "passed": bool(traj.mass_drift() <= 1e-10 and np.all(np.diff(sup) <= 1e-12) and trace.bound_holds and exponent_ok),
    }


@dataclass
class ReferenceCase:
    """A named comparison against a known solution."""

    name: str
    params: dict
    exact_solution: Callable[[np.ndarray, float], np.ndarray] | None
    norm: str
    tolerance: float
    runner: Callable[[], float] = field(repr=False, default=None)

    def initial_identity(self, x: np.ndarray, u0: np.ndarray) -> bool:
        if self.exact_solution is None:
            return True
        return bool(np.array_equal(self.exact_solution(x, 0.0), u0))


def _heat_case(s: float, half_width: float) -> ReferenceCase:
    grid = Grid(-half_width, half_width, 2048)

    def exact(x, t):
        return fractional_heat_reference(np.exp(-x**2), grid, s, t)

    return ReferenceCase(
        name=f"fractional_heat_s{s:g}",
        params={"m": 1.0001, "s": s, "n": 2048, "half_width": half_width, "t": 0.5},
        exact_solution=exact,
        norm="L2_rel",
        tolerance=1e-3,
        runner=lambda: near_linear_check(s, half_width=half_width)["error"],
    )


def _huang_case(s: float = 0.75) -> ReferenceCase:
    lam = huang_lambda(1.0, s)

    def exact(x, t):
        T = 1.0 + t
        a = self_similar_rate(m_ex(s), s)
        return T ** (-a) * huang_profile(lam, 1.0, s, np.asarray(x) * T ** (-a))

    def runner():
        grid = Grid(-200.0, 200.0, 4096)
        params = SimParams(m=m_ex(s), s=s, grid=grid, t_end=10.0, snapshot_every=1.0)
        traj = run(exact(grid.x, 0.0), params)
        return self_similar_decay_check(traj, s)["collapse"]

    return ReferenceCase(
        name=f"self_similar_collapse_s{s:g}",
        params={"m": m_ex(s), "s": s, "n": 4096, "half_width": 200.0, "t_end": 10.0},
        exact_solution=exact,
        norm="L1_pairwise_rel",
        tolerance=0.05,
        runner=runner,
    )


def reference_cases() -> list[ReferenceCase]:
    return [_heat_case(0.25, 24.0), _heat_case(0.5, 64.0), _huang_case(0.75)]


def write_report(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["case", "norm", "error", "tolerance", "pass"])
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "error": f"{row['error']:.6e}", "tolerance": f"{row['tolerance']:.3e}"})
    return path


def run_validation(out_csv: str | Path | None = None, cases: list[ReferenceCase] | None = None) -> list[dict]:
    """Run every reference case; optionally write the CSV report."""
    rows = []
    for case in cases or reference_cases():
        try:
            err = float(case.runner())
        except Exception as exc:  # a failing case is a finding, not a crash
            log.error("case %s failed: %s", case.name, exc)
            err = math.inf
        rows.append(
            {"case": case.name, "norm": case.norm, "error": err, "tolerance": case.tolerance, "pass": err <= case.tolerance}
        )
        log.info("%s: %s = %.3e (tol %.1e)", case.name, case.norm, err, case.tolerance)
    if out_csv is not None:
        write_report(rows, out_csv)
    return rows
