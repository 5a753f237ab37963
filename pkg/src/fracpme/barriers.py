"""Explicit barrier functions and numerical checks that solutions stay on one side of them.

Three families are provided:

* exponential tails ``A exp(Ct - a|x|) + h A exp(eta t)`` bounding densities from above;
* moving parabolas ``a (Ct - (|x| - b))^2`` bounding the support from outside;
* power-law lower barriers for the primitive ``v``,
  ``(t+1)^{b gamma} ((|x| + xi)^{-gamma} + G(x)) - eps``, with ``G`` a dilated
  smooth bump whose fractional Laplacian is strongly negative away from it.

Each ``verify_*`` scans a trajectory and returns ``None`` when the ordering
holds or the first :class:`Violation` otherwise.  Broken preconditions raise
:class:`BarrierPreconditionError` instead of producing a verdict.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fracops
from .evolve import Trajectory, pressure_gradient
from .fracops import Grid, TailSpec

log = logging.getLogger(__name__)

__all__ = [
    "BarrierSpec",
    "GSpec",
    "Violation",
    "BarrierPreconditionError",
    "exp_tail_spec",
    "eval_exp_tail",
    "exp_tail_rate",
    "front_speed_scaling",
    "verify_upper_barrier",
    "fit_exp_tail_rate",
    "pressure_bounds",
    "staged_exp_tail",
    "verify_staged_exp_tail",
    "parabola_spec",
    "eval_parabola",
    "verify_parabola",
    "fit_parabola_speed",
    "persistence_spec",
    "eval_persistence",
    "verify_persistence",
    "cutoff_step",
    "bump",
    "build_G",
    "power_profile_constant",
    "build_lower_barrier",
    "eval_lower_barrier",
    "lower_barrier_residual",
    "choose_barrier_params",
    "check_barrier_params",
    "verify_lower_barrier",
]


class BarrierPreconditionError(ValueError):
    """The initial or lateral ordering needed before a comparison does not hold."""

    def __init__(self, kind: str, x: float, t: float, gap: float):
        self.kind, self.x, self.t, self.gap = kind, x, t, gap
        super().__init__(f"{kind} ordering fails at x={x:.6g}, t={t:.6g} (gap {gap:.3e})")


@dataclass(frozen=True)
class Violation:
    x: float
    t: float
    gap: float


@dataclass
class BarrierSpec:
    """A barrier family, its parameters and the region where it is asserted."""

    family: str
    params: dict
    region: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def report(self) -> dict:
        out = {"family": self.family, "params": dict(self.params), "region": dict(self.region)}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _require(spec: BarrierSpec, family: str) -> None:
    if spec.family != family:
        raise ValueError(f"expected a {family} barrier, got {spec.family}")


def _scan_upper(traj: Trajectory, barrier: Callable, slack: float, t_max: float | None) -> Violation | None:
    x = traj.grid.x
    for t, u in zip(traj.times, traj.snapshots):
        if t_max is not None and t > t_max * (1 + 1e-12):
            break
        gap = u - barrier(x, t)
        bad = gap > slack
        if bad.any():
            k = int(np.argmax(np.where(bad, gap, -np.inf)))
            return Violation(float(x[k]), float(t), float(gap[k]))
    return None


# ---------------------------------------------------------------- exponential tails


def exp_tail_spec(A: float, a: float, C: float, h: float = 0.0, eta: float | None = None) -> BarrierSpec:
    if min(A, a, C) <= 0.0 or h < 0.0:
        raise ValueError("exponential tail needs A, a, C > 0 and h >= 0")
    return BarrierSpec("exp_tail", {"A": A, "a": a, "C": C, "h": h, "eta": C if eta is None else eta})


def eval_exp_tail(spec: BarrierSpec, x, t):
    """``A e^{Ct - a|x|} + h A e^{eta t}``."""
    _require(spec, "exp_tail")
    p = spec.params
    x = np.asarray(x, dtype=float)
    return p["A"] * np.exp(p["C"] * t - p["a"] * np.abs(x)) + p["h"] * p["A"] * np.exp(p["eta"] * t)


def exp_tail_rate(c_unit: float, L: float, a: float, m: float, s: float) -> float:
    """Growth rate for height ``L`` and decay ``a`` from the one at ``L = a = 1``.

    Rescaling ``u = L u~(a x, b t)`` with ``b = L^{m-1} a^{2-2s}`` maps the
    problem to unit height and unit decay, so ``C = c_unit * b``.
    """
    return c_unit * L ** (m - 1.0) * a ** (2.0 - 2.0 * s)


def front_speed_scaling(c_unit: float, L: float, a: float, m: float, s: float) -> float:
    """``C(L, a) = C(1,1) L^{m - 3/2 + s} a^{1/2 - s}`` for parabola-type barriers."""
    return c_unit * L ** (m - 1.5 + s) * a ** (0.5 - s)


def verify_upper_barrier(
    traj: Trajectory, spec: BarrierSpec, slack: float | None = None, t_max: float | None = None
) -> Violation | None:
    """First point where the density exceeds the exponential barrier, if any."""
    _require(spec, "exp_tail")
    u0 = traj.snapshots[0]
    x = traj.grid.x
    b0 = eval_exp_tail(spec, x, 0.0)
    if np.any(u0 >= b0):
        k = int(np.argmax(u0 - b0))
        raise BarrierPreconditionError("initial", float(x[k]), 0.0, float(u0[k] - b0[k]))
    if slack is None:
        slack = 1e-12 * spec.params["A"]
    return _scan_upper(traj, lambda xx, t: eval_exp_tail(spec, xx, t), slack, t_max)


def fit_exp_tail_rate(
    traj: Trajectory, A: float, a: float, C0: float = 0.125, max_doublings: int = 30, extra: int = 3
) -> dict:
    """Double ``C`` from ``C0`` until the barrier holds, then check a few larger values.

    Returns the first passing ``C`` and the full ladder of verdicts; the
    ladder is expected to be monotone (a pass is never followed by a failure).
    """
    ladder = []
    C = C0
    passing = None
    for _ in range(max_doublings):
        verdict = verify_upper_barrier(traj, exp_tail_spec(A, a, C))
        ladder.append((C, verdict is None))
        if verdict is None:
            passing = C
            break
        C *= 2.0
    if passing is not None:
        for _ in range(extra):
            C *= 2.0
            ladder.append((C, verify_upper_barrier(traj, exp_tail_spec(A, a, C)) is None))
    seen_pass = False
    monotone = True
    for _, ok in ladder:
        if seen_pass and not ok:
            monotone = False
        seen_pass |= ok
    return {"C": passing, "ladder": ladder, "monotone": monotone}


def pressure_bounds(traj: Trajectory, t_max: float | None = None) -> dict:
    """Largest ``p_xx`` and outward ``-d_r p`` seen along the trajectory."""
    h = traj.grid.h
    x_if = traj.grid.edges
    lap_max, drift_max = 0.0, 0.0
    for t, u in zip(traj.times, traj.snapshots):
        if t_max is not None and t > t_max * (1 + 1e-12):
            break
        g = pressure_gradient(u, traj.params)
        lap_max = max(lap_max, float(np.max(np.diff(g) / h)))
        drift_max = max(drift_max, float(np.max(-np.sign(x_if) * g)))
    return {"laplacian": lap_max, "radial_drift": drift_max, "K": max(lap_max, drift_max, 1e-300)}


def staged_exp_tail(K: float, A: float, m: float, s: float, q: float = 1.0, stages: int = 3) -> dict:
    """Time-restarted exponential barrier for ``1/2 <= s < 1``.

    On each stage ``C = 2^m K A^{1/q} m`` and the stage lasts
    ``T = q log 2 / C``; the next stage starts from ``A e^{C T}`` with rate
    ``C e^{C T / q}``.  The admissible window for ``q`` is
    ``1 <= q < 1/(2s-1)``; ``window_empty`` flags when it contains nothing.
    """
    if K <= 0.0 or A <= 0.0:
        raise ValueError("need K > 0 and A > 0")
    upper = 1.0 / (2.0 * s - 1.0) if s > 0.5 else math.inf
    C = 2.0**m * K * A ** (1.0 / q) * m
    out = []
    t0, A_k, C_k = 0.0, A, C
    for _ in range(stages):
        T_k = q * math.log(2.0) / C_k
        out.append({"t_start": t0, "t_end": t0 + T_k, "A": A_k, "C": C_k})
        t0 += T_k
        A_k = A_k * math.exp(C_k * T_k)
        C_k = C_k * math.exp(C_k * T_k / q)
    return {
        "stages": out,
        "q": q,
        "q_window": (1.0, upper),
        "window_empty": not (1.0 <= q < upper),
        "T1": out[0]["t_end"],
    }


def verify_staged_exp_tail(traj: Trajectory, schedule: dict, a: float = 1.0, stage: int = 0) -> Violation | None:
    """Check ``u <= A_k e^{C_k (t - t_k) - a|x|}`` over stage ``k`` of the schedule."""
    st = schedule["stages"][stage]
    x = traj.grid.x
    for t, u in zip(traj.times, traj.snapshots):
        if t < st["t_start"] - 1e-14 or t > st["t_end"] * (1 + 1e-12):
            continue
        bar = st["A"] * np.exp(st["C"] * (t - st["t_start"]) - a * np.abs(x))
        gap = u - bar
        if np.any(gap > 1e-12 * st["A"]):
            k = int(np.argmax(gap))
            return Violation(float(x[k]), float(t), float(gap[k]))
    return None


# ---------------------------------------------------------------- parabolas


def parabola_spec(
    a: float, b: float, C: float, s: float, eps: float = 0.0, D: float = 0.0
) -> BarrierSpec:
    if min(a, b, C) <= 0.0:
        raise ValueError("parabola needs a, b, C > 0")
    spec = BarrierSpec("parabola", {"a": a, "b": b, "C": C, "eps": eps, "D": D})
    if s >= 0.5:
        spec.notes.append("staged-C regime: s >= 1/2 has no fixed speed")
    return spec


def eval_parabola(spec: BarrierSpec, x, t):
    """``a (Ct - (|x| - b))^2`` inside ``|x| <= b + Ct``, zero outside, plus ``eps(1 + Dt)``."""
    _require(spec, "parabola")
    p = spec.params
    x = np.asarray(x, dtype=float)
    gap = p["C"] * t - (np.abs(x) - p["b"])
    core = np.where(gap > 0.0, p["a"] * gap**2, 0.0)
    return core + p["eps"] * (1.0 + p["D"] * t)


def parabola_contact_time(K: float, m: float) -> tuple[float, float]:
    """``D = 2K`` and the no-contact time ``(2^{1/(m-1)} - 1)/(2K)`` for the floored barrier."""
    return 2.0 * K, (2.0 ** (1.0 / (m - 1.0)) - 1.0) / (2.0 * K)


def verify_parabola(traj: Trajectory, spec: BarrierSpec, slack: float | None = None) -> Violation | None:
    """First point where the density pokes above the parabola, if any.

    The default slack is the support threshold ``1e-8 max u_0``: the parabola
    vanishes identically outside its support, which floating point cannot.
    """
    _require(spec, "parabola")
    x = traj.grid.x
    u0 = traj.snapshots[0]
    b0 = eval_parabola(spec, x, 0.0)
    inside = u0 > 0.0
    if np.any(u0[inside] >= b0[inside]) or np.any(u0[~inside] > b0[~inside]):
        k = int(np.argmax(np.where(inside, u0 - b0, -np.inf)))
        raise BarrierPreconditionError("initial", float(x[k]), 0.0, float(u0[k] - b0[k]))
    if slack is None:
        slack = 1e-8 * float(np.max(u0))
    return _scan_upper(traj, lambda xx, t: eval_parabola(spec, xx, t), slack, None)


def fit_parabola_speed(traj: Trajectory, a: float, b: float, C0: float = 0.125, max_doublings: int = 30) -> dict:
    ladder = []
    C = C0
    for _ in range(max_doublings):
        ok = verify_parabola(traj, parabola_spec(a, b, C, traj.params.s)) is None
        ladder.append((C, ok))
        if ok:
            return {"C": C, "ladder": ladder}
        C *= 2.0
    return {"C": None, "ladder": ladder}


# ---------------------------------------------------------------- cut-offs and G


def _smooth_step_seed(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)


def cutoff_step(x):
    """Smooth step: 0 for ``x <= 0``, 1 for ``x >= 1``, built from ``e^{-1/x}``."""
    f0 = _smooth_step_seed(x)
    f1 = _smooth_step_seed(1.0 - np.asarray(x, dtype=float))
    return f0 / (f0 + f1)


def bump(x):
    """Smooth cut-off equal to 1 on ``|x| <= 1`` and 0 on ``|x| >= 2``."""
    return cutoff_step(2.0 - np.abs(np.asarray(x, dtype=float)))


@dataclass
class GSpec:
    """Dilated bump ``G(x) = C1 * bump(2x/R)``, supported on ``[-R, R]``."""

    C1: float
    C2: float
    s: float
    R: float
    g1_norm: float
    grid: Grid | None = None
    values: np.ndarray | None = None

    def __call__(self, x):
        return self.C1 * bump(2.0 * np.asarray(x, dtype=float) / self.R)

    def derivative(self, x, dx: float = 1e-6):
        x = np.asarray(x, dtype=float)
        return (self(x + dx) - self(x - dx)) / (2.0 * dx)


def build_G(C1: float, C2: float, s: float, fine_grid: Grid | None = None) -> GSpec:
    """Bump with ``(-Delta)^s G <= -C2 |x|^{-(1+2s)}`` at distance >= 1 from its support.

    ``G1 = C1 * bump(2x)`` is supported in ``[-1, 1]`` with ``|G1|_1 = 1.5 C1``,
    and ``R = C2 2^{1+2s} / (sigma_s |G1|_1)`` with ``sigma_s`` the singular
    integral constant.
    """
    if C1 <= 0.0 or C2 <= 0.0:
        raise ValueError("C1 and C2 must be positive")
    norm = 1.5 * C1
    R = C2 * 2.0 ** (1.0 + 2.0 * s) / (fracops.frac_lap_constant(s) * norm)
    spec = GSpec(C1, C2, s, R, norm)
    if fine_grid is not None:
        spec.grid = fine_grid
        spec.values = spec(fine_grid.x)
    return spec


def check_G(spec: GSpec, grid: Grid, x_max: float = 50.0) -> dict:
    """Check ``G <= C1``, its support, and the far-field bound (5% tolerance) numerically."""
    vals = spec(grid.x)
    L = fracops.build_frac_laplacian(grid, spec.s)
    lap = fracops.apply(L, vals)
    ax = np.abs(grid.x)
    region = (ax >= spec.R + 1.0) & (ax <= x_max)
    scaled = lap[region] * ax[region] ** (1.0 + 2.0 * spec.s)
    return {
        "max_value": float(vals.max()),
        "bounded": bool(vals.max() <= spec.C1 * (1 + 1e-12)),
        "max_scaled": float(scaled.max()),
        "far_field_ok": bool(scaled.max() <= -spec.C2 * 0.95),
        "support_ok": bool(np.all(vals[ax > spec.R] <= 0.0)),
    }


# ---------------------------------------------------------------- power profiles


def _power_profile(x, xi: float, gamma: float):
    return (np.abs(np.asarray(x, dtype=float)) + xi) ** (-gamma)


def _power_profile_laplacian(grid: Grid, alpha: float, xi: float, gamma: float) -> np.ndarray:
    L = fracops.build_frac_laplacian(grid, alpha)
    phi = _power_profile(grid.x, xi, gamma)
    tail = ("power", gamma)
    return fracops.apply(L, phi, tail=TailSpec(tail, tail))


def power_profile_constant(
    alpha: float,
    xi: float,
    gamma: float,
    r_min: float = 2.0,
    r_max: float = 50.0,
    h: float = 0.05,
    box: float | None = None,
) -> float:
    """``sup |x|^{1+2 alpha} |(-Delta)^alpha (|x|+xi)^{-gamma}|`` over ``r_min <= |x| <= r_max``.

    Evaluated by quadrature on ``[-box, box]`` with the power-law continuation
    beyond the box; the limit ``|x| -> inf`` of the scaled value is
    ``sigma |phi|_1`` and is included when ``r_max`` is infinite.
    """
    finite = math.isfinite(r_max)
    if box is None:
        box = max(1.25 * r_max, r_max + 10.0) if finite else 4.0 * r_min + 100.0
    n = int(2 * round(box / h))
    grid = Grid(-box, box, n)
    lap = _power_profile_laplacian(grid, alpha, xi, gamma)
    ax = np.abs(grid.x)
    hi = r_max if finite else 0.8 * box
    mask = (ax >= r_min) & (ax <= hi)
    val = float(np.max(ax[mask] ** (1.0 + 2.0 * alpha) * np.abs(lap[mask])))
    if not math.isfinite(r_max):
        l1 = 2.0 * xi ** (1.0 - gamma) / (gamma - 1.0)
        val = max(val, fracops.frac_lap_constant(alpha) * l1)
    return val


# ---------------------------------------------------------------- lower barrier


def _exponents(m: float, alpha: float) -> tuple[float, float]:
    gamma = (2.0 * alpha + m) / (2.0 - m)
    b = 1.0 / (m - 1.0 + 2.0 * alpha)
    return gamma, b


def build_lower_barrier(
    m: float,
    alpha: float,
    x0: float,
    xi: float,
    eps: float,
    C1: float,
    T: float,
    x_far: float = 100.0,
    h: float = 0.05,
    headroom: float = 1.1,
) -> BarrierSpec:
    """Power-law subsolution of the primitive's equation on ``{x < x0}``.

    ``C3`` is measured as ``sup_{|x| >= |x0|} |x|^{1+2 alpha} |(-Delta)^alpha phi|``
    for ``phi = (|x|+xi)^{-gamma}`` (including its ``|x| -> inf`` limit), then
    ``C2 = headroom (C3 + b gamma^{2-m})``.  The dilated bump ``G`` must fit
    inside ``[x0 + 1, -x0 - 1]`` so that every ``x < x0`` is at distance at
    least one from its support.
    """
    if not 1.0 < m < 2.0:
        raise ValueError(f"lower power barriers need 1 < m < 2, got m={m}")
    if x0 >= 0.0:
        raise ValueError("x0 must be negative")
    if eps <= 0.0 or xi <= 0.0:
        raise ValueError("eps and xi must be positive")
    gamma, b = _exponents(m, alpha)
    tau = 1.0
    C3 = power_profile_constant(alpha, xi, gamma, r_min=abs(x0), r_max=math.inf, h=h, box=x_far)
    C2 = headroom * (C3 + b * gamma ** (2.0 - m) * tau ** (b * gamma * (1.0 - m) - 1.0))
    G = build_G(C1, C2, alpha)
    spec = BarrierSpec(
        "lower_power",
        {
            "m": m, "alpha": alpha, "x0": x0, "xi": xi, "eps": eps, "tau": tau,
            "gamma": gamma, "b": b, "C1": C1, "C2": C2, "C3": C3, "R": G.R, "T": T,
        },
        region={"x": (-math.inf, x0), "t": (0.0, T)},
    )
    spec.G = G  # type: ignore[attr-defined]
    if G.R > abs(x0) - 1.0:
        spec.notes.append(f"G support radius {G.R:.3g} exceeds |x0| - 1 = {abs(x0) - 1:.3g}")
    return spec


def eval_lower_barrier(spec: BarrierSpec, x, t):
    """``(t+1)^{b gamma} ((|x|+xi)^{-gamma} + G(x)) - eps``."""
    _require(spec, "lower_power")
    p = spec.params
    x = np.asarray(x, dtype=float)
    amp = (t + p["tau"]) ** (p["b"] * p["gamma"])
    return amp * (_power_profile(x, p["xi"], p["gamma"]) + spec.G(x)) - p["eps"]


def _barrier_laplacian(spec: BarrierSpec, grid: Grid) -> np.ndarray:
    p = spec.params
    L = fracops.build_frac_laplacian(grid, p["alpha"])
    tail = ("power", p["gamma"])
    # the bump has compact support inside the box, so it needs no tail
    field_vals = _power_profile(grid.x, p["xi"], p["gamma"]) + spec.G(grid.x)
    return fracops.apply(L, field_vals, tail=TailSpec(tail, tail))


def lower_barrier_residual(
    spec: BarrierSpec, x_min: float, h: float, times: Sequence[float] | None = None
) -> dict:
    """Sub-solution residual ``Phi_t + |Phi_x|^{m-1} (-Delta)^alpha Phi`` on ``x_min <= x < x0``.

    The fractional Laplacian is computed on grids of width ``h`` and ``h/2``;
    the slack is the largest two-grid difference of the residual, and the
    check passes if the fine-grid residual is at most that slack.
    """
    p = spec.params
    x0, T = p["x0"], p["T"]
    if times is None:
        times = np.linspace(0.0, T, 11)
    box = 1.25 * abs(x_min)
    coarse = Grid(-box, box, int(2 * round(box / h)))
    fine = coarse.refine(2)
    lap_c = _barrier_laplacian(spec, coarse)
    lap_f = _barrier_laplacian(spec, fine)
    # coarse nodes coincide with every other fine node only up to a half-cell
    # shift; compare by linear interpolation onto the coarse nodes
    lap_f_on_c = np.interp(coarse.x, fine.x, lap_f)
    mask = (coarse.x >= x_min) & (coarse.x < x0)
    xs = coarse.x[mask]
    m, b, gamma, xi, tau = p["m"], p["b"], p["gamma"], p["xi"], p["tau"]
    phi = _power_profile(xs, xi, gamma)
    dphi = gamma * (np.abs(xs) + xi) ** (-gamma - 1.0)  # x < 0 so d/dx is positive
    worst, slack, lead = -math.inf, 0.0, 0.0
    worst_at = None
    for t in times:
        amp = (t + tau) ** (b * gamma)
        dt_term = b * gamma * (t + tau) ** (b * gamma - 1.0) * phi
        grad_term = (amp * dphi) ** (m - 1.0) * amp
        r_f = dt_term + grad_term * lap_f_on_c[mask]
        r_c = dt_term + grad_term * lap_c[mask]
        slack = max(slack, float(np.max(np.abs(r_f - r_c))))
        lead = max(lead, float(np.max(np.abs(dt_term))))
        k = int(np.argmax(r_f))
        if r_f[k] > worst:
            worst, worst_at = float(r_f[k]), (float(xs[k]), float(t))
    return {
        "max_residual": worst,
        "at": worst_at,
        "slack": slack,
        "leading": lead,
        "relative_slack": slack / lead if lead > 0 else math.inf,
        "holds": worst <= slack,
    }


def choose_barrier_params(
    x0: float, x1: float, t1: float, k1: float, C1: float, m: float, alpha: float
) -> dict:
    """Pick ``(eps, xi, T)`` so the lower barrier certifies ``v(x1, t1) > 0``.

    ``eps`` is half the smaller of its two upper bounds, ``xi`` the midpoint
    of its admissible interval and ``T`` just below its upper bound.  If any
    of the six inequalities cannot hold, ``feasible`` is False and
    ``violated`` names the failing constraint.
    """
    if not x1 < x0 < 0.0:
        raise ValueError("need x1 < x0 < 0")
    if t1 <= 0.0:
        raise ValueError("need t1 > 0")
    if not k1 > C1 > 0.0:
        raise ValueError("need k1 > C1 > 0")
    if not 1.0 < m < 2.0:
        raise ValueError("need 1 < m < 2")
    gamma, b = _exponents(m, alpha)
    grow = (t1 + 1.0) ** b
    eps1 = ((grow - 1.0) / (x0 - x1)) ** gamma
    eps2 = (grow / ((k1 - C1) ** (-1.0 / gamma) - x1)) ** gamma
    eps = 0.5 * min(eps1, eps2)
    lo = max(x0 + eps ** (-1.0 / gamma), (k1 - C1) ** (-1.0 / gamma), 0.0)
    hi = x1 + grow * eps ** (-1.0 / gamma)
    out = {"gamma": gamma, "b": b, "eps_bounds": (eps1, eps2), "xi_interval": (lo, hi)}
    if not lo < hi:
        return {**out, "feasible": False, "violated": "xi interval empty"}
    xi = 0.5 * (lo + hi)
    T_max = (k1 / (xi ** (-gamma) + C1)) ** (1.0 / (b * gamma)) - 1.0
    out.update({"eps": eps, "xi": xi, "T_max": T_max})
    if T_max <= 0.0:
        return {**out, "feasible": False, "violated": "T_max <= 0"}
    if t1 >= T_max:
        return {**out, "feasible": False, "violated": f"t1={t1:g} >= T_max={T_max:.6g}"}
    T = T_max * (1.0 - 1e-9)
    return {**out, "T": T, "feasible": True, "violated": None}


def check_barrier_params(choice: dict, x0: float, x1: float, t1: float, k1: float, C1: float) -> dict:
    """Re-substitute a parameter choice into the six inequalities (all must be True)."""
    gamma, b = choice["gamma"], choice["b"]
    eps, xi, T = choice["eps"], choice["xi"], choice["T"]
    grow = (t1 + 1.0) ** b
    return {
        "xi_above_initial": xi > x0 + eps ** (-1.0 / gamma),
        "T_below_max": T < (k1 / (xi ** (-gamma) + C1)) ** (1.0 / (b * gamma)) - 1.0,
        "xi_above_lateral": xi > (k1 - C1) ** (-1.0 / gamma),
        "xi_below_target": xi < x1 + grow * eps ** (-1.0 / gamma),
        "eps_below_first": eps < ((grow - 1.0) / (x0 - x1)) ** gamma,
        "eps_below_second": eps < (grow / ((k1 - C1) ** (-1.0 / gamma) - x1)) ** gamma,
    }


def verify_lower_barrier(
    v_times: Sequence[float],
    v_states: Sequence[np.ndarray],
    grid: Grid,
    spec: BarrierSpec,
    slack: float = 0.0,
) -> Violation | None:
    """Check ``v >= Phi_eps`` on ``{x < x0} x (0, T]``.

    ``v`` is sampled at right cell edges.  The initial slice (everywhere) and
    the lateral region ``x >= x0`` must already be strictly ordered; failures
    there raise :class:`BarrierPreconditionError` with kind ``initial`` or
    ``lateral``.
    """
    _require(spec, "lower_power")
    p = spec.params
    x = grid.x + 0.5 * grid.h
    x0, T = p["x0"], p["T"]
    lateral = x >= x0
    for k, (t, v) in enumerate(zip(v_times, v_states)):
        if t > T * (1 + 1e-12):
            break
        phi = eval_lower_barrier(spec, x, t)
        gap = phi - v
        if k == 0:
            bad = gap >= 0.0
            if bad.any():
                j = int(np.argmax(gap))
                raise BarrierPreconditionError("initial", float(x[j]), float(t), float(gap[j]))
            continue
        bad_lat = lateral & (gap >= 0.0)
        if bad_lat.any():
            j = int(np.argmax(np.where(lateral, gap, -np.inf)))
            raise BarrierPreconditionError("lateral", float(x[j]), float(t), float(gap[j]))
        bad = (~lateral) & (gap > slack)
        if bad.any():
            j = int(np.argmax(np.where(~lateral, gap, -np.inf)))
            return Violation(float(x[j]), float(t), float(gap[j]))
    return None


# ---------------------------------------------------------------- persistence


def persistence_spec(a: float, centre: float = 0.0, radius: float = 1.0, height: float = 1.0) -> BarrierSpec:
    """Shrinking subsolution ``height * e^{-at} F(|x - centre| / radius)``, ``F(r) = step(1-2r)/2``."""
    if a <= 0.0 or radius <= 0.0 or height <= 0.0:
        raise ValueError("need a, radius, height > 0")
    return BarrierSpec("persistence", {"a": a, "centre": centre, "radius": radius, "height": height})


def eval_persistence(spec: BarrierSpec, x, t):
    _require(spec, "persistence")
    p = spec.params
    r = np.abs(np.asarray(x, dtype=float) - p["centre"]) / p["radius"]
    return p["height"] * np.exp(-p["a"] * t) * 0.5 * cutoff_step(1.0 - 2.0 * r)


def verify_persistence(traj: Trajectory, spec: BarrierSpec, slack: float = 1e-12) -> Violation | None:
    """First point where the density drops below the shrinking barrier, if any."""
    x = traj.grid.x
    for t, u in zip(traj.times, traj.snapshots):
        gap = eval_persistence(spec, x, t) - u
        if np.any(gap > slack):
            k = int(np.argmax(gap))
            return Violation(float(x[k]), float(t), float(gap[k]))
    return None
