import math

import numpy as np
import pytest

from fracpme import barriers as B
from fracpme.evolve import SimParams, run
from fracpme.fracops import Grid


@pytest.fixture(scope="module")
def grid():
    return Grid(-10.0, 10.0, 512)


# ---------------------------------------------------------------- exponential tails


def test_exp_tail_values():
    spec = B.exp_tail_spec(A=2.0, a=0.5, C=1.0, h=0.1, eta=0.3)
    assert B.eval_exp_tail(spec, 0.0, 0.0) == pytest.approx(2.0 + 0.2)
    assert B.eval_exp_tail(spec, -2.0, 1.0) == pytest.approx(2.0 * math.exp(1.0 - 1.0) + 0.2 * math.exp(0.3))
    xs = np.linspace(-5, 5, 11)
    assert np.all(np.diff([B.eval_exp_tail(spec, xs, t) for t in (0.0, 0.5, 1.0)], axis=0) > 0.0)


@pytest.mark.parametrize("kw", [dict(A=0.0, a=1.0, C=1.0), dict(A=1.0, a=1.0, C=1.0, h=-1.0)])
def test_exp_tail_guards(kw):
    with pytest.raises(ValueError):
        B.exp_tail_spec(**kw)


def test_wrong_family_rejected():
    with pytest.raises(ValueError):
        B.eval_parabola(B.exp_tail_spec(1.0, 1.0, 1.0), 0.0, 0.0)


@pytest.mark.parametrize("m,s", [(1.5, 0.25), (2.5, 0.4), (2.0, 0.75)])
def test_scaling_laws_double(m, s):
    assert B.front_speed_scaling(1.0, 2.0, 1.0, m, s) == pytest.approx(2.0 ** (m - 1.5 + s))
    assert B.front_speed_scaling(1.0, 1.0, 2.0, m, s) == pytest.approx(2.0 ** (0.5 - s))
    assert B.exp_tail_rate(1.0, 2.0, 1.0, m, s) == pytest.approx(2.0 ** (m - 1.0))
    assert B.exp_tail_rate(3.0, 1.0, 2.0, m, s) == pytest.approx(3.0 * 2.0 ** (2.0 - 2.0 * s))


def _traj(u0, grid, **kw):
    base = dict(m=2.0, s=0.25, grid=grid, t_end=0.05, snapshot_every=0.01)
    base.update(kw)
    return run(u0, SimParams(**base))


def test_zero_density_never_violates(grid):
    traj = _traj(np.zeros(grid.n), grid)
    assert B.verify_upper_barrier(traj, B.exp_tail_spec(1.0, 1.0, 0.1)) is None
    assert B.verify_parabola(traj, B.parabola_spec(1.0, 1.0, 0.1, 0.25, eps=1e-3)) is None


def test_upper_barrier_initial_precondition(grid):
    traj = _traj(np.exp(-np.abs(grid.x)), grid)
    with pytest.raises(B.BarrierPreconditionError) as info:
        B.verify_upper_barrier(traj, B.exp_tail_spec(0.5, 1.0, 1.0))
    assert info.value.kind == "initial"


def test_fit_exp_tail_rate(grid):
    traj = _traj(0.5 * np.exp(-np.abs(grid.x)), grid, m=2.5)
    out = B.fit_exp_tail_rate(traj, A=0.51, a=1.0, C0=1.0 / 64)
    assert out["C"] is not None and out["C"] >= 1.0 / 64
    assert B.verify_upper_barrier(traj, B.exp_tail_spec(0.51, 1.0, out["C"])) is None


def test_pressure_bounds_positive(grid):
    out = B.pressure_bounds(_traj(np.exp(-grid.x**2), grid))
    assert out["K"] >= max(out["laplacian"], out["radial_drift"])
    assert out["K"] > 0.0


@pytest.mark.parametrize("s,q,empty", [(0.75, 1.0, False), (0.75, 1.9, False), (0.75, 2.0, True), (0.9, 1.3, True)])
def test_staged_q_window(s, q, empty):
    out = B.staged_exp_tail(K=1.0, A=1.0, m=2.0, s=s, q=q)
    assert out["q_window"] == (1.0, pytest.approx(1.0 / (2.0 * s - 1.0)))
    assert out["window_empty"] is empty


def test_staged_stages_chain():
    out = B.staged_exp_tail(K=0.5, A=2.0, m=1.5, s=0.75, q=1.0, stages=3)
    st = out["stages"]
    C = 2.0**1.5 * 0.5 * 2.0 * 1.5
    assert st[0]["C"] == pytest.approx(C)
    assert out["T1"] == pytest.approx(math.log(2.0) / C)
    assert st[1]["A"] == pytest.approx(4.0)  # one stage doubles A when q = 1
    assert st[1]["t_start"] == pytest.approx(st[0]["t_end"])
    assert st[1]["C"] == pytest.approx(2.0 * C)


# ---------------------------------------------------------------- parabolas


def test_parabola_values():
    spec = B.parabola_spec(a=2.0, b=1.0, C=0.5, s=0.25)
    assert B.eval_parabola(spec, 1.0, 0.0) == 0.0
    assert B.eval_parabola(spec, -1.0, 0.0) == 0.0
    assert B.eval_parabola(spec, 0.0, 0.0) == pytest.approx(2.0)
    assert B.eval_parabola(spec, 1.0, 2.0) == pytest.approx(2.0)
    floored = B.parabola_spec(a=2.0, b=1.0, C=0.5, s=0.25, eps=0.1, D=3.0)
    assert B.eval_parabola(floored, 5.0, 1.0) == pytest.approx(0.4)


def test_parabola_staged_note():
    assert B.parabola_spec(1.0, 1.0, 1.0, 0.25).notes == []
    assert any("staged-C" in n for n in B.parabola_spec(1.0, 1.0, 1.0, 0.5).notes)


def test_parabola_contact_time():
    D, t = B.parabola_contact_time(K=2.0, m=2.0)
    assert D == 4.0 and t == pytest.approx(0.25)


def test_parabola_fit_and_initial_check(grid):
    u0 = np.maximum(1.0 - grid.x**2, 0.0)
    traj = _traj(u0, grid, m=2.5)
    out = B.fit_parabola_speed(traj, a=2.0, b=1.5)
    assert out["C"] is not None
    assert B.verify_parabola(traj, B.parabola_spec(2.0, 1.5, out["C"], 0.25)) is None
    with pytest.raises(B.BarrierPreconditionError):
        B.verify_parabola(traj, B.parabola_spec(0.5, 1.0, 1.0, 0.25))


# ---------------------------------------------------------------- cut-offs and G


def test_cutoffs():
    xs = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(B.cutoff_step(xs), [0.0, 0.0, 0.5, 1.0, 1.0])
    assert np.allclose(B.bump(np.array([0.0, 1.0, -1.0, 2.0, 3.0])), [1, 1, 1, 0, 0])
    ys = np.linspace(-3, 3, 601)
    assert np.all((B.bump(ys) >= 0) & (B.bump(ys) <= 1))


def test_G_bounded_and_radius_linear_in_C2():
    g1 = B.build_G(1.0, 1.0, 0.5)
    g2 = B.build_G(1.0, 2.0, 0.5)
    assert g2.R == pytest.approx(2.0 * g1.R)
    xs = np.linspace(-3 * g1.R, 3 * g1.R, 2001)
    assert np.max(g1(xs)) <= 1.0 + 1e-12
    assert np.all(g1(xs[np.abs(xs) > g1.R]) == 0.0)
    with pytest.raises(ValueError):
        B.build_G(0.0, 1.0, 0.5)


def test_G_unit_norm_matches_quadrature():
    from scipy import integrate

    val, _ = integrate.quad(lambda x: float(B.bump(2.0 * x)), -1.0, 1.0, limit=200)
    assert val == pytest.approx(1.5, rel=1e-8)


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_G_far_field(s):
    G = B.build_G(1.0, 0.5, s)
    out = B.check_G(G, Grid(-60.0, 60.0, 4800), x_max=50.0)
    assert out["bounded"] and out["support_ok"] and out["far_field_ok"]


# ---------------------------------------------------------------- lower barrier


@pytest.mark.parametrize("m,alpha", [(1.5, 0.5), (1.25, 0.25), (1.8, 0.75)])
def test_lower_exponents(m, alpha):
    gamma, b = B._exponents(m, alpha)
    assert gamma == pytest.approx((2 * alpha + m) / (2 - m))
    assert b == pytest.approx(1.0 / (m - 1 + 2 * alpha))
    # far-field balance: the |x|^{-gamma} decay of the time derivative matches
    # |phi_x|^{m-1} times the |x|^{-1-2 alpha} tail of the nonlocal term
    assert gamma == pytest.approx((gamma + 1.0) * (m - 1.0) + 1.0 + 2.0 * alpha)


def test_lower_exponents_arithmetic():
    gamma, b = B._exponents(1.5, 0.5)
    assert (gamma, b) == (pytest.approx(5.0), pytest.approx(2.0 / 3.0))


@pytest.mark.parametrize("xi_shift,negative", [(0.5, True), (-0.5, False)])
def test_initial_sign_of_lower_barrier(xi_shift, negative):
    m, alpha, x0, eps = 1.5, 0.5, -16.0, 1e-9
    gamma, _ = B._exponents(m, alpha)
    xi = x0 + eps ** (-1.0 / gamma) + xi_shift
    spec = B.build_lower_barrier(m, alpha, x0, xi, eps, C1=1.0, T=0.1, x_far=60.0, h=0.1)
    assert spec.G(x0) == 0.0
    val = float(B.eval_lower_barrier(spec, x0, 0.0))
    assert (val < 0.0) is negative


SPEC_INSTANCE = dict(x0=-16.0, x1=-21.0, k1=4.0, C1=2.0, m=1.5, alpha=0.5)


def test_spec_instance_is_infeasible_at_half():
    out = B.choose_barrier_params(t1=0.5, **SPEC_INSTANCE)
    assert not out["feasible"]
    assert "T_max" in out["violated"]
    assert out["T_max"] < 0.5


def test_feasible_choice_satisfies_all_inequalities():
    out = B.choose_barrier_params(t1=0.1, **SPEC_INSTANCE)
    assert out["feasible"]
    kw = {k: SPEC_INSTANCE[k] for k in ("x0", "x1", "k1", "C1")}
    checks = B.check_barrier_params(out, t1=0.1, **kw)
    assert all(checks.values()), checks


def test_eps_grows_with_t1():
    eps = [B.choose_barrier_params(t1=t, **SPEC_INSTANCE)["eps"] for t in (0.02, 0.05, 0.1)]
    assert eps[0] < eps[1] < eps[2]


@pytest.mark.parametrize(
    "override", [dict(x1=-16.0), dict(m=2.0), dict(m=1.0), dict(C1=5.0)]
)
def test_choose_params_guards(override):
    kw = {**SPEC_INSTANCE, **override}
    with pytest.raises(ValueError):
        B.choose_barrier_params(t1=0.1, **kw)


def test_build_lower_barrier_guards():
    with pytest.raises(ValueError):
        B.build_lower_barrier(2.5, 0.5, -16.0, 10.0, 1e-6, 1.0, 0.1)
    with pytest.raises(ValueError):
        B.build_lower_barrier(1.5, 0.5, 1.0, 10.0, 1e-6, 1.0, 0.1)


def _lower(eps, x0=-8.0):
    return B.build_lower_barrier(1.5, 0.5, x0, 4.0, eps, C1=0.5, T=0.2, x_far=40.0, h=0.1)


def test_verify_lower_large_eps_is_trivial():
    g = Grid(-20.0, 20.0, 400)
    spec = _lower(eps=10.0)
    v = np.cumsum(np.exp(-g.x**2)) * g.h
    assert B.verify_lower_barrier([0.0, 0.1, 0.2], [v, v, v], g, spec) is None


def test_verify_lower_distinguishes_initial_and_lateral():
    g = Grid(-20.0, 20.0, 400)
    spec = _lower(eps=1e-3)
    with pytest.raises(B.BarrierPreconditionError) as info:
        B.verify_lower_barrier([0.0], [np.zeros(g.n)], g, spec)
    assert info.value.kind == "initial"
    big = np.full(g.n, 10.0)
    with pytest.raises(B.BarrierPreconditionError) as info:
        B.verify_lower_barrier([0.0, 0.1], [big, np.where(g.x < -8.0, 10.0, 0.0)], g, spec)
    assert info.value.kind == "lateral"


def test_lower_barrier_notes_oversized_G():
    spec = B.build_lower_barrier(1.5, 0.5, -2.0, 4.0, 1e-3, C1=0.5, T=0.2, x_far=40.0, h=0.1)
    assert spec.notes and "exceeds" in spec.notes[0]


# ---------------------------------------------------------------- persistence


def test_persistence_values():
    spec = B.persistence_spec(a=1.0, centre=1.0, radius=2.0, height=4.0)
    assert B.eval_persistence(spec, 1.0, 0.0) == pytest.approx(2.0)
    assert B.eval_persistence(spec, 1.0, 1.0) == pytest.approx(2.0 / math.e)
    assert B.eval_persistence(spec, 2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        B.persistence_spec(a=0.0)


def test_persistence_holds_for_a_run(grid):
    u0 = np.where(np.abs(grid.x) < 2.0, 1.0, 0.0)
    traj = _traj(u0, grid, m=2.0, t_end=0.2, snapshot_every=0.02)
    assert B.verify_persistence(traj, B.persistence_spec(a=2.0, radius=2.0)) is None
    bad = B.verify_persistence(traj, B.persistence_spec(a=0.01, radius=2.0, height=5.0))
    assert isinstance(bad, B.Violation)


def test_spec_report_roundtrip():
    spec = B.parabola_spec(1.0, 1.0, 1.0, 0.75)
    rep = spec.report()
    assert rep["family"] == "parabola" and rep["params"]["C"] == 1.0 and rep["notes"]
