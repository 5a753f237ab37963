import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from fracpme import fracops as F
from fracpme.fracops import Grid, TailSpec


def lap_gaussian(x, alpha):
    """(-Delta)^alpha exp(-x^2) in closed form, evaluated with mpmath."""
    pref = mp.mpf(4) ** alpha * mp.gamma(mp.mpf(0.5) + alpha) / mp.sqrt(mp.pi)
    return np.array([float(pref * mp.hyp1f1(0.5 + alpha, 0.5, -xx * xx)) for xx in x])


def grad_potential_gaussian(x, s):
    """d/dx of the Riesz potential of exp(-x^2), closed form via mpmath."""
    pref = -4 * mp.mpf(4) ** (-s) * mp.gamma(mp.mpf(1.5) - s) / mp.sqrt(mp.pi)
    return np.array([float(pref * xx * mp.hyp1f1(1.5 - s, 1.5, -xx * xx)) for xx in x])


@pytest.fixture(scope="module")
def grid():
    return Grid(-16.0, 16.0, 1024)


# ---------------------------------------------------------------- basic types


def test_grid_nodes_are_cell_centres():
    g = Grid(-1.0, 1.0, 8)
    assert g.h == pytest.approx(0.25)
    assert g.x[0] == pytest.approx(-1.0 + 0.125)
    assert g.edges.size == 9
    assert g.refine().n == 16


@pytest.mark.parametrize("bad", [(1.0, 0.0, 16), (0.0, 1.0, 4), (0.0, 1.0, 10.5)])
def test_grid_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        Grid(*bad)


def test_grid_check_shape():
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 8).check(np.zeros(7))


@pytest.mark.parametrize("s,alpha,eps", [(0.0, 0.5, 0.0), (0.5, 1.0, 0.0), (0.5, 0.5, -1.0)])
def test_frac_params_guards(s, alpha, eps):
    with pytest.raises(ValueError):
        F.FracParams(s, alpha, eps)


def test_coupled_orders():
    p = F.FracParams.coupled(0.3)
    assert p.alpha == pytest.approx(0.7)


# ---------------------------------------------------------------- constants against mpmath


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4, 0.6, 0.75, 0.9])
def test_riesz_constant_matches_fourier_inversion(s):
    # (1/2pi) int |xi|^{-2s} e^{i xi x} d xi = Gamma(1-2s) sin(pi s)/pi |x|^{2s-1}
    want = mp.gamma(1 - 2 * mp.mpf(s)) * mp.sin(mp.pi * s) / mp.pi
    assert F.riesz_constant(s) == pytest.approx(float(want), rel=1e-12)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_gradient_constant(s):
    if s == 0.5:
        want = -1.0 / mp.pi  # derivative of -(1/pi) log|x|
    else:
        want = (2 * mp.mpf(s) - 1) * mp.gamma(1 - 2 * mp.mpf(s)) * mp.sin(mp.pi * s) / mp.pi
    assert F.riesz_gradient_constant(s) == pytest.approx(float(want), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_frac_lap_constant(alpha):
    a = mp.mpf(alpha)
    want = a * mp.mpf(4) ** a * mp.gamma(0.5 + a) / (mp.sqrt(mp.pi) * mp.gamma(1 - a))
    assert F.frac_lap_constant(alpha) == pytest.approx(float(want), rel=1e-12)


def test_half_order_log_constant_rejected():
    with pytest.raises(ValueError):
        F.riesz_constant(0.5)


# ---------------------------------------------------------------- Riesz potential


def test_riesz_kernel_power_law_ratio():
    g = Grid(-50.0, 50.0, 2000)
    k = F.build_riesz_kernel(g, 0.25)
    w = dict(zip(k.offsets(), k.weights))
    assert w[400] / w[200] == pytest.approx(2.0**-0.5, rel=1e-4)
    assert np.allclose(k.weights, k.weights[::-1])


def test_riesz_kernel_eps_zero_is_bitwise_stable(grid):
    a = F.build_riesz_kernel(grid, 0.3, eps=0.0)
    b = F.build_riesz_kernel(grid, 0.3)
    assert np.array_equal(a.weights, b.weights)
    assert a.digest() == b.digest()
    c = F.build_riesz_kernel(grid, 0.3, eps=0.2)
    assert not np.array_equal(a.weights, c.weights)
    assert np.allclose(c.weights, c.weights[::-1])


def test_riesz_kernel_rejects_high_order(grid):
    with pytest.raises(ValueError):
        F.build_riesz_kernel(grid, 0.75)


def test_kernel_weights_are_read_only(grid):
    k = F.build_riesz_kernel(grid, 0.25)
    with pytest.raises(ValueError):
        k.weights[0] = 1.0


@pytest.mark.parametrize("x0", [2.0, 3.5, 6.0])
def test_riesz_potential_of_narrow_gaussian(x0):
    sigma = 0.2
    g = Grid(-10.0, 10.0, 4000)
    u = np.exp(-(g.x / sigma) ** 2 / 2) / (sigma * math.sqrt(2 * math.pi))
    out = F.apply(F.build_riesz_kernel(g, 0.25), u)
    c = F.riesz_constant(0.25)

    def integrand(y):
        return c * abs(x0 - y) ** -0.5 * math.exp(-(y / sigma) ** 2 / 2) / (sigma * math.sqrt(2 * math.pi))

    exact, _ = integrate.quad(integrand, -8 * sigma, 8 * sigma, limit=200)
    got = np.interp(x0, g.x, out)
    assert got == pytest.approx(exact, rel=1e-2)
    assert got == pytest.approx(c * x0**-0.5, rel=1e-2)


def test_one_hot_returns_kernel_row(grid):
    k = F.build_riesz_kernel(grid, 0.25)
    j = grid.n // 2
    e = np.zeros(grid.n)
    e[j] = 1.0
    out = F.apply(k, e)
    rows = np.arange(grid.n) - j
    w = dict(zip(k.offsets(), k.weights))
    assert np.allclose(out, [k.scale * w[r] for r in rows], rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("builder", ["riesz", "grad", "lap"])
def test_zero_field_maps_to_zero(grid, builder):
    k = {
        "riesz": lambda: F.build_riesz_kernel(grid, 0.25),
        "grad": lambda: F.build_grad_riesz(grid, 0.6),
        "lap": lambda: F.build_frac_laplacian(grid, 0.4),
    }[builder]()
    assert np.all(F.apply(k, np.zeros(grid.n)) == 0.0)


def test_potential_is_self_adjoint(grid):
    rng = np.random.default_rng(0)
    u, w = rng.random(grid.n), rng.random(grid.n)
    k = F.build_riesz_kernel(grid, 0.3)
    a = np.dot(F.apply(k, u), w)
    b = np.dot(u, F.apply(k, w))
    assert a == pytest.approx(b, rel=1e-10)
    # direct double sum as an independent oracle
    W = np.array([[k.scale * dict(zip(k.offsets(), k.weights))[i - j] for j in range(8)] for i in range(8)])
    assert np.allclose(W, W.T)


# ---------------------------------------------------------------- half operator


@pytest.mark.parametrize("s", [0.25, 0.4])
def test_half_operator_energy_identity(s):
    L = 32.0
    g = Grid(-L, L, 2048)
    u = np.exp(-g.x**2)
    mass = u.sum() * g.h
    k_energy = np.sum(u * F.apply(F.build_potential_kernel(g, s), u)) * g.h
    hu = F.apply(F.half_operator(g, s), u)
    c = F.riesz_constant(s / 2)
    # H u ~ c M |x|^{s-1} outside the box: add the analytic remainder
    far = 2 * c**2 * mass**2 * L ** (2 * s - 1) / (1 - 2 * s)
    h_energy = np.sum(hu**2) * g.h + far
    assert h_energy == pytest.approx(k_energy, rel=1e-2)


def test_half_operator_zero(grid):
    assert np.all(F.apply(F.half_operator(grid, 0.3), np.zeros(grid.n)) == 0.0)


# ---------------------------------------------------------------- gradient of the potential


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75, 0.9])
def test_grad_riesz_matches_closed_form(s):
    g = Grid(-16.0, 16.0, 2048)
    u = np.exp(-g.x**2)
    out = F.apply(F.build_grad_riesz(g, s), u)
    sub = slice(0, g.n, 16)
    exact = grad_potential_gaussian(g.x[sub], s)
    assert F.l2_rel(out[sub], exact) < 5e-3


def test_grad_riesz_parity(grid):
    u = np.exp(-grid.x**2)
    out = F.apply(F.build_grad_riesz(grid, 0.4), u)
    assert np.max(np.abs(out + out[::-1])) <= 1e-10 * np.max(np.abs(out))


@pytest.mark.parametrize("s", [0.3, 0.75])
def test_grad_riesz_constant_vanishes_at_centre(grid, s):
    k = F.build_grad_riesz(grid, s)
    g = F.interface_values(k, np.ones(grid.n))
    assert abs(g[grid.n // 2]) <= 1e-10 * np.max(np.abs(g))
    assert np.allclose(k.weights + k.weights[::-1], 0.0, atol=1e-14 * np.max(np.abs(k.weights)))


# ---------------------------------------------------------------- fractional Laplacian


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_frac_lap_matches_closed_form(alpha):
    g = Grid(-16.0, 16.0, 2048)
    u = np.exp(-g.x**2)
    sub = slice(0, g.n, 16)
    exact = lap_gaussian(g.x[sub], alpha)
    quad = F.apply(F.build_frac_laplacian(g, alpha), u)[sub]
    spec = F.apply(F.spectral_frac_laplacian(g, alpha), u)[sub]
    assert F.l2_rel(quad, exact) < 2e-3
    assert F.l2_rel(spec, exact) < 1e-7


@pytest.mark.parametrize("alpha", [0.05, 0.3, 0.5, 0.7, 0.95])
def test_frac_lap_constant_annihilated_with_flat_tail(grid, alpha):
    out = F.apply(F.build_frac_laplacian(grid, alpha), np.full(grid.n, 3.0), tail="flat")
    assert np.max(np.abs(out)) <= 1e-12 * 3.0 * F.build_frac_laplacian(grid, alpha).diag


@pytest.mark.parametrize("alpha", [0.05, 0.3, 0.5, 0.7, 0.95])
def test_frac_lap_is_markov_generator(grid, alpha):
    k = F.build_frac_laplacian(grid, alpha)
    assert np.all(k.weights >= 0.0)
    assert k.diag > 0.0


@pytest.mark.parametrize("alpha", [0.3, 0.6])
def test_frac_lap_plane_wave(alpha):
    g = Grid(-50.0, 50.0, 4096)
    xi = 0.1 / g.h
    w = np.cos(xi * g.x)
    out = F.apply(F.build_frac_laplacian(g, alpha), w)
    mid = np.abs(g.x) < 10
    assert np.max(np.abs(out[mid] - xi ** (2 * alpha) * w[mid])) <= 1e-2 * xi ** (2 * alpha)


def test_composition_of_symbols():
    g = Grid(-32.0, 32.0, 4096)
    u = np.exp(-g.x**2)
    pot = F.apply(F.build_riesz_kernel(g, 0.25), u)
    tail = ("power", 0.5)
    out = F.apply(F.build_frac_laplacian(g, 0.75), pot, tail=TailSpec(tail, tail))
    inner = np.abs(g.x) <= 16
    exact = lap_gaussian(g.x[inner][::32], 0.5)
    assert F.l2_rel(out[inner][::32], exact) < 1e-2


def test_power_tail_matches_wide_box():
    # a field that really is (|x|+1)^{-3} everywhere: small box with the power
    # continuation versus a much wider box with zero continuation
    alpha, p = 0.5, 3.0
    small = Grid(-20.0, 20.0, 800)
    wide = Grid(-200.0, 200.0, 8000)
    prof = lambda x: (np.abs(x) + 1.0) ** -p  # noqa: E731
    a = F.apply(F.build_frac_laplacian(small, alpha), prof(small.x), tail=("power", p))
    b = F.apply(F.build_frac_laplacian(wide, alpha), prof(wide.x))
    b_on_small = np.interp(small.x, wide.x, b)
    centre = np.abs(small.x) < 10
    assert np.max(np.abs(a[centre] - b_on_small[centre])) < 2e-2 * np.max(np.abs(b_on_small[centre]))


def test_unknown_tail_rejected(grid):
    with pytest.raises(ValueError):
        F.apply(F.build_frac_laplacian(grid, 0.5), np.ones(grid.n), tail="mirror")


def test_power_law_profile_laplacian_bounded():
    g = Grid(-60.0, 60.0, 2400)
    phi = (np.abs(g.x) + 1.0) ** -5.0
    out = F.apply(F.build_frac_laplacian(g, 0.5), phi, tail=("power", 5.0))
    ax = np.abs(g.x)
    band = (ax >= 2) & (ax <= 50)
    scaled = ax[band] ** 2 * np.abs(out[band])
    assert np.all(np.isfinite(scaled))
    assert scaled.max() < 1.0


# ---------------------------------------------------------------- Stroock-Varopoulos


def test_stroock_varopoulos_constant_is_zero(grid):
    res = F.check_stroock_varopoulos(np.full(grid.n, 2.0), grid, 0.5, 3.0, tail="flat")
    assert abs(res["lhs"]) < 1e-9 and abs(res["rhs"]) < 1e-9


def test_stroock_varopoulos_equality_at_two(grid):
    res = F.check_stroock_varopoulos(np.exp(-grid.x**2), grid, 0.5, 2.0)
    assert res["holds"] and res["ratio"] == pytest.approx(1.0, rel=1e-12)


def test_stroock_varopoulos_q3(grid):
    res = F.check_stroock_varopoulos(np.exp(-grid.x**2), grid, 0.3, 3.0)
    assert res["holds"] and res["ratio"] >= 1.0


@given(
    u=arrays(np.float64, 64, elements=st.floats(0.0, 10.0)),
    alpha=st.floats(0.05, 0.95),
    q=st.floats(1.1, 4.0),
)
def test_stroock_varopoulos_random(u, alpha, q):
    g = Grid(-4.0, 4.0, 64)
    assert F.check_stroock_varopoulos(u, g, alpha, q, tol=1e-9)["holds"]


@given(
    half=arrays(np.float64, 32, elements=st.floats(-5.0, 5.0)),
    alpha=st.floats(0.05, 0.95),
)
def test_frac_lap_preserves_parity(half, alpha):
    g = Grid(-4.0, 4.0, 64)
    u = np.concatenate([half[::-1], half])
    out = F.apply(F.build_frac_laplacian(g, alpha), u)
    assert np.allclose(out, out[::-1], rtol=0, atol=1e-10 * max(1.0, np.max(np.abs(out))))


@given(
    a=arrays(np.float64, 64, elements=st.floats(-1.0, 1.0)),
    b=arrays(np.float64, 64, elements=st.floats(-1.0, 1.0)),
    c=st.floats(-3.0, 3.0),
)
def test_grad_riesz_linear(a, b, c):
    g = Grid(-4.0, 4.0, 64)
    k = F.build_grad_riesz(g, 0.35)
    lhs = F.apply(k, a + c * b)
    rhs = F.apply(k, a) + c * F.apply(k, b)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_dump_kernel_csv(tmp_path, grid):
    path = F.dump_kernel_csv(F.build_frac_laplacian(grid, 0.5), tmp_path / "k.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "offset,weight"
    assert lines[1].startswith("diag,")
    spec = F.dump_kernel_csv(F.spectral_frac_laplacian(grid, 0.5), tmp_path / "s.csv")
    assert spec.read_text().startswith("frequency_index,multiplier")
