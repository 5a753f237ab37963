"""Discrete Riesz potentials, fractional Laplacians and their spectral twins in 1D.

Every quadrature operator is a table of convolution weights built once from
exact cell integrals of a power kernel and applied by zero-padded FFT, so a
field living on the box sees free space instead of periodic images.  The
spectral routines multiply by the exact Fourier symbol on a heavily padded
periodic extension; they share no code with the quadrature tables and exist to
cross-check them.

Conventions: ``K_s`` has symbol ``|xi|^{-2s}``, ``(-Delta)^alpha`` has symbol
``|xi|^{2 alpha}``, and ``H_s = K_{s/2}`` so that ``H_s H_s = K_s``.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy import fft as sfft
from scipy import special

__all__ = [
    "Grid",
    "FracParams",
    "OperatorKernel",
    "TailSpec",
    "riesz_constant",
    "riesz_gradient_constant",
    "frac_lap_constant",
    "build_riesz_kernel",
    "build_potential_kernel",
    "build_frac_laplacian",
    "build_grad_riesz",
    "half_operator",
    "apply",
    "interface_values",
    "spectral_frac_laplacian",
    "spectral_grad_riesz",
    "spectral_apply",
    "check_stroock_varopoulos",
    "dump_kernel_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[x_min, x_max]`` with ``n`` cells."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self) -> None:
        if not (self.x_max > self.x_min):
            raise ValueError("grid needs x_max > x_min")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError("grid needs an integer cell count n >= 8")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        """Cell interfaces ``x_min + k h`` for ``k = 0..n``."""
        return self.x_min + np.arange(self.n + 1) * self.h

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"field has shape {u.shape}, grid expects ({self.n},)")
        return u

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.x_min, self.x_max, self.n * factor)


@dataclass(frozen=True)
class FracParams:
    """Orders of the potential (``s``) and of the Laplacian (``alpha``)."""

    s: float
    alpha: float
    eps: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s={self.s} must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha={self.alpha} must lie in (0, 1)")
        if self.eps < 0.0:
            raise ValueError("mollification radius eps must be >= 0")

    @classmethod
    def coupled(cls, s: float, eps: float = 0.0) -> "FracParams":
        """Orders for the integrated equation, where alpha = 1 - s."""
        return cls(s=s, alpha=1.0 - s, eps=eps)


# ---------------------------------------------------------------- constants


def riesz_constant(s: float) -> float:
    """``c`` in ``K_s(x) = c |x|^{2s-1}``; negative for s > 1/2 (renormalized)."""
    if not 0.0 < s < 1.0 or s == 0.5:
        raise ValueError("the power-law Riesz constant needs s in (0,1), s != 1/2")
    return special.gamma(0.5 - s) / (4.0**s * math.sqrt(math.pi) * special.gamma(s))


def riesz_gradient_constant(s: float) -> float:
    """``g`` in ``K_s'(x) = g sign(x) |x|^{2s-2}``, finite across s = 1/2."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    return -2.0 * special.gamma(1.5 - s) / (4.0**s * math.sqrt(math.pi) * special.gamma(s))


def frac_lap_constant(alpha: float) -> float:
    """Singular-integral constant of ``(-Delta)^alpha`` in one dimension."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 4.0**alpha * special.gamma(0.5 + alpha) / (
        math.sqrt(math.pi) * abs(special.gamma(-alpha))
    )


# ---------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailSpec:
    """How a field continues past each end of the box.

    ``"zero"`` extends by zero, ``"flat"`` by the edge sample, and
    ``("power", p)`` by ``u_edge (|x|/|x_edge|)^{-p}``.
    """

    left: Union[str, tuple] = "zero"
    right: Union[str, tuple] = "zero"

    @classmethod
    def coerce(cls, tail) -> "TailSpec":
        if tail is None:
            return cls()
        if isinstance(tail, TailSpec):
            return tail
        if isinstance(tail, str):
            return cls(tail, tail)
        if isinstance(tail, tuple) and len(tail) == 2 and tail[0] == "power":
            return cls(tail, tail)
        left, right = tail
        return cls(left, right)


# ---------------------------------------------------------------- kernels


@dataclass(eq=False)
class OperatorKernel:
    """Precomputed discrete operator on a grid.

    Convolution kinds evaluate ``scale * sum_k weights[i-k] u_k`` (plus
    ``diag * u_i`` for the Laplacian); spectral kinds carry ``multipliers``
    instead and are applied on a padded periodic extension.
    """

    kind: str
    grid: Grid
    order: float
    eps: float = 0.0
    weights: np.ndarray | None = None
    offset0: int = 0
    scale: float = 1.0
    diag: float = 0.0
    tail_model: str = "zero"
    multipliers: Callable[[np.ndarray], np.ndarray] | None = None
    pad: int = 2
    meta: dict = field(default_factory=dict)
    _fft: tuple | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            w.setflags(write=False)
            self.weights = w
            n = self.grid.n
            nfft = sfft.next_fast_len(n + w.size - 1, real=True)
            self._fft = (nfft, sfft.rfft(w, nfft))

    @property
    def spectral(self) -> bool:
        return self.multipliers is not None

    def offsets(self) -> np.ndarray:
        return np.arange(self.weights.size) + self.offset0

    def digest(self) -> str:
        """Content hash of the table (used by run manifests)."""
        hsh = hashlib.sha256()
        hsh.update(f"{self.kind}|{self.grid}|{self.order!r}|{self.eps!r}|{self.diag!r}".encode())
        if self.weights is not None:
            hsh.update(np.ascontiguousarray(self.weights).tobytes())
        return hsh.hexdigest()

    def _correlate(self, u: np.ndarray, q_start: int, count: int) -> np.ndarray:
        """``y_q = sum_k weights[q - k - offset0] u_k`` for ``q_start <= q < q_start+count``."""
        nfft, wf = self._fft
        full = sfft.irfft(sfft.rfft(u, nfft) * wf, nfft)
        lo = q_start - self.offset0
        return full[lo : lo + count]


def _power_cell_integrals(J: np.ndarray, beta: float) -> np.ndarray:
    """``int_{cell j} |t|^beta dt`` over unit cells centred at integer ``j``."""
    J = np.abs(np.asarray(J, dtype=float))
    p = beta + 1.0
    hi = (J + 0.5) ** p
    lo = np.where(J > 0, np.maximum(J - 0.5, 0.0) ** p, -(0.5**p))
    return (hi - lo) / p


def _log_cell_integrals(J: np.ndarray) -> np.ndarray:
    """``int_{cell j} log|t| dt`` over unit cells centred at integer ``j``."""
    J = np.abs(np.asarray(J, dtype=float))

    def anti(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)) - t, 0.0)

    hi = anti(J + 0.5)
    lo = np.where(J > 0, anti(np.maximum(J - 0.5, 0.0)), -anti(0.5))
    return hi - lo


def _potential_cell_averages(grid: Grid, s: float, J: np.ndarray) -> np.ndarray:
    """Cell averages of the Riesz kernel of order ``s`` at integer offsets ``J``."""
    h = grid.h
    if s == 0.5:
        # symbol |xi|^{-1}: kernel -(1/pi) log|x|, defined up to a constant
        return -(_log_cell_integrals(J) + math.log(h)) / math.pi
    c = riesz_constant(s)
    return c * h ** (2.0 * s - 1.0) * _power_cell_integrals(J, 2.0 * s - 1.0)


def _mollifier_profile(grid: Grid, radius: float) -> np.ndarray:
    """Discrete even bump of support ``radius`` with unit sum (length ``2r+1``)."""
    h = grid.h
    r = int(math.floor(radius / h))
    if r < 1:
        return np.ones(1)
    t = np.arange(-r, r + 1) * h / radius
    prof = np.clip(1.0 - t**2, 0.0, None) ** 2
    return prof / prof.sum()


def _mollifier(grid: Grid, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """``(sigma, rho)`` with ``rho = sigma * sigma`` supported on ``[-eps, eps]``."""
    sigma = _mollifier_profile(grid, eps / 2.0)
    rho = np.convolve(sigma, sigma)
    return sigma, rho


def _kernel_table(
    grid: Grid, averages: Callable[[np.ndarray], np.ndarray], eps: float, use_sigma: bool
) -> np.ndarray:
    """Symmetric weights on offsets ``-(n-1)..n-1``, optionally mollified."""
    n = grid.n
    if eps == 0.0:
        return averages(np.arange(-(n - 1), n))
    sigma, rho = _mollifier(grid, eps)
    moll = sigma if use_sigma else rho
    r = moll.size // 2
    wide = averages(np.arange(-(n - 1) - r, n + r))
    return np.convolve(wide, moll, mode="valid")


def build_riesz_kernel(grid: Grid, s: float, eps: float = 0.0) -> OperatorKernel:
    """Riesz potential ``K_s`` (or ``rho_eps * K_s``) as a convolution table.

    Defined for ``0 < s <= 1/2``; the endpoint uses the logarithmic kernel
    whose symbol is ``|xi|^{-1}``.
    """
    if not 0.0 < s <= 0.5:
        raise ValueError(f"raw Riesz potential in 1D needs 0 < s <= 1/2, got s={s}")
    if eps < 0.0:
        raise ValueError("eps must be >= 0")
    w = _kernel_table(grid, lambda J: _potential_cell_averages(grid, s, J), eps, False)
    kind = "riesz_s" if eps == 0.0 else "riesz_s_mollified"
    return OperatorKernel(kind, grid, s, eps, w, -(grid.n - 1), grid.h)


def build_potential_kernel(grid: Grid, s: float, eps: float = 0.0) -> OperatorKernel:
    """Riesz potential for any ``s`` in (0,1).

    For ``s > 1/2`` the kernel ``c|x|^{2s-1}`` has ``c < 0``: it is the
    potential renormalized by an infinite constant, whose gradient is the
    genuine one.  Energies built from it differ from the divergent ones by a
    multiple of the squared mass.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if s <= 0.5:
        return build_riesz_kernel(grid, s, eps)
    w = _kernel_table(grid, lambda J: _potential_cell_averages(grid, s, J), eps, False)
    return OperatorKernel("riesz_renormalized", grid, s, eps, w, -(grid.n - 1), grid.h)


def half_operator(grid: Grid, s: float, eps: float = 0.0) -> OperatorKernel:
    """``H_s = K_{s/2}``, mollified by ``sigma_eps`` so that ``H^eps H^eps = K^eps``."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    half = s / 2.0
    w = _kernel_table(grid, lambda J: _potential_cell_averages(grid, half, J), eps, True)
    return OperatorKernel("half_riesz", grid, half, eps, w, -(grid.n - 1), grid.h)


def build_grad_riesz(grid: Grid, s: float, eps: float = 0.0) -> OperatorKernel:
    """Gradient of the Riesz potential evaluated at cell interfaces.

    For ``s <= 1/2`` it is the difference of the cell-averaged potential
    across each interface.  For ``s > 1/2`` it is the cell integral of the
    odd, locally integrable kernel ``K_s'``, which needs no potential at all.
    Weights are indexed by ``j = i - k`` for interface ``x_{i+1/2}``.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if eps < 0.0:
        raise ValueError("eps must be >= 0")
    n, h = grid.n, grid.h
    J = np.arange(-n, n)
    if s <= 0.5:
        pot = _kernel_table(grid, lambda K: _potential_cell_averages(grid, s, K), eps, False)
        # potential offsets -(n-1)..n-1; interface weight g_j = (P_{j+1} - P_j)/h
        padded = np.concatenate([[0.0], pot, [0.0]])  # offsets -n..n
        core = _potential_cell_averages(grid, s, np.array([-n, n]))
        if eps == 0.0:
            padded[0], padded[-1] = core[0], core[1]
        else:
            padded[0], padded[-1] = padded[1], padded[-2]
        w = (padded[1:] - padded[:-1])  # offsets -n..n-1, times h / h
        kind = "grad_riesz"
    else:
        c = riesz_constant(s)

        def anti(t):
            return c * (np.abs(t) * h) ** (2.0 * s - 1.0)

        def table(K):
            return anti(K + 1.0) - anti(K)

        if eps == 0.0:
            w = table(J.astype(float))
        else:
            _, rho = _mollifier(grid, eps)
            r = rho.size // 2
            wide = table(np.arange(-n - r, n + r).astype(float))
            w = np.convolve(wide, rho, mode="valid")
        kind = "grad_riesz_odd"
    if eps > 0.0:
        kind += "_mollified"
    # interface gradient = (1/h) * sum_k w[i-k] u_k * h
    return OperatorKernel(kind, grid, s, eps, w, -n, 1.0, meta={"interfaces": True})


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _curvature_moments(alpha: float, J: np.ndarray) -> np.ndarray:
    """``1/2 int_j^{j+1} (t-j)(j+1-t) t^{-1-2 alpha} dt`` on unit cells ``j >= 1``."""
    J = np.asarray(J, dtype=float)
    tau = 0.5 * (_GL_NODES + 1.0)
    wts = 0.5 * _GL_WEIGHTS
    vals = (tau * (1.0 - tau))[None, :] * (J[:, None] + tau[None, :]) ** (-1.0 - 2.0 * alpha)
    return 0.5 * vals @ wts


def _frac_lap_pieces(alpha: float, h: float, J: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Off-diagonal weights ``w_j`` (j >= 1), the near-cell term and the weight total.

    The singular integral is written over ``z > 0`` for the even second
    difference ``f(z) = u(x+z) + u(x-z) - 2u(x)``.  Inside one cell a Taylor
    expansion turns into ``kappa f_1``.  Beyond it ``f`` is interpolated
    linearly between nodes and integrated exactly against ``z^{-1-2 alpha}``,
    and the interpolation defect is removed with a cell-wise curvature term
    (second differences of ``f``), which lifts the accuracy from
    ``h^{2-2 alpha}`` to ``h^{3-2 alpha}``.
    """
    J = np.asarray(J, dtype=int)
    a2 = 2.0 * alpha
    scale = h ** (-a2)
    Jf = J.astype(float)

    def A(j):
        return (j ** (-a2) - (j + 1.0) ** (-a2)) / a2

    def B(j):
        if alpha == 0.5:
            return np.log((j + 1.0) / j)
        return ((j + 1.0) ** (1.0 - a2) - j ** (1.0 - a2)) / (1.0 - a2)

    def a_(j):
        return (j + 1.0) * A(j) - B(j)

    def b_(j):
        return B(j) - j * A(j)

    kappa = 1.0 / (2.0 - a2)
    w = a_(Jf)
    later = Jf >= 2
    w = np.where(later, w + b_(np.where(later, Jf - 1.0, 1.0)), w + kappa)
    # curvature correction: -sum_j c_j (f_{j+2} - f_{j+1} - f_j + f_{j-1}) / 2, f_0 = 0
    jmax = int(J.max()) if J.size else 0
    cj = np.zeros(jmax + 4)
    cells = np.arange(1, jmax + 2)
    cj[cells] = _curvature_moments(alpha, cells)
    corr = np.zeros(jmax + 4)
    half = 0.5 * cj[cells]
    np.add.at(corr, cells + 2, -half)
    np.add.at(corr, cells + 1, half)
    np.add.at(corr, cells, half)
    np.add.at(corr, cells - 1, -half)
    w = w + corr[J]
    total = 1.0 / a2 + kappa + 0.5 * cj[1]
    return scale * w, scale * kappa, scale * total


def _frac_lap_tail_weight(alpha: float, h: float, J: np.ndarray) -> np.ndarray:
    """``sum_{j >= J} w_j`` over the infinite lattice, in closed form (``J >= 1``)."""
    J = np.asarray(J, dtype=float)
    a2 = 2.0 * alpha
    scale = h ** (-a2)
    _, _, total = _frac_lap_pieces(alpha, h, np.array([1]))
    jm = np.maximum(J - 1.0, 1.0)
    if alpha == 0.5:
        B = np.log((jm + 1.0) / jm)
    else:
        B = ((jm + 1.0) ** (1.0 - a2) - jm ** (1.0 - a2)) / (1.0 - a2)
    A = (jm ** (-a2) - (jm + 1.0) ** (-a2)) / a2
    b_prev = B - jm * A
    c_J = _curvature_moments(alpha, np.maximum(J, 1.0))
    c_Jm2 = np.where(J >= 3, _curvature_moments(alpha, np.maximum(J - 2.0, 1.0)), 0.0)
    out = scale * (J ** (-a2) / a2 + b_prev + 0.5 * (c_J - c_Jm2))
    return np.where(J <= 1.0, total, out)


def build_frac_laplacian(grid: Grid, alpha: float, tail_model: str = "zero") -> OperatorKernel:
    """``(-Delta)^alpha`` as ``diag*u_i - sum_j w_j u_{i+j}`` with exact weights.

    Row sums vanish exactly on the infinite lattice, so constants are
    annihilated when the field is continued flat.  The default tail continues
    the field by zero, which is exact for data supported in the box.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} must lie in (0, 1)")
    n, h = grid.n, grid.h
    C = frac_lap_constant(alpha)
    J = np.arange(1, n)
    w, _, total = _frac_lap_pieces(alpha, h, J)
    table = np.concatenate([w[::-1], [0.0], w]) * C
    diag = 2.0 * C * total
    return OperatorKernel(
        "frac_lap_alpha", grid, alpha, 0.0, table, -(n - 1), 1.0, diag, tail_model,
        meta={"constant": C},
    )


def _power_tail_integral(c: np.ndarray, X: float, p: float, q: float) -> np.ndarray:
    """``int_X^inf y^{-p} (y - c)^{-q} dy`` for ``c < X``."""
    z = np.asarray(c, dtype=float) / X
    return X ** (1.0 - p - q) / (p + q - 1.0) * special.hyp2f1(q, p + q - 1.0, p + q, z)


def _apply_tail(kernel: OperatorKernel, u: np.ndarray, tail: TailSpec) -> np.ndarray:
    grid = kernel.grid
    n, h = grid.n, grid.h
    alpha = kernel.order
    C = kernel.meta["constant"]
    idx = np.arange(n)
    out = np.zeros(n)
    sides = (
        ("right", tail.right, u[-1], n - idx, grid.x_max, grid.x[-1], grid.x),
        ("left", tail.left, u[0], idx + 1, -grid.x_min, -grid.x[0], -grid.x),
    )
    for _, mode, edge, reach, X, x_edge, pos in sides:
        if mode == "zero":
            continue
        if mode == "flat":
            out -= edge * C * _frac_lap_tail_weight(alpha, h, reach)
            continue
        if isinstance(mode, tuple) and mode[0] == "power":
            p = float(mode[1])
            if X <= 0 or x_edge <= 0:
                raise ValueError("power tail needs the box to straddle the origin")
            q = 1.0 + 2.0 * alpha
            out -= C * edge * x_edge**p * _power_tail_integral(pos, X, p, q)
            continue
        raise ValueError(f"unknown tail model {mode!r}")
    return out


def apply(kernel: OperatorKernel, u: np.ndarray, tail=None) -> np.ndarray:
    """Apply a kernel to a field on its grid (node-centred output)."""
    u = kernel.grid.check(u)
    if kernel.spectral:
        return spectral_apply(
            kernel.grid, u, kernel.multipliers, kernel.pad, kernel.meta.get("far_field")
        )
    n = kernel.grid.n
    if kernel.meta.get("interfaces"):
        g = interface_values(kernel, u)
        return 0.5 * (g[:-1] + g[1:])
    conv = kernel._correlate(u, 0, n)
    if kernel.kind.startswith("frac_lap"):
        out = kernel.diag * u - conv
        spec = TailSpec.coerce(tail if tail is not None else kernel.tail_model)
        if spec.left != "zero" or spec.right != "zero":
            out = out + _apply_tail(kernel, u, spec)
        return out
    return kernel.scale * conv


def interface_values(kernel: OperatorKernel, u: np.ndarray) -> np.ndarray:
    """Gradient at the ``n+1`` interfaces ``x_min + k h`` (k = 0..n)."""
    if not kernel.meta.get("interfaces"):
        raise ValueError(f"{kernel.kind} is not an interface operator")
    u = kernel.grid.check(u)
    # interface k sits at x_{i+1/2} with i = k-1
    return kernel._correlate(u, -1, kernel.grid.n + 1)


# ---------------------------------------------------------------- spectral route


def _image_sum(z: np.ndarray, period: float, decay: float, odd: bool, terms: int = 64) -> np.ndarray:
    """``sum_{k != 0} sgn(z - kP)^odd |z - kP|^{-decay}`` for ``|z| < P/2``.

    The first ``terms`` images on each side are summed directly and the rest
    by the midpoint rule, which is exact to ``O(terms^{-decay-3})``; for odd
    terms and ``decay <= 1`` the paired series converges conditionally and
    the midpoint tail carries that limit.
    """
    z = np.asarray(z, dtype=float)
    k = np.arange(1, terms + 1, dtype=float)[:, None]
    right = (k * period - z) ** (-decay)
    left = (k * period + z) ** (-decay)
    direct = (left - right).sum(axis=0) if odd else (left + right).sum(axis=0)
    edge = (terms + 0.5) * period
    if decay == 1.0:
        tail_l = -np.log(edge + z) / period
        tail_r = -np.log(edge - z) / period
    else:
        tail_l = (edge + z) ** (1.0 - decay) / (period * (decay - 1.0))
        tail_r = (edge - z) ** (1.0 - decay) / (period * (decay - 1.0))
    tail = tail_l - tail_r if odd else tail_l + tail_r
    return direct + tail


def spectral_apply(
    grid: Grid,
    u: np.ndarray,
    symbol: Callable[[np.ndarray], np.ndarray],
    pad: int = 16,
    far_field: tuple | None = None,
) -> np.ndarray:
    """Multiply by ``symbol(xi)`` on a zero-padded periodic extension of ``u``.

    ``far_field = (amplitude, decay, odd)`` describes the leading free-space
    decay ``amplitude * M * sgn(z)^odd |z|^{-decay}`` of the output of a
    field of mass ``M``; the matching sum over periodic images, taken about
    the centre of mass, is then removed so the result approximates the
    free-space operator rather than its periodization.
    """
    u = grid.check(u)
    if pad < 2:
        raise ValueError("padding factor must be at least 2")
    nfft = sfft.next_fast_len(pad * grid.n, real=True)
    xi = 2.0 * math.pi * sfft.rfftfreq(nfft, d=grid.h)
    spec = sfft.rfft(u, nfft) * symbol(xi)
    out = sfft.irfft(spec, nfft)[: grid.n]
    if far_field is not None:
        mass = float(u.sum() * grid.h)
        if mass != 0.0:
            amplitude, decay, odd = far_field
            centre = float(np.sum(u * grid.x) * grid.h) / mass
            out = out - amplitude * mass * _image_sum(grid.x - centre, nfft * grid.h, decay, odd)
    return out


def spectral_frac_laplacian(grid: Grid, alpha: float, pad: int = 16) -> OperatorKernel:
    """``|xi|^{2 alpha}`` multiplier with far-field image removal."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} must lie in (0, 1)")
    far = (-frac_lap_constant(alpha), 1.0 + 2.0 * alpha, False)
    return OperatorKernel(
        "frac_lap_alpha_spectral", grid, alpha,
        multipliers=lambda xi: np.abs(xi) ** (2 * alpha), pad=pad, meta={"far_field": far},
    )


def spectral_grad_riesz(grid: Grid, s: float, pad: int = 16) -> OperatorKernel:
    """``i xi |xi|^{-2s}`` multiplier with far-field image removal."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")

    def symbol(xi):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1j * xi * np.abs(xi) ** (-2.0 * s)
        out[xi == 0] = 0.0
        return out

    far = (riesz_gradient_constant(s), 2.0 - 2.0 * s, True)
    return OperatorKernel(
        "grad_riesz_spectral", grid, s, multipliers=symbol, pad=pad, meta={"far_field": far}
    )


# ---------------------------------------------------------------- inequalities


def check_stroock_varopoulos(
    u: np.ndarray, grid: Grid, alpha: float, q: float, tol: float = 1e-12, tail="zero"
) -> dict:
    """Discrete Stroock-Varopoulos inequality for the quadrature operator.

    ``rhs`` uses ``int |(-Delta)^{alpha/2} f|^2 = int f (-Delta)^alpha f`` with
    ``f = u^{q/2}``; since the quadrature operator is a Markov generator the
    discrete inequality holds exactly, with equality at ``q = 2``.  ``tail``
    is passed to :func:`apply`; with ``"flat"`` a constant field gives
    ``lhs = rhs = 0``.
    """
    u = grid.check(u)
    if np.any(u < 0):
        raise ValueError("Stroock-Varopoulos needs u >= 0")
    if q <= 1:
        raise ValueError("q must exceed 1")
    L = build_frac_laplacian(grid, alpha)
    h = grid.h
    lhs = float(np.sum(u ** (q - 1.0) * apply(L, u, tail=tail)) * h)
    f = u ** (q / 2.0)
    rhs = float(4.0 * (q - 1.0) / q**2 * np.sum(f * apply(L, f, tail=tail)) * h)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "holds": lhs >= rhs - tol * scale,
        "ratio": lhs / rhs if rhs != 0 else float("nan"),
    }


def dump_kernel_csv(kernel: OperatorKernel, path: Union[str, Path]) -> Path:
    """Write ``(offset, weight)`` rows, or ``(frequency_index, multiplier)``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        if kernel.spectral:
            nfft = sfft.next_fast_len(kernel.pad * kernel.grid.n, real=True)
            xi = 2.0 * math.pi * sfft.rfftfreq(nfft, d=kernel.grid.h)
            mult = kernel.multipliers(xi)
            wr.writerow(["frequency_index", "multiplier"])
            for k, val in enumerate(mult):
                wr.writerow([k, repr(complex(val)) if np.iscomplexobj(mult) else repr(float(val))])
        else:
            wr.writerow(["offset", "weight"])
            if kernel.diag:
                wr.writerow(["diag", repr(float(kernel.diag))])
            for j, val in zip(kernel.offsets(), kernel.weights):
                wr.writerow([int(j), repr(float(val))])
    return path


def l2_rel(a: np.ndarray, b: np.ndarray) -> float:
    """Relative L2 distance ``|a-b| / |b|`` on a common grid."""
    nb = float(np.linalg.norm(b))
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / (nb if nb > 0 else 1.0)


def fields_sequence(values: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack([np.asarray(v, dtype=float) for v in values])
