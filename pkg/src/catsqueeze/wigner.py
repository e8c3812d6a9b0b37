"""Wigner functions of Fock-basis states, grid convolution and minimum search.

Normalization: ``W`` integrates to one over ``dx dp`` and the vacuum is
``exp(-x^2 - p^2) / pi``, so every Wigner function is bounded by ``1/pi``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import minimize
from numba import njit

from .channels import ChannelSpec
from .errors import NoNegativityError
from .states import DensityMatrix, quadrature_moments

DEFAULT_WINDOW = (-6.0, 6.0, -6.0, 6.0)
DEFAULT_NODES = 241

SCAN_SPACING = 0.15
POLISH_MAXITER = 200
NEGATIVITY_FLOOR = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.p)):
            raise ValueError(f"phase-space point must be finite, got ({self.x}, {self.p})")

    def __iter__(self):
        yield self.x
        yield self.p


@njit(cache=True)
def _wigner_node(rho, x, p):
    # Row m of the Fock-basis kernel, W[|m><m+k|], obeys the Laguerre three-term
    # recurrence in m at fixed offset k; every entry is bounded by 1/pi.
    dim = rho.shape[0]
    alpha = (x + 1j * p) / math.sqrt(2.0)
    y = 4.0 * (alpha.real**2 + alpha.imag**2)
    c = 2.0 * alpha
    cur = np.empty(dim, dtype=np.complex128)
    prev = np.zeros(dim, dtype=np.complex128)
    nxt = np.empty(dim, dtype=np.complex128)
    cur[0] = math.exp(-0.5 * y) / math.pi
    for k in range(1, dim):
        cur[k] = cur[k - 1] * c / math.sqrt(k)
    total = 0.0
    for m in range(dim):
        size = dim - m
        acc = (rho[m, m] * cur[0]).real
        for k in range(1, size):
            acc += 2.0 * (rho[m, m + k] * cur[k]).real
        total += acc
        if m == dim - 1:
            break
        for k in range(size - 1):
            nxt[k] = -((2 * m + k + 1 - y) * cur[k] + math.sqrt(m * (m + k)) * prev[k]) / math.sqrt(
                (m + 1) * (m + k + 1)
            )
        for k in range(size - 1):
            prev[k] = cur[k]
            cur[k] = nxt[k]
    return total


@njit(cache=True)
def _wigner_nodes(rho, xs, ps):
    out = np.empty(xs.size)
    for i in range(xs.size):
        out[i] = _wigner_node(rho, xs[i], ps[i])
    return out


def wigner_values(rho: DensityMatrix, x, p) -> np.ndarray:
    """Wigner function at arbitrary broadcastable coordinate arrays.

    Each node is evaluated independently, so values do not depend on how the
    points are batched.
    """
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    xf = np.ascontiguousarray(x.ravel())
    pf = np.ascontiguousarray(p.ravel())
    return _wigner_nodes(rho.elements, xf, pf).reshape(x.shape)


def wigner_point(rho: DensityMatrix, pt) -> float:
    x, p = pt
    return float(wigner_values(rho, x, p))


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Wigner function sampled on ``n_x`` by ``n_p`` nodes; ``values[i, j]`` is ``W(xs[i], ps[j])``."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 2:
            raise ValueError(f"grid needs at least 2x2 nodes, got shape {v.shape}")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ValueError("window bounds must be increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def window(self) -> tuple:
        return (self.x_min, self.x_max, self.p_min, self.p_max)

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def x_marginal(self) -> np.ndarray:
        """Density of ``x`` obtained by integrating over ``p``."""
        return self.values.sum(axis=1) * self.dp

    def p_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dx

    def cross_section(self, x: float | None = None, p: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Cut along ``p`` at fixed ``x`` (or along ``x`` at fixed ``p``), by spline interpolation."""
        if (x is None) == (p is None):
            raise ValueError("give exactly one of x or p")
        spline = RectBivariateSpline(self.xs, self.ps, self.values, kx=3, ky=3)
        if x is not None:
            return self.ps, spline(x, self.ps, grid=True)[0]
        return self.xs, spline(self.xs, p, grid=True)[:, 0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# x_min={self.x_min!r} x_max={self.x_max!r} n_x={self.n_x}\n")
        buf.write(f"# p_min={self.p_min!r} p_max={self.p_max!r} n_p={self.n_p}\n")
        buf.write("# rows: x nodes ascending; columns: p nodes ascending\n")
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WignerGrid":
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = float(val)
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
        return cls(meta["x_min"], meta["x_max"], meta["p_min"], meta["p_max"], np.array(rows))

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "nx": self.n_x,
            "np": self.n_p,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WignerGrid":
        values = np.asarray(data["values"], dtype=float)
        if values.shape != (data["nx"], data["np"]):
            raise ValueError("declared grid size does not match values")
        return cls(data["x_min"], data["x_max"], data["p_min"], data["p_max"], values)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "WignerGrid":
        return cls.from_dict(json.loads(text))


def cross_section_csv(coords: np.ndarray, values: np.ndarray, axis_name: str = "p") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([axis_name, "W"])
    for c, v in zip(coords, values):
        writer.writerow([repr(float(c)), repr(float(v))])
    return buf.getvalue()


def auto_half_width(rho: DensityMatrix) -> float:
    """Half-width of a square window that contains the state and its fringes.

    Uses the RMS extent along the principal quadrature axis plus a margin of
    four vacuum widths; for a cat squeezed by ``r`` this exceeds
    ``sqrt(2)|alpha| e^|r| + 4``.
    """
    mx, vx = quadrature_moments(rho, 0.0)
    mp, vp = quadrature_moments(rho, math.pi / 2)
    m45, v45 = quadrature_moments(rho, math.pi / 4)
    cxp = v45 - 0.5 * (vx + vp)
    second = np.array([[vx + mx**2, cxp + mx * mp], [cxp + mx * mp, vp + mp**2]])
    lam_max = float(np.linalg.eigvalsh(second)[-1])
    return math.sqrt(max(lam_max, 0.5)) + 4.0


def wigner_grid(rho: DensityMatrix, window=DEFAULT_WINDOW, nx: int = DEFAULT_NODES, np_: int = DEFAULT_NODES) -> WignerGrid:
    if nx < 2 or np_ < 2:
        raise ValueError("grid needs at least 2 nodes per axis")
    x_min, x_max, p_min, p_max = (float(v) for v in window)
    xs = np.linspace(x_min, x_max, nx)
    ps = np.linspace(p_min, p_max, np_)
    values = wigner_values(rho, xs[:, None], ps[None, :])
    return WignerGrid(x_min, x_max, p_min, p_max, values)


def _gaussian_density(xs, ps, cov):
    inv = np.linalg.inv(cov)
    det = np.linalg.det(cov)
    xx, pp = np.meshgrid(xs, ps, indexing="ij")
    q = inv[0, 0] * xx**2 + 2 * inv[0, 1] * xx * pp + inv[1, 1] * pp**2
    return np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))


def _axis_layout(lo_in, hi_in, h, eval_lo, eval_hi, sigma):
    # Zero-padded lattice sharing the input spacing; the periodic images of the
    # smoothed input must stay clear of the evaluation interval.
    margin = 8.0 * sigma + 4.0 * h
    lo = min(lo_in, eval_lo) - margin
    hi = max(hi_in, eval_hi) + margin
    n_left = int(math.ceil((lo_in - lo) / h))
    n_right = int(math.ceil((hi - hi_in) / h))
    return n_left, n_right


def kernel_convolve(grid: WignerGrid, spec: ChannelSpec, method: str = "fft") -> WignerGrid:
    """Propagate a sampled Wigner function through a Gaussian channel.

    ``W'(x', p') = integral W(x, p) K(x', p' | sqrt(eta) x, sqrt(eta) p) dx dp``
    with ``K`` a normalized Gaussian whose covariance is
    :meth:`ChannelSpec.noise_covariance`. In the variable ``u = x'/sqrt(eta)``
    the kernel is shift-invariant; ``method="fft"`` multiplies the padded grid
    spectrum by the analytic Gaussian transfer function and evaluates the
    resulting trigonometric series at ``x'/sqrt(eta)``. ``method="direct"`` is
    the separable quadrature reference (``phase`` must be a multiple of pi/2).
    """
    eta = spec.eta
    if eta == 1.0:
        return grid
    xs, ps = grid.xs, grid.ps
    cov = spec.noise_covariance()
    if eta == 0.0:
        return WignerGrid(*grid.window, _gaussian_density(xs, ps, cov))
    if method == "direct":
        out = _convolve_direct(grid, spec, cov)
    elif method == "fft":
        out = _convolve_fft(grid, cov / eta, eta)
    else:
        raise ValueError(f"unknown method {method!r}")
    result = WignerGrid(*grid.window, out)
    lost = abs(1.0 - result.integral() / max(grid.integral(), 1e-300))
    if lost > 1e-3:
        warnings.warn(f"kernel convolution leaks {lost:.1e} of the mass out of the window", RuntimeWarning, stacklevel=2)
    return result


def _convolve_direct(grid, spec, cov):
    if abs(cov[0, 1]) > 1e-14 * max(cov[0, 0], cov[1, 1]):
        raise ValueError("direct convolution needs an axis-aligned environment (phase multiple of pi/2)")
    eta = spec.eta
    xs, ps = grid.xs, grid.ps

    def kernel(nodes, var, h):
        d = nodes[:, None] - math.sqrt(eta) * nodes[None, :]
        return np.exp(-0.5 * d**2 / var) / math.sqrt(2 * math.pi * var) * h

    kx = kernel(xs, cov[0, 0], grid.dx)
    kp = kernel(ps, cov[1, 1], grid.dp)
    return kx @ grid.values @ kp.T


def _convolve_fft(grid, cov_u, eta):
    sq = math.sqrt(eta)
    xs, ps = grid.xs, grid.ps
    hx, hp = grid.dx, grid.dp
    sx, sp = math.sqrt(cov_u[0, 0]), math.sqrt(cov_u[1, 1])
    lx, rx = _axis_layout(xs[0], xs[-1], hx, xs[0] / sq, xs[-1] / sq, sx)
    lp, rp = _axis_layout(ps[0], ps[-1], hp, ps[0] / sq, ps[-1] / sq, sp)
    padded = np.pad(grid.values, ((lx, rx), (lp, rp)))
    mx, mp = padded.shape
    x0 = xs[0] - lx * hx
    p0 = ps[0] - lp * hp
    spec2 = np.fft.fft2(padded)
    kx = 2 * math.pi * np.fft.fftfreq(mx, hx)
    kp = 2 * math.pi * np.fft.fftfreq(mp, hp)
    transfer = np.exp(
        -0.5 * (cov_u[0, 0] * kx[:, None] ** 2 + 2 * cov_u[0, 1] * kx[:, None] * kp[None, :] + cov_u[1, 1] * kp[None, :] ** 2)
    )
    filt = spec2 * transfer
    # the Nyquist rows are ambiguous off-lattice
    if mx % 2 == 0:
        filt[mx // 2, :] = 0
    if mp % 2 == 0:
        filt[:, mp // 2] = 0
    ex = np.exp(1j * np.outer(xs / sq - x0, kx)) / mx
    ep = np.exp(1j * np.outer(ps / sq - p0, kp)) / mp
    return np.real(ex @ filt @ ep.T) / eta


def _argmin_tiebreak(values: np.ndarray) -> tuple[int, int]:
    vmin = values.min()
    tie = np.argwhere(values <= vmin + 1e-12 * max(1.0, abs(vmin)))
    # argwhere is row-major: lowest x index first, then lowest p index
    i, j = tie[0]
    return int(i), int(j)


def _local_minima(values: np.ndarray, count: int) -> list[tuple[int, int]]:
    v = values
    pad = np.pad(v, 1, constant_values=np.inf)
    is_min = np.ones_like(v, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = pad[1 + di : 1 + di + v.shape[0], 1 + dj : 1 + dj + v.shape[1]]
            is_min &= v <= nb
    # the decaying tails make every border node a spurious local minimum
    is_min[[0, -1], :] = False
    is_min[:, [0, -1]] = False
    idx = np.argwhere(is_min)
    order = np.lexsort((idx[:, 1], idx[:, 0], v[idx[:, 0], idx[:, 1]]))
    picks = [tuple(int(t) for t in idx[o]) for o in order[:count]]
    best = _argmin_tiebreak(v)
    if best not in picks:
        picks.append(best)
    return picks


def _polish(func, x0, p0, step, lo, hi):
    """Nelder-Mead from a lattice node, held inside the window by a distance penalty."""

    def bounded(z):
        inside = np.clip(z, lo, hi)
        return func(inside[0], inside[1]) + float(np.sum(np.abs(z - inside)))

    simplex = np.array([[x0, p0], [x0 + step, p0], [x0, p0 + step]])
    res = minimize(
        bounded,
        np.array([x0, p0]),
        method="Nelder-Mead",
        options={"maxiter": POLISH_MAXITER, "xatol": 1e-9, "fatol": 1e-14, "initial_simplex": simplex},
    )
    x, p = np.clip(res.x, lo, hi)
    return float(x), float(p), float(func(x, p))


def wigner_minimum(target, refine: bool = True, window=None, spacing: float = SCAN_SPACING, candidates: int = 3):
    """Global minimum of the Wigner function, negative or not.

    ``target`` is a :class:`DensityMatrix` (scanned on a lattice of the given
    spacing over ``window``, default :func:`auto_half_width`) or a
    :class:`WignerGrid`. The best ``candidates`` lattice minima are polished
    with a Nelder-Mead simplex.
    """
    if isinstance(target, WignerGrid):
        grid = target
        if refine:
            spline = RectBivariateSpline(grid.xs, grid.ps, grid.values, kx=3, ky=3)

            def func(x, p):
                return float(spline(x, p, grid=False))

        step = 0.5 * min(grid.dx, grid.dp)
    else:
        rho = target
        if window is None:
            hw = auto_half_width(rho)
            window = (-hw, hw, -hw, hw)
        x_min, x_max, p_min, p_max = window
        nx = max(int(math.ceil((x_max - x_min) / spacing)) + 1, 3)
        np_ = max(int(math.ceil((p_max - p_min) / spacing)) + 1, 3)
        grid = wigner_grid(rho, window, nx, np_)

        def func(x, p):
            return _wigner_node(rho.elements, x, p)

        step = 0.5 * min(grid.dx, grid.dp)
    xs, ps = grid.xs, grid.ps
    lo = np.array([grid.x_min, grid.p_min])
    hi = np.array([grid.x_max, grid.p_max])
    if not refine:
        i, j = _argmin_tiebreak(grid.values)
        return PhasePoint(float(xs[i]), float(ps[j])), float(grid.values[i, j])
    best = None
    for i, j in _local_minima(grid.values, candidates):
        x, p, val = _polish(func, float(xs[i]), float(ps[j]), step, lo, hi)
        if val > grid.values[i, j]:
            x, p, val = float(xs[i]), float(ps[j]), float(grid.values[i, j])
        key = (round(val, 10), round(x, 6), round(p, 6))
        if best is None or key < best[0]:
            best = (key, x, p, val)
    _, x, p, val = best
    return PhasePoint(x, p), val


def find_min(target, refine: bool = True, window=None, spacing: float = SCAN_SPACING):
    """Location and value of the most negative point of the Wigner function.

    Raises :class:`NoNegativityError` when the function is non-negative;
    minima above ``-NEGATIVITY_FLOOR`` are round-off in the Gaussian tails and
    count as non-negative.
    """
    pt, val = wigner_minimum(target, refine=refine, window=window, spacing=spacing)
    if not val < -NEGATIVITY_FLOOR:
        raise NoNegativityError(f"no negative region (minimum {val:.3e} at ({pt.x:.3f}, {pt.p:.3f}))")
    return pt, val
