"""Decoherence metrics built on the Wigner minimum.

The rate of decay at transmission ``eta`` is

    RD = (dW/d eta')(x_min, p_min, eta) / W(x_min, p_min, eta)

with the minimum location frozen at its position for ``eta``. Decreasing
``eta`` means more loss, so a shrinking negativity gives a positive RD.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import states as st
from .channels import ChannelSpec, gaussian_env_channel, pure_loss
from .errors import NoNegativityError, TruncationError
from .wigner import PhasePoint, find_min, wigner_minimum, wigner_point

FD_STEP = 1e-3
RICHARDSON_RTOL = 1e-4
THRESHOLD_TOL = 1e-4
# squeeze invariance holds to ~1e-9 numerically; flatter than this is "no dependence"
FLAT_RTOL = 1e-7
# Wigner values feel a cut tail through coherences, roughly sqrt(population)
COMPACT_TOL = 1e-14

Channel = Callable[[st.DensityMatrix, float], st.DensityMatrix]


@dataclass(frozen=True)
class DecayCurvePoint:
    eta: float
    w_min: float
    location: PhasePoint
    rd: float


@dataclass
class DecayCurve:
    descriptor: str
    points: list
    fit_coeffs: np.ndarray | None = None
    positivity_threshold: float | None = None
    excluded: list = field(default_factory=list)

    @property
    def etas(self) -> np.ndarray:
        return np.array([pt.eta for pt in self.points])

    @property
    def w_mins(self) -> np.ndarray:
        return np.array([pt.w_min for pt in self.points])

    @property
    def rds(self) -> np.ndarray:
        return np.array([pt.rd for pt in self.points])

    def fit_rd(self, eta) -> np.ndarray:
        """Rate of decay from the analytic derivative of the cubic fit."""
        if self.fit_coeffs is None:
            raise ValueError("curve has too few points for a cubic fit")
        eta = np.asarray(eta, dtype=float)
        return np.polyval(np.polyder(self.fit_coeffs), eta) / np.polyval(self.fit_coeffs, eta)

    def fit_residual_rms(self) -> float:
        resid = np.polyval(self.fit_coeffs, self.etas) - self.w_mins
        return float(np.sqrt(np.mean(resid**2)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {self.descriptor}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eta", "w_min", "x_min", "p_min", "rd"])
        for pt in self.points:
            writer.writerow([f"{pt.eta:.10g}", f"{pt.w_min:.12g}", f"{pt.location.x:.10g}", f"{pt.location.p:.10g}", f"{pt.rd:.12g}"])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "fit_coeffs": None if self.fit_coeffs is None else [float(c) for c in self.fit_coeffs],
            "fit_order": "highest power first",
            "positivity_threshold": self.positivity_threshold,
            "excluded_etas": [float(e) for e in self.excluded],
        }

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2)


def _derivative(f, x, h):
    """Second-order difference; one-sided where the step would leave [0, 1]."""
    if x + h <= 1.0 and x - h >= 0.0:
        return (f(x + h) - f(x - h)) / (2 * h)
    if x + h > 1.0:
        return (3 * f(x) - 4 * f(x - h) + f(x - 2 * h)) / (2 * h)
    return (-3 * f(x) + 4 * f(x + h) - f(x + 2 * h)) / (2 * h)


def decay_point(rho0: st.DensityMatrix, eta: float, channel: Channel = pure_loss, h: float = FD_STEP) -> DecayCurvePoint:
    """Minimum, its location and the rate of decay of ``channel(rho0, eta)``."""
    rho0 = st.compact(rho0, COMPACT_TOL)
    pt, w = find_min(channel(rho0, eta))

    def w_at(e):
        return wigner_point(channel(rho0, e), pt)

    d_h = _derivative(w_at, eta, h)
    d_half = _derivative(w_at, eta, h / 2)
    if abs(d_h - d_half) > RICHARDSON_RTOL * max(abs(d_half), 1e-12):
        warnings.warn(
            f"finite-difference derivative not converged at eta={eta}: {d_h:.8g} vs {d_half:.8g}",
            RuntimeWarning,
            stacklevel=2,
        )
    deriv = (4 * d_half - d_h) / 3
    return DecayCurvePoint(float(eta), float(w), pt, float(deriv / w))


def rate_of_decay(rho0: st.DensityMatrix, eta: float, channel: Channel = pure_loss, h: float = FD_STEP) -> float:
    return decay_point(rho0, eta, channel, h).rd


def _is_negative(rho0, eta, channel) -> bool:
    return wigner_minimum(channel(rho0, eta))[1] < 0


def positivity_threshold(rho0: st.DensityMatrix, eta_neg: float, eta_pos: float, channel: Channel = pure_loss, tol: float = THRESHOLD_TOL) -> float:
    """Bisect for the transmission at which the last negativity disappears."""
    lo, hi = eta_pos, eta_neg
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _is_negative(rho0, mid, channel):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def decay_curve(rho0: st.DensityMatrix, eta_list, channel_family="pure_loss", descriptor: str = "") -> DecayCurve:
    """Negativity and rate of decay along a descending transmission sweep.

    ``channel_family`` is ``"pure_loss"`` or any callable ``(rho, eta) -> rho``.
    """
    channel = pure_loss if channel_family == "pure_loss" else channel_family
    etas = [float(e) for e in eta_list]
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta_list must be strictly descending")
    rho0 = st.compact(rho0, COMPACT_TOL)
    points, excluded = [], []
    for eta in etas:
        try:
            points.append(decay_point(rho0, eta, channel))
        except NoNegativityError:
            excluded.append(eta)
    if not points:
        raise NoNegativityError("no transmission in the sweep leaves a negative Wigner function")
    threshold = None
    if excluded:
        last_neg = points[-1].eta
        first_pos = max(e for e in excluded if e < last_neg) if any(e < last_neg for e in excluded) else None
        if first_pos is not None:
            threshold = positivity_threshold(rho0, last_neg, first_pos, channel)
    fit = None
    if len(points) >= 4:
        fit = np.polyfit([p.eta for p in points], [p.w_min for p in points], 3)
    return DecayCurve(descriptor, points, fit, threshold, excluded)


def squeezed_cat(alpha2: float, s_db: float, angle: float = 0.0, parity: str = "even", dim: int = st.DEFAULT_DIM) -> st.DensityMatrix:
    rho = st.cat(math.sqrt(alpha2), parity, dim)
    return st.squeeze(rho, st.SqueezeParams(s_db, angle))


def rd_reduction_factor(alpha2: float, s_db: float, eta: float, dim: int = st.DEFAULT_DIM) -> float:
    """``RD(cat) / RD(squeezed cat)`` at transmission ``eta``; squeezing compresses the lobe axis."""
    plain = st.cat(math.sqrt(alpha2), "even", dim)
    rd_plain = rate_of_decay(plain, eta)
    if s_db == 0:
        return 1.0
    return rd_plain / rate_of_decay(squeezed_cat(alpha2, s_db, 0.0, dim=dim), eta)


def symmetry_angle(rho: st.DensityMatrix) -> float:
    """Direction of largest quadrature spread, or 0 when the state is isotropic."""
    mx, vx = st.quadrature_moments(rho, 0.0)
    mp, vp = st.quadrature_moments(rho, math.pi / 2)
    _, v45 = st.quadrature_moments(rho, math.pi / 4)
    cxp = v45 - 0.5 * (vx + vp)
    second = np.array([[vx + mx**2, cxp + mx * mp], [cxp + mx * mp, vp + mp**2]])
    lam, vec = np.linalg.eigh(second)
    if lam[1] - lam[0] < 1e-9:
        return 0.0
    angle = math.atan2(vec[1, 1], vec[0, 1]) % math.pi
    return 0.0 if abs(angle - math.pi) < 1e-12 else angle


@dataclass
class OptimalSqueezing:
    params: st.SqueezeParams
    objective: str
    value: float
    plain_value: float
    dw_dg: float
    degenerate: bool
    scan_s_db: np.ndarray
    scan_values: np.ndarray


def _squeeze_objective(base, eta, angle, objective, work_dim):
    big = st.embed(base, max(work_dim, base.dim))

    def f(s_db):
        try:
            sq = st.compact(st.squeeze(big, st.SqueezeParams(float(s_db), angle)), COMPACT_TOL)
        except TruncationError:
            return math.inf
        if objective == "min_rd":
            try:
                return rate_of_decay(sq, eta)
            except NoNegativityError:
                return math.inf
        return wigner_minimum(pure_loss(sq, eta))[1]

    return f


def optimal_squeezing(
    rho0: st.DensityMatrix,
    eta: float,
    objective: str = "min_rd",
    angle: float | None = None,
    s_max: float = 10.0,
    step: float = 0.1,
    tol: float = 0.01,
    work_dim: int = 100,
) -> OptimalSqueezing:
    """Squeezing (dB) applied before loss that minimizes the chosen figure of merit.

    Scans ``[0, s_max]`` at ``step`` and refines by golden-section search to
    ``tol``. Squeezing levels that cannot be represented at ``work_dim`` count
    as infeasible. ``angle`` defaults to :func:`symmetry_angle` (the lobe axis
    of a cat). Also reports ``dW'/dG`` at ``G = 1`` for the equivalent
    squeezed-environment channel, evaluated at the unsqueezed minimum.
    """
    if objective not in ("min_rd", "min_w_value"):
        raise ValueError(f"unknown objective {objective!r}")
    base = st.compact(rho0, COMPACT_TOL)
    find_min(base)  # raises for states without negativity
    if angle is None:
        angle = symmetry_angle(base)
    f = _squeeze_objective(base, eta, angle, objective, work_dim)
    grid = np.round(np.arange(0.0, s_max + step / 2, step), 10)
    values = np.array([f(s) for s in grid])
    plain_value = float(values[0])
    finite = np.isfinite(values)
    if not finite.any():
        raise NoNegativityError("objective is undefined for every squeezing level")
    spread = np.ptp(values[finite])
    if spread <= FLAT_RTOL * max(1.0, abs(plain_value)):
        return OptimalSqueezing(st.SqueezeParams(0.0, angle), objective, plain_value, plain_value, 0.0, True, grid, values)
    i = int(np.nanargmin(np.where(finite, values, np.nan)))
    s_best, v_best = float(grid[i]), float(values[i])
    if 0 < i < grid.size - 1 and np.isfinite(values[i - 1]) and np.isfinite(values[i + 1]):
        res = minimize_scalar(
            f,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": tol / (4 * max(abs(s_best), 0.1))},
        )
        if res.fun <= v_best:
            s_best, v_best = float(res.x), float(res.fun)
    dw_dg = _env_gain_derivative(base, eta, angle)
    return OptimalSqueezing(st.SqueezeParams(s_best, angle), objective, v_best, plain_value, dw_dg, False, grid, values)


def _env_gain_derivative(base, eta, angle, dg: float = 1e-3) -> float:
    if eta == 1.0:
        return 0.0
    pt, _ = wigner_minimum(pure_loss(base, eta))

    def w(g):
        out = gaussian_env_channel(base, ChannelSpec(eta, env_gain=g, phase=angle))
        return wigner_point(out, pt)

    return (w(1 + dg) - w(1 - dg)) / (2 * dg)


def fock_rd_ladder(n_max: int, eta: float = 1.0) -> list:
    """Rates of decay of ``|1>, ..., |n_max>``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return [rate_of_decay(st.fock(n, n_max + 1), eta) for n in range(1, n_max + 1)]
