"""Synthetic homodyne tomography.

Quadrature samples are drawn from the exact rotated-quadrature densities of a
known state; reconstruction is iterative maximum likelihood over bin-integrated
homodyne projectors, optionally smeared by a finite detection efficiency. The
temporal-mode helpers model the loss introduced by delaying the double-sided
exponential mode function ``f(t) = sqrt(pi gamma) exp(-pi gamma |t|)``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import states as st
from .channels import loss_adjoint, pure_loss

RNG_NAME = "PCG64 via numpy SeedSequence([seed, phase_index])"


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Fock wavefunctions ``<x|n>`` for ``n < n_max``, shape ``(n_max, len(x))``."""
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_max,) + x.shape)
    psi[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if n_max > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max - 1):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def quadrature_density(rho: st.DensityMatrix, theta: float, x) -> np.ndarray:
    """Probability density of ``x cos(theta) + p sin(theta)``."""
    psi = hermite_functions(rho.dim, x)
    phase = np.exp(1j * theta * np.arange(rho.dim))
    amp = psi * phase[:, None]
    dens = np.einsum("mx,mn,nx->x", amp.conj(), rho.elements, amp, optimize=True).real
    return np.clip(dens, 0.0, None)


@dataclass
class QuadratureDataset:
    thetas: np.ndarray
    values: np.ndarray
    seed: int
    source: str = ""

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.thetas.shape != self.values.shape:
            raise ValueError("thetas and values must have the same length")
        if np.any((self.thetas < 0) | (self.thetas >= math.pi)):
            raise ValueError("phases must lie in [0, pi)")

    @property
    def count(self) -> int:
        return int(self.values.size)

    def header(self) -> dict:
        return {"seed": self.seed, "source": self.source, "count": self.count, "rng": RNG_NAME}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header()) + "\n")
        buf.write("theta,value\n")
        for t, v in zip(self.thetas, self.values):
            buf.write(f"{float(t)!r},{float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadratureDataset":
        lines = text.splitlines()
        head = json.loads(lines[0][1:].strip())
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:] if ln.strip()]).reshape(-1, 2)
        ds = cls(rows[:, 0], rows[:, 1], head["seed"], head.get("source", ""))
        if ds.count != head["count"]:
            raise ValueError(f"header declares {head['count']} samples, found {ds.count}")
        return ds


def default_phases(n: int = 12) -> np.ndarray:
    return np.arange(n) * math.pi / n


def sample_homodyne(rho: st.DensityMatrix, thetas=None, n_per_theta: int = 1000, seed: int = 0, source: str = "", half_width: float | None = None, n_grid: int = 8001) -> QuadratureDataset:
    """Draw quadrature outcomes by inverse-CDF sampling of the tabulated density.

    Each phase gets its own generator seeded by ``(seed, phase_index)``.
    """
    thetas = default_phases() if thetas is None else np.asarray(thetas, dtype=float)
    if half_width is None:
        half_width = max(8.0, 2.0 * math.sqrt(2.0 * st.mean_photon(rho) + 1.0) + 6.0)
    grid = np.linspace(-half_width, half_width, n_grid)
    all_t, all_v = [], []
    for idx, theta in enumerate(thetas):
        dens = quadrature_density(rho, float(theta), grid)
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        cdf /= cdf[-1]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, idx])))
        u = rng.random(n_per_theta)
        all_v.append(np.interp(u, cdf, grid))
        all_t.append(np.full(n_per_theta, float(theta)))
    return QuadratureDataset(np.concatenate(all_t), np.concatenate(all_v), seed, source)


@dataclass(frozen=True)
class TomographyConfig:
    dim: int = 25
    efficiency: float = 1.0
    max_iters: int = 2000
    convergence_tol: float = 1e-9
    n_bins: int = 201
    x_range: float = 6.0
    quad_nodes: int = 6

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.dim < 1 or self.max_iters < 1 or self.n_bins < 1:
            raise ValueError("dim, max_iters and n_bins must be positive")


@dataclass
class Reconstruction:
    state: st.DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: list = field(default_factory=list)
    discarded: int = 0

    def report(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_log_likelihood": self.log_likelihood[-1] if self.log_likelihood else None,
            "discarded_samples": self.discarded,
        }


def bin_projectors(dim: int, edges: np.ndarray, quad_nodes: int = 6) -> np.ndarray:
    """``B_b[m, n] = integral over bin b of psi_m(x) psi_n(x) dx``, shape ``(n_bins, dim, dim)``."""
    gx, gw = np.polynomial.legendre.leggauss(quad_nodes)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * gx[None, :]
    weights = half[:, None] * gw[None, :]
    psi = hermite_functions(dim, nodes)  # (dim, n_bins, q)
    return np.einsum("mbq,nbq,bq->bmn", psi, psi, weights, optimize=True)


def homodyne_povm(dim: int, thetas, edges: np.ndarray, efficiency: float = 1.0, quad_nodes: int = 6) -> np.ndarray:
    """POVM elements ``Pi[theta_index, bin]`` seen through a detector of the given efficiency."""
    base = bin_projectors(dim, edges, quad_nodes)
    n = np.arange(dim)
    out = np.empty((len(thetas), base.shape[0], dim, dim), dtype=complex)
    for i, theta in enumerate(thetas):
        ph = np.exp(1j * theta * n)
        elems = ph[None, :, None] * base * ph.conj()[None, None, :]
        if efficiency < 1.0:
            elems = np.array([loss_adjoint(e, efficiency) for e in elems])
        out[i] = elems
    return out


def _inv_sqrt(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(m)
    return (vec / np.sqrt(lam)) @ vec.conj().T


def maxlik_reconstruct(data: QuadratureDataset, cfg: TomographyConfig = TomographyConfig()) -> Reconstruction:
    """Iterative maximum-likelihood state estimate.

    Works in the frame ``sigma = G^(1/2) rho G^(1/2)`` where
    ``G = sum_i w_i Pi_i`` normalizes the binned POVM, iterating
    ``sigma <- N[R sigma R]``. Whenever a full step would lower the
    likelihood it is replaced by a diluted step ``(1 + eps R)`` with ``eps``
    halved until the likelihood does not decrease.
    """
    if data.count == 0:
        raise ValueError("empty dataset")
    edges = np.linspace(-cfg.x_range, cfg.x_range, cfg.n_bins + 1)
    thetas, inverse = np.unique(data.thetas, return_inverse=True)
    inside = (data.values >= edges[0]) & (data.values <= edges[-1])
    bins = np.clip(np.searchsorted(edges, data.values[inside], side="right") - 1, 0, cfg.n_bins - 1)
    counts = np.zeros((thetas.size, cfg.n_bins))
    np.add.at(counts, (inverse[inside], bins), 1.0)
    total = counts.sum()

    povm = homodyne_povm(cfg.dim, thetas, edges, cfg.efficiency, cfg.quad_nodes)
    phase_weight = counts.sum(axis=1) / total
    g = np.einsum("t,tbmn->mn", phase_weight, povm)
    g = 0.5 * (g + g.conj().T)
    g_is = _inv_sqrt(g)

    mask = counts > 0
    freqs = counts[mask] / total
    # complete POVM in the sigma frame: sum_i w_i Pi'_i = I
    elems = np.einsum("mn,inp,pq->imq", g_is, povm[mask], g_is, optimize=True)

    def loglik(p):
        return float(np.sum(freqs * np.log(np.maximum(p, 1e-300))))

    # maximally mixed start; each measured element sees its phase weight
    weights_of_elems = np.repeat(phase_weight[:, None], cfg.n_bins, axis=1)[mask]
    elems_w = elems * weights_of_elems[:, None, None]
    sigma = np.eye(cfg.dim, dtype=complex) / cfg.dim

    def normalize(m):
        m = 0.5 * (m + m.conj().T)
        return m / np.trace(m).real

    def weighted_probs(sigma):
        return np.einsum("inm,mn->i", elems_w, sigma, optimize=True).real

    p = weighted_probs(sigma)
    history = [loglik(p)]
    converged = False
    it = 0
    eye = np.eye(cfg.dim)
    for it in range(1, cfg.max_iters + 1):
        r = np.einsum("i,imn->mn", freqs / np.maximum(p, 1e-300), elems_w, optimize=True)
        cand = normalize(r @ sigma @ r)
        p_new = weighted_probs(cand)
        l_new = loglik(p_new)
        eps = 1.0
        while l_new < history[-1] - 1e-12 * abs(history[-1]) and eps > 1e-6:
            step = eye + eps * r
            cand = normalize(step @ sigma @ step)
            p_new = weighted_probs(cand)
            l_new = loglik(p_new)
            eps *= 0.5
        gain = l_new - history[-1]
        sigma, p = cand, p_new
        history.append(l_new)
        if abs(gain) <= cfg.convergence_tol * abs(l_new):
            converged = True
            break

    rho = normalize(g_is @ sigma @ g_is)
    lam, vec = np.linalg.eigh(rho)
    rho = (vec * np.clip(lam, 0.0, None)) @ vec.conj().T
    state = st.DensityMatrix(normalize(rho))
    return Reconstruction(state, converged, it, history, int(data.count - inside.sum()))


def compare_fidelity(estimate: st.DensityMatrix, truth: st.DensityMatrix) -> float:
    """Fidelity after bringing ``truth`` to the estimate's cutoff (renormalizing any cut tail)."""
    if truth.dim > estimate.dim:
        truth = st.crop(truth, estimate.dim, tol=1.0)
    elif truth.dim < estimate.dim:
        truth = st.embed(truth, estimate.dim)
    return st.fidelity(estimate, truth)


@dataclass(frozen=True)
class TemporalMode:
    """Double-sided exponential mode of bandwidth ``gamma`` read out with delay ``tau``."""

    gamma: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.tau >= 0:
            raise ValueError("tau must be non-negative")

    def profile(self, t):
        a = math.pi * self.gamma
        return math.sqrt(a) * np.exp(-a * np.abs(t))


def effective_eta(mode: TemporalMode) -> float:
    """``|<f_0|f_tau>|^2`` by numerical quadrature."""
    a = math.pi * mode.gamma
    tau = mode.tau

    def f(t):
        return a * math.exp(-a * (abs(t) + abs(t - tau)))

    pieces = [(-math.inf, 0.0), (0.0, tau), (tau, math.inf)] if tau > 0 else [(-math.inf, 0.0), (0.0, math.inf)]
    overlap = sum(integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0] for lo, hi in pieces)
    return min(overlap**2, 1.0)


def effective_eta_closed_form(mode: TemporalMode) -> float:
    u = math.pi * mode.gamma * mode.tau
    return (1.0 + u) ** 2 * math.exp(-2.0 * u)


def delayed_mode_state(rho: st.DensityMatrix, mode: TemporalMode) -> st.DensityMatrix:
    """State seen in the delayed mode, treating the orthogonal modes as vacuum."""
    return pure_loss(rho, effective_eta(mode))


def delay_for_eta(gamma: float, eta: float) -> float:
    """Readout delay at which the mode overlap drops to ``eta``."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    if eta == 1:
        return 0.0
    # (1+u)^2 e^{-2u} falls monotonically from 1; bracket the root by doubling
    g = lambda u: (1.0 + u) ** 2 * math.exp(-2.0 * u) - eta
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    u = optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return u / (math.pi * gamma)
