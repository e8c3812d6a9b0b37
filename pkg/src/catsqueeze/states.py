"""Bosonic single-mode states in a truncated Fock basis.

Conventions used throughout the package:

* quadratures ``x = (a + a^dag)/sqrt(2)`` and ``p = (a - a^dag)/(i sqrt(2))``,
  so the vacuum variance is 1/2 and a coherent amplitude ``alpha`` sits at
  ``(sqrt(2) Re alpha, sqrt(2) Im alpha)``;
* squeezing is quoted as a variance ratio in decibels, ``S = -10 log10 G``,
  with squeeze parameter ``r = S ln(10) / 20``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import (
    CutoffError,
    DegenerateStateError,
    InvalidStateError,
    TruncationError,
)

DEFAULT_DIM = 60
TRUNCATION_TOL = 1e-10

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Immutable density operator on the span of ``|0>, ..., |dim-1>``.

    ``trace_deficit`` is the population that was discarded when the state was
    cut down to ``dim`` levels. Construction validates hermiticity, unit trace
    and positivity; invalid input raises :class:`InvalidStateError`.
    """

    elements: np.ndarray
    trace_deficit: float = 0.0

    def __post_init__(self):
        rho = np.array(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
        herm_err = np.max(np.abs(rho - rho.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max deviation {herm_err:.3e})")
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace is {tr:.12f}, expected 1")
        lam_min = np.linalg.eigvalsh(rho)[0]
        if lam_min < -PSD_TOL:
            raise InvalidStateError(f"matrix is not positive semidefinite (eigenvalue {lam_min:.3e})")
        if not self.trace_deficit >= 0.0:
            raise InvalidStateError("trace_deficit must be non-negative")
        rho.setflags(write=False)
        object.__setattr__(self, "elements", rho)
        object.__setattr__(self, "trace_deficit", float(self.trace_deficit))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, trace_deficit={self.trace_deficit:.2e})"

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.elements.real.tolist(),
            "im": self.elements.imag.tolist(),
            "trace_deficit": self.trace_deficit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DensityMatrix":
        rho = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        if rho.shape != (data["dim"], data["dim"]):
            raise InvalidStateError(f"declared dim {data['dim']} does not match matrix shape {rho.shape}")
        return cls(rho, trace_deficit=data.get("trace_deficit", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing of ``s_db`` decibels; ``angle`` is the direction of the compressed quadrature."""

    s_db: float
    angle: float = 0.0

    @property
    def gain(self) -> float:
        """Variance gain ``G`` applied to the compressed quadrature."""
        return 10.0 ** (-self.s_db / 10.0)

    @property
    def r(self) -> float:
        return self.s_db * math.log(10.0) / 20.0

    @classmethod
    def from_r(cls, r: float, angle: float = 0.0) -> "SqueezeParams":
        return cls(20.0 * r / math.log(10.0), angle)


def _from_ket(psi: np.ndarray, deficit: float) -> DensityMatrix:
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(np.outer(psi, psi.conj()), trace_deficit=deficit)


def _normalized(rho: np.ndarray, deficit: float) -> DensityMatrix:
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real, trace_deficit=deficit)


def _coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max)
    if alpha == 0:
        c = np.zeros(n_max, dtype=complex)
        c[0] = 1.0
        return c
    mag = abs(alpha)
    log_c = -0.5 * mag**2 + n * math.log(mag) - 0.5 * gammaln(n + 1)
    return np.exp(log_c) * np.exp(1j * n * np.angle(alpha))


def _poisson_required_dim(mean: float, tol: float) -> int:
    n = 1
    while poisson.sf(n - 1, mean) > tol:
        n += 1
    return n


def fock(n: int, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Number state ``|n><n|``."""
    if n < 0 or n >= dim:
        raise CutoffError(f"Fock index {n} does not fit in cutoff dim={dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return _from_ket(psi, 0.0)


def vacuum(dim: int = DEFAULT_DIM) -> DensityMatrix:
    return fock(0, dim)


def coherent(alpha: complex, dim: int = DEFAULT_DIM, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    """Coherent state ``|alpha>``; fails if more than ``tol`` of its Poisson tail is cut."""
    mean = abs(alpha) ** 2
    deficit = float(poisson.sf(dim - 1, mean)) if mean > 0 else 0.0
    if deficit > tol:
        need = _poisson_required_dim(mean, tol)
        raise TruncationError(
            f"coherent state with |alpha|^2={mean:g} loses {deficit:.2e} at dim={dim}; use dim >= {need}",
            deficit=deficit,
            required_dim=need,
        )
    return _from_ket(_coherent_amplitudes(alpha, dim), deficit)


def cat(alpha: complex, parity: str = "even", dim: int = DEFAULT_DIM, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    """Coherent-state superposition ``|alpha> +/- |-alpha>``.

    The norm uses the exact overlap ``<alpha|-alpha> = exp(-2|alpha|^2)`` so
    the recorded deficit is the true population beyond the cutoff.
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    sign = 1.0 if parity == "even" else -1.0
    overlap = math.exp(-2.0 * abs(alpha) ** 2)
    norm2 = 2.0 * (1.0 + sign * overlap)
    if norm2 < 1e-14:
        raise DegenerateStateError(f"{parity} cat with alpha={alpha} has zero norm")
    c = _coherent_amplitudes(alpha, dim)
    n = np.arange(dim)
    psi = c * (1.0 + sign * (-1.0) ** n) / math.sqrt(norm2)
    deficit = max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2)))
    if deficit > tol:
        need = dim
        while True:
            need += max(1, need // 4)
            cc = _coherent_amplitudes(alpha, need)
            m = np.arange(need)
            if 1.0 - np.sum(np.abs(cc * (1.0 + sign * (-1.0) ** m)) ** 2) / norm2 <= tol:
                break
        raise TruncationError(
            f"{parity} cat with |alpha|^2={abs(alpha) ** 2:g} loses {deficit:.2e} at dim={dim}; use dim >= {need}",
            deficit=deficit,
            required_dim=need,
        )
    return _from_ket(psi, deficit)


def fock_superposition(coeffs, dim: int = DEFAULT_DIM) -> DensityMatrix:
    """Pure state ``sum_n coeffs[n] |n>``, normalized (e.g. ``c0|0> + c2|2>``)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size > dim:
        raise CutoffError(f"{coeffs.size} coefficients do not fit in cutoff dim={dim}")
    if np.linalg.norm(coeffs) == 0:
        raise DegenerateStateError("all superposition coefficients are zero")
    psi = np.zeros(dim, dtype=complex)
    psi[: coeffs.size] = coeffs
    return _from_ket(psi, 0.0)


def thermal(nbar: float, dim: int = DEFAULT_DIM, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    if nbar < 0:
        raise ValueError("mean photon number must be non-negative")
    if nbar == 0:
        return vacuum(dim)
    q = nbar / (1.0 + nbar)
    deficit = q**dim
    if deficit > tol:
        need = math.ceil(math.log(tol) / math.log(q))
        raise TruncationError(
            f"thermal state nbar={nbar:g} loses {deficit:.2e} at dim={dim}; use dim >= {need}",
            deficit=deficit,
            required_dim=need,
        )
    pops = (1.0 - q) * q ** np.arange(dim)
    return _normalized(np.diag(pops).astype(complex), deficit)


def mixture(states, weights=None) -> DensityMatrix:
    states = list(states)
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise ValueError(f"cannot mix states of different dims {sorted(dims)}")
    if weights is None:
        weights = np.full(len(states), 1.0 / len(states))
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("mixture weights must be non-negative and not all zero")
    weights = weights / weights.sum()
    rho = sum(w * s.elements for w, s in zip(weights, states))
    deficit = float(sum(w * s.trace_deficit for w, s in zip(weights, states)))
    return _normalized(rho, deficit)


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


@functools.lru_cache(maxsize=128)
def _squeeze_unitary(work_dim: int, r: float, angle: float) -> np.ndarray:
    a = annihilation(work_dim)
    xi = r * np.exp(2j * angle)
    gen = 0.5 * (np.conj(xi) * (a @ a) - xi * (a.conj().T @ a.conj().T))
    u = expm(gen)
    u.setflags(write=False)
    return u


def squeeze(rho: DensityMatrix, params: SqueezeParams, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    """Apply the squeeze unitary that scales the variance along ``params.angle`` by ``G``.

    The generator is exponentiated at 1.5x the cutoff and the result is cropped
    back; population pushed past the cutoff is checked against ``tol``.
    """
    if params.s_db == 0:
        return rho
    dim = rho.dim
    work = max(int(math.ceil(1.5 * dim)), dim + 8)
    u = _squeeze_unitary(work, params.r, float(params.angle))
    big = np.zeros((work, work), dtype=complex)
    big[:dim, :dim] = rho.elements
    out = (u @ big @ u.conj().T)[:dim, :dim]
    lost = max(0.0, 1.0 - np.trace(out).real)
    if lost > tol:
        raise TruncationError(
            f"squeezing by {params.s_db:g} dB pushes {lost:.2e} of population past dim={dim}; increase dim",
            deficit=lost,
        )
    return _normalized(out, rho.trace_deficit + lost)


def crop(rho: DensityMatrix, dim: int, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    """Restrict to the lowest ``dim`` levels; the discarded population must stay below ``tol``."""
    if dim >= rho.dim:
        return embed(rho, dim)
    sub = rho.elements[:dim, :dim]
    lost = max(0.0, 1.0 - np.trace(sub).real)
    if lost > tol:
        raise TruncationError(f"cropping to dim={dim} discards {lost:.2e}", deficit=lost)
    return _normalized(sub.copy(), rho.trace_deficit + lost)


def compact(rho: DensityMatrix, tol: float = TRUNCATION_TOL, min_dim: int = 2) -> DensityMatrix:
    """Crop to the smallest cutoff whose discarded population is at most ``tol``."""
    pops = np.clip(np.real(np.diag(rho.elements)), 0.0, None)
    tail = np.cumsum(pops[::-1])[::-1]
    # tail[k] = population on levels >= k
    keep = rho.dim
    for k in range(max(min_dim, 1), rho.dim):
        if tail[k] <= tol:
            keep = k
            break
    return crop(rho, keep, tol)


def embed(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """Zero-pad to a larger cutoff."""
    if dim < rho.dim:
        raise CutoffError(f"cannot embed dim={rho.dim} into smaller dim={dim}")
    if dim == rho.dim:
        return rho
    big = np.zeros((dim, dim), dtype=complex)
    big[: rho.dim, : rho.dim] = rho.elements
    return DensityMatrix(big, trace_deficit=rho.trace_deficit)


def purity(rho: DensityMatrix) -> float:
    return float(np.sum(np.abs(rho.elements) ** 2))


def mean_photon(rho: DensityMatrix) -> float:
    return float(np.dot(np.arange(rho.dim), np.real(np.diag(rho.elements))))


def photon_distribution(rho: DensityMatrix) -> np.ndarray:
    return np.clip(np.real(np.diag(rho.elements)), 0.0, None)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(m)
    return (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2``.

    Evaluated as the squared trace norm of ``sqrt(a) sqrt(b)``, which keeps
    round-off in the null spaces of rank-deficient inputs at second order.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    sv = np.linalg.svd(_psd_sqrt(a.elements) @ _psd_sqrt(b.elements), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def quadrature_moments(rho: DensityMatrix, theta: float = 0.0) -> tuple[float, float]:
    """Mean and variance of ``x cos(theta) + p sin(theta)``."""
    d = rho.dim + 2
    a = annihilation(d)
    xq = (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2.0)
    big = np.zeros((d, d), dtype=complex)
    big[: rho.dim, : rho.dim] = rho.elements
    mean = np.trace(big @ xq).real
    second = np.trace(big @ xq @ xq).real
    return float(mean), float(second - mean**2)
