"""Lossy Gaussian channels acting on Fock-basis density matrices.

Two independent routes are provided. :func:`pure_loss` is the closed-form
photon-loss map (vacuum environment). :func:`gaussian_env_channel` couples the
input to an explicit ancilla prepared in a squeezed (possibly thermal)
Gaussian state on a beamsplitter and traces it out, realizing

    X_out = sqrt(eta) X_in + sqrt(1 - eta) sqrt(G) X_env
    P_out = sqrt(eta) P_in + sqrt(1 - eta) P_env / sqrt(G)
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import InvalidChannelError, TruncationError
from .states import (
    TRUNCATION_TOL,
    DensityMatrix,
    SqueezeParams,
    _normalized,
    _squeeze_unitary,
    crop,
    embed,
    squeeze,
)

ANCILLA_TAIL_TOL = 1e-8
# ancilla amplitude left out when the size is chosen automatically
ANCILLA_AMPLITUDE_TOL = 1e-12


@dataclass(frozen=True)
class ChannelSpec:
    """Transmission ``eta`` with a Gaussian environment.

    ``env_gain`` is the variance gain ``G`` applied to the environment ``x``
    quadrature (``1/G`` on ``p``); ``env_var_x``/``env_var_p`` are the
    environment variances before the gain. ``phase`` orients the environment
    ``x`` axis in phase space.
    """

    eta: float
    env_gain: float = 1.0
    env_var_x: float = 0.5
    env_var_p: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidChannelError(f"transmission eta={self.eta} outside [0, 1]")
        if not self.env_gain > 0:
            raise InvalidChannelError(f"environment gain must be positive, got {self.env_gain}")
        if not (self.env_var_x > 0 and self.env_var_p > 0):
            raise InvalidChannelError("environment variances must be positive")
        if self.env_var_x * self.env_var_p < 0.25 - 1e-12:
            raise InvalidChannelError(
                f"environment variances ({self.env_var_x}, {self.env_var_p}) violate the uncertainty relation"
            )

    @property
    def is_pure_loss(self) -> bool:
        return self.env_gain == 1.0 and self.env_var_x == 0.5 and self.env_var_p == 0.5

    def env_covariance(self) -> np.ndarray:
        """Covariance of the environment quadratures after gain and orientation."""
        c, s = math.cos(self.phase), math.sin(self.phase)
        rot = np.array([[c, -s], [s, c]])
        diag = np.diag([self.env_gain * self.env_var_x, self.env_var_p / self.env_gain])
        return rot @ diag @ rot.T

    def noise_covariance(self) -> np.ndarray:
        """Covariance added to the output quadratures."""
        return (1.0 - self.eta) * self.env_covariance()

    def output_covariance(self, cov_in) -> np.ndarray:
        return self.eta * np.asarray(cov_in, dtype=float) + self.noise_covariance()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSpec":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChannelSpec":
        return cls.from_dict(json.loads(text))


def _check_eta(eta: float):
    if not 0.0 <= eta <= 1.0:
        raise InvalidChannelError(f"transmission eta={eta} outside [0, 1]")


@functools.lru_cache(maxsize=64)
def _loss_coefficients(dim: int, eta: float) -> tuple:
    """Per-shift weights ``c_k[m, n]`` so that ``out[m, n] = sum_k c_k[m, n] rho[m+k, n+k]``."""
    log_eta = math.log(eta)
    log_loss = math.log1p(-eta)
    coeffs = []
    for k in range(dim):
        m = np.arange(dim - k)
        log_binom = gammaln(m + k + 1) - gammaln(m + 1) - gammaln(k + 1)
        half = 0.5 * log_binom + 0.5 * m * log_eta
        c = np.exp(half[:, None] + half[None, :] + k * log_loss)
        c.setflags(write=False)
        coeffs.append(c)
    return tuple(coeffs)


def pure_loss(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Photon loss with transmission ``eta`` into a vacuum environment.

    Equivalent to the Kraus set
    ``A_k = sum_n sqrt(C(n, k) eta^(n-k) (1-eta)^k) |n-k><n|``.
    """
    _check_eta(eta)
    if eta == 1.0:
        return rho
    dim = rho.dim
    src = rho.elements
    if eta == 0.0:
        out = np.zeros_like(src)
        out[0, 0] = np.trace(src)
        return DensityMatrix(out, trace_deficit=rho.trace_deficit)
    out = np.zeros_like(src)
    for k, c in enumerate(_loss_coefficients(dim, float(eta))):
        out[: dim - k, : dim - k] += c * src[k:, k:]
    return _normalized(out, rho.trace_deficit)


def loss_adjoint(op: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss map, ``sum_k A_k^dag op A_k``.

    Used to turn an ideal POVM element into the element seen through a
    detector of efficiency ``eta``.
    """
    _check_eta(eta)
    op = np.asarray(op)
    if eta == 1.0:
        return op.copy()
    dim = op.shape[0]
    out = np.zeros_like(op, dtype=complex)
    if eta == 0.0:
        out[:] = op[0, 0] * np.eye(dim)
        return out
    for k, c in enumerate(_loss_coefficients(dim, float(eta))):
        out[k:, k:] += c * op[: dim - k, : dim - k]
    return out


def phase_rotate(rho: DensityMatrix, theta: float) -> DensityMatrix:
    """``exp(-i theta n) rho exp(i theta n)``; maps ``|alpha>`` to ``|alpha e^{-i theta}>``."""
    if theta == 0:
        return rho
    n = np.arange(rho.dim)
    ph = np.exp(-1j * theta * n)
    return DensityMatrix(ph[:, None] * rho.elements * ph.conj()[None, :], trace_deficit=rho.trace_deficit)


@functools.lru_cache(maxsize=32)
def _beamsplitter_blocks(n_total: int, eta: float) -> tuple:
    """Beamsplitter unitary restricted to each total-photon-number sector.

    Block ``n`` acts on ``|i, n-i>`` (system has ``i`` photons) and satisfies
    ``B^dag a B = sqrt(eta) a + sqrt(1-eta) b``.
    """
    theta = math.acos(math.sqrt(eta))
    blocks = []
    for n in range(n_total):
        i = np.arange(n)
        gen = np.zeros((n + 1, n + 1))
        gen[i + 1, i] = np.sqrt((i + 1) * (n - i))
        gen[i, i + 1] = -np.sqrt((i + 1) * (n - i))
        b = expm(theta * gen)
        b.setflags(write=False)
        blocks.append(b)
    return tuple(blocks)


def _environment_components(spec: ChannelSpec, env_dim: int):
    """Pure-state decomposition ``[(weight, vector)]`` of the squeezed thermal environment."""
    nu = math.sqrt(spec.env_var_x * spec.env_var_p)
    nbar = max(nu - 0.5, 0.0)
    ratio = spec.env_gain * math.sqrt(spec.env_var_x / spec.env_var_p)
    r_env = -0.5 * math.log(ratio)
    work = max(int(math.ceil(1.5 * env_dim)), env_dim + 8)
    u = _squeeze_unitary(work, r_env, 0.0) if r_env != 0 else np.eye(work)
    comps = []
    if nbar == 0:
        weights = np.array([1.0])
    else:
        q = nbar / (1.0 + nbar)
        n_terms = int(math.ceil(math.log(1e-14) / math.log(q)))
        weights = (1.0 - q) * q ** np.arange(n_terms)
    tail_weight = 0.0
    for j, w in enumerate(weights):
        if j >= work:
            break
        col = u[:, j]
        tail = float(np.sum(np.abs(col[env_dim:]) ** 2))
        tail_weight += w * tail
        comps.append((float(w), col[:env_dim].copy()))
    return comps, tail_weight


def _auto_env_dim(spec: ChannelSpec, dim: int) -> int:
    """Smallest ancilla size, at least ``dim``, whose discarded amplitude is negligible.

    Ancilla levels above the cutoff still feed low output levels through the
    beamsplitter, so the criterion is on amplitude rather than population.
    """
    env_dim, cap = dim, 4 * dim
    while env_dim < cap and _environment_components(spec, env_dim)[1] > ANCILLA_AMPLITUDE_TOL**2:
        env_dim = min(cap, int(env_dim * 1.25) + 1)
    return env_dim


def _kraus_from_env(dim: int, env_vec: np.ndarray, eta: float) -> np.ndarray:
    """Operators ``K_l = <l|_env B |e>_env`` restricted to ``dim`` system levels."""
    env_dim = env_vec.size
    n_total = dim + env_dim - 1
    blocks = _beamsplitter_blocks(n_total, float(eta))
    kraus = np.zeros((n_total, dim, dim), dtype=complex)
    for n, b in enumerate(blocks):
        m_in = np.arange(max(0, n - env_dim + 1), min(n, dim - 1) + 1)
        m_out = np.arange(0, min(n, dim - 1) + 1)
        if m_in.size == 0:
            continue
        amp = b[np.ix_(m_out, m_in)] * env_vec[n - m_in][None, :]
        kraus[n - m_out[:, None], m_out[:, None], m_in[None, :]] += amp
    return kraus


def gaussian_env_channel(
    rho: DensityMatrix,
    spec: ChannelSpec,
    env_dim: int | None = None,
    tol: float = TRUNCATION_TOL,
) -> DensityMatrix:
    """Mix ``rho`` with an explicit Gaussian ancilla on a beamsplitter and trace the ancilla out."""
    if spec.eta == 1.0:
        return rho
    dim = rho.dim
    env_dim = _auto_env_dim(spec, dim) if env_dim is None else env_dim
    comps, tail_weight = _environment_components(spec, env_dim)
    if tail_weight > ANCILLA_TAIL_TOL:
        raise TruncationError(
            f"environment state loses {tail_weight:.2e} beyond ancilla dim={env_dim}; increase env_dim",
            deficit=tail_weight,
        )
    work = phase_rotate(rho, spec.phase)
    src = work.elements
    out = np.zeros_like(src)
    for weight, vec in comps:
        kraus = _kraus_from_env(dim, vec, spec.eta)
        out += weight * np.einsum("lab,bc,ldc->ad", kraus, src, kraus.conj(), optimize=True)
    lost = max(0.0, 1.0 - np.trace(out).real)
    if lost > tol:
        raise TruncationError(
            f"channel output loses {lost:.2e} beyond dim={dim}; increase dim",
            deficit=lost,
        )
    result = _normalized(out, rho.trace_deficit + lost)
    return phase_rotate(result, -spec.phase)


def squeezed_input_channel(rho: DensityMatrix, eta: float, r: float, tol: float = TRUNCATION_TOL) -> DensityMatrix:
    """Squeeze ``x`` by ``r``, apply pure loss, then undo the squeeze.

    Matches :func:`gaussian_env_channel` with ``env_gain = exp(2 r)``. The
    intermediate states are kept at twice the cutoff so the squeezed tail is
    not clipped between steps; only the output is cropped back.
    """
    params = SqueezeParams.from_r(r, 0.0)
    inverse = SqueezeParams.from_r(-r, 0.0)
    big = embed(rho, 2 * rho.dim)
    out = squeeze(pure_loss(squeeze(big, params, tol), eta), inverse, tol)
    return crop(out, rho.dim, tol)
