"""
MMSE uplink detectors and regularized zero-forcing downlink precoders.

Both filters share the structure ``(Hhat Hhat^H + F + M phi I)^{-1} Hhat``:
the detector for UT ``k`` is column ``k`` of that matrix, and the
unnormalized precoder is the whole matrix. The batched helpers below use the
Woodbury identity around ``A = F + M phi I`` so a batch of draws costs one
``M x M`` factorization in total plus ``K x K`` solves per draw.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import streams
from .channel import sample_estimates
from .errors import DegenerateScenarioError, InvalidInputError, InvalidRegularizerError
from .mathcore import as_hermitian

__all__ = [
    "RidgeSolver",
    "mmse_detectors",
    "rzf_precoder_unnormalized",
    "PowerNormalization",
    "PrecoderSet",
    "estimate_power_normalization",
]


class RidgeSolver:
    """
    Apply ``(Hhat Hhat^H + F + M phi I)^{-1} Hhat`` to batches of estimates.

    Parameters
    ----------
    M : int
    f : ndarray or None
        PSD offset ``F``; ``None`` is the zero matrix (no factorization
        needed, ``A^{-1}`` is a scalar).
    phi : float
    """

    def __init__(self, M, f, phi):
        if not phi > 0:
            raise InvalidRegularizerError(f"phi must be > 0, got {phi}")
        self.M = M
        self.phi = phi
        self.ridge = M * phi
        if f is None or not np.any(f):
            self._a_inv = None
        else:
            f = as_hermitian(f, "f")
            a = f + self.ridge * np.eye(M)
            self._a_inv = linalg.cho_solve(linalg.cho_factor(a, lower=True),
                                           np.eye(M, dtype=complex))

    def apply_a_inv(self, x):
        if self._a_inv is None:
            return x / self.ridge
        return np.matmul(self._a_inv, x)

    def __call__(self, hhat):
        """
        Filters for a batch ``hhat`` of shape ``(..., M, K)``.

        Uses ``(A + H H^H)^{-1} H = A^{-1} H (I + H^H A^{-1} H)^{-1}``.
        """
        hhat = np.asarray(hhat, dtype=complex)
        z = self.apply_a_inv(hhat)
        K = hhat.shape[-1]
        small = np.eye(K) + np.swapaxes(hhat.conj(), -1, -2) @ z
        # small is Hermitian PD, so z small^{-1} = (small^{-1} z^H)^H
        sol = np.linalg.solve(small, np.swapaxes(z.conj(), -1, -2))
        return np.swapaxes(sol.conj(), -1, -2)


def mmse_detectors(hhat_cell, f, phi):
    """
    MMSE detection vectors of one UL cell.

    ``a_k = (1/M) ((1/M) sum_i hhat_i hhat_i^H + (1/M) F + phi I)^{-1} hhat_k``

    Parameters
    ----------
    hhat_cell : array_like, shape (M, K)
        Own-cell channel estimates as columns.
    f : array_like or None
        PSD matrix ``F``; ``None`` is zero.
    phi : float
        Regularizer, strictly positive.

    Returns
    -------
    ndarray, shape (M, K)
        Column ``k`` is ``a_k``.
    """
    if not phi > 0:
        raise InvalidRegularizerError(f"phi must be > 0, got {phi}")
    h = np.asarray(hhat_cell, dtype=complex)
    if h.ndim != 2:
        raise InvalidInputError("hhat_cell must be M x K")
    M = h.shape[0]
    pre = (h @ h.conj().T) / M + phi * np.eye(M)
    if f is not None:
        pre = pre + as_hermitian(f, "f") / M
    c = linalg.cho_factor(0.5 * (pre + pre.conj().T), lower=True)
    return linalg.cho_solve(c, h) / M


def rzf_precoder_unnormalized(hhat_cell, f, phi):
    """``Omega = (sum_i hhat_i hhat_i^H + F + M phi I)^{-1} Hhat``."""
    if not phi > 0:
        raise InvalidRegularizerError(f"phi must be > 0, got {phi}")
    h = np.asarray(hhat_cell, dtype=complex)
    M = h.shape[0]
    pre = h @ h.conj().T + M * phi * np.eye(M)
    if f is not None:
        pre = pre + as_hermitian(f, "f")
    c = linalg.cho_factor(0.5 * (pre + pre.conj().T), lower=True)
    return linalg.cho_solve(c, h)


@dataclass(frozen=True)
class PowerNormalization:
    """``lam = K / mean_trace`` with the standard error of ``mean_trace``."""

    lam: float
    mean_trace: float
    stderr: float
    n_samples: int


@dataclass
class PrecoderSet:
    """Unnormalized precoder ``omega`` and its normalization ``lam``."""

    omega: np.ndarray
    lam: float

    @property
    def w(self):
        return np.sqrt(self.lam) * self.omega


def estimate_power_normalization(stats, cfg, n, n_samples, rng=None,
                                 batch=256):
    """
    Monte Carlo estimate of ``lam_n = K / E[tr Omega_n Omega_n^H]``.

    The expectation is over the channel estimates of cell ``n``.

    Parameters
    ----------
    stats : ChannelStatistics
    cfg : ScenarioConfig
    n : int
        Transmitting cell.
    n_samples : int
        Number of independent estimate draws.
    rng : numpy.random.Generator, optional
        Defaults to the ``POWER_NORM`` substream of ``cfg.seed``.
    batch : int
        Draws processed per vectorized step.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    if rng is None:
        rng = streams.substream(cfg.seed, streams.POWER_NORM, n)
    solver = RidgeSolver(stats.M, stats.F_dl(n), cfg.phi_dl)
    traces = []
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        omega = solver(sample_estimates(stats, cfg, n, rng, b))
        traces.append(np.sum(np.abs(omega) ** 2, axis=(1, 2)))
        done += b
    traces = np.concatenate(traces)
    mean = float(np.mean(traces))
    if not mean > 0:
        raise DegenerateScenarioError("precoder power is zero")
    se = float(np.std(traces, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return PowerNormalization(lam=stats.K / mean, mean_trace=mean, stderr=se,
                              n_samples=n_samples)
