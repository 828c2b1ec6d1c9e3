"""
Scenario configuration, channel statistics, channel draws and pilot training.

Correlation matrices are stored once per distinct value and referenced by
index tables, so an ``L x L x K`` grid of ``M x M`` matrices that only holds
two distinct values costs two matrices of memory.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import streams
from .errors import InvalidCellError, InvalidInputError
from .mathcore import as_hermitian, psd_sqrt_factor

__all__ = [
    "ScenarioConfig",
    "ChannelStatistics",
    "ChannelRealization",
    "TrainingOutput",
    "exponential_correlation",
    "los_matrix",
    "build_scenario_statistics",
    "sample_channels",
    "simulate_training",
    "sample_estimates",
    "conditional_ut_channel_moments",
    "conditional_operator",
]

SNR_6DB = 10 ** 0.6
# pseudo-inverse cutoff, relative to the largest singular value
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Scalar parameters of a multi-cell dynamic-TDD scenario.

    Defaults reproduce the evaluation setting: 7 cells, 10 users per cell,
    inter-cell coefficient 0.1, all SNRs 6 dB and regularizers ``1/p``.

    Parameters
    ----------
    L, K, M : int
        Cells, users per cell, BS antennas.
    alpha : float
        Inter-cell large-scale coefficient in (0, 1].
    beta : float
        Adjacent-antenna correlation in [0, 1).
    p_tr, p_ul, p_dl : float
        Linear training, uplink and downlink SNRs.
    phi_ul, phi_dl : float
        Detector and precoder regularizers.
    dl_cells : tuple of int
        Cells transmitting in DL on the sub-frame; the rest are UL.
    n_outer, n_inner, n_precoder : int
        Monte Carlo budgets: outer draws, inner precoder draws per outer draw,
        and draws used to estimate the power-normalization constant.
    seed : int
        Master seed.
    alpha_los : float, optional
        Power of the BS-to-BS LoS component; defaults to ``alpha``.
    ut_gain : float, optional
        UT-to-UT gain for every cross-cell pair; defaults to ``alpha``.
    """

    L: int = 7
    K: int = 10
    M: int = 128
    alpha: float = 0.1
    beta: float = 0.4
    p_tr: float = SNR_6DB
    p_ul: float = SNR_6DB
    p_dl: float = SNR_6DB
    phi_ul: float = 1 / SNR_6DB
    phi_dl: float = 1 / SNR_6DB
    dl_cells: tuple = ()
    n_outer: int = 200
    n_inner: int = 50
    n_precoder: int = 1000
    seed: int = 1
    alpha_los: float = None
    ut_gain: float = None

    def __post_init__(self):
        object.__setattr__(self, "dl_cells",
                           tuple(sorted(int(c) for c in self.dl_cells)))
        for name in ("L", "K", "M"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.K > self.M:
            raise InvalidInputError("K must not exceed M")
        if not 0 < self.alpha <= 1:
            raise InvalidInputError("alpha must lie in (0, 1]")
        if not 0 <= self.beta < 1:
            raise InvalidInputError("beta must lie in [0, 1)")
        for name in ("p_tr", "p_ul", "p_dl", "phi_ul", "phi_dl"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be finite and > 0")
        if len(set(self.dl_cells)) != len(self.dl_cells):
            raise InvalidInputError("dl_cells has duplicates")
        if any(not 0 <= c < self.L for c in self.dl_cells):
            raise InvalidInputError("dl_cells index out of range")
        for name in ("n_outer", "n_inner", "n_precoder"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.alpha_los is not None and self.alpha_los < 0:
            raise InvalidInputError("alpha_los must be >= 0")
        if self.ut_gain is not None and self.ut_gain < 0:
            raise InvalidInputError("ut_gain must be >= 0")

    @property
    def ul_cells(self):
        return tuple(c for c in range(self.L) if c not in self.dl_cells)

    @property
    def los_power(self):
        return self.alpha if self.alpha_los is None else self.alpha_los

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["dl_cells"] = list(self.dl_cells)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "dl_cells" in d:
            d["dl_cells"] = tuple(d["dl_cells"])
        return cls(**d)

    def require_ul(self, j):
        if j not in self.ul_cells:
            raise InvalidCellError(f"cell {j} is not an UL cell")

    def require_dl(self, i):
        if i not in self.dl_cells:
            raise InvalidCellError(f"cell {i} is not a DL cell")


def exponential_correlation(M, beta, gain=1.0):
    """
    Exponential correlation matrix ``gain * beta**|r - c|``.

    >>> exponential_correlation(3, 0.5).real
    array([[1.  , 0.5 , 0.25],
           [0.5 , 1.  , 0.5 ],
           [0.25, 0.5 , 1.  ]])
    """
    if not 0 <= beta < 1:
        raise InvalidInputError("beta must lie in [0, 1)")
    if gain < 0 or M < 1:
        raise InvalidInputError("need M >= 1 and gain >= 0")
    idx = np.arange(M)
    return (gain * beta ** np.abs(idx[:, None] - idx[None, :])).astype(complex)


def los_matrix(M, alpha, j, n):
    """
    Deterministic LoS component between BS ``n`` (transmitter) and BS ``j``.

    A DFT grid scaled by ``sqrt(alpha)`` with unit-modulus row and column
    phase rotations that depend on the pair ``(j, n)``. Every entry has
    modulus ``sqrt(alpha)`` and ``G^H G = alpha M I``.
    """
    if M < 1 or alpha < 0:
        raise InvalidInputError("need M >= 1 and alpha >= 0")
    r = np.arange(M)
    shift = 7 * j + 3 * n + 1
    chirp = (j + 1) * (n + 2)
    row = np.exp(2j * np.pi * ((shift * r) % M) / M)
    col = np.exp(1j * np.pi * ((chirp * r * r) % (2 * M)) / M)
    grid = np.exp(2j * np.pi * (np.outer(r, r) % M) / M)
    return np.sqrt(alpha) * (row[:, None] * grid * col[None, :])


@dataclass
class ChannelStatistics:
    """
    Second-order channel statistics of a scenario.

    Matrices are deduplicated: ``r_mats[r_index[j, l, k]]`` is the
    correlation of the channel from user ``k`` of cell ``l`` to BS ``j``;
    ``c_mats``/``t_mats`` are the receive/transmit correlations of the
    BS-to-BS channel from BS ``n`` to BS ``j`` (index tables ``(L, L)``,
    diagonal unused). LoS matrices come from ``los_matrix`` with power
    ``los_power`` unless overridden in ``gbar_overrides``.
    """

    L: int
    K: int
    M: int
    r_mats: list
    r_index: np.ndarray
    c_mats: list
    c_index: np.ndarray
    t_mats: list
    t_index: np.ndarray
    los_power: float
    ut2ut_gain: np.ndarray
    gbar_overrides: dict = field(default_factory=dict)
    f_ul: dict = field(default_factory=dict)
    f_dl: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def R(self, j, l, k):
        return self.r_mats[self.r_index[j, l, k]]

    def C(self, j, n):
        return self.c_mats[self.c_index[j, n]]

    def T(self, j, n):
        return self.t_mats[self.t_index[j, n]]

    def Gbar(self, j, n):
        if (j, n) in self.gbar_overrides:
            return self.gbar_overrides[(j, n)]
        key = ("gbar", j, n)
        if key not in self._cache:
            self._cache[key] = los_matrix(self.M, self.los_power, j, n)
        return self._cache[key]

    def F_ul(self, j):
        return self.f_ul.get(j)

    def F_dl(self, n):
        return self.f_dl.get(n)

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def r_sqrt(self, j, l, k):
        i = self.r_index[j, l, k]
        return self._memo(("rsqrt", i), lambda: psd_sqrt_factor(self.r_mats[i]))

    def c_sqrt(self, j, n):
        i = self.c_index[j, n]
        return self._memo(("csqrt", i), lambda: psd_sqrt_factor(self.c_mats[i]))

    def t_sqrt(self, j, n):
        # T = Tbar^H Tbar; the Hermitian root serves both sides
        i = self.t_index[j, n]
        return self._memo(("tsqrt", i), lambda: psd_sqrt_factor(self.t_mats[i]))

    def _q_key(self, j, k):
        return tuple(int(i) for i in self.r_index[j, :, k])

    def Q(self, j, k, p_tr):
        """``(sum_l R_jlk + I/p_tr)^{-1}``."""
        qk = self._q_key(j, k)

        def build():
            pre = sum(self.r_mats[i] for i in qk) + np.eye(self.M) / p_tr
            inv = linalg.inv(0.5 * (pre + pre.conj().T))
            return 0.5 * (inv + inv.conj().T)

        return self._memo(("Q", qk, p_tr), build)

    def Phi(self, j, l, m, k, p_tr):
        """``R_jlk Q_jk R_jmk``: cross-covariance of estimate-related terms."""
        key = ("Phi", self.r_index[j, l, k], self._q_key(j, k),
               self.r_index[j, m, k], p_tr)

        def build():
            out = self.R(j, l, k) @ self.Q(j, k, p_tr) @ self.R(j, m, k)
            return 0.5 * (out + out.conj().T) if l == m else out

        return self._memo(key, build)

    def phi_sqrt(self, j, k, p_tr):
        key = ("phisqrt", self.r_index[j, j, k], self._q_key(j, k), p_tr)
        return self._memo(key,
                          lambda: psd_sqrt_factor(self.Phi(j, j, j, k, p_tr)))

    def err_cov(self, j, k, p_tr):
        """Covariance ``R_jjk - Phi_jjjk`` of the estimation error."""
        key = ("err", self.r_index[j, j, k], self._q_key(j, k), p_tr)

        def build():
            e = self.R(j, j, k) - self.Phi(j, j, j, k, p_tr)
            return 0.5 * (e + e.conj().T)

        return self._memo(key, build)

    def err_sqrt(self, j, k, p_tr):
        key = ("errsqrt", self.r_index[j, j, k], self._q_key(j, k), p_tr)

        def build():
            e = self.err_cov(j, k, p_tr)
            w, v = linalg.eigh(e)
            return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T

        return self._memo(key, build)


def build_scenario_statistics(cfg):
    """
    Statistics of the evaluation scenario.

    Own-cell user channels have unit gain, all inter-cell user channels and
    the BS-to-BS receive correlation have gain ``alpha``, the BS-to-BS
    transmit correlation has unit gain; all use the exponential model with
    correlation ``beta``.
    """
    L, K, M = cfg.L, cfg.K, cfg.M
    own = exponential_correlation(M, cfg.beta, 1.0)
    cross = exponential_correlation(M, cfg.beta, cfg.alpha)
    r_index = np.ones((L, L, K), dtype=int)
    for j in range(L):
        r_index[j, j, :] = 0
    pair = np.zeros((L, L), dtype=int)
    gain = cfg.alpha if cfg.ut_gain is None else cfg.ut_gain
    ut2ut = np.full((L, K, L, K), gain)
    for i in range(L):
        ut2ut[i, :, i, :] = 0.0
    return ChannelStatistics(
        L=L, K=K, M=M,
        r_mats=[own, cross], r_index=r_index,
        c_mats=[cross], c_index=pair,
        t_mats=[own], t_index=pair.copy(),
        los_power=cfg.los_power,
        ut2ut_gain=ut2ut,
    )


@dataclass
class ChannelRealization:
    """
    One joint draw of the user and BS-to-BS channels.

    ``h[j, l, k]`` is the length-``M`` channel from user ``k`` in cell ``l``
    to BS ``j``; ``G[(j, n)]`` the ``M x M`` channel from BS ``n`` to BS
    ``j`` and ``G_nlos`` its NLoS part; ``training_noise[j, k]`` the
    despread pilot noise at BS ``j`` for pilot ``k``.
    """

    h: np.ndarray
    G: dict
    G_nlos: dict
    training_noise: np.ndarray


def sample_channels(stats, cfg, rng):
    """
    Draw every user channel, BS-to-BS channel and training noise vector.

    ``h = Rbar v`` with ``v ~ CN(0, I)``; ``G = Cbar V Tbar + Gbar`` with
    i.i.d. ``CN(0, 1)`` entries in ``V``.
    """
    L, K, M = stats.L, stats.K, stats.M
    if (cfg.L, cfg.K, cfg.M) != (L, K, M):
        raise InvalidInputError("statistics do not match the configuration")
    v = streams.complex_normal(rng, (L, L, K, M))
    h = np.empty((L, L, K, M), dtype=complex)
    for j in range(L):
        for l in range(L):
            for k in range(K):
                h[j, l, k] = stats.r_sqrt(j, l, k) @ v[j, l, k]
    G, G_nlos = {}, {}
    for j in range(L):
        for n in range(L):
            if n == j:
                continue
            V = streams.complex_normal(rng, (M, M))
            nlos = stats.c_sqrt(j, n) @ V @ stats.t_sqrt(j, n)
            G_nlos[(j, n)] = nlos
            G[(j, n)] = nlos + stats.Gbar(j, n)
    noise = streams.complex_normal(rng, (L, K, M))
    return ChannelRealization(h=h, G=G, G_nlos=G_nlos, training_noise=noise)


@dataclass
class TrainingOutput:
    """
    MMSE estimates from one training phase.

    ``hhat[j]`` is the ``M x K`` matrix of estimates of the own-cell channels
    at BS ``j``. Filters and covariances are looked up lazily in ``stats``.
    """

    hhat: np.ndarray
    stats: ChannelStatistics
    p_tr: float

    def Q(self, j, k):
        return self.stats.Q(j, k, self.p_tr)

    def Phi(self, j, l, m, k):
        return self.stats.Phi(j, l, m, k, self.p_tr)


def simulate_training(real, stats, cfg):
    """
    Despread pilots and form ``hhat_jjk = R_jjk Q_jk y_jk``.

    ``y_jk`` sums the channels of user ``k`` in all ``L`` cells (pilots are
    reused everywhere and training is synchronized) plus the noise scaled
    by ``1/sqrt(p_tr)``.
    """
    if not cfg.p_tr > 0:
        raise InvalidInputError("p_tr must be > 0")
    L, K, M = stats.L, stats.K, stats.M
    hhat = np.empty((L, M, K), dtype=complex)
    for j in range(L):
        for k in range(K):
            y = real.h[j, :, k].sum(axis=0) + real.training_noise[j, k] / np.sqrt(cfg.p_tr)
            hhat[j, :, k] = stats.R(j, j, k) @ (stats.Q(j, k, cfg.p_tr) @ y)
    return TrainingOutput(hhat=hhat, stats=stats, p_tr=cfg.p_tr)


def sample_estimates(stats, cfg, cell, rng, size):
    """
    Draw ``size`` independent estimate matrices ``Hhat_cc`` for one cell.

    Samples ``hhat_cck ~ CN(0, Phi_ccck)`` directly, which has the same law as
    running ``simulate_training`` on a full channel draw. Returns an array
    of shape ``(size, M, K)``.
    """
    M, K = stats.M, stats.K
    v = streams.complex_normal(rng, (K, M, size))
    out = np.empty((size, M, K), dtype=complex)
    groups = {}
    for k in range(K):
        groups.setdefault(id(stats.phi_sqrt(cell, k, cfg.p_tr)), []).append(k)
    for ks in groups.values():
        root = stats.phi_sqrt(cell, ks[0], cfg.p_tr)
        # one GEMM per distinct covariance
        z = root @ v[ks].transpose(1, 0, 2).reshape(M, -1)
        out[:, :, ks] = z.reshape(M, len(ks), size).transpose(2, 0, 1)
    return out


def conditional_operator(stats, p_tr, j, l, m):
    """
    Gaussian conditioning of ``h_jlm`` on the estimate ``hhat_jjm``.

    Returns ``(B, Sigma)`` with ``E[h_jlm | hhat] = B hhat`` and conditional
    covariance ``Sigma``. For ``l == j``, ``B = I`` and ``Sigma`` is the
    estimation error covariance.
    """
    key = ("cond", stats.r_index[j, l, m], stats.r_index[j, j, m],
           stats._q_key(j, m), p_tr, l == j)

    def build():
        if l == j:
            return np.eye(stats.M, dtype=complex), stats.err_cov(j, m, p_tr)
        x = stats.Phi(j, l, j, m, p_tr)
        p = stats.Phi(j, j, j, m, p_tr)
        b = x @ linalg.pinvh(p, rtol=PINV_RTOL)
        cov = stats.R(j, l, m) - b @ x.conj().T
        return b, 0.5 * (cov + cov.conj().T)

    return stats._memo(key, build)


def conditional_ut_channel_moments(stats, cfg, j, l, m, hhat_jjm):
    """
    Mean and covariance of ``h_jlm`` given the estimate ``hhat_jjm``.

    Parameters
    ----------
    stats : ChannelStatistics
    cfg : ScenarioConfig
    j, l, m : int
        Receiving BS, transmitting cell, pilot/user index.
    hhat_jjm : array_like, shape (M,)

    Returns
    -------
    mean : ndarray, shape (M,)
    cov : ndarray, shape (M, M)
    """
    hhat_jjm = np.asarray(hhat_jjm, dtype=complex)
    if hhat_jjm.shape != (stats.M,):
        raise InvalidInputError("estimate length does not match M")
    b, cov = conditional_operator(stats, cfg.p_tr, j, l, m)
    return b @ hhat_jjm, cov


def custom_statistics(L, K, M, R, C, T, los_power=0.0, ut2ut_gain=0.0,
                      gbar=None, f_ul=None, f_dl=None):
    """
    Statistics from callables ``R(j, l, k)``, ``C(j, n)``, ``T(j, n)``.

    Equal matrices (by identity of the returned object) share storage.
    """
    def collect(fn, shape):
        mats, index, seen = [], np.zeros(shape, dtype=int), {}
        for idx in np.ndindex(*shape):
            if len(idx) == 2 and idx[0] == idx[1]:
                continue
            a = fn(*idx)
            if id(a) not in seen:
                seen[id(a)] = len(mats)
                mats.append(as_hermitian(a))
            index[idx] = seen[id(a)]
        return mats, index

    r_mats, r_index = collect(R, (L, L, K))
    c_mats, c_index = collect(C, (L, L)) if L > 1 else ([np.eye(M)], np.zeros((L, L), int))
    t_mats, t_index = collect(T, (L, L)) if L > 1 else ([np.eye(M)], np.zeros((L, L), int))
    return ChannelStatistics(
        L=L, K=K, M=M, r_mats=r_mats, r_index=r_index,
        c_mats=c_mats, c_index=c_index, t_mats=t_mats, t_index=t_index,
        los_power=los_power,
        ut2ut_gain=np.broadcast_to(ut2ut_gain, (L, K, L, K)).astype(float),
        gbar_overrides=dict(gbar or {}), f_ul=dict(f_ul or {}),
        f_dl=dict(f_dl or {}),
    )
