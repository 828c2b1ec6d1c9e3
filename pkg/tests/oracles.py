"""
Independent reference implementations used by the tests.

Nothing here calls the filters or terms under test; the brute-force samplers
draw every random quantity (channels, noise, BS-to-BS matrices, symbols)
and measure the power of each additive component of the received signal.
"""

import numpy as np

from dyntdd import streams
from dyntdd.channel import sample_channels, simulate_training

# independent high-precision evaluation of the closed form at
# alpha=0.1, L=7, L_dl=3, K=10, M=100, p_dl=p_tr=10**0.6, phi=10**-0.6
PROP2_M100 = 0.206168688349838701904999392219


def random_psd(rng, n, rank=None):
    b = streams.complex_normal(rng, (n, rank or n))
    return b @ b.conj().T / n


def random_hermitian(rng, n):
    b = streams.complex_normal(rng, (n, n))
    return 0.5 * (b + b.conj().T)


def power_iteration_norm(a, tol=1e-12, max_iter=100000):
    """Largest |eigenvalue| of a Hermitian matrix by power iteration on a^2."""
    a2 = a @ a
    x = np.ones(a.shape[0], dtype=complex) + 0.1j * np.arange(a.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        y = a2 @ x
        new = np.linalg.norm(y)
        x = y / new
        if abs(new - lam) <= tol * new:
            break
        lam = new
    return float(np.sqrt(new))


def rzf(hhat, phi):
    """Precoder by explicit inverse, ``(H H^H + M phi I)^{-1} H``."""
    M = hhat.shape[0]
    return np.linalg.inv(hhat @ hhat.conj().T + M * phi * np.eye(M)) @ hhat


def mmse(hhat, phi):
    M = hhat.shape[0]
    return np.linalg.inv(hhat @ hhat.conj().T / M + phi * np.eye(M)) @ hhat / M


def brute_force_ul_terms(stats, cfg, lambdas, j, k, n_draws, seed, nlos_only=False):
    """
    Per-draw powers of every additive UL component, all randomness sampled.

    Returns a dict of arrays (length ``n_draws``) for ``s``, ``i1`` ...
    ``i5`` plus the own-cell estimate of each draw under ``"hhat"``. The
    BS-to-BS component uses the realized ``G`` (or only its NLoS part) and
    random DL symbols ``z``; UL symbols have unit power so their powers are
    taken exactly.
    """
    out = {key: np.empty(n_draws) for key in ("s", "i1", "i2", "i3", "i4", "i5")}
    hh = []
    for d in range(n_draws):
        rng = streams.substream(seed, streams.BRUTE_FORCE, d)
        real = sample_channels(stats, cfg, rng)
        tr = simulate_training(real, stats, cfg)
        a = mmse(tr.hhat[j], cfg.phi_ul)[:, k]
        hh.append(tr.hhat[j])
        p = cfg.p_ul
        out["s"][d] = p * abs(a.conj() @ tr.hhat[j][:, k]) ** 2
        out["i1"][d] = p * abs(a.conj() @ (real.h[j, j, k] - tr.hhat[j][:, k])) ** 2
        i2 = i3 = 0.0
        for l in cfg.ul_cells:
            for m in range(cfg.K):
                if l == j and m == k:
                    continue
                v = p * abs(a.conj() @ real.h[j, l, m]) ** 2
                if m == k:
                    i3 += v
                else:
                    i2 += v
        out["i2"][d], out["i3"][d] = i2, i3
        i4 = 0.0
        for n in cfg.dl_cells:
            w = np.sqrt(lambdas[n]) * rzf(tr.hhat[n], cfg.phi_dl)
            z = streams.complex_normal(rng, cfg.K)
            g = real.G_nlos[(j, n)] if nlos_only else real.G[(j, n)]
            i4 += cfg.p_dl * abs(a.conj() @ g @ w @ z) ** 2
        out["i4"][d] = i4
        noise = streams.complex_normal(rng, cfg.M)
        out["i5"][d] = abs(a.conj() @ noise) ** 2
    out["hhat"] = np.array(hh)
    return out
