"""Fast in-package property checks behind ``dyntdd selftest``."""

import numpy as np

from . import streams
from .channel import ScenarioConfig, build_scenario_statistics, exponential_correlation, los_matrix
from .detequiv import fixed_point_gamma, prop1_bs2bs_approx, prop2_closed_form, validate_assumptions
from .mathcore import (min_eigenvalue, psd_sqrt_factor, rank_one_inverse_row,
                       regularized_gram_inverse, spectral_norm)


def _random_psd(rng, n):
    b = streams.complex_normal(rng, (n, n))
    return b @ b.conj().T / n


def _inversion_lemma(rng):
    worst = 0.0
    for _ in range(50):
        a = _random_psd(rng, 8) + np.eye(8)
        x = streams.complex_normal(rng, 8)
        tau = rng.uniform(0.1, 5.0)
        direct = x.conj() @ np.linalg.inv(a + tau * np.outer(x, x.conj()))
        worst = max(worst, np.max(np.abs(direct - rank_one_inverse_row(np.linalg.inv(a), x, tau))))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def _norm_duality(rng):
    a = _random_psd(rng, 12) + 0.1 * np.eye(12)
    v = spectral_norm(np.linalg.inv(a)) * min_eigenvalue(a)
    return abs(v - 1) <= 1e-9, f"product {v:.12f}"


def _sqrt_factor(rng):
    a = exponential_correlation(16, 0.4, 1.0)
    b = psd_sqrt_factor(a)
    err = np.linalg.norm(b @ b.conj().T - a) / np.linalg.norm(a)
    return err <= 1e-10, f"relative error {err:.2e}"


def _gram_bound(rng):
    h = streams.complex_normal(rng, (16, 4))
    g = regularized_gram_inverse(h, None, 0.3)
    lo = min_eigenvalue(np.linalg.inv(g))
    return lo >= 0.3 - 1e-10, f"min eigenvalue {lo:.6f}"


def _los_orthogonality(rng):
    g = los_matrix(32, 0.1, 1, 2)
    err = np.max(np.abs(g.conj().T @ g / 32 - 0.1 * np.eye(32)))
    return err <= 1e-12, f"max deviation {err:.2e}"


def _scalar_fixed_point(rng):
    M, K, rho = 32, 8, 0.5
    fp = fixed_point_gamma([np.eye(M)] * K, None, rho)
    kappa = K / M
    # delta (kappa/(1+delta) + rho) = 1
    b = kappa + rho - 1
    want = (-b + np.sqrt(b * b + 4 * rho)) / (2 * rho)
    return abs(fp.delta[0] - want) <= 1e-9, f"delta {fp.delta[0]:.10f} vs {want:.10f}"


def _prop1_vs_prop2(rng):
    cfg = ScenarioConfig(M=64, beta=0.0, dl_cells=(1, 2, 3))
    p1 = prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0)
    p2 = prop2_closed_form(cfg.alpha, cfg.L, 3, cfg.K, cfg.M, cfg.p_dl, cfg.p_tr, cfg.phi_ul)
    rel = abs(p1 - p2) / p2
    return rel <= 1e-4, f"relative gap {rel:.2e}"


def _assumptions(rng):
    cfg = ScenarioConfig(M=32)
    rep = validate_assumptions(build_scenario_statistics(cfg), cfg)
    return rep.ok, "; ".join(rep.lines()) if not rep.ok else "A1-A4 pass"


CHECKS = [
    ("matrix inversion lemma", _inversion_lemma),
    ("norm/eigenvalue duality", _norm_duality),
    ("PSD square root", _sqrt_factor),
    ("regularized Gram eigenvalue bound", _gram_bound),
    ("LoS orthogonality", _los_orthogonality),
    ("scalar fixed point", _scalar_fixed_point),
    ("closed form vs general deterministic equivalent", _prop1_vs_prop2),
    ("default scenario assumptions", _assumptions),
]


def run(seed=0, out=print):
    """Run every check, print one line each, return True when all pass."""
    ok = True
    for i, (name, fn) in enumerate(CHECKS):
        try:
            passed, detail = fn(streams.substream(seed, 99, i))
        except Exception as exc:  # report, keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= bool(passed)
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return ok
