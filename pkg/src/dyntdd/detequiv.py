"""
Deterministic equivalents of the BS-to-BS interference.

``fixed_point_gamma`` and ``gamma_prime`` compute the large-system
approximations of the resolvent ``(sum_i h_i h_i^H + S + rho I)^{-1}`` and of
the sandwiched product ``Res Theta Res`` for vectors ``h_i ~ CN(0, R_i/N)``.
``prop1_bs2bs_approx`` assembles them into the deterministic value of the
BS-to-BS interference term for general statistics, and ``prop2_closed_form``
is its closed form under uncorrelated channels.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InvalidInputError, NonConvergenceError
from .mathcore import (PSD_TOL, as_hermitian, min_eigenvalue, spectral_norm,
                       trace_product)

__all__ = [
    "FixedPointResult",
    "DerivativeResult",
    "fixed_point_gamma",
    "gamma_prime",
    "Prop1Terms",
    "prop1_bs2bs_approx",
    "prop1_terms",
    "prop2_closed_form",
    "AssumptionReport",
    "validate_assumptions",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 500
# undamped iterations before the 0.5-damped fallback kicks in
UNDAMPED_ITERS = 200


@dataclass
class FixedPointResult:
    gamma: np.ndarray
    delta: np.ndarray
    iterations: int
    residual: float


@dataclass
class DerivativeResult:
    gamma_prime: np.ndarray
    delta_prime: np.ndarray
    j_matrix: np.ndarray
    u_vector: np.ndarray


def _herm_inv(a):
    a = 0.5 * (a + a.conj().T)
    inv = linalg.cho_solve(linalg.cho_factor(a, lower=True),
                           np.eye(a.shape[0], dtype=complex))
    return 0.5 * (inv + inv.conj().T)


def _gamma_from_delta(r_list, s, rho, delta, N):
    acc = s + rho * np.eye(N, dtype=complex)
    for r, d in zip(r_list, delta):
        acc = acc + r / (N * (1.0 + d))
    return _herm_inv(acc)


def fixed_point_gamma(r_list, s, rho, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """
    Solve the fixed-point system for ``delta_i(rho)`` and ``Gamma(rho)``.

    Iterates ``delta_i <- (1/N) tr R_i ((1/N) sum_m R_m/(1+delta_m) + S + rho I)^{-1}``
    from ``delta_i = 1/rho`` until the largest update is at most ``tol``.
    After ``UNDAMPED_ITERS`` plain iterations the update is damped by 0.5.

    Parameters
    ----------
    r_list : sequence of ndarray, each (N, N)
        PSD covariance shapes ``R_i`` (vectors are ``CN(0, R_i/N)``).
    s : ndarray (N, N) or None
        PSD offset ``S``.
    rho : float
        Positive ridge.

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    if not rho > 0:
        raise InvalidInputError("rho must be > 0")
    r_list = [np.asarray(r, dtype=complex) for r in r_list]
    if s is None:
        if not r_list:
            raise InvalidInputError("need S or at least one R_i to fix N")
        N = r_list[0].shape[0]
        s = np.zeros((N, N), dtype=complex)
    else:
        s = np.asarray(s, dtype=complex)
        N = s.shape[0]
    n = len(r_list)
    delta = np.full(n, 1.0 / rho)
    if n == 0:
        gamma = _gamma_from_delta(r_list, s, rho, delta, N)
        return FixedPointResult(gamma=gamma, delta=delta, iterations=1, residual=0.0)
    # distinct R_i share their trace products
    uniq, inv = _dedupe(r_list)
    residual = np.inf
    for it in range(1, max_iter + 1):
        gamma = _gamma_from_delta(r_list, s, rho, delta, N)
        tr = np.array([trace_product(r, gamma).real / N for r in uniq])[inv]
        new = tr if it <= UNDAMPED_ITERS else 0.5 * (delta + tr)
        residual = float(np.max(np.abs(new - delta)))
        delta = new
        if residual <= tol:
            gamma = _gamma_from_delta(r_list, s, rho, delta, N)
            return FixedPointResult(gamma=gamma, delta=delta, iterations=it,
                                    residual=residual)
    raise NonConvergenceError(
        f"fixed point did not reach tol={tol} in {max_iter} iterations",
        residual=residual)


def _dedupe(mats):
    ids, uniq, inv = {}, [], []
    for a in mats:
        if id(a) not in ids:
            ids[id(a)] = len(uniq)
            uniq.append(a)
        inv.append(ids[id(a)])
    return uniq, np.array(inv, dtype=int)


def gamma_prime(r_list, s, rho, theta, fp):
    """
    Deterministic equivalent of ``Res Theta Res`` from a converged fixed point.

    ``J[r, c] = (1/N) tr(R_r G R_c G) / (N (1 + delta_c)^2)``,
    ``u[r] = (1/N) tr(R_r G Theta G)``, ``delta' = (I - J)^{-1} u`` and
    ``G' = G Theta G + G [(1/N) sum_i R_i delta'_i / (1 + delta_i)^2] G``.
    """
    r_list = [np.asarray(r, dtype=complex) for r in r_list]
    g = fp.gamma
    N = g.shape[0]
    theta = np.asarray(theta, dtype=complex)
    gtg = g @ theta @ g
    n = len(r_list)
    if n == 0:
        return DerivativeResult(gamma_prime=0.5 * (gtg + gtg.conj().T),
                                delta_prime=np.zeros(0), j_matrix=np.zeros((0, 0)),
                                u_vector=np.zeros(0))
    uniq, inv = _dedupe(r_list)
    rg = [r @ g for r in uniq]
    # tr(R_r G R_c G) over distinct pairs
    tt = np.array([[trace_product(a, b).real for b in rg] for a in rg])
    jm = tt[np.ix_(inv, inv)] / (N * N * (1.0 + fp.delta[None, :]) ** 2)
    u = np.array([trace_product(a, gtg).real / N for a in uniq])[inv]
    ij = np.eye(n) - jm
    try:
        dprime = np.linalg.solve(ij, u)
    except np.linalg.LinAlgError as exc:
        raise NonConvergenceError("I - J is singular") from exc
    corr = np.zeros((N, N), dtype=complex)
    for r, dp, d in zip(r_list, dprime, fp.delta):
        corr += r * (dp / (1.0 + d) ** 2)
    gp = gtg + g @ (corr / N) @ g
    return DerivativeResult(gamma_prime=0.5 * (gp + gp.conj().T),
                            delta_prime=dprime, j_matrix=jm, u_vector=u)


@dataclass
class Prop1Terms:
    """Per-DL-cell breakdown of the deterministic BS-to-BS interference."""

    total: float
    per_cell: dict = field(default_factory=dict)
    nlos: dict = field(default_factory=dict)
    los: dict = field(default_factory=dict)
    lam_bar: dict = field(default_factory=dict)


def prop1_terms(stats, cfg, j, k, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Deterministic BS-to-BS interference at UT ``k`` of UL cell ``j``."""
    cfg.require_ul(j)
    M, K, p = stats.M, stats.K, cfg.p_tr
    out = Prop1Terms(total=0.0)
    if not cfg.dl_cells or cfg.p_dl == 0:
        return out

    def solve(name, fn):
        try:
            return fn()
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"{name}: {exc}", residual=exc.residual,
                                      quantity=name) from exc

    phis_j = [stats.Phi(j, j, j, i, p) for i in range(K)]
    s_j = _f_over_m(stats.F_ul(j), M)
    psi = solve("Psi_j", lambda: fixed_point_gamma(phis_j, s_j, cfg.phi_ul, tol, max_iter))
    phi_jk = phis_j[k]
    delta_jk = trace_product(phi_jk, psi.gamma).real / M
    psi_bar = solve("Psi'_jk", lambda: gamma_prime(phis_j, s_j, cfg.phi_ul, phi_jk, psi))
    pre = cfg.p_dl / (1.0 + delta_jk) ** 2

    for n in cfg.dl_cells:
        phis_n = [stats.Phi(n, n, n, i, p) for i in range(K)]
        s_n = _f_over_m(stats.F_dl(n), M)
        gam = solve("Gamma_n", lambda: fixed_point_gamma(phis_n, s_n, cfg.phi_dl, tol, max_iter))
        denom = [(1.0 + trace_product(phis_n[m], gam.gamma).real / M) ** 2
                 for m in range(K)]
        eye = np.eye(M, dtype=complex)
        g_bar = solve("Gamma'_n", lambda: gamma_prime(phis_n, s_n, cfg.phi_dl, eye, gam))
        lam_bar = K / sum(trace_product(phis_n[m], g_bar.gamma_prime).real / M / denom[m]
                          for m in range(K))
        g_jn = solve("Gamma'_jn", lambda: gamma_prime(phis_n, s_n, cfg.phi_dl,
                                                      stats.T(j, n), gam))
        psi_jn = solve("Psi'_jn", lambda: gamma_prime(phis_j, s_j, cfg.phi_ul,
                                                      stats.C(j, n), psi))
        gb = stats.Gbar(j, n)
        sandwich = gb.conj().T @ psi_bar.gamma_prime @ gb
        los = 0.0
        nlos_sum = 0.0
        cache = {}
        for m in range(K):
            key = id(phis_n[m])
            if key not in cache:
                g_nm = solve("Gamma'_nm", lambda: gamma_prime(phis_n, s_n, cfg.phi_dl,
                                                               phis_n[m], gam))
                cache[key] = trace_product(sandwich, g_nm.gamma_prime).real / M
            los += cache[key] / denom[m]
            nlos_sum += trace_product(phis_n[m], g_jn.gamma_prime).real / M / denom[m]
        los = los / M
        nlos = nlos_sum * trace_product(phi_jk, psi_jn.gamma_prime).real / M
        val = pre * lam_bar / M * (los + nlos)
        out.per_cell[n] = val
        out.los[n] = pre * lam_bar / M * los
        out.nlos[n] = pre * lam_bar / M * nlos
        out.lam_bar[n] = lam_bar
        out.total += val
    return out


def prop1_bs2bs_approx(stats, cfg, j, k, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Deterministic approximation of the BS-to-BS interference term."""
    return prop1_terms(stats, cfg, j, k, tol, max_iter).total


def _f_over_m(f, M):
    if f is None:
        return np.zeros((M, M), dtype=complex)
    return as_hermitian(f, "F") / M


def prop2_closed_form(alpha, L, L_dl, K, M, p_dl, p_tr, phi):
    """
    Closed-form BS-to-BS interference under uncorrelated channels.

    ``2 p_dl L_dl alpha eta tau' K / ((1 + tau)^2 M)`` with
    ``eta = 1 + alpha (L - 1) + 1/p_tr`` and ``kappa = K/M``.
    """
    if not 0 < alpha <= 1:
        raise InvalidInputError("alpha must lie in (0, 1]")
    if not phi > 0:
        raise InvalidInputError("phi must be > 0")
    if K > M:
        raise InvalidInputError("K must not exceed M")
    if not 0 <= L_dl <= L - 1:
        raise InvalidInputError("L_dl must lie in [0, L-1]")
    kappa = K / M
    eta = 1.0 + alpha * (L - 1) + 1.0 / p_tr
    pe = phi * eta
    disc = pe * pe + (kappa - 1.0) ** 2 + 2.0 * pe * (kappa + 1.0)
    if disc < 0:
        raise ArithmeticError("negative discriminant; inputs are inconsistent")
    tau = (1.0 - pe - kappa + np.sqrt(disc)) / (2.0 * pe)
    tau_p = (1.0 + tau) ** 2 / (kappa ** 2 - kappa + pe * pe * (1.0 + tau) ** 2
                                + 2.0 * pe * kappa * (1.0 + tau))
    return float(2.0 * p_dl * L_dl * alpha * eta * tau_p * K / ((1.0 + tau) ** 2 * M))


@dataclass
class AssumptionReport:
    """Pass/fail per assumption with the first violating index."""

    passed: dict
    violations: dict

    @property
    def ok(self):
        return all(self.passed.values())

    def lines(self):
        names = {"A1": "correlations PSD with bounded norm",
                 "A2": "normalized traces bounded away from zero",
                 "A3": "LoS product norm bounded",
                 "A4": "regularization matrices PSD with bounded norm"}
        out = []
        for key in ("A1", "A2", "A3", "A4"):
            status = "pass" if self.passed[key] else f"FAIL at {self.violations[key]}"
            out.append(f"{key} ({names[key]}): {status}")
        return out


def validate_assumptions(stats, cfg=None, trace_floor=1e-6, norm_cap=1e6,
                         los_rtol=1e-8):
    """
    Check the boundedness preconditions of the deterministic equivalents.

    A1: every ``R``, ``C``, ``T`` is PSD with a finite spectral norm below
    ``norm_cap``. A2: ``(1/M) tr`` of each is at least ``trace_floor``.
    A3: ``||(1/M) Gbar^H Gbar||`` is finite and below ``norm_cap``; when the
    LoS matrices are the built-in construction it must equal the LoS power.
    A4: every ``F`` is PSD with finite norm.
    """
    M, L = stats.M, stats.L
    passed = {"A1": True, "A2": True, "A3": True, "A4": True}
    viol = {}

    def fail(key, where):
        if passed[key]:
            passed[key] = False
            viol[key] = where

    def check_corr(kind, mats, index_table):
        for idx in np.ndindex(*index_table.shape):
            if len(idx) == 2 and idx[0] == idx[1]:
                continue
            a = mats[index_table[idx]]
            where = (kind,) + tuple(int(i) for i in idx)
            try:
                a = as_hermitian(a)
                lo = min_eigenvalue(a)
                nrm = spectral_norm(a)
            except Exception:
                fail("A1", where)
                continue
            if lo < -PSD_TOL or not np.isfinite(nrm) or nrm > norm_cap:
                fail("A1", where)
            if np.trace(a).real / M < trace_floor:
                fail("A2", where)

    check_corr("R", stats.r_mats, stats.r_index)
    if L > 1:
        check_corr("C", stats.c_mats, stats.c_index)
        check_corr("T", stats.t_mats, stats.t_index)
    for j in range(L):
        for n in range(L):
            if n == j:
                continue
            g = stats.Gbar(j, n)
            prod = g.conj().T @ g / M
            nrm = spectral_norm(0.5 * (prod + prod.conj().T)) if np.all(np.isfinite(prod)) else np.inf
            bad = not np.isfinite(nrm) or nrm > norm_cap
            if (j, n) not in stats.gbar_overrides:
                bad = bad or abs(nrm - stats.los_power) > los_rtol * max(1.0, stats.los_power)
            elif cfg is not None:
                # overridden LoS: must stay within the nominal LoS power
                bad = bad or nrm > cfg.los_power * (1 + los_rtol) + los_rtol
            if bad:
                fail("A3", ("Gbar", j, n))
    for kind, fs in (("F_ul", stats.f_ul), ("F_dl", stats.f_dl)):
        for c, f in sorted(fs.items()):
            if f is None:
                continue
            try:
                ok = min_eigenvalue(f) >= -PSD_TOL and spectral_norm(f) <= norm_cap
            except Exception:
                ok = False
            if not ok:
                fail("A4", (kind, c))
    return AssumptionReport(passed=passed, violations=viol)
