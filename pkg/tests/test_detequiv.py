import numpy as np
import pytest

from dyntdd import streams
from dyntdd.channel import ScenarioConfig, build_scenario_statistics, custom_statistics
from dyntdd.detequiv import (fixed_point_gamma, gamma_prime, prop1_bs2bs_approx, prop1_terms,
                             prop2_closed_form, validate_assumptions)
from dyntdd.errors import InvalidInputError, NonConvergenceError
from dyntdd.mathcore import min_eigenvalue, psd_sqrt_factor

from oracles import PROP2_M100, random_psd

P6 = 10 ** 0.6


def scalar_delta(kappa, rho):
    # delta (kappa / (1 + delta) + rho) = 1, positive root
    b = kappa + rho - 1
    return (-b + np.sqrt(b * b + 4 * rho)) / (2 * rho)


# --- fixed point ------------------------------------------------------------

def test_fixed_point_empty_sum():
    s = random_psd(np.random.default_rng(0), 6)
    fp = fixed_point_gamma([], s, 0.3)
    np.testing.assert_allclose(fp.gamma, np.linalg.inv(s + 0.3 * np.eye(6)), atol=1e-12)
    assert fp.iterations == 1


@pytest.mark.parametrize("K,M,rho", [(10, 64, 0.25), (8, 8, 1.0), (40, 50, 1e-3)])
def test_fixed_point_scalar_oracle(K, M, rho):
    fp = fixed_point_gamma([np.eye(M)] * K, None, rho)
    np.testing.assert_allclose(fp.delta, scalar_delta(K / M, rho), rtol=1e-9)
    assert fp.residual <= 1e-9
    np.testing.assert_allclose(fp.gamma, np.eye(M) / (K / M / (1 + fp.delta[0]) + rho), rtol=1e-9)


def test_fixed_point_resolvent_matches_monte_carlo():
    rng = np.random.default_rng(42)
    N, n, rho = 64, 8, 0.5
    rs = [random_psd(rng, N) for _ in range(n)]
    s = 0.2 * random_psd(rng, N)
    d = random_psd(rng, N)
    fp = fixed_point_gamma(rs, s, rho)
    want = np.trace(d @ fp.gamma).real / N
    roots = [psd_sqrt_factor(r) / np.sqrt(N) for r in rs]
    vals = []
    for _ in range(500):
        h = np.stack([root @ streams.complex_normal(rng, N) for root in roots], axis=1)
        res = np.linalg.inv(h @ h.conj().T + s + rho * np.eye(N))
        vals.append(np.trace(d @ res).real / N)
    se = np.std(vals, ddof=1) / np.sqrt(len(vals))
    assert abs(np.mean(vals) - want) <= 3 * se


def test_fixed_point_invariants_on_scenario_matrices():
    for beta in (0.0, 0.4, 0.8):
        cfg = ScenarioConfig(M=64, beta=beta)
        st = build_scenario_statistics(cfg)
        phis = [st.Phi(0, 0, 0, i, cfg.p_tr) for i in range(cfg.K)]
        for rho in (1e-3, 0.25, 10.0):
            fp = fixed_point_gamma(phis, None, rho)
            assert fp.iterations <= 500 and fp.residual <= 1e-9
            assert np.all(fp.delta > 0)
            assert min_eigenvalue(fp.gamma) > 0


def test_fixed_point_non_convergence():
    with pytest.raises(NonConvergenceError) as info:
        fixed_point_gamma([np.eye(8)] * 4, None, 0.1, tol=1e-15, max_iter=2)
    assert np.isfinite(info.value.residual) and info.value.residual > 0
    with pytest.raises(InvalidInputError):
        fixed_point_gamma([np.eye(4)], None, 0.0)


# --- derivative ---------------------------------------------------------------

def _setup(seed=9, N=32, n=6):
    rng = np.random.default_rng(seed)
    return [random_psd(rng, N) for _ in range(n)], 0.1 * random_psd(rng, N), random_psd(rng, N)


def test_gamma_prime_zero_theta():
    rs, s, _ = _setup()
    fp = fixed_point_gamma(rs, s, 0.4)
    dr = gamma_prime(rs, s, 0.4, np.zeros((32, 32)), fp)
    assert not np.any(dr.u_vector) and not np.any(dr.delta_prime)
    np.testing.assert_array_equal(dr.gamma_prime, np.zeros((32, 32)))


def test_gamma_prime_empty_sum():
    _, s, theta = _setup()
    fp = fixed_point_gamma([], s, 0.4)
    dr = gamma_prime([], s, 0.4, theta, fp)
    np.testing.assert_allclose(dr.gamma_prime, fp.gamma @ theta @ fp.gamma, atol=1e-13)


def test_gamma_prime_linear_system_and_contraction():
    rs, s, theta = _setup()
    fp = fixed_point_gamma(rs, s, 0.4)
    dr = gamma_prime(rs, s, 0.4, theta, fp)
    lhs = (np.eye(len(rs)) - dr.j_matrix) @ dr.delta_prime
    assert np.linalg.norm(lhs - dr.u_vector) <= 1e-9 * np.linalg.norm(dr.u_vector)
    assert np.max(np.abs(np.linalg.eigvals(dr.j_matrix))) < 1


@pytest.mark.parametrize("rho", [0.05, 0.4, 3.0])
def test_gamma_prime_finite_difference(rho):
    rs, s, d = _setup()
    N = 32

    def tr_gamma(r):
        return np.trace(d @ fixed_point_gamma(rs, s, r, tol=1e-14).gamma).real / N

    fp = fixed_point_gamma(rs, s, rho, tol=1e-14)
    dr = gamma_prime(rs, s, rho, np.eye(N), fp)
    h = 1e-4 * rho
    fd = -(tr_gamma(rho + h) - tr_gamma(rho - h)) / (2 * h)
    assert np.trace(d @ dr.gamma_prime).real / N == pytest.approx(fd, rel=1e-4)


# --- general deterministic value --------------------------------------------

def test_prop1_no_dl_cells():
    cfg = ScenarioConfig(M=32)
    assert prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0) == 0.0


def test_prop1_linear_in_dl_power():
    cfg = ScenarioConfig(M=32, dl_cells=(1, 2))
    st = build_scenario_statistics(cfg)
    a = prop1_bs2bs_approx(st, cfg, 0, 0)
    b = prop1_bs2bs_approx(st, cfg.replace(p_dl=2 * cfg.p_dl), 0, 0)
    assert b == pytest.approx(2 * a, rel=1e-12)
    silent = cfg.replace()
    object.__setattr__(silent, "p_dl", 0.0)
    assert prop1_bs2bs_approx(st, silent, 0, 0) == 0.0


@pytest.mark.parametrize("M", [64, 128, 256])
def test_prop1_matches_closed_form(M):
    cfg = ScenarioConfig(M=M, beta=0.0, dl_cells=(1, 2, 3))
    p1 = prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0)
    p2 = prop2_closed_form(0.1, 7, 3, 10, M, P6, P6, 1 / P6)
    assert abs(p1 - p2) / p2 <= 1e-4


@pytest.mark.parametrize("beta", [0.0, 0.4])
def test_prop1_cell_split(beta):
    cfg = ScenarioConfig(M=32, beta=beta, dl_cells=(2, 5))
    t = prop1_terms(build_scenario_statistics(cfg), cfg, 0, 3)
    if beta == 0.0:
        # with scalar statistics the LoS phases of the pair do not matter
        assert t.per_cell[2] == pytest.approx(t.per_cell[5], rel=1e-10)
    for n in (2, 5):
        assert t.nlos[n] > 0 and t.los[n] > 0
        assert t.nlos[n] + t.los[n] == pytest.approx(t.per_cell[n], rel=1e-12)
    assert t.total == pytest.approx(sum(t.per_cell.values()))


def test_prop1_names_failing_quantity():
    cfg = ScenarioConfig(M=16, dl_cells=(1,))
    with pytest.raises(NonConvergenceError) as info:
        prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0, tol=1e-16, max_iter=1)
    assert info.value.quantity == "Psi_j"


def test_prop1_rejects_dl_measured_cell():
    cfg = ScenarioConfig(M=16, dl_cells=(0,))
    with pytest.raises(InvalidInputError):
        prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0)


# --- closed form -----------------------------------------------------------

def test_prop2_examples():
    assert prop2_closed_form(0.1, 7, 0, 10, 64, P6, P6, 1 / P6) == 0.0
    assert prop2_closed_form(0.1, 7, 3, 10, 64, 0.0, P6, 1 / P6) == 0.0
    assert prop2_closed_form(0.1, 7, 3, 10, 10**9, P6, P6, 1 / P6) <= 1e-6
    assert prop2_closed_form(0.1, 7, 3, 10, 100, P6, P6, 10**-0.6) == pytest.approx(PROP2_M100,
                                                                                   rel=1e-12)


def test_prop2_linear_in_dl_count():
    vals = [prop2_closed_form(0.1, 7, n, 10, 128, P6, P6, 1 / P6) for n in range(7)]
    np.testing.assert_allclose(vals, vals[1] * np.arange(7), rtol=1e-13)


@pytest.mark.parametrize("K,M", [(5, 32), (10, 100), (16, 512)])
def test_prop2_depends_on_ratio_only(K, M):
    a = prop2_closed_form(0.1, 7, 2, K, M, P6, P6, 1 / P6) * M / K
    b = prop2_closed_form(0.1, 7, 2, 2 * K, 2 * M, P6, P6, 1 / P6) * M / K
    assert a == pytest.approx(b, rel=1e-13)


@pytest.mark.parametrize("args", [(0.0, 7, 1, 10, 64), (0.1, 7, 7, 10, 64), (0.1, 7, 1, 80, 64)])
def test_prop2_input_errors(args):
    with pytest.raises(InvalidInputError):
        prop2_closed_form(*args, P6, P6, 1 / P6)
    with pytest.raises(InvalidInputError):
        prop2_closed_form(0.1, 7, 1, 10, 64, P6, P6, 0.0)


# --- assumptions -------------------------------------------------------------

def test_assumptions_default_pass():
    cfg = ScenarioConfig(M=32)
    rep = validate_assumptions(build_scenario_statistics(cfg), cfg)
    assert rep.ok
    assert all("pass" in line for line in rep.lines())


def test_assumption_a3_flags_scaled_los():
    cfg = ScenarioConfig(L=3, M=32)
    st = build_scenario_statistics(cfg)
    st.gbar_overrides[(0, 1)] = st.Gbar(0, 1) * cfg.M
    rep = validate_assumptions(st, cfg)
    assert not rep.passed["A3"] and rep.violations["A3"] == ("Gbar", 0, 1)
    assert rep.passed["A1"] and rep.passed["A2"]


def test_assumption_a1_a2_a4_flags():
    M = 8
    good = np.eye(M)
    neg = -np.eye(M)
    tiny = 1e-9 * np.eye(M)
    st = custom_statistics(2, 1, M, lambda j, l, k: neg if (j, l) == (1, 0) else good,
                           lambda j, n: tiny, lambda j, n: good,
                           f_dl={0: -np.eye(M)})
    rep = validate_assumptions(st)
    assert not rep.passed["A1"] and rep.violations["A1"] == ("R", 1, 0, 0)
    assert not rep.passed["A2"]
    assert not rep.passed["A4"] and rep.violations["A4"] == ("F_dl", 0)
    assert rep.passed["A3"]
    assert not rep.ok
