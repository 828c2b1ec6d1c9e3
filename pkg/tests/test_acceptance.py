"""
Acceptance criteria, one test each, each printing a PASS/FAIL line.

Criterion 5 runs the quick figure budget (ordering only) unless
``DYNTDD_FULL=1`` is set, which runs the multi-hour full budget and also
checks the M* magnitudes.
"""

import math
import os
import time

import numpy as np
import pytest

import test_channel
import test_detequiv
import test_harness
import test_mathcore
import test_metrics
import test_transceiver
from dyntdd.channel import ScenarioConfig, build_scenario_statistics
from dyntdd.detequiv import prop1_bs2bs_approx, prop2_closed_form
from dyntdd.harness import REFERENCE_M_STAR, find_crossover, reproduce_figure, run_sweep, series
from dyntdd.metrics import bs2bs_interference_mc, dl_rate

P6 = 10 ** 0.6
FULL = os.environ.get("DYNTDD_FULL") == "1"


def test_criterion_1_closed_form_consistency(report):
    t0 = time.perf_counter()
    rel = {}
    for M in (64, 128, 256):
        cfg = ScenarioConfig(M=M, beta=0.0, dl_cells=(1, 2, 3))
        p1 = prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0)
        p2 = prop2_closed_form(0.1, 7, 3, 10, M, P6, P6, 1 / P6)
        rel[M] = abs(p1 - p2) / p2
    secs = time.perf_counter() - t0
    ok = max(rel.values()) <= 1e-4 and secs < 120
    report(1, ok, f"max relative gap {max(rel.values()):.1e} (<= 1e-4), {secs:.1f} s (< 120 s)")
    assert ok


@pytest.mark.parametrize("beta", [0.0, 0.4])
def test_criterion_2_deterministic_vs_monte_carlo(report, beta):
    t0 = time.perf_counter()
    gaps, detail = {}, []
    ok = True
    for M in (32, 128):
        cfg = ScenarioConfig(M=M, beta=beta, dl_cells=(1,), n_outer=200, n_inner=50)
        st = build_scenario_statistics(cfg)
        p1 = prop1_bs2bs_approx(st, cfg, 0, 0)
        mc, se = bs2bs_interference_mc(cfg, stats=st)
        gaps[M] = abs(mc - p1) / p1
        detail.append(f"M={M}: MC {mc:.5f}+-{se:.5f} vs {p1:.5f} ({100 * gaps[M]:.2f}%)")
        if M == 128:
            ok &= abs(mc - p1) <= max(0.1 * p1, 3 * se)
    ok &= gaps[128] < gaps[32]
    secs = time.perf_counter() - t0
    ok &= secs < 1200
    report(2, ok, f"beta={beta}: " + "; ".join(detail) + f"; gap shrinks: {gaps[128] < gaps[32]}")
    assert ok


def test_criterion_3_interference_decay(report):
    t0 = time.perf_counter()
    grid = (64, 128, 256, 512)
    vals = []
    for M in grid:
        cfg = ScenarioConfig(M=M, beta=0.0, dl_cells=(1,), n_outer=200, n_inner=50)
        vals.append(bs2bs_interference_mc(cfg)[0])
    slope = np.polyfit(np.log(grid), np.log(vals), 1)[0]
    secs = time.perf_counter() - t0
    ok = -1.25 <= slope <= -0.75 and secs < 2700
    report(3, ok, f"log-log slope {slope:.3f} in [-1.25, -0.75], {secs:.0f} s")
    assert ok


@pytest.fixture(scope="module")
def interference_sweep():
    cfg = ScenarioConfig(n_outer=100, n_inner=10, n_precoder=400)
    grid = tuple(range(64, 513, 64))
    rows = run_sweep(cfg, grid, (0.4, 0.2, 0.0), (0, 1),
                     ("ul_rate", "i3_mc", "i4_mc", "iul_cell_mc"))
    return grid, rows


def test_criterion_4_pilot_contamination_persists(report, interference_sweep):
    grid, rows = interference_sweep
    step = grid[1] - grid[0]
    ok = not any(r.error for r in rows)
    detail = []
    for beta in (0.4, 0.2, 0.0):
        i3 = dict(series(rows, "i3_mc", beta, 1))
        i4 = dict(series(rows, "i4_mc", beta, 1))
        keep = i3[512] > 0.2 * i3[64]
        fall = i4[512] < 0.2 * i4[64]
        c_int = find_crossover(series(rows, "i4_mc", beta, 1), series(rows, "iul_cell_mc", beta, 1))
        c_rate = find_crossover(series(rows, "ul_rate", beta, 1), series(rows, "ul_rate", beta, 0))
        match = c_int is not None and c_rate is not None and abs(c_int.m_star - c_rate.m_star) <= step
        ok &= keep and fall and match
        detail.append(f"beta={beta}: I3 ratio {i3[512] / i3[64]:.2f}, I4 ratio {i4[512] / i4[64]:.3f}, "
                      f"crossings {_fmt(c_int)} vs {_fmt(c_rate)}")
    report(4, ok, "; ".join(detail))
    assert ok


def _fmt(c):
    return "none" if c is None else f"{c.m_star:.0f}"


def test_criterion_5_crossover_ordering(report, tmp_path):
    budget = "full" if FULL else "quick"
    s = reproduce_figure("fig3", budget, tmp_path)
    stars = {c["beta"]: c["m_star"] for c in s["crossovers"] if c["n_dl_cells"] == 3}
    ok = all(v is not None for v in stars.values()) and stars[0.0] < stars[0.2] < stars[0.4]
    text = ", ".join(f"M*({b})={_num(stars[b])} [{REFERENCE_M_STAR[b]}]" for b in (0.0, 0.2, 0.4))
    if FULL:
        within = all(stars[b] is not None and abs(stars[b] - REFERENCE_M_STAR[b]) <= 0.25 * REFERENCE_M_STAR[b]
                     for b in stars)
        ok &= within
        text += f"; within 25%: {within}"
    else:
        text += "; quick budget checks ordering only (set DYNTDD_FULL=1 for magnitudes)"
    report(5, ok, text)
    assert ok


def _num(v):
    return "none" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.0f}"


def test_criterion_6_dl_rate_grows_with_ul_cells(report):
    z = 1.959963984540054
    base = ScenarioConfig(beta=0.4, n_outer=1000, n_precoder=2000)
    rates = {}
    for M in (64, 128, 256):
        for n_ul in range(4):
            dl = (0,) + tuple(range(1 + n_ul, 7))
            rates[M, n_ul] = dl_rate(base.replace(M=M, dl_cells=dl), 0)
    ok = True
    for M in (64, 128, 256):
        for u in range(3):
            a, b = rates[M, u], rates[M, u + 1]
            ok &= b.rate - a.rate > z * (a.stderr + b.stderr)
    gaps = {M: [rates[M, u + 1].rate - rates[M, u].rate for u in range(3)] for M in (64, 128, 256)}
    widening = all(gaps[64][u] < gaps[128][u] < gaps[256][u] for u in range(3))
    ok &= widening
    detail = "; ".join(f"M={M}: " + " < ".join(f"{rates[M, u].rate:.3f}" for u in range(4))
                       for M in (64, 128, 256))
    report(6, ok, detail + f"; gaps widen in M: {widening}")
    assert ok


PROPERTY_SUITE = [
    # matrix bound oracles
    test_mathcore.test_inversion_lemma_200_instances,
    test_mathcore.test_trace_concentration,
    test_mathcore.test_quadratic_form_bound,
    test_mathcore.test_normalized_trace_bound,
    test_mathcore.test_trace_norm_product_bound,
    test_mathcore.test_norm_eigenvalue_duality,
    test_mathcore.test_min_eigenvalue_shift,
    # fixed point and derivative
    test_detequiv.test_fixed_point_resolvent_matches_monte_carlo,
    lambda: [test_detequiv.test_gamma_prime_finite_difference(r) for r in (0.05, 0.4, 3.0)],
    # estimator vs brute force, power normalization, LoS, determinism
    lambda: [test_metrics.test_terms_match_brute_force(x) for x in (False, True)],
    test_transceiver.test_normalized_precoder_power,
    lambda: [test_channel.test_los_orthogonality_across_pairs(M) for M in (1, 7, 16, 128)],
    test_channel.test_sample_channels_deterministic,
]


def test_criterion_7_property_suites(report, tmp_path):
    t0 = time.perf_counter()
    failures = []
    for fn in PROPERTY_SUITE:
        try:
            fn()
        except AssertionError as exc:
            failures.append(f"{getattr(fn, '__name__', 'check')}: {exc}")
    try:
        test_harness.test_sweep_byte_deterministic_and_parallel(tmp_path)
    except AssertionError as exc:
        failures.append(f"sweep determinism: {exc}")
    secs = time.perf_counter() - t0
    ok = not failures and secs < 600
    report(7, ok, f"{len(PROPERTY_SUITE) + 1} suites, {len(failures)} failing, {secs:.0f} s (< 600 s)")
    assert ok, failures
