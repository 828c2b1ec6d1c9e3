"""
Deterministic BS-to-BS interference against Monte Carlo.

For uncorrelated channels the general fixed-point value and the closed form
agree to round-off; with correlation only the general value applies. Both
are compared with the Monte Carlo estimate as the antenna count grows.
"""

from dyntdd.channel import ScenarioConfig, build_scenario_statistics
from dyntdd.detequiv import prop1_bs2bs_approx, prop2_closed_form
from dyntdd.metrics import bs2bs_interference_mc

print(f"{'beta':>5} {'M':>5} {'fixed point':>12} {'closed form':>12} {'Monte Carlo':>20}")
for beta in (0.0, 0.4):
    for M in (32, 64, 128):
        cfg = ScenarioConfig(M=M, beta=beta, dl_cells=(1,), n_outer=100, n_inner=20,
                             n_precoder=500)
        stats = build_scenario_statistics(cfg)
        det = prop1_bs2bs_approx(stats, cfg, 0, 0)
        closed = prop2_closed_form(cfg.alpha, cfg.L, 1, cfg.K, M, cfg.p_dl, cfg.p_tr, cfg.phi_ul)
        mc, se = bs2bs_interference_mc(cfg, stats=stats)
        closed_txt = f"{closed:12.5f}" if beta == 0 else f"{'n/a':>12}"
        print(f"{beta:5.1f} {M:5d} {det:12.5f} {closed_txt} {mc:12.5f} +- {se:.5f}")
