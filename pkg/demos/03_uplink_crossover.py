"""
Where dynamic TDD starts to pay off in the uplink.

Sweeps the antenna count for an all-UL network and for one with a single
DL neighbor, locates the rate crossover, and shows that it coincides with
the point where the BS-to-BS interference from that neighbor drops below
the interference from an UL neighbor.
"""

from dyntdd.channel import ScenarioConfig
from dyntdd.harness import find_crossover, run_sweep, series

cfg = ScenarioConfig(beta=0.0, n_outer=60, n_inner=10, n_precoder=300)
grid = (64, 128, 192, 256, 320)
rows = run_sweep(cfg, grid, (0.0,), (0, 1), ("ul_rate", "i4_mc", "iul_cell_mc", "i3_mc"))

static = dict(series(rows, "ul_rate", 0.0, 0))
dynamic = dict(series(rows, "ul_rate", 0.0, 1))
i4 = dict(series(rows, "i4_mc", 0.0, 1))
iul = dict(series(rows, "iul_cell_mc", 0.0, 1))
i3 = dict(series(rows, "i3_mc", 0.0, 1))
print(f"{'M':>4} {'rate all-UL':>12} {'rate 1 DL':>10} {'I4 (DL nbr)':>12} {'UL nbr':>8} {'I3':>7}")
for M in grid:
    print(f"{M:4d} {static[M]:12.4f} {dynamic[M]:10.4f} {i4[M]:12.4f} {iul[M]:8.4f} {i3[M]:7.4f}")

rate_x = find_crossover(series(rows, "ul_rate", 0.0, 1), series(rows, "ul_rate", 0.0, 0))
int_x = find_crossover(series(rows, "i4_mc", 0.0, 1), series(rows, "iul_cell_mc", 0.0, 1))
print(f"\nrate crossover M* ~ {rate_x.m_star:.0f}, interference crossover ~ {int_x.m_star:.0f}")
