"""
Downlink users gain from UL neighbors.

A DL cell is hurt by other DL cells' precoded signals far more than by UL
users in neighboring cells, so turning neighbors to UL raises the DL rate,
and more so with more antennas.
"""

from dyntdd.channel import ScenarioConfig
from dyntdd.metrics import dl_rate

base = ScenarioConfig(beta=0.4, n_outer=300, n_precoder=1000)
for M in (64, 128, 256):
    cells = []
    for n_ul in range(4):
        dl = (0,) + tuple(range(1 + n_ul, base.L))
        r = dl_rate(base.replace(M=M, dl_cells=dl), 0)
        cells.append(f"{r.rate:.3f}+-{r.stderr:.3f}")
    print(f"M={M:3d}  UL neighbors 0..3: " + "  ".join(cells))
