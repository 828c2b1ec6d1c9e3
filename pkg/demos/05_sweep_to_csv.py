"""
Persisting a sweep and reading it back.

The CSV written by the harness is byte-stable for a fixed config and seed,
and every row parses back to the same text.
"""

import tempfile
from pathlib import Path

from dyntdd.channel import ScenarioConfig
from dyntdd.harness import read_csv, run_sweep, write_csv

cfg = ScenarioConfig(n_outer=20, n_inner=5, n_precoder=100, seed=7)
rows = run_sweep(cfg, (32, 64), (0.0, 0.4), (1, 3), ("i4_prop1", "i4_prop2", "i4_mc"))
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sweep.csv"
    text = write_csv(rows, path)
    again = write_csv(run_sweep(cfg, (32, 64), (0.0, 0.4), (1, 3),
                                ("i4_prop1", "i4_prop2", "i4_mc")))
    print(f"{len(rows)} rows, rerun identical: {text == again}, "
          f"round trip identical: {write_csv(read_csv(path)) == text}")
print(text.splitlines()[0])
for line in text.splitlines()[1:7]:
    print(line)
