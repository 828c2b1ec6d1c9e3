"""
Parameter sweeps, crossover detection and figure reproduction.

Duplex layout for a sweep point with ``n_dl`` DL cells: UL metrics measure
user 0 of cell 0 (UL) with DL cells ``1 .. n_dl``; DL metrics measure user 0
of cell 0 (DL) with UL cells ``1 .. L - n_dl`` and the rest DL.
"""

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .channel import ScenarioConfig, build_scenario_statistics
from .detequiv import prop1_bs2bs_approx, prop2_closed_form
from .errors import InvalidInputError
from .metrics import UplinkEngine, _summarize, dl_rate

__all__ = [
    "METRICS",
    "SweepRow",
    "Crossover",
    "load_config",
    "run_sweep",
    "write_csv",
    "read_csv",
    "find_crossover",
    "series",
    "reproduce_figure",
    "BUDGETS",
]

# iul_cell_mc: interference from a single UL neighbor (cell L-1)
METRICS = ("ul_rate", "dl_rate", "i4_mc", "i4_prop1", "i4_prop2", "i3_mc",
           "iul_cell_mc")
UL_MC = {"ul_rate", "i4_mc", "i3_mc", "iul_cell_mc"}
DETERMINISTIC = {"i4_prop1", "i4_prop2"}


@dataclass
class SweepRow:
    scenario_id: str
    M: int
    K: int
    L: int
    beta: float
    alpha: float
    n_dl_cells: int
    metric: str
    value: float
    stderr: float
    n_samples: int
    seed: int
    wall_ms: int
    error: str = ""


_INT_FIELDS = {"M", "K", "L", "n_dl_cells", "n_samples", "seed", "wall_ms"}
_FLOAT_FIELDS = {"beta", "alpha", "value", "stderr"}
FIELDNAMES = [f.name for f in fields(SweepRow)]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(rows, path=None):
    """Serialize rows (floats with 17 significant digits); returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDNAMES)
    for r in rows:
        w.writerow([_fmt(getattr(r, name)) for name in FIELDNAMES])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path_or_text):
    if os.path.exists(str(path_or_text)):
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_text
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {}
        for name in FIELDNAMES:
            v = rec[name]
            if name in _INT_FIELDS:
                kw[name] = int(v)
            elif name in _FLOAT_FIELDS:
                kw[name] = float(v)
            else:
                kw[name] = v
        rows.append(SweepRow(**kw))
    return rows


def load_config(path, **overrides):
    """Read a JSON config whose keys are ``ScenarioConfig`` field names."""
    with open(path) as fh:
        d = json.load(fh)
    d.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(d)


def scenario_id(cfg, n_dl):
    return f"L{cfg.L}-K{cfg.K}-M{cfg.M}-b{cfg.beta:g}-a{cfg.alpha:g}-dl{n_dl}"


def ul_layout(cfg, n_dl):
    if not 0 <= n_dl <= cfg.L - 1:
        raise InvalidInputError(f"UL metrics need 0 <= n_dl <= L-1, got {n_dl}")
    return cfg.replace(dl_cells=tuple(range(1, 1 + n_dl)))


def dl_layout(cfg, n_dl):
    if not 1 <= n_dl <= cfg.L:
        raise InvalidInputError(f"DL metrics need 1 <= n_dl <= L, got {n_dl}")
    n_ul = cfg.L - n_dl
    return cfg.replace(dl_cells=(0,) + tuple(range(1 + n_ul, cfg.L)))


def _point(task):
    """Evaluate every requested metric at one (beta, M, n_dl) point."""
    base, n_dl, metrics, timing = task
    out = {}

    def row(metric, value, stderr, n, ms, err=""):
        out[metric] = SweepRow(scenario_id(base, n_dl), base.M, base.K, base.L,
                            float(base.beta), float(base.alpha), n_dl, metric,
                            float(value), float(stderr), int(n), int(base.seed),
                            int(ms) if timing else 0, err)

    def guarded(names, fn):
        t0 = time.perf_counter()
        try:
            results = fn()
        except Exception as exc:  # recorded as an error row, sweep continues
            ms = (time.perf_counter() - t0) * 1e3
            for name in names:
                row(name, math.nan, math.nan, 0, ms, f"{type(exc).__name__}: {exc}")
            return
        ms = (time.perf_counter() - t0) * 1e3
        for name in names:
            value, stderr, n, err = results[name]
            row(name, value, stderr, n, ms, err)

    ul = [m for m in metrics if m in UL_MC]
    for metric in metrics:
        if metric in UL_MC:
            if metric == ul[0]:
                guarded(ul, lambda: _ul_group(base, n_dl, ul))
        elif metric == "i4_prop1":
            def p1():
                cfg = ul_layout(base, n_dl)
                v = prop1_bs2bs_approx(build_scenario_statistics(cfg), cfg, 0, 0)
                return {"i4_prop1": (v, 0.0, 0, "")}
            guarded(["i4_prop1"], p1)
        elif metric == "i4_prop2":
            def p2():
                ul_layout(base, n_dl)
                v = prop2_closed_form(base.alpha, base.L, n_dl, base.K, base.M,
                                      base.p_dl, base.p_tr, base.phi_ul)
                return {"i4_prop2": (v, 0.0, 0, "")}
            guarded(["i4_prop2"], p2)
        elif metric == "dl_rate":
            def dl():
                r = dl_rate(dl_layout(base, n_dl), 0, 0)
                return {"dl_rate": (r.rate, r.stderr, r.n_samples, "")}
            guarded(["dl_rate"], dl)
        else:
            raise InvalidInputError(f"unknown metric {metric!r}")
    return [out[m] for m in metrics]


def _ul_group(base, n_dl, names):
    cfg = ul_layout(base, n_dl)
    engine = UplinkEngine(cfg)
    est = _summarize(engine.run(0), cfg.n_outer)
    n = cfg.n_outer
    res = {
        "ul_rate": (est.rate, est.stderr, n, ""),
        "i4_mc": (est.terms["i4"], est.term_stderr["i4"], n, ""),
        "i3_mc": (est.terms["i3"], est.term_stderr["i3"], n, ""),
    }
    probe = cfg.L - 1
    if probe in cfg.ul_cells and probe != 0:
        key = f"cell{probe}"
        res["iul_cell_mc"] = (est.terms[key], est.term_stderr[key], n, "")
    else:
        res["iul_cell_mc"] = (math.nan, math.nan, 0, "no UL neighbor at this point")
    return {k: res[k] for k in names}


def run_sweep(cfg_template, m_grid, beta_grid, dl_count_grid, metrics=METRICS,
              workers=1, timing=False):
    """
    Evaluate ``metrics`` over the grid ``beta x M x n_dl``.

    Rows come out in grid order (beta, then M, then n_dl, then metric order)
    regardless of ``workers``. Failures at a point become rows with a NaN
    value and a non-empty ``error``. With ``timing=False`` the ``wall_ms``
    column is 0 so output is byte-identical across runs.
    """
    if not (len(m_grid) and len(beta_grid) and len(dl_count_grid)):
        raise InvalidInputError("grids must be non-empty")
    metrics = tuple(metrics)
    for m in metrics:
        if m not in METRICS:
            raise InvalidInputError(f"unknown metric {m!r}")
    tasks = []
    for beta in beta_grid:
        for M in m_grid:
            base = cfg_template.replace(M=int(M), beta=float(beta), dl_cells=())
            for n_dl in dl_count_grid:
                tasks.append((base, int(n_dl), metrics, timing))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_point, tasks))
    else:
        chunks = [_point(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


@dataclass
class Crossover:
    m_star: float
    multiple: bool = False


def series(rows, metric, beta=None, n_dl=None):
    """``[(M, value), ...]`` for one metric (sorted by M, error rows skipped)."""
    pts = [(r.M, r.value) for r in rows
           if r.metric == metric and not r.error
           and (beta is None or math.isclose(r.beta, beta))
           and (n_dl is None or r.n_dl_cells == n_dl)]
    return sorted(pts)


def find_crossover(series_a, series_b):
    """
    Smallest ``M`` where ``a - b`` changes sign, by linear interpolation.

    Parameters
    ----------
    series_a, series_b : sequence of (M, value)
        Must share the same ``M`` grid with at least 3 points.

    Returns
    -------
    Crossover or None
        ``None`` when ``a - b`` keeps one sign; ``multiple`` is set when
        more than one sign change exists.
    """
    a = sorted(series_a)
    b = sorted(series_b)
    ma = [m for m, _ in a]
    if ma != [m for m, _ in b]:
        raise InvalidInputError("series do not share the same M grid")
    if len(a) < 3:
        raise InvalidInputError("need at least 3 grid points")
    d = np.array([va - vb for (_, va), (_, vb) in zip(a, b)], dtype=float)
    crossings = []
    for i in range(len(d) - 1):
        if d[i] == 0:
            crossings.append(float(ma[i]))
        elif d[i] * d[i + 1] < 0:
            frac = d[i] / (d[i] - d[i + 1])
            crossings.append(ma[i] + frac * (ma[i + 1] - ma[i]))
    if d[-1] == 0 and (not crossings or crossings[-1] != ma[-1]):
        crossings.append(float(ma[-1]))
    if not crossings:
        return None
    return Crossover(m_star=float(crossings[0]), multiple=len(crossings) > 1)


BUDGETS = {
    "quick": dict(n_outer=100, n_inner=10, n_precoder=400,
                  m_grid=(64, 128, 192, 256, 320, 384, 448),
                  fig2_m_grid=(64, 128, 192, 256)),
    "full": dict(n_outer=1000, n_inner=50, n_precoder=5000,
                 m_grid=tuple(range(64, 513, 32)),
                 fig2_m_grid=(64, 128, 192, 256, 320, 384, 448, 512)),
}
REFERENCE_M_STAR = {0.4: 380, 0.2: 240, 0.0: 200}
FIG_BETAS = (0.4, 0.2, 0.0)


def _decreasing(pts):
    v = [x for _, x in pts]
    return all(b < a for a, b in zip(v, v[1:]))


def reproduce_figure(fig_id, budget="quick", out_dir=".", cfg=None, workers=1):
    """
    Sweep the data behind one evaluation figure and summarize it.

    Writes ``<fig_id>_<budget>.csv`` and ``<fig_id>_<budget>.json`` into
    ``out_dir``; the JSON holds ``figure``, ``budget``, ``crossovers``
    (``[{beta, m_star, ...}]``) and ``verdicts``. Returns the summary dict.
    """
    if fig_id not in ("fig2", "fig3", "fig4"):
        raise InvalidInputError(f"unknown figure {fig_id!r}")
    if budget not in BUDGETS:
        raise InvalidInputError(f"unknown budget {budget!r}")
    b = BUDGETS[budget]
    base = (cfg or ScenarioConfig()).replace(
        n_outer=b["n_outer"], n_inner=b["n_inner"], n_precoder=b["n_precoder"])
    summary = {"figure": fig_id, "budget": budget, "crossovers": [], "verdicts": []}
    if budget == "quick":
        summary["tolerances"] = ("quick budget: orderings and monotonicity only; "
                                 "M* values carry Monte Carlo and grid error")
    if fig_id == "fig2":
        L = base.L
        grid = (L, L - 1, L - 2, L - 3)
        rows = run_sweep(base, b["fig2_m_grid"], (0.4,), grid, ("dl_rate",), workers)
        gaps = []
        for M in b["fig2_m_grid"]:
            pts = {r.n_dl_cells: r for r in rows if r.M == M and not r.error}
            rates = [pts[n] for n in grid if n in pts]
            ok = len(rates) == len(grid) and all(
                y.value > x.value for x, y in zip(rates, rates[1:]))
            summary["verdicts"].append({
                "name": f"dl_rate increases with UL-cell count at M={M}",
                "passed": bool(ok),
                "values": [r.value for r in rates]})
            if len(rates) == len(grid):
                gaps.append(rates[-1].value - rates[0].value)
        summary["verdicts"].append({
            "name": "gap between 3-UL and static DL rates widens with M",
            "passed": bool(len(gaps) > 1 and all(y > x for x, y in zip(gaps, gaps[1:]))),
            "values": gaps})
    elif fig_id == "fig3":
        rows = run_sweep(base, b["m_grid"], FIG_BETAS, (0, 1, 2, 3),
                         ("ul_rate", "i4_prop1"), workers)
        stars = {}
        for beta in FIG_BETAS:
            static = series(rows, "ul_rate", beta, 0)
            for n_dl in (1, 2, 3):
                c = find_crossover(series(rows, "ul_rate", beta, n_dl), static)
                entry = {"beta": beta, "n_dl_cells": n_dl,
                         "m_star": None if c is None else c.m_star,
                         "multiple": None if c is None else c.multiple,
                         "reference_m_star": REFERENCE_M_STAR[beta]}
                summary["crossovers"].append(entry)
                if n_dl == 3:
                    stars[beta] = entry["m_star"]
        ordered = all(stars[x] is not None for x in FIG_BETAS) and \
            stars[0.0] < stars[0.2] < stars[0.4]
        summary["verdicts"].append({"name": "M* ordered: beta=0 < 0.2 < 0.4",
                                    "passed": bool(ordered), "values": stars})
        if budget == "full":
            within = {beta: (stars[beta] is not None and
                             abs(stars[beta] - REFERENCE_M_STAR[beta]) <= 0.25 * REFERENCE_M_STAR[beta])
                      for beta in FIG_BETAS}
            summary["verdicts"].append({"name": "M* within 25% of reported values",
                                        "passed": all(within.values()),
                                        "values": {str(k): v for k, v in within.items()}})
    else:
        rows = run_sweep(base, b["m_grid"], FIG_BETAS, (1,),
                         ("i4_mc", "i3_mc", "iul_cell_mc"), workers)
        for beta in FIG_BETAS:
            i4 = series(rows, "i4_mc", beta, 1)
            i3 = series(rows, "i3_mc", beta, 1)
            ul = series(rows, "iul_cell_mc", beta, 1)
            c = find_crossover(i4, ul)
            summary["crossovers"].append({
                "beta": beta, "m_star": None if c is None else c.m_star,
                "multiple": None if c is None else c.multiple,
                "reference_m_star": REFERENCE_M_STAR[beta]})
            summary["verdicts"].append({
                "name": f"BS-to-BS interference strictly decreasing in M (beta={beta})",
                "passed": _decreasing(i4), "values": [v for _, v in i4]})
            summary["verdicts"].append({
                "name": f"pilot contamination persists (beta={beta}): "
                        f"I3(M_max) > 0.2 I3(M_min)",
                "passed": bool(i3 and i3[-1][1] > 0.2 * i3[0][1]),
                "values": [v for _, v in i3]})
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"{fig_id}_{budget}")
    write_csv(rows, stem + ".csv")
    with open(stem + ".json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    summary["csv"] = stem + ".csv"
    summary["rows"] = rows
    return summary


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)
