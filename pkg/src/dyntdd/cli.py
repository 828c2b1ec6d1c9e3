"""Command-line entry point: ``dyntdd <subcommand>``."""

import argparse
import sys

from .channel import build_scenario_statistics
from .detequiv import prop1_terms, prop2_closed_form, validate_assumptions
from .harness import METRICS, load_config, reproduce_figure, run_sweep, write_csv


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _override_args(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--n-outer", dest="n_outer", type=int)
    p.add_argument("--n-inner", dest="n_inner", type=int)
    p.add_argument("--n-precoder", dest="n_precoder", type=int)


def _overrides(args):
    return {k: getattr(args, k, None) for k in ("seed", "M", "n_outer", "n_inner", "n_precoder")}


def cmd_selftest(args):
    from . import selftest
    return 0 if selftest.run(seed=args.seed or 0) else 1


def cmd_validate(args):
    cfg = load_config(args.config, **_overrides(args))
    rep = validate_assumptions(build_scenario_statistics(cfg), cfg)
    for line in rep.lines():
        print(line)
    return 0 if rep.ok else 1


def cmd_detequiv(args):
    cfg = load_config(args.config, **_overrides(args))
    stats = build_scenario_statistics(cfg)
    j = cfg.ul_cells[0]
    t = prop1_terms(stats, cfg, j, args.user)
    print(f"cell {j} user {args.user}, DL cells {list(cfg.dl_cells)}, M={cfg.M}, beta={cfg.beta:g}")
    for n in sorted(t.per_cell):
        print(f"  DL cell {n}: {t.per_cell[n]:.10g} (NLoS {t.nlos[n]:.6g}, LoS {t.los[n]:.6g})")
    print(f"general deterministic value: {t.total:.12g}")
    l_dl = len(cfg.dl_cells)
    if l_dl <= cfg.L - 1:
        p2 = prop2_closed_form(cfg.alpha, cfg.L, l_dl, cfg.K, cfg.M, cfg.p_dl, cfg.p_tr, cfg.phi_ul)
        note = "" if cfg.beta == 0 else " (assumes uncorrelated channels; beta != 0 here)"
        print(f"closed form: {p2:.12g}{note}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config, **_overrides(args))
    m_grid = _ints(args.m_grid) if args.m_grid else [cfg.M]
    beta = _floats(args.beta) if args.beta else [cfg.beta]
    dl = _ints(args.dl_cells) if args.dl_cells else [len(cfg.dl_cells)]
    metrics = args.metric or ["i4_prop2"]
    rows = run_sweep(cfg, m_grid, beta, dl, metrics, workers=args.workers, timing=args.timing)
    text = write_csv(rows, args.out)
    if args.out is None:
        sys.stdout.write(text)
    errors = [r for r in rows if r.error]
    for r in errors:
        print(f"error at {r.scenario_id} {r.metric}: {r.error}", file=sys.stderr)
    return 1 if errors else 0


def cmd_figure(args):
    s = reproduce_figure(args.fig, args.budget, args.out, workers=args.workers)
    for c in s["crossovers"]:
        print(f"crossover beta={c['beta']}: M*={c['m_star']}")
    ok = True
    for v in s["verdicts"]:
        ok &= bool(v["passed"])
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['name']}")
    print(f"wrote {s['csv']}")
    return 0 if ok and not any(r.error for r in s["rows"]) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="dyntdd", description="Dynamic-TDD massive MIMO simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("selftest", help="run the built-in property checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selftest)

    s = sub.add_parser("validate", help="check the boundedness assumptions for a config")
    s.add_argument("config")
    _override_args(s)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("detequiv", help="print deterministic BS-to-BS interference values")
    s.add_argument("config")
    s.add_argument("--user", type=int, default=0)
    _override_args(s)
    s.set_defaults(func=cmd_detequiv)

    s = sub.add_parser("sweep", help="evaluate metrics over an M/beta/DL-count grid")
    s.add_argument("config")
    s.add_argument("--metric", action="append", choices=METRICS)
    s.add_argument("--m-grid", help="comma-separated antenna counts")
    s.add_argument("--beta", help="comma-separated correlation values")
    s.add_argument("--dl-cells", help="comma-separated DL-cell counts")
    s.add_argument("--out", help="CSV path (stdout when omitted)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record wall_ms (output no longer byte-stable)")
    _override_args(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("figure", help="reproduce the data of an evaluation figure")
    s.add_argument("fig", choices=["fig2", "fig3", "fig4"])
    s.add_argument("--budget", choices=["quick", "full"], default="quick")
    s.add_argument("--out", default=".")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_figure)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
