"""Command-line interface.

Exit codes: 0 success, 2 configuration problem, 3 numerical abort,
4 acceptance failure.  Thread count for FFT work comes from MSQ2_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, Msq2Error, NumericalAbort
from .runner import ExperimentConfig, gaussian_oracle_report, refit_rates, run_experiment

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def _add_config_arg(p):
    p.add_argument("--config", required=True, help="path to a JSON config file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="msq2",
        description="Pseudo-spectral simulator and semiclassical diagnostics "
                    "for the modified 2D critical Schrodinger equation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment")
    _add_config_arg(p_run)
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument("--verbose", action="store_true")

    p_ver = sub.add_parser("verify", help="run the acceptance battery")
    p_ver.add_argument("--quick", action="store_true",
                       help="shrink the large reference runs")
    p_ver.add_argument("--full", action="store_true",
                       help="force full-size reference runs")
    p_ver.add_argument("--work", default="runs/verify",
                       help="cache directory for reference runs")
    p_ver.add_argument("--only", default=None,
                       help="comma-separated criterion ids, e.g. C01,C05")

    p_rates = sub.add_parser("rates", help="re-fit slopes from a stored run")
    p_rates.add_argument("run_dir")

    p_oracle = sub.add_parser("oracle", help="closed-form Gaussian comparison")
    p_oracle.add_argument("--config", default=None,
                          help="optional JSON with n, L, times")

    p_weyl = sub.add_parser("weyl-selftest",
                            help="norm/remainder scaling measurements -> CSV")
    p_weyl.add_argument("--out", default="weyl_selftest.csv")

    sub.add_parser("bench", help="compare numba and numpy kernel paths")
    return ap


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    progress = None
    if args.verbose:
        progress = lambda t: print(f"  checkpoint t={t:g}", flush=True)
    res = run_experiment(cfg, out_dir=args.out, progress=progress)
    print(f"run complete: {res.out_dir}")
    failed = [r["name"] for r in res.rates if r["passed"] == "fail"]
    if failed:
        print("rate rows outside their bands: " + ", ".join(failed))
    return 0


def cmd_verify(args) -> int:
    from .acceptance import AcceptanceContext, format_verify_table, run_all

    quick = args.quick and not args.full
    ctx = AcceptanceContext(args.work, quick=quick)
    only = set(args.only.split(",")) if args.only else None
    results = run_all(ctx, only=only)
    table = format_verify_table(results)
    out = Path(args.work)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.csv").write_text(table)
    with open(out / "verify.json", "w") as fh:
        json.dump([r.__dict__ for r in results], fh, indent=1, default=str)
    n_fail = sum(not r.passed for r in results)
    print(f"\n{len(results) - n_fail}/{len(results)} criteria passed; "
          f"table written to {out / 'verify.csv'}")
    return EXIT_ACCEPTANCE if n_fail else 0


def cmd_rates(args) -> int:
    rows = refit_rates(args.run_dir)
    if not rows:
        print("no fittable series found")
        return EXIT_CONFIG
    for r in rows:
        print(f"{r['name']:18s} slope={r['slope']:+.4f} "
              f"stderr={r['stderr']:.2e} window=[{r['t_lo']:g},{r['t_hi']:g}] "
              f"n={r['n_points']}")
    return 0


def cmd_oracle(args) -> int:
    kwargs = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        kwargs = {k: raw[k] for k in ("n", "L", "times") if k in raw}
        if "times" in kwargs:
            kwargs["times"] = tuple(float(t) for t in kwargs["times"])
    rep = gaussian_oracle_report(**kwargs)
    for t, dev in rep["deviations"].items():
        print(f"t={t:g}: relative L2 deviation {dev:.3e}")
    print(f"max deviation: {rep['max_deviation']:.3e}")
    return 0


def cmd_weyl_selftest(args) -> int:
    import warnings

    from .dispersion import quadratic, quadrel
    from .runner import write_csv
    from .weyl import (CutoffProfile, PhaseSpaceSymbol,
                       moyal_remainder_scaling, operator_norm_scaling,
                       uniform_axis)

    rows = []
    cut = CutoffProfile()
    q = quadratic()
    y = uniform_axis(512, 8.0)
    fam = lambda h: (lambda s, xi, hh=h: cut.gamma((s + q.d1(xi)) / np.sqrt(hh)))
    hs = (1.0, 1e-1, 1e-2, 1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for pair in ("l2_l2_2d", "l2_linf_2d"):
            sc = operator_norm_scaling(fam, hs, y, pair)
            for h, v in zip(sc.h_list, sc.norms):
                rows.append([pair, h, v, sc.fit.slope])
        qr = quadrel()
        one = lambda x, xi: np.broadcast_to(
            np.float64(1.0), np.broadcast_shapes(np.shape(x), np.shape(xi))).copy()
        a = PhaseSpaceSymbol(
            val=lambda x, xi: np.exp(-x ** 2) * np.cos(xi),
            dx=lambda x, xi: -2.0 * x * np.exp(-x ** 2) * np.cos(xi),
            dxi=lambda x, xi: -np.exp(-x ** 2) * np.sin(xi), name="gauss-cos")
        b = PhaseSpaceSymbol(
            val=lambda x, xi: x + qr.d1(xi), dx=one,
            dxi=lambda x, xi: np.broadcast_to(
                qr.d2(xi), np.broadcast_shapes(np.shape(x), np.shape(xi))).copy(),
            name="curved-line")
        y6 = uniform_axis(512, 6.0)
        rem = moyal_remainder_scaling(a, b, (1e-1, 3e-2, 1e-2, 3e-3), y6)
        for h, v in zip(rem.h_list, rem.norms):
            rows.append(["moyal_remainder", h, v, rem.fit.slope])
    write_csv(args.out, ("measurement", "h", "value", "fitted_slope"), rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def cmd_bench(_args) -> int:
    from .benchmarks import run_benchmark

    run_benchmark()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "verify": cmd_verify, "rates": cmd_rates,
                "oracle": cmd_oracle, "weyl-selftest": cmd_weyl_selftest,
                "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Msq2Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
