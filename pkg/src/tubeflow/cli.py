"""Command-line interface: run, compare, converge, presets.

The solver is fully deterministic (no RNG anywhere), so repeated invocations
with the same flags reproduce results bit for bit; `--seedless` is accepted
for pipeline compatibility and changes nothing.
"""

import argparse
import os
import sys
from dataclasses import replace
from fractions import Fraction

from . import charts, harness, lbm
from .config import dumps_config, preset, read_config, rescale, write_config
from .lbm import SolverAbort


def _build_config(args):
    """Resolve the scenario: preset and/or config file, then mesh flags."""
    base = preset(args.test) if args.test else None
    if args.config:
        cfg = read_config(args.config, base=base)
    elif base is not None:
        cfg = base
    else:
        raise SystemExit("error: need --test and/or --config")
    if args.scale is not None:
        cfg = rescale(cfg, Fraction(args.scale))
    if getattr(args, "nx", None):
        cfg = rescale(cfg, Fraction(args.nx, cfg.n_x))
    if getattr(args, "nt", None):
        cfg = replace(cfg, n_steps=args.nt).validate()
    return cfg


def _snapshot_steps(cfg, args):
    return lbm.default_snapshot_steps(cfg, getattr(args, "snapshot_every",
                                                   None))


def _write_run_outputs(out_dir, result, csv_only=False):
    os.makedirs(out_dir, exist_ok=True)
    cfg = result["config"]
    stem = cfg.name
    written = []
    path = os.path.join(out_dir, f"{stem}_config.txt")
    write_config(path, cfg)
    written.append(path)
    for engine in ("lbm", "fd"):
        if engine not in result:
            continue
        path = os.path.join(out_dir, f"{stem}_{engine}.csv")
        harness.write_snapshots_csv(path, result[engine])
        written.append(path)
    if "report" in result:
        path = os.path.join(out_dir, f"{stem}_report.txt")
        harness.write_report(path, result["report"].as_items(),
                             header=f"comparison report for '{stem}'")
        written.append(path)
        if not csv_only:
            x = harness.node_coordinates(cfg.n_x)
            written += charts.comparison_charts(
                out_dir, stem, x,
                result["lbm"].snapshots[-1], result["fd"].snapshots[-1])
    return written


def _print_outlets(result):
    for engine in ("lbm", "fd"):
        if engine not in result:
            continue
        run = result[engine]
        snap = run.snapshots[-1]
        flux = harness.mixture_flux(snap)
        print(f"{engine}: {run.stats.get('steps_run', snap['step'])} steps "
              f"in {run.runtime_seconds:.1f}s"
              + (f" (steady at {run.steady_step:.0f})"
                 if run.steady_step is not None else ""))
        print(f"  outlet  alpha_g {snap['alpha_g'][-1]:.6f}  "
              f"u_g {snap['u_g'][-1]:.6e}  u_l {snap['u_l'][-1]:.6e}  "
              f"mixture flux {flux[-1]:.6e}")


def cmd_run(args):
    cfg = _build_config(args)
    result = harness.run_case(cfg, engine=args.engine,
                              snapshot_steps=_snapshot_steps(cfg, args))
    print(f"case '{cfg.name}'  n_x={cfg.n_x}  n_steps={cfg.n_steps}")
    _print_outlets(result)
    if "report" in result:
        rep = result["report"]
        for name, c in rep.fields.items():
            print(f"  {name:8s} linf_rel {c.linf_rel:.4%}  "
                  f"l2_rel {c.l2_rel:.4%}")
    for path in _write_run_outputs(args.out, result,
                                   csv_only=args.csv_only):
        print(f"wrote {path}")
    return 0


def cmd_compare(args):
    args.engine = "both"
    return cmd_run(args)


def cmd_converge(args):
    cfg = _build_config(args)
    scales = [Fraction(s) for s in args.scales.split(",")]
    study = harness.convergence_study(cfg, scales, engine=args.engine)
    print(f"convergence of '{cfg.name}' on n_x = {study.n_x} "
          f"(engine {args.engine})")
    items = []
    for name, est in study.estimates.items():
        band = (f"[{est.order_low:.2f}, {est.order_high:.2f}]"
                if est.order == est.order else "undefined")
        errs = ", ".join(f"{e:.3e}" for e in est.errors)
        mono = "" if est.monotone else "  (non-monotone errors!)"
        print(f"  {name:8s} order {est.order:.3f}  band {band}  "
              f"diffs [{errs}]{mono}")
        items += [(f"{name}_order", est.order),
                  (f"{name}_order_low", est.order_low),
                  (f"{name}_order_high", est.order_high)]
        items += [(f"{name}_diff_{k}", e) for k, e in enumerate(est.errors)]
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{cfg.name}_convergence.txt")
    harness.write_report(path, items,
                         header=f"observed orders for '{cfg.name}', "
                                f"n_x = {study.n_x}")
    print(f"wrote {path}")
    return 0


def cmd_presets(args):
    for test_id in (1, 2, 3, 4):
        print(dumps_config(preset(test_id)))
    return 0


def _add_case_flags(p, with_engine=True):
    p.add_argument("--test", type=int, choices=(1, 2, 3, 4),
                   help="published test case preset")
    p.add_argument("--config", metavar="PATH",
                   help="key = value scenario file (overrides the preset)")
    p.add_argument("--scale", metavar="RATIONAL",
                   help="diffusive mesh rescale, e.g. 1/2 or 2")
    p.add_argument("--nx", type=int, metavar="N",
                   help="rescale to exactly N nodes (diffusive scaling)")
    p.add_argument("--nt", type=int, metavar="STEPS",
                   help="override the step horizon (no rescaling)")
    p.add_argument("--snapshot-every", type=int, metavar="STEPS",
                   dest="snapshot_every", help="snapshot cadence in steps")
    p.add_argument("--out", default="runs", metavar="DIR",
                   help="output directory (default: runs)")
    p.add_argument("--csv-only", action="store_true",
                   help="skip the SVG charts, write only CSV/report files")
    p.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; runs are always "
                        "deterministic")
    if with_engine:
        p.add_argument("--engine", choices=("lbm", "fd", "both"),
                       default="lbm", help="which engine(s) to run")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tubeflow",
        description="Two-phase vertical-tube solver: lattice-kinetic and "
                    "finite-difference engines with comparison tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one or both engines on a case")
    _add_case_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="run both engines and report the differences")
    _add_case_flags(p_cmp, with_engine=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_conv = sub.add_parser("converge",
                            help="observed-order study across mesh scales")
    _add_case_flags(p_conv, with_engine=False)
    p_conv.add_argument("--scales", default="1/2,1,2",
                        help="comma-separated mesh scales (default 1/2,1,2)")
    p_conv.add_argument("--engine", choices=("lbm", "fd"), default="lbm")
    p_conv.set_defaults(func=cmd_converge)

    p_pre = sub.add_parser("presets",
                           help="print the four test-case configurations")
    p_pre.set_defaults(func=cmd_presets)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
