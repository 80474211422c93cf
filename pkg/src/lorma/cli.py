"""Command line interface: ``lorma run|gradcheck|analyze|theory|report``.

Exit codes: 0 success, 1 check failure, 2 usage or parse error,
3 training divergence, 4 I/O failure.
"""

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .adapters import AdapterConfig, AdapterVariant, MultiplySide, init_adapter, perturb
from .analysis import compare_updates, report_rows
from .config import bundled_configs, load_plan, resolve_config_path
from .exceptions import ConfigurationError, DivergenceError, LormaError, SnapshotFormatError
from .experiment import run_plan
from .gradients import GRAD_CHECK_MAX_DIM, grad_check
from .io import format_float, load_matrix, load_matrix_csv
from .rng import Xoshiro256
from .theory import run_theory_suite
from .trainer import loss_auc

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

GRAD_TOL = 1e-4


def _err(msg):
    print(f"lorma: error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _run_one(ref, output_dir, quiet):
    """Run one config file; returns ``(exit_code, lines)``."""
    lines = []
    path = resolve_config_path(ref)
    try:
        plan = load_plan(path)
    except FileNotFoundError:
        return EXIT_IO, [f"config not found: {ref}"]
    except OSError as exc:
        return EXIT_IO, [f"cannot read {path}: {exc}"]
    except (ConfigurationError, TypeError, ValueError) as exc:
        return EXIT_USAGE, [str(exc)]
    out = Path(output_dir) / plan.name if output_dir else Path(plan.output_dir)
    try:
        _, rows = run_plan(plan, out, log=None if quiet else lines.append)
    except DivergenceError as exc:
        return EXIT_DIVERGED, lines + [f"{plan.name}: {exc}"]
    except OSError as exc:
        return EXIT_IO, lines + [f"{plan.name}: cannot write results: {exc}"]
    lines.append(f"{plan.name}: wrote {out}")
    lines.extend(format_comparison(rows))
    return EXIT_OK, lines


def format_comparison(rows):
    out = [f"{'variant':<12} {'final_loss':>12} {'auc':>12} {'auc_red_%':>10}"]
    for variant, row in rows.items():
        red = row["auc_reduction_vs_lora_pct"]
        out.append(
            f"{variant:<12} {row['final_loss_mean']:>12.5g} {row['auc_mean']:>12.5g} "
            f"{'' if red is None else format(red, '.2f'):>10}"
        )
    return out


def cmd_run(args):
    jobs = int(os.environ.get("LORMA_JOBS", args.jobs))
    if jobs < 1:
        _err("--jobs must be >= 1")
        return EXIT_USAGE
    refs = args.configs
    if jobs > 1 and len(refs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, refs, [args.output_dir] * len(refs),
                                     [args.quiet] * len(refs)))
    else:
        outcomes = [_run_one(ref, args.output_dir, args.quiet) for ref in refs]
    worst = EXIT_OK
    for code, lines in outcomes:
        stream = sys.stdout if code == EXIT_OK else sys.stderr
        for line in lines:
            print(line, file=stream)
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def _gradcheck_state(variant, side, dims, r, seed):
    rng = Xoshiro256(seed)
    w0 = rng.normal_matrix(dims, dims, 1.0 / np.sqrt(dims))
    state = init_adapter(w0, AdapterConfig(variant, side, r, float(r), seed))
    return perturb(state, std=0.3, seed=rng.next_u64()), rng


def cmd_gradcheck(args):
    dims = args.dims
    if not 1 <= dims <= GRAD_CHECK_MAX_DIM:
        _err(f"--dims must be between 1 and {GRAD_CHECK_MAX_DIM}, got {dims}")
        return EXIT_USAGE
    r = args.rank if args.rank is not None else min(2, dims)
    if not 1 <= r <= dims:
        _err(f"--rank must be between 1 and --dims, got {r}")
        return EXIT_USAGE
    variants = list(AdapterVariant) if args.variant == "all" else [AdapterVariant(args.variant)]
    sides = list(MultiplySide) if args.side == "both" else [MultiplySide(args.side)]
    failed = False
    for variant in variants:
        for side in sides if variant.multiplicative else [MultiplySide.PRE]:
            state, rng = _gradcheck_state(variant, side, dims, r, args.seed)
            x = rng.normal_matrix(dims, args.batch)
            report = grad_check(state, x, seed=rng.next_u64(), wrt=("b", "a", "x"))
            ok = report.passed(GRAD_TOL)
            failed |= not ok
            coord = f"{report.parameter}[{', '.join(map(str, report.index))}]"
            print(
                f"{variant.value:<12} {side.value:<4} d={dims} r={r} "
                f"max_rel_err={report.max_rel_error:.3e} at {coord} "
                f"{'PASS' if ok else 'FAIL'}"
            )
            if not ok:
                _err(
                    f"{variant.value}/{side.value}: analytic {report.analytic!r} vs "
                    f"numeric {report.numeric!r} at {coord}"
                )
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _load_any(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_matrix_csv(path)
    return load_matrix(path)


def cmd_analyze(args):
    mats = []
    for path in (args.ref, args.test):
        try:
            mats.append(_load_any(path))
        except SnapshotFormatError as exc:
            _err(f"{path}: {exc}")
            return EXIT_USAGE
        except (ValueError, UnicodeDecodeError) as exc:
            _err(f"{path}: {exc}")
            return EXIT_USAGE
        except OSError as exc:
            _err(f"cannot read {path}: {exc}")
            return EXIT_IO
    ref, test = mats
    if ref.shape != test.shape:
        _err(f"shape mismatch: {ref.shape} vs {test.shape}")
        return EXIT_USAGE
    try:
        report = compare_updates(ref, test, args.r, seed=args.seed)
    except (LormaError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("metric", "ref_vs_test", "ref_vs_random"))
    for name, a, b in report_rows(report):
        writer.writerow((name, *("" if v is None else format_float(v) if isinstance(v, float) else v
                                 for v in (a, b))))
    text = buf.getvalue()
    sys.stdout.write(text)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="ascii")
        except OSError as exc:
            _err(f"cannot write {args.out}: {exc}")
            return EXIT_IO
    return EXIT_OK


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------


def cmd_theory(args):
    results = run_theory_suite(seed=args.seed)
    width = max(len(r.claim) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.claim:<{width}}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _read_losses(path):
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["loss"]) for r in rows]


def cmd_report(args):
    root = Path(args.run_dir)
    loss_files = sorted(root.glob("*/seed_*/loss.csv"))
    if not loss_files:
        _err(f"no run outputs under {root}")
        return EXIT_IO
    aucs = {}
    for path in loss_files:
        variant = path.parent.parent.name
        try:
            aucs.setdefault(variant, []).append(loss_auc(_read_losses(path)))
        except (OSError, KeyError, ValueError) as exc:
            _err(f"{path}: {exc}")
            return EXIT_IO
    means = {v: sum(a) / len(a) for v, a in aucs.items()}
    ref = means.get(AdapterVariant.LORA.value)
    print(f"{'variant':<12} {'seeds':>5} {'auc':>12} {'% AUC decrease vs lora':>24}")
    for variant in sorted(means, key=lambda v: [e.value for e in AdapterVariant].index(v)
                          if v in {e.value for e in AdapterVariant} else 99):
        red = "" if ref is None else f"{(1.0 - means[variant] / ref) * 100.0:.2f}"
        print(f"{variant:<12} {len(aucs[variant]):>5} {means[variant]:>12.6g} {red:>24}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lorma",
        description="Low-rank additive and multiplicative adapters: experiments and checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train adapters described by config files")
    p.add_argument("configs", nargs="+",
                   help=f"config paths (.toml/.json) or bundled names: {', '.join(bundled_configs())}")
    p.add_argument("--output-dir", help="write results to OUTPUT_DIR/<name> instead of the config's output_dir")
    p.add_argument("--jobs", type=int, default=1, help="parallel config files (env LORMA_JOBS overrides)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gradcheck", help="finite-difference check of the closed-form gradients")
    p.add_argument("--dims", type=int, default=16)
    p.add_argument("--variant", default="all", choices=["all"] + [v.value for v in AdapterVariant])
    p.add_argument("--side", default="pre", choices=["pre", "post", "both"])
    p.add_argument("--rank", type=int)
    p.add_argument("--batch", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze", help="compare two weight-update snapshots")
    p.add_argument("ref")
    p.add_argument("test")
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--seed", type=int, default=0, help="seed of the random baseline")
    p.add_argument("--out", help="also write the CSV report here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("theory", help="check the multiplicative existence results")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="loss-AUC table for a run output directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
