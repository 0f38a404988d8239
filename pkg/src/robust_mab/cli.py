"""Command line interface: ``robust-mab run | sweep | report | check``."""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bandit import ConfigError
from .experiment import (
    FIELD_TYPES,
    load_spec,
    parse_value,
    read_spec_and_arms,
    recompute_summary,
    render_summary,
    run_experiment,
    write_bounds,
)
from .theory import check_parameters

log = logging.getLogger("robust_mab")


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="flat 'key = value' experiment file")
    group = parser.add_argument_group("spec overrides")
    for key in FIELD_TYPES:
        group.add_argument(f"--{key}", dest=f"spec_{key}", metavar="VALUE")
    group.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any spec key (repeatable)")


def _overrides(args) -> dict:
    values = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), value)
    for key in FIELD_TYPES:
        raw = getattr(args, f"spec_{key}", None)
        if raw is not None:
            values[key] = parse_value(key, raw)
    return values


def _print_summary(summary: dict) -> None:
    for variant, entry in summary["variants"].items():
        line = f"{variant:>17}: regret {entry['mean_regret']:.1f} +- {entry['std_regret']:.1f}"
        if "relative_regret" in entry:
            line += f"  relative {entry['relative_regret']:.3f} (paired {entry['paired_ratio_mean']:.3f}" \
                    f" +- {entry['paired_ratio_std']:.3f})"
        print(line)
    if "theorem2_bound" in summary:
        print(f"upper bound at T: {summary['theorem2_bound']}")


def cmd_run(args) -> int:
    spec = load_spec(args.config, _overrides(args))
    for line in check_parameters(spec.sim_config(spec.variants[0])).lines():
        log.info("parameters: %s", line)
    summary = run_experiment(spec)
    _print_summary(summary)
    print(f"wrote {spec.out}")
    return 0


SWEEP_HEADER = ["m", "K", "eta", "variant", "mean_regret", "std_regret", "relative_regret",
                "paired_ratio_mean", "paired_ratio_std"]


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def cmd_sweep(args) -> int:
    base = load_spec(args.config, _overrides(args))
    grid_m = [parse_value("m", v) for v in args.grid_m.split(",")] if args.grid_m else [base.m]
    grid_k = [parse_value("K", v) for v in args.grid_K.split(",")] if args.grid_K else [base.K]
    grid_eta = [parse_value("eta", v) for v in args.grid_eta.split(",")] if args.grid_eta else [base.eta]
    root = Path(base.out)
    rows = []
    for m, K, eta in itertools.product(grid_m, grid_k, grid_eta):
        spec = replace(base, m=m, K=K, eta=eta, out=str(root / f"m{m}_K{K}_eta{eta:g}")).validate()
        log.info("sweep cell m=%s K=%s eta=%s", m, K, eta)
        summary = run_experiment(spec)
        for variant, entry in summary["variants"].items():
            rows.append([m, K, eta, variant] + [_cell(entry.get(key)) for key in SWEEP_HEADER[4:]])
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    for row in rows:
        print(",".join(str(c) for c in row))
    print(f"wrote {root / 'sweep.csv'}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.results)
    summary = recompute_summary(out)
    rendered = render_summary(summary)
    target = out / "summary.json"
    if args.check:
        existing = target.read_text() if target.exists() else None
        if existing != rendered:
            print(f"{target}: recomputed summary differs", file=sys.stderr)
            return 1
        print(f"{target}: reproduced exactly")
    else:
        target.write_text(rendered)
    if args.bound:
        spec, arms = read_spec_and_arms(out)
        write_bounds(out, spec, arms)
        print(f"wrote {out / 'bounds.csv'}")
    _print_summary(summary)
    return 0


def cmd_check(args) -> int:
    spec = load_spec(args.config, _overrides(args))
    for line in check_parameters(spec.sim_config(spec.variants[0])).lines():
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-mab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment spec")
    _add_spec_flags(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="cross-product over m, K and eta")
    _add_spec_flags(sweep)
    sweep.add_argument("--grid-m", help="comma-separated malicious counts")
    sweep.add_argument("--grid-K", help="comma-separated arm counts")
    sweep.add_argument("--grid-eta", help="comma-separated blocking exponents")
    sweep.set_defaults(func=cmd_sweep)

    report = sub.add_parser("report", help="recompute summaries from an output directory")
    report.add_argument("results", help="output directory of a previous run")
    report.add_argument("--check", action="store_true", help="fail unless summary.json is reproduced exactly")
    report.add_argument("--bound", action="store_true", help="write bounds.csv overlay")
    report.set_defaults(func=cmd_report)

    check = sub.add_parser("check", help="report which theorem hypotheses a spec satisfies")
    _add_spec_flags(check)
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"robust-mab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"robust-mab: I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
