"""Command line entry point: ``lbstefan run|bench|compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path


from lbstefan.cases import PRESETS, CaseError, apply_overrides, parse_case, preset, run_case
from lbstefan.output import compare_runs, read_trace, write_csv
from lbstefan.schemes import SchemeError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SCHEME = 3
EXIT_DIAGNOSTIC = 4


def load_case(source: str, overrides=()):
    if source in PRESETS:
        spec = preset(source)
    else:
        path = Path(source)
        if not path.exists():
            raise CaseError(f"{source}: neither a preset ({', '.join(PRESETS)}) nor a file")
        spec = parse_case(path.read_text())
    if overrides:
        spec = apply_overrides(spec, overrides)
    return spec


def _summary_rows(report):
    rows = [
        ("case", report.spec.name),
        ("method", report.method),
        ("N", report.spec.N),
        ("steps", report.steps),
        ("dt", report.dt),
        ("t_final", report.t_final),
        ("wall_seconds", round(report.wall_seconds, 4)),
    ]
    if report.linf is not None:
        rows.append(("linf_error", report.linf))
    if report.trace is not None and len(report.trace.times):
        rows.append(("max_front_error", float(report.trace.errors.max())))
        rows.append(("final_front", float(report.trace.positions[-1])))
    if report.newton_mean is not None:
        rows += [("newton_mean", report.newton_mean), ("newton_max", report.newton_max)]
    if report.inner_mean is not None:
        rows += [("inner_mean", report.inner_mean), ("inner_max", report.inner_max)]
    rows += [("energy_start", report.energy_start), ("energy_end", report.energy_end)]
    return rows


def cmd_run(args) -> int:
    overrides = list(args.override or [])
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    spec = load_case(args.case, overrides)
    report = run_case(spec)
    if report.trace is not None and len(report.trace.times) == 0:
        print("error: no interface found in any sample", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    out = sys.stdout
    out.write("key,value\n")
    for key, value in _summary_rows(report):
        out.write(f"{key},{value}\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rows = []
    for n in sizes:
        for method in methods:
            overrides = [f"N={n}", f"method={method}"] + list(args.override or [])
            if args.lattice:
                overrides.append(f"lattice={args.lattice}")
            spec = load_case(args.preset, overrides)
            spec.outputs = ()
            report = run_case(spec, max_steps=args.steps, write=False)
            rows.append((method, spec.lattice, n, report.steps, report.wall_seconds, report.seconds_per_step))
            logging.info("%s N=%d: %.3e s/step", method, n, report.seconds_per_step)
    header = ["method", "lattice", "N", "steps", "seconds", "seconds_per_step"]
    if args.output:
        write_csv(args.output, header, rows, {"preset": args.preset, "steps": args.steps})
    w = sys.stdout
    w.write(",".join(header) + "\n")
    for r in rows:
        w.write(",".join(str(v) for v in r) + "\n")
    return EXIT_OK


def cmd_compare(args) -> int:
    traces, labels = [], []
    for path in args.traces:
        meta, trace = read_trace(path)
        traces.append(trace)
        label = meta.get("method", Path(path).stem)
        while label in labels:
            label += "'"
        labels.append(label)
    header, rows = compare_runs(traces, labels)
    if args.output:
        write_csv(args.output, header, rows)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for r in rows:
            sys.stdout.write(",".join(repr(float(v)) for v in r) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbstefan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a case file or preset")
    p.add_argument("case", help=f"case file or preset ({', '.join(PRESETS)})")
    p.add_argument("--override", "-o", action="append", metavar="KEY=VALUE")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="per-step wall time over methods and sizes")
    p.add_argument("preset")
    p.add_argument("--methods", default="EEBM,IREBM,ILFBM")
    p.add_argument("--sizes", default="201,401,801,1601")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lattice")
    p.add_argument("--override", action="append", metavar="KEY=VALUE")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="tabulate interface traces side by side")
    p.add_argument("traces", nargs="+")
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SchemeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
