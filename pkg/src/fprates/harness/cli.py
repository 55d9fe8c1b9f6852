"""Command line entry point: ``fprates run | report | verify | list``."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
import time
from pathlib import Path

from .config import ConfigError, builtin_names, load_config
from .report import emit_report, load_bundle
from .runner import CheckFailed, HarnessError, run_config

# acceptance criterion -> built-in configs that must all pass
CRITERIA: list[tuple[str, list[str]]] = [
    ("1 convergence of all ten schemes", ["c1-convergence"]),
    ("2 exponential bound", ["c2-exp-bound-d05", "c2-exp-bound-d03", "c2-exp-bound-d09"]),
    ("3 bound tightness", ["c3-tightness-d05", "c3-tightness-d03", "c3-tightness-d09", "c3-tightness-float"]),
    ("4 theta ratio test", ["c4-theta"]),
    ("5 KO/CR equivalence", ["c5-equivalence"]),
    ("6 data dependence", ["c6-datadep"]),
    ("7 exact oracle agreement", ["c7-oracle"]),
    ("8 reduction identities", ["c8-reductions"]),
    ("9 rate direction", ["c9-rates"]),
]


def _cmd_run(args) -> int:
    try:
        bundle = run_config(args.config, output_root=args.out, seed=args.seed)
    except CheckFailed as exc:
        _print_checks(exc.bundle)
        print(f"FAILED: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, HarnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    _print_checks(bundle)
    print(f"wrote {bundle.directory}")
    return 0


def _print_checks(bundle) -> None:
    for c in bundle.checks:
        print(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}  {c.detail}")


def _cmd_report(args) -> int:
    try:
        bundle = load_bundle(args.bundle)
        for fmt in args.format:
            for p in emit_report(bundle, fmt):
                print(p)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def verify(out_root: str | None = None, seed: int | None = None, stream=sys.stdout) -> bool:
    """Run every built-in acceptance config and print one line per criterion."""
    ok_all = True
    with tempfile.TemporaryDirectory() as tmp:
        root = out_root or tmp
        start = time.perf_counter()
        for label, names in CRITERIA:
            failures = []
            for name in names:
                try:
                    run_config(name, output_root=root, seed=seed)
                except CheckFailed as exc:
                    failures += [f"{name}: {c.name} ({c.detail})" for c in exc.bundle.checks if not c.passed]
                except (ConfigError, HarnessError) as exc:
                    failures.append(f"{name}: {exc}")
            ok = not failures
            ok_all &= ok
            print(f"{'PASS' if ok else 'FAIL'}  criterion {label}", file=stream)
            for f in failures:
                print(f"        {f}", file=stream)
        print(f"{'all criteria passed' if ok_all else 'some criteria FAILED'} "
              f"in {time.perf_counter() - start:.2f} s", file=stream)
    return ok_all


def _cmd_verify(args) -> int:
    return 0 if verify(args.out, args.seed) else CheckFailed.exit_code


def _cmd_list(args) -> int:
    for name in builtin_names():
        cfg = load_config(name)
        print(f"{name:24s} {cfg.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fprates", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every check as it runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config file or a built-in config by name")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output root (default: $FPRATES_OUTPUT_ROOT or ./runs)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="re-emit outputs of a written bundle")
    p.add_argument("bundle", type=Path)
    p.add_argument("--format", nargs="+", choices=["csv", "json", "svg"], default=["csv", "json", "svg"])
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("verify", help="run all built-in acceptance configs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="keep bundles under this root instead of a temp dir")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("list", help="list built-in configs")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
