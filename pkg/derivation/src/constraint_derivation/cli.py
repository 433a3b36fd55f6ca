"""Command-line entry point: derive, emit, and verify the generator table."""

import argparse
import filecmp
import sys
import tempfile
from pathlib import Path

from .derive import derive_generators
from .emit import emit_table
from .verify import verify_generators


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="derive-generators",
        description="Derive and verify the planefocal generator table.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_emit = sub.add_parser("emit", help="run the derivation and write JSON")
    p_emit.add_argument("--out", type=Path, required=True,
                        help="output path for the GeneratorTable JSON")
    p_emit.add_argument("--check-against", type=Path, default=None,
                        help="fail unless the output is byte-identical to "
                             "this reference file")

    p_verify = sub.add_parser("verify", help="numerically verify a table")
    p_verify.add_argument("--table", type=Path, required=True)
    p_verify.add_argument("--trials", type=int, default=1000)
    p_verify.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "emit":
        gens = derive_generators(progress=lambda m: print(m, flush=True))
        emit_table(gens, args.out)
        print(f"wrote {args.out}")
        if args.check_against is not None:
            if not filecmp.cmp(args.out, args.check_against, shallow=False):
                print("MISMATCH against reference table", file=sys.stderr)
                return 1
            print("byte-identical to reference table")
        return 0

    report = verify_generators(args.table, trials=args.trials, seed=args.seed)
    print(f"trials={report.trials} max_residual={report.max_residual:.3e} "
          f"{'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
