"""Run the full six-method ablation on a synthetic preset and print the report.

This drives the same harness the CLI uses, so the table matches
``knncal ablate --preset biased`` run by run. Run from the repository root:

    python3 scripts/run_ablation.py [--preset biased] [--runs 5] [--out report.tsv]
"""

import argparse
import sys
import time

sys.path.insert(0, "src")

from knncal.core import Hyperparams
from knncal.harness import MethodMode, RunReport, evaluate_runs, report_lines, write_report
from knncal.synthgen import biased_plm_preset, generate, noiseless_preset

PRESETS = {"biased": biased_plm_preset, "noiseless": noiseless_preset}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--preset", choices=sorted(PRESETS), default="biased")
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="also write the report as TSV")
    args = parser.parse_args()

    preset = PRESETS[args.preset]
    hp = Hyperparams(seed=args.seed)

    def make(seed: int):
        return generate(preset(seed))

    rows = []
    for mode in MethodMode:
        t0 = time.monotonic()
        row = evaluate_runs(make, hp, mode, n_runs=args.runs)
        rows.append(row)
        print(
            f"{mode.value:20s} avg={row.avg:.4f} worst={row.worst:.4f} "
            f"std={row.std:.4f} ({time.monotonic() - t0:.1f}s)",
            file=sys.stderr,
        )

    report = RunReport(rows=tuple(rows))
    print("\n".join(report_lines(report)))
    if args.out:
        write_report(report, args.out)
        print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
