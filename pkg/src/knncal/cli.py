"""Command-line entry point: data generation, training, tuning, evaluation.

Hyperparameters resolve in three layers: built-in defaults, then a JSON
``--config`` file, then explicit flags. Leaving ``--lambda`` unset means the
interpolation weight is tuned on the dev split wherever the mode needs one.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from .core import Hyperparams, derive_seed
from .datastore import build_datastore
from .errors import InvalidConfig, KnncalError
from .fr import as_transform
from .gradcheck import check_ans_gradient, check_fr_gradient
from .harness import (
    MethodMode,
    RunReport,
    evaluate_runs,
    load_checkpoint,
    load_representations,
    report_lines,
    save_checkpoint,
    save_representations,
    train_modules,
    tune_lambda,
    write_report,
)
from .synthgen import SynthConfig, biased_plm_preset, generate, noiseless_preset

_HP_FLAGS = ("seed", "tau", "k", "k_max", "lam", "z_dim", "lr", "epochs", "batch_size", "ans_hidden")
_PRESETS = {"biased": biased_plm_preset, "noiseless": noiseless_preset}


def _hp_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--seed", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--kmax", type=int, dest="k_max")
    g.add_argument("--lambda", type=float, dest="lam",
                   help="interpolation weight on the base model; omit to tune on dev")
    g.add_argument("--z-dim", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--ans-hidden", type=int)
    g.add_argument("--config", type=Path, help="JSON file of hyperparameter overrides")
    return p


def _resolve_hp(args) -> tuple[Hyperparams, bool]:
    """Merge defaults, config file, and flags; returns (hp, tune_lambda_flag)."""

    values = asdict(Hyperparams())
    tune = True
    if args.config is not None:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise InvalidConfig(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(cfg) - set(values))
        if unknown:
            raise InvalidConfig(f"{args.config}: unknown hyperparameters {unknown}")
        if "lam" in cfg:
            tune = False
        values.update(cfg)
    for name in _HP_FLAGS:
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
            if name == "lam":
                tune = False
    return Hyperparams(**values), tune


def _add_data_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--data", type=Path, help="representation file")
    g.add_argument("--preset", choices=sorted(_PRESETS),
                   help="generate a synthetic preset instead of reading a file")


def _dataset_factory(args):
    """Returns seed -> Dataset. Files are fixed; presets regenerate per seed."""

    if args.data is not None:
        ds = load_representations(args.data)
        return lambda seed: ds
    preset = _PRESETS[args.preset]
    return lambda seed: generate(preset(seed))


def _mode_from(name: str) -> MethodMode:
    return MethodMode[name.upper()]


def _human_table(report: RunReport) -> str:
    def cell(value, float_fmt: str = "{:.4f}") -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return float_fmt.format(value)
        return str(value)

    header = ("method", "avg", "worst", "std", "n_runs", "lambda", "tau", "k")
    grid = [header]
    for r in report.rows:
        grid.append((r.method.value, cell(r.avg), cell(r.worst), cell(r.std),
                     str(r.n_runs), cell(r.lam, "{:.1f}"), cell(r.tau, "{:g}"), cell(r.k)))
    widths = [max(len(row[c]) for row in grid) for c in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in grid
    )


def _emit_report(report: RunReport, out: Optional[Path]) -> None:
    print(_human_table(report))
    print()
    print("\n".join(report_lines(report)))
    if out is not None:
        write_report(report, out)


def cmd_gen_synth(args) -> int:
    hp, _ = _resolve_hp(args)
    if args.preset is not None:
        config = _PRESETS[args.preset](hp.seed)
    else:
        config = SynthConfig(
            dim=args.dim,
            n_classes=args.classes,
            k_shots=args.shots,
            n_test=args.n_test,
            class_sep=args.class_sep,
            variant_noise=args.variant_noise,
            cluster_noise=args.cluster_noise,
            readout_bias=args.readout_bias,
            readout_rotation=args.readout_rotation,
            seed=hp.seed,
        )
    dataset = generate(config)
    save_representations(dataset, args.out)
    print(f"wrote {len(dataset.instances)} instances (dim={dataset.dim}, "
          f"k_shots={dataset.k_shots}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    hp, _ = _resolve_hp(args)
    dataset = _dataset_factory(args)(hp.seed)
    fr_model, ans_model = train_modules(dataset, hp)
    if args.fr_out is not None:
        save_checkpoint(fr_model, hp, hp.seed, args.fr_out)
        print(f"wrote projection checkpoint to {args.fr_out}")
    if args.ans_out is not None:
        save_checkpoint(ans_model, hp, hp.seed, args.ans_out)
        print(f"wrote gate checkpoint to {args.ans_out}")
    return 0


def cmd_tune(args) -> int:
    hp, _ = _resolve_hp(args)
    dataset = _dataset_factory(args)(hp.seed)
    transform = None
    if args.fr is not None:
        ckpt = load_checkpoint(args.fr)
        if ckpt.module != "fr":
            raise InvalidConfig(f"{args.fr} holds a {ckpt.module!r} model, not a projection")
        transform = as_transform(ckpt.model)
    train_ids = frozenset(i.id for i in dataset.split_instances("train"))
    store = build_datastore(dataset, train_ids.__contains__, transform=transform)
    grids = {}
    if args.tau_grid:
        grids["tau_grid"] = tuple(float(x) for x in args.tau_grid.split(","))
    if args.k_grid:
        grids["k_grid"] = tuple(int(x) for x in args.k_grid.split(","))
    tuned = tune_lambda(dataset, store, hp, transform=transform, **grids)
    print(f"lambda={tuned.lam!r}")
    print(f"tau={tuned.tau!r}")
    print(f"k={tuned.k}")
    return 0


def cmd_eval(args) -> int:
    hp, tune = _resolve_hp(args)
    factory = _dataset_factory(args)
    row = evaluate_runs(factory, hp, _mode_from(args.mode), args.runs, tune=tune)
    _emit_report(RunReport((row,)), args.out)
    return 0


def cmd_ablate(args) -> int:
    hp, tune = _resolve_hp(args)
    factory = _dataset_factory(args)
    rows = tuple(
        evaluate_runs(factory, hp, mode, args.runs, tune=tune) for mode in MethodMode
    )
    _emit_report(RunReport(rows), args.out)
    return 0


def cmd_check_gradients(args) -> int:
    hp, _ = _resolve_hp(args)
    worst = 0.0
    for name, check, role in (("fr", check_fr_gradient, 10), ("ans", check_ans_gradient, 11)):
        errs = [check(derive_seed(hp.seed, role, i)) for i in range(args.inits)]
        worst = max(worst, max(errs))
        print(f"{name}: max_rel_err={max(errs):.3e} over {args.inits} inits")
    if worst >= args.tol:
        print(f"FAIL: gradient error {worst:.3e} exceeds tolerance {args.tol:g}", file=sys.stderr)
        return 1
    print("OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    hp_parent = _hp_parent()
    parser = argparse.ArgumentParser(
        prog="knncal",
        description="Nearest-neighbor calibration of in-context-learning predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", parents=[hp_parent],
                       help="generate a synthetic representation file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--preset", choices=sorted(_PRESETS),
                   help="named configuration; overrides the shape flags below")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--class-sep", type=float, default=4.0)
    p.add_argument("--variant-noise", type=float, default=1.2)
    p.add_argument("--cluster-noise", type=float, default=1.0)
    p.add_argument("--readout-bias", type=float, default=0.0)
    p.add_argument("--readout-rotation", type=float, default=0.0)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", parents=[hp_parent],
                       help="run the half-split protocol and write checkpoints")
    _add_data_source(p)
    p.add_argument("--fr-out", type=Path, help="where to write the projection checkpoint")
    p.add_argument("--ans-out", type=Path, help="where to write the gate checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", parents=[hp_parent],
                       help="pick the interpolation weight on the dev split")
    _add_data_source(p)
    p.add_argument("--fr", type=Path, help="projection checkpoint; tune in its feature space")
    p.add_argument("--tau-grid", help="comma-separated temperatures to also search")
    p.add_argument("--k-grid", help="comma-separated neighbor counts to also search")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", parents=[hp_parent], help="evaluate one method")
    _add_data_source(p)
    p.add_argument("--mode", default="knn_c",
                   choices=[m.value.lower() for m in MethodMode])
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--out", type=Path, help="also write the machine-readable report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[hp_parent],
                       help="evaluate every method into one report")
    _add_data_source(p)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--out", type=Path, help="also write the machine-readable report here")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("check-gradients", parents=[hp_parent],
                       help="finite-difference check of both training gradients")
    p.add_argument("--inits", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_check_gradients)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KnncalError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
