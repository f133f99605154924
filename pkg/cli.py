"""
Command-line interface.

    python cli.py train   --variant bmvr --dataset synth --preset default-synth --out run.csv
    python cli.py compare --dataset synth --preset default-synth --out compare.csv --svg compare.svg
    python cli.py diagnose --checkpoint model.bmvr --dataset synth
    python cli.py oracle  --dataset synth --k 4
    python cli.py plot    run.csv other.csv --out runs.svg --log-y

Exit codes: 0 success, 2 configuration or input error, 3 numeric divergence.
"""
import argparse
import csv
import os
import sys
import traceback
from typing import List, Optional, Sequence, Tuple

import config as settings
from checkpoint_store import load_checkpoint
from data_loader import cifar_protocol, mnist_protocol, synth_linear
from diagnostics import summarize
from errors import ConfigError, DivergenceError, NumericOverflowError
from metric_log import read_csv, write_combined_csv
from models import (CommandSpec, Dataset, Nonlinearity, RunSpec, ScheduleSpec,
                    Subcommand, TrainConfig, Variant)
from plot_renderer import render_svg
from presets import get_preset, preset_config, preset_names
from rrr_oracle import accumulate_stats, solve_rrr
from training_harness import TrainingHarness

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

DATASETS = ["synth", "mnist", "fmnist", "cifar10", "cifar100"]
ONLINE_VARIANTS = [v.value for v in Variant]


def _add_dataset_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("dataset")
    group.add_argument("--dataset", choices=DATASETS, default=None,
                       help="dataset (default: the preset's dataset, else synth)")
    group.add_argument("--data-dir", default=None,
                       help="dataset root for mnist/fmnist/cifar (default: $BMVR_DATA_DIR)")
    group.add_argument("--test-split", choices=["50k", "60k"], default="50k",
                       help="mnist/fmnist: evaluate on the first 50k or all 60k 'train' samples")
    group.add_argument("--m", type=int, default=20, help="synth input dimension")
    group.add_argument("--n", type=int, default=10, help="synth target dimension")
    group.add_argument("--k-true", type=int, default=4, help="synth rank of the true map")
    group.add_argument("--samples", type=int, default=2000, help="synth sample count T")
    group.add_argument("--noise", type=float, default=0.1, help="synth noise sigma")
    group.add_argument("--data-seed", type=int, default=1, help="synth data seed")


def _add_train_flags(parser: argparse.ArgumentParser, with_variant: bool = True):
    if with_variant:
        parser.add_argument("--variant", choices=ONLINE_VARIANTS, default=Variant.BMVR.value)
    parser.add_argument("--preset", choices=preset_names(), default=None)
    parser.add_argument("--k", type=int, default=None, help="hidden dimension")
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--eta-w1", type=float, default=None)
    parser.add_argument("--eta-w2", type=float, default=None)
    parser.add_argument("--eta-q", type=float, default=None)
    parser.add_argument("--t0", type=float, default=None, help="decay constant applied to every rate given on the command line")
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--nonlin", choices=[n.value for n in Nonlinearity], default=None)
    parser.add_argument("--mean-rate", type=float, default=None, help="running-mean rate of the ReLU units")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=1)
    parser.add_argument("--eval-every", type=int, default=1000)
    parser.add_argument("--eval-subsample", type=int, default=None)
    _add_dataset_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmvr", description="Biologically plausible multivariate regression")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    train = sub.add_parser(Subcommand.TRAIN.value, help="train one variant and write a MetricLog CSV")
    _add_train_flags(train)
    train.add_argument("--out", default="run.csv")
    train.add_argument("--checkpoint", default=None, help="write the final model of the first repeat here")

    compare = sub.add_parser(Subcommand.COMPARE.value, help="run bmvr and backprop with matched seeds")
    _add_train_flags(compare, with_variant=False)
    compare.add_argument("--out", default="compare.csv")
    compare.add_argument("--svg", default=None, help="overlay plot (default: --out with .svg)")
    compare.add_argument("--log-y", action="store_true")

    diagnose = sub.add_parser(Subcommand.DIAGNOSE.value, help="saturation, tightness and teaching-signal checks")
    diagnose.add_argument("--checkpoint", required=True)
    diagnose.add_argument("--ridge", type=float, default=None)
    diagnose.add_argument("--out", default=None, help="also write the CSV row to this file")
    _add_dataset_flags(diagnose)

    oracle = sub.add_parser(Subcommand.ORACLE.value, help="closed-form rank-k optimum")
    oracle.add_argument("--k", type=int, required=True)
    oracle.add_argument("--ridge", type=float, default=None)
    _add_dataset_flags(oracle)

    plot = sub.add_parser(Subcommand.PLOT.value, help="render MetricLog CSVs as an SVG chart")
    plot.add_argument("inputs", nargs="+")
    plot.add_argument("--out", default="plot.svg")
    plot.add_argument("--log-y", action="store_true")
    plot.add_argument("--title", default=None)

    return parser


def parse_command(argv: Optional[Sequence[str]] = None) -> CommandSpec:
    """Unknown flags exit with usage text (argparse, status 2)."""
    args = build_parser().parse_args(argv)
    flags = vars(args)
    return CommandSpec(subcommand=Subcommand(flags.pop("subcommand")), flags=flags)


# ---------------------------------------------------------------------------
# Flag interpretation
# ---------------------------------------------------------------------------

def resolve_dataset_name(flags: dict) -> str:
    if flags.get("dataset"):
        return flags["dataset"]
    if flags.get("preset"):
        return get_preset(flags["preset"]).dataset
    return "synth"


def load_datasets(flags: dict) -> Tuple[Dataset, Dataset]:
    """(train, eval) for the chosen dataset; synth trains and evaluates on the same samples."""
    name = resolve_dataset_name(flags)
    if name == "synth":
        data = synth_linear(flags["m"], flags["n"], flags["k_true"], flags["samples"],
                            flags["noise"], flags["data_seed"])
        return data, data

    data_dir = flags.get("data_dir") or settings.data_dir()
    if not data_dir:
        raise ConfigError(f"--data-dir is required for dataset {name} (or set BMVR_DATA_DIR)")
    settings.debug(f"loading {name} from {data_dir}")
    if name in ("mnist", "fmnist"):
        return mnist_protocol(data_dir, name, flags.get("test_split", "50k"))
    return cifar_protocol(data_dir, name)


def build_config(flags: dict, variant: Variant) -> TrainConfig:
    """TrainConfig from a preset (if any) with command-line overrides."""
    t0 = flags.get("t0")

    def rate(flag: str) -> Optional[ScheduleSpec]:
        value = flags.get(flag)
        return None if value is None else ScheduleSpec(eta0=value, t0=t0)

    overrides = dict(
        k=flags.get("k"),
        steps=flags.get("steps"),
        tau=flags.get("tau"),
        nonlinearity=Nonlinearity(flags["nonlin"]) if flags.get("nonlin") else None,
        mean_rate=flags.get("mean_rate"),
        eta_w1=rate("eta_w1"),
        eta_w2=rate("eta_w2"),
        eta_q=rate("eta_q"),
    )
    if flags.get("preset"):
        return preset_config(flags["preset"], variant, seed=flags.get("seed", 0), **overrides)

    required = ["eta_w1", "eta_w2"] + ([] if variant == Variant.BACKPROP else ["eta_q"])
    for flag in required:
        if flags.get(flag) is None:
            raise ConfigError(f"--{flag.replace('_', '-')} is required without --preset")
    fields = {key: value for key, value in overrides.items() if value is not None}
    fields.setdefault("steps", 20000)
    return TrainConfig(variant=variant, seed=flags.get("seed", 0), **fields)


def build_spec(flags: dict, variant: Variant, train: Dataset, eval_data: Dataset,
               label: str = "", log_path: Optional[str] = None,
               checkpoint_path: Optional[str] = None) -> RunSpec:
    return RunSpec(
        config=build_config(flags, variant),
        train=train,
        eval=eval_data,
        eval_every=flags.get("eval_every", 1000),
        repeats=flags.get("repeats", 1),
        eval_subsample=flags.get("eval_subsample"),
        log_path=log_path,
        checkpoint_path=checkpoint_path,
        label=label,
    )


def _oracle_reference(spec: RunSpec) -> Optional[float]:
    if spec.config.nonlinearity != Nonlinearity.LINEAR:
        return None
    return solve_rrr(accumulate_stats(spec.eval), spec.config.k).optimal_loss


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train(flags: dict) -> int:
    train, eval_data = load_datasets(flags)
    variant = Variant(flags["variant"])
    spec = build_spec(flags, variant, train, eval_data, label=variant.value,
                      log_path=flags["out"], checkpoint_path=flags.get("checkpoint"))
    log = TrainingHarness().run(spec)
    final = log.rows[-1]
    print(f"{variant.value}: step {final.step} objective {final.objective_mean:.6g} "
          f"(std {final.objective_std:.3g}) -> {flags['out']}")
    if final.test_acc_mean is not None:
        print(f"test accuracy {final.test_acc_mean:.4f}")
    return EXIT_OK


def cmd_compare(flags: dict) -> int:
    train, eval_data = load_datasets(flags)
    harness = TrainingHarness()
    spec_bmvr = build_spec(flags, Variant.BMVR, train, eval_data, label=Variant.BMVR.value)
    spec_backprop = build_spec(flags, Variant.BACKPROP, train, eval_data, label=Variant.BACKPROP.value)
    log_bmvr, log_backprop = harness.compare(spec_bmvr, spec_backprop)

    logs = {log_bmvr.label: log_bmvr, log_backprop.label: log_backprop}
    write_combined_csv(logs, flags["out"])
    svg_path = flags.get("svg") or os.path.splitext(flags["out"])[0] + ".svg"
    reference = _oracle_reference(spec_bmvr)
    render_svg(logs, svg_path, log_y=flags.get("log_y", False),
               title=f"{train.name}: bmvr vs backprop", reference=reference)

    for label, log in logs.items():
        print(f"{label}: final objective {log.rows[-1].objective_mean:.6g}")
    if reference is not None:
        print(f"oracle optimum {reference:.6g}")
    print(f"wrote {flags['out']} and {svg_path}")
    return EXIT_OK


DIAGNOSE_COLUMNS = ["objective", "upper_bound_objective", "tightness_ratio", "constraint_gap",
                    "q_min_sv", "teaching_mean_rel_err", "teaching_cosine_mean",
                    "teaching_samples", "oracle_loss"]


def cmd_diagnose(flags: dict) -> int:
    state = load_checkpoint(flags["checkpoint"])
    train, _ = load_datasets(flags)
    summary = summarize(state, train, flags.get("ridge"))
    report = summary.teaching_signal

    print(f"objective              {summary.objective:.6g}")
    print(f"upper bound            {summary.upper_bound_objective:.6g}")
    print(f"tightness ratio        {summary.tightness_ratio:.4g}")
    print(f"saturation gap         {summary.constraint_gap:.4g}")
    print(f"Q min singular value   {summary.q_min_sv:.4g}")
    print(f"teaching rel err       {report.mean_rel_err:.4g} (cosine {report.cosine_mean:.4f}, "
          f"{report.samples_used} samples)")
    print(f"oracle optimum         {summary.oracle_loss:.6g}")

    values = [summary.objective, summary.upper_bound_objective, summary.tightness_ratio,
              summary.constraint_gap, summary.q_min_sv, report.mean_rel_err,
              report.cosine_mean, report.samples_used, summary.oracle_loss]
    writer = csv.writer(sys.stdout)
    writer.writerow(DIAGNOSE_COLUMNS)
    writer.writerow(values)
    if flags.get("out"):
        with open(flags["out"], "w", newline="") as f:
            file_writer = csv.writer(f)
            file_writer.writerow(DIAGNOSE_COLUMNS)
            file_writer.writerow(values)
    return EXIT_OK


def cmd_oracle(flags: dict) -> int:
    train, _ = load_datasets(flags)
    stats = accumulate_stats(train)
    solution = solve_rrr(stats, flags["k"], flags.get("ridge"))
    shown = solution.M_eigenvalues[:max(flags["k"], 10)]
    print(f"dataset        {train.name} (m={train.m}, n={train.n}, T={train.T})")
    print(f"optimal_loss   {solution.optimal_loss:.10g}")
    print(f"trace Cyy      {float(stats.Cyy.trace()):.10g}")
    print(f"rank_ok        {solution.rank_ok}")
    print("M eigenvalues  " + " ".join(f"{value:.6g}" for value in shown))
    return EXIT_OK


def cmd_plot(flags: dict) -> int:
    logs = {}
    for path in flags["inputs"]:
        for label, log in read_csv(path).items():
            key = label if label not in logs else f"{label} ({os.path.basename(path)})"
            logs[key] = log
    render_svg(logs, flags["out"], log_y=flags.get("log_y", False), title=flags.get("title"))
    print(f"wrote {flags['out']}")
    return EXIT_OK


HANDLERS = {
    Subcommand.TRAIN: cmd_train,
    Subcommand.COMPARE: cmd_compare,
    Subcommand.DIAGNOSE: cmd_diagnose,
    Subcommand.ORACLE: cmd_oracle,
    Subcommand.PLOT: cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    command = parse_command(argv)
    try:
        return HANDLERS[command.subcommand](command.flags)
    except (DivergenceError, NumericOverflowError) as e:
        print(f"[ERROR] {e}")
        if isinstance(e, DivergenceError) and e.last_good_step is not None:
            print(f"[ERROR] last good evaluation at step {e.last_good_step}")
        if isinstance(e, DivergenceError) and e.checkpoint_path:
            print(f"[ERROR] last good checkpoint: {e.checkpoint_path}")
        return EXIT_DIVERGED
    except (ValueError, OSError) as e:
        print(f"[ERROR] {e}")
        if settings.verbose():
            traceback.print_exc()
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
