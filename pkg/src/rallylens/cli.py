"""Command-line interface.

Subcommands: validate, synth, train, evaluate, predict, influence.
Settings come from an optional JSON config file plus flag overrides
(flags win). Exit codes: 0 success, 1 data violations, 2 usage errors,
3 runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blsr, influence as influence_mod, synth, trainer
from .blsr import BlsrError, Dataset, PlayerId
from .model import ModelConfig, ModelParams, load_checkpoint, predict_label, save_checkpoint
from .synth import InvalidConfig, SynthConfig
from .trainer import TrainReport, build_examples, evaluate as eval_examples, format_history

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat union of model, training, synth, and data-handling settings."""

    # model
    d_loc: int = 10
    d_type: int = 15
    d_cnn: int = 32
    d_gru: int = 32
    kernel_size: int = 3
    d_rally: int = 2
    reg_lambda: float = 0.01
    target: str = "B"
    use_two_cnns: bool = True
    use_cnn: bool = True
    use_bigru: bool = True
    use_temporal_score: bool = True
    use_attention: bool = True
    use_rally_input: bool = True
    linear_attention_norm: bool = False
    # training
    epochs: int = 100
    patience: int = 10
    seed: int = 0
    train_fraction: float = 0.85
    val_fraction: float = 0.05
    test_fraction: float = 0.10
    # synthetic data
    n_matches: int = 19
    rallies_per_match: int = 74
    mean_rally_length: float = 11.0
    signal_strength: float = 1.0
    # data handling
    keep_invalid: bool = False
    drop_misjudge: bool = False

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            d_loc=self.d_loc,
            d_type=self.d_type,
            d_cnn=self.d_cnn,
            d_gru=self.d_gru,
            kernel_size=self.kernel_size,
            d_rally=self.d_rally,
            reg_lambda=self.reg_lambda,
            target=PlayerId(self.target),
            use_two_cnns=self.use_two_cnns,
            use_cnn=self.use_cnn,
            use_bigru=self.use_bigru,
            use_temporal_score=self.use_temporal_score,
            use_attention=self.use_attention,
            use_rally_input=self.use_rally_input,
            linear_attention_norm=self.linear_attention_norm,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            n_matches=self.n_matches,
            rallies_per_match=self.rallies_per_match,
            mean_rally_length=self.mean_rally_length,
            signal_strength=self.signal_strength,
            seed=self.seed,
        )

    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.val_fraction, self.test_fraction)


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file values first, then flag overrides. Unknown keys fail."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in doc.items():
            name = "reg_lambda" if key == "lambda" else key
            if name not in _FIELD_NAMES:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, name, value)

    overrides = {
        "seed": args.seed,
        "target": getattr(args, "target", None),
        "epochs": getattr(args, "epochs", None),
        "patience": getattr(args, "patience", None),
        "n_matches": getattr(args, "matches", None),
        "rallies_per_match": getattr(args, "rallies", None),
        "mean_rally_length": getattr(args, "mean_length", None),
        "signal_strength": getattr(args, "signal", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    for toggle in (
        "use_two_cnns",
        "use_cnn",
        "use_bigru",
        "use_temporal_score",
        "use_attention",
        "use_rally_input",
    ):
        if getattr(args, f"no_{toggle[4:]}", False):
            setattr(cfg, toggle, False)
    if getattr(args, "linear_attention_norm", False):
        cfg.linear_attention_norm = True
    if getattr(args, "keep_invalid", False):
        cfg.keep_invalid = True
    if getattr(args, "drop_misjudge", False):
        cfg.drop_misjudge = True
    return cfg


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _read_dataset(args: argparse.Namespace) -> Dataset:
    text = Path(args.data).read_text(encoding="utf-8")
    return blsr.parse_dataset(text, format=args.format)


def _prepare_dataset(dataset: Dataset, cfg: RunConfig) -> Dataset:
    if cfg.keep_invalid and not cfg.drop_misjudge:
        return dataset
    if cfg.keep_invalid:
        kept = tuple(
            r for r in dataset.rallies if r.info.end_reason is not blsr.EndReason.MISJUDGE
        )
        return Dataset(rallies=kept, matches=dataset.matches)
    return blsr.filter_valid(dataset, drop_misjudge=cfg.drop_misjudge)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _derived_seeds(master: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master).generate_state(n)]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = _read_dataset(args)
    findings = blsr.validate_dataset(dataset)
    total = sum(len(v) for v in findings.values())
    for rally_id in sorted(findings):
        for v in findings[rally_id]:
            print(f"{rally_id}: shot {v.shot_index}: {v.rule}: {v.message}")
    print(f"{len(dataset.rallies)} rallies checked, {total} violations")
    return EXIT_DATA if total else EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    dataset = synth.generate(cfg.synth_config())
    out = _out_dir(args)
    path = out / f"synth.{args.format}"
    path.write_text(blsr.serialize_dataset(dataset, format=args.format), encoding="utf-8")
    print(f"wrote {len(dataset.rallies)} rallies across {len(dataset.matches)} matches to {path}")
    return EXIT_OK


def _single_run(
    dataset: Dataset, cfg: RunConfig, seed: int
) -> tuple[ModelParams, TrainReport]:
    model_cfg = cfg.model_config()
    train_ds, val_ds, test_ds = trainer.split_by_match(dataset, cfg.fractions(), seed=seed)
    train_ex = build_examples(train_ds, model_cfg.target)
    val_ex = build_examples(val_ds, model_cfg.target)
    test_ex = build_examples(test_ds, model_cfg.target)
    params = ModelParams.init(model_cfg, seed=seed)
    best, report = trainer.train(
        train_ex, val_ex, params, model_cfg, epochs=cfg.epochs, patience=cfg.patience, seed=seed
    )
    report.test_auc, report.test_bs = eval_examples(test_ex, best, model_cfg)
    return best, report


def repeat_eval(dataset: Dataset, cfg: RunConfig, n_runs: int) -> dict:
    """Run the train/evaluate pipeline n_runs times with derived seeds."""
    if n_runs < 1:
        raise ValueError("--runs must be >= 1")
    aucs, briers = [], []
    for run_seed in _derived_seeds(cfg.seed, n_runs):
        _, report = _single_run(dataset, cfg, run_seed)
        aucs.append(report.test_auc)
        briers.append(report.test_bs)
    return {
        "runs": n_runs,
        "master_seed": cfg.seed,
        "auc_mean": float(np.mean(aucs)),
        "auc_std": float(np.std(aucs)),
        "bs_mean": float(np.mean(briers)),
        "bs_std": float(np.std(briers)),
        "auc": aucs,
        "bs": briers,
    }


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    dataset = _prepare_dataset(_read_dataset(args), cfg)
    out = _out_dir(args)

    if args.runs > 1:
        aggregate = repeat_eval(dataset, cfg, args.runs)
        path = out / "repeat_report.json"
        path.write_text(json.dumps(aggregate, indent=2) + "\n", encoding="utf-8")
        print(
            f"{aggregate['runs']} runs: AUC {aggregate['auc_mean']:.4f} "
            f"+/- {aggregate['auc_std']:.4f}, BS {aggregate['bs_mean']:.4f} "
            f"+/- {aggregate['bs_std']:.4f}"
        )
        print(f"wrote {path}")
        return EXIT_OK

    best, report = _single_run(dataset, cfg, cfg.seed)
    checkpoint_path = out / "checkpoint.json"
    meta = {
        "best_epoch": report.best_epoch,
        "best_val_auc": report.best_val_auc,
        "test_auc": report.test_auc,
        "test_bs": report.test_bs,
        "seed": cfg.seed,
    }
    save_checkpoint(checkpoint_path, best, meta=meta)
    report_path = out / "train_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(format_history(report))
    print(
        f"best epoch {report.best_epoch} (val AUC {report.best_val_auc:.4f}); "
        f"test AUC {report.test_auc:.4f}, test BS {report.test_bs:.4f}"
    )
    print(f"wrote {checkpoint_path} and {report_path}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    params, _, _ = load_checkpoint(args.checkpoint)
    dataset = _prepare_dataset(_read_dataset(args), cfg)
    examples = build_examples(dataset, params.config.target)
    auc_value, bs_value = eval_examples(examples, params, params.config)
    print(f"AUC {auc_value:.4f}")
    print(f"BS {bs_value:.4f}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    params, _, _ = load_checkpoint(args.checkpoint)
    dataset = _prepare_dataset(_read_dataset(args), cfg)
    examples = build_examples(dataset, params.config.target)
    scores = trainer.predict_scores(examples, params, params.config)
    print("rally_id,p_win,predicted_win")
    for ex, p in zip(examples, scores):
        print(f"{ex.instance.rally_id},{p:.6f},{predict_label(float(p))}")
    return EXIT_OK


def cmd_influence(args: argparse.Namespace) -> int:
    cfg = load_run_config(args)
    params, _, _ = load_checkpoint(args.checkpoint)
    dataset = _prepare_dataset(_read_dataset(args), cfg)
    model_cfg = params.config
    examples = build_examples(dataset, model_cfg.target)
    reports = [
        influence_mod.score_shots(
            ex.instance, params, model_cfg, context=ex.context, spread=args.spread
        )
        for ex in examples
    ]
    out = _out_dir(args)
    path = out / "influence.json"
    path.write_text(influence_mod.reports_to_json(reports), encoding="utf-8")
    print(f"wrote {len(reports)} reports to {path}")
    if args.text:
        for report in reports:
            print()
            print(influence_mod.format_text(report))
    if args.charts:
        chart_dir = out / "charts"
        chart_dir.mkdir(exist_ok=True)
        for report in reports:
            (chart_dir / f"{report.rally_id}.csv").write_text(
                influence_mod.chart_csv(report), encoding="utf-8"
            )
        print(f"wrote per-rally chart CSVs to {chart_dir}")
    if args.rank:
        ranks = influence_mod.rank_rallies(dataset, params, model_cfg, args.rank)
        print("rank,rally_id,peak_influence,shot_index")
        for i, r in enumerate(ranks, start=1):
            print(f"{i},{r.rally_id},{r.peak_influence:.4f},{r.shot_index}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rallylens",
        description="Badminton rally outcome modeling and shot influence reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
        if data:
            p.add_argument("--data", required=True, help="BLSR dataset file")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="./out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--target", choices=("A", "B"), default=None)
        p.add_argument("--keep-invalid", action="store_true", dest="keep_invalid")
        p.add_argument("--drop-misjudge", action="store_true", dest="drop_misjudge")

    def add_ablation(p: argparse.ArgumentParser) -> None:
        p.add_argument("--no-two-cnns", action="store_true", dest="no_two_cnns")
        p.add_argument("--no-cnn", action="store_true", dest="no_cnn")
        p.add_argument("--no-bigru", action="store_true", dest="no_bigru")
        p.add_argument("--no-temporal-score", action="store_true", dest="no_temporal_score")
        p.add_argument("--no-attention", action="store_true", dest="no_attention")
        p.add_argument("--no-rally-input", action="store_true", dest="no_rally_input")
        p.add_argument(
            "--linear-attention-norm",
            action="store_true",
            help="normalize attention scores by their plain sum instead of softmax",
        )

    p = sub.add_parser("validate", help="check a dataset for rally violations")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    add_common(p, data=False)
    p.add_argument("--matches", type=int, default=None)
    p.add_argument("--rallies", type=int, default=None, help="rallies per match")
    p.add_argument("--mean-length", type=float, default=None, dest="mean_length")
    p.add_argument("--signal", type=float, default=None, help="signal strength in [0,1]")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit a model and write a checkpoint")
    add_common(p)
    add_ablation(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--runs", type=int, default=1, help="repeat train/evaluate with derived seeds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compute AUC/BS of a checkpoint on a dataset")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="print win probability per rally")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("influence", help="write per-shot influence reports")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--spread", action="store_true", help="spread weights over the pattern window")
    p.add_argument("--text", action="store_true", help="also print human-readable reports")
    p.add_argument("--charts", action="store_true", help="write per-rally bar-chart CSVs")
    p.add_argument("--rank", type=int, default=0, help="print the top-N rallies by peak influence")
    p.set_defaults(func=cmd_influence)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except BlsrError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, InvalidConfig) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
