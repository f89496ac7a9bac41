"""Command-line entry point: ``noro <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (see :mod:`noro.config`);
explicit flags override the file. Failures print one JSON line
``{"error": ..., "message": ...}`` to stderr and exit non-zero
(2 for usage/configuration errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from noro import __version__
from noro.config import ExperimentConfig, parse_int_list, parse_snr_list, read_config_file
from noro.dataset import load_csv, split_folds
from noro.encoder import EncoderWeights
from noro.errors import ConfigError, NoroError
from noro.pipeline import (
    ExperimentReport,
    cells_csv,
    encoder_from_config,
    prepare,
    prepare_from_config,
    relative_csv,
    run_pipeline,
    select_features,
    sweep_bins,
)

logger = logging.getLogger("noro")


class UsageError(NoroError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _with_config_header(text: str, config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True) + "\n" + text


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


def _common(p: argparse.ArgumentParser, dataset=True):
    p.add_argument("--config", help="INI config file; flags override its values")
    if dataset:
        p.add_argument("--dataset", dest="dataset_path", help="telemonitoring CSV")
    p.add_argument("--seed", dest="base_seed", type=int)
    p.add_argument("--output", dest="output_dir", help="output directory")
    p.add_argument("--subject-disjoint", dest="subject_disjoint_split", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"noro {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate the CSV and write split indices")
    _common(p)

    p = sub.add_parser("select-features", help="random-forest MDI importances")
    _common(p)
    p.add_argument("--trials", dest="rf_trials", type=int, help="forests to average (default 10)")
    p.add_argument("--trees", dest="rf_trees", type=int, help="trees per forest (default 100)")

    for name, help_ in (("train-encoder", "contrastive encoder training"),
                        ("evaluate", "baseline vs augmented evaluation")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--bins", type=int, help="bin count K (default 5)")
        p.add_argument("--feature", help="binning feature name (default: forest selection)")
        p.add_argument("--epochs-per-fold", type=int)
        p.add_argument("--encoder-folds", type=int)
        p.add_argument("--alpha-convention", choices=("anchor", "symmetric"))
        p.add_argument("--rf-trials", type=int)
        p.add_argument("--rf-trees", type=int)

    p = sub.choices["evaluate"]
    p.add_argument("--encoder", dest="encoder_path", help="trained encoder JSON")
    p.add_argument("--train-first", action="store_true", help="train an encoder before evaluating")
    p.add_argument("--snr", dest="snr_list", help="comma-separated dB list; 'none' for no extra noise")
    p.add_argument("--no-noise", action="store_true", help="same as --snr none")
    p.add_argument("--models", help="comma-separated: ridge,knn,neural,bagged,gpr")
    p.add_argument("--trials", type=int)
    p.add_argument("--target", choices=("motor", "total", "both"))
    p.add_argument("--eval-folds", type=int)
    p.add_argument("--denormalize", action="store_true", default=None)
    p.add_argument("--paired-test", action="store_true", default=None)
    p.add_argument("--power-scope", choices=("matrix", "train"))
    p.add_argument("--sweep-bins", help="comma-separated K values; writes bin_sweep.csv")
    p.add_argument("--no-clusters", action="store_true", help="skip cluster metrics and PCA output")

    p = sub.add_parser("report", help="re-render CSV files from a stored JSON report")
    p.add_argument("report", help="report.json written by evaluate")
    p.add_argument("--output", dest="output_dir", help="output directory (default: report's directory)")
    return parser


_NOT_CONFIG = {"command", "verbose", "config", "train_first", "no_noise", "sweep_bins",
               "no_clusters", "report"}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    kwargs = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        if key == "snr_list":
            value = parse_snr_list(value)
        elif key == "models":
            value = tuple(m for m in value.split(",") if m.strip())
        kwargs[key] = value
    if getattr(args, "no_noise", False):
        kwargs["snr_list"] = parse_snr_list("none")
    return ExperimentConfig(**kwargs)


def cmd_ingest(config: ExperimentConfig) -> dict:
    ds = load_csv(config.dataset_path)
    folds = split_folds(ds, config.base_seed, subject_disjoint=config.subject_disjoint_split)
    out = Path(config.output_dir)
    summary = {
        "config_echo": config.echo(),
        "rows": ds.n_rows,
        "subjects": int(len(np.unique(ds.subject_ids))),
        "features": list(ds.feature_names),
        "feature_mean": [float(v) for v in ds.features.mean(axis=0)],
        "feature_std": [float(v) for v in ds.features.std(axis=0)],
        "split": {"train": len(folds[0].train_rows), "valid": len(folds[0].valid_rows),
                  "test": len(folds[0].test_rows)},
    }
    splits = {
        "config_echo": config.echo(),
        "test_rows": folds[0].test_rows.tolist(),
        "folds": [{"fold": f.fold_index, "train_rows": f.train_rows.tolist(),
                   "valid_rows": f.valid_rows.tolist()} for f in folds],
    }
    _write(out / "dataset_summary.json", json.dumps(summary, indent=2) + "\n")
    _write(out / "splits.json", json.dumps(splits) + "\n")
    return summary


def cmd_select_features(config: ExperimentConfig) -> dict:
    prep = prepare_from_config(config)
    report = select_features(prep, config.rf_trials, config.rf_trees, config.base_seed)
    report = {"config_echo": config.echo(), **report}
    _write(Path(config.output_dir) / "select_features.json", json.dumps(report, indent=2) + "\n")
    return report


def _encoder_doc(enc: EncoderWeights, config: ExperimentConfig) -> str:
    doc = enc.to_dict()
    doc["config_echo"] = config.echo()
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_train_encoder(config: ExperimentConfig) -> EncoderWeights:
    prep = prepare_from_config(config)
    enc, log = encoder_from_config(config, prep)
    out = Path(config.output_dir)
    _write(out / "encoder.json", _encoder_doc(enc, config))
    _write(out / "training_log.csv", _with_config_header(log.to_csv(), config.echo()))
    return enc


def _write_report(report: ExperimentReport, out: Path, config_echo: dict) -> None:
    _write(out / "report.json", report.to_json())
    _write(out / "cells.csv", _with_config_header(report.cells_csv(), config_echo))
    _write(out / "relative.csv", _with_config_header(report.relative_csv(), config_echo))
    if report.pca_rows:
        _write(out / "pca.csv", _with_config_header(report.pca_csv(), config_echo))


def cmd_evaluate(config: ExperimentConfig, train_first=False, sweep=None, clusters=True) -> ExperimentReport:
    prep = prepare_from_config(config)
    out = Path(config.output_dir)
    if sweep:
        rows, _ = sweep_bins(config, sweep, prep)
        doc = {"config_echo": config.echo(), "relative": rows}
        _write(out / "bin_sweep.csv", _with_config_header(relative_csv(doc), config.echo()))
    if config.encoder_path and not train_first:
        encoder = EncoderWeights.load(config.encoder_path)
    elif train_first:
        encoder, log = encoder_from_config(config, prep)
        _write(out / "encoder.json", _encoder_doc(encoder, config))
        _write(out / "training_log.csv", _with_config_header(log.to_csv(), config.echo()))
    else:
        raise ConfigError("evaluate needs --encoder FILE or --train-first")
    config = config.replace(bins=encoder.K)
    report = run_pipeline(config, encoder, prep, with_clusters=clusters)
    _write_report(report, out, config.echo())
    return report


def cmd_report(path: str, output_dir: str | None) -> None:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise NoroError(f"cannot read report {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise NoroError(f"report {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "per_cell" not in doc or "relative" not in doc:
        raise NoroError(f"report {path} lacks per_cell/relative sections")
    out = Path(output_dir) if output_dir else Path(path).parent
    echo = doc.get("config_echo", {})
    _write(out / "cells.csv", _with_config_header(cells_csv(doc), echo))
    _write(out / "relative.csv", _with_config_header(relative_csv(doc), echo))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.command == "report":
            cmd_report(args.report, args.output_dir)
            return 0
        config = resolve_config(args)
        if args.command == "ingest":
            summary = cmd_ingest(config)
            print(json.dumps({k: summary[k] for k in ("rows", "subjects", "split")}))
        elif args.command == "select-features":
            report = cmd_select_features(config)
            print(json.dumps({"selected_index": report["selected_index"],
                              "selected_name": report["selected_name"]}))
        elif args.command == "train-encoder":
            enc = cmd_train_encoder(config)
            print(json.dumps({"feature": enc.feature_name, "k": enc.K,
                              "validation_loss": enc.validation_loss}))
        elif args.command == "evaluate":
            sweep = parse_int_list(args.sweep_bins) if args.sweep_bins else None
            cmd_evaluate(config, args.train_first, sweep, clusters=not args.no_clusters)
            print(json.dumps({"output_dir": config.output_dir}))
        return 0
    except (UsageError, ConfigError) as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except NoroError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
