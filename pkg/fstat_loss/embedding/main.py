#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from __future__ import annotations

import argparse
import logging as log
import os
import sys
from dataclasses import dataclass
from typing import Union

import numpy as np

from fstat_loss.embedding.encoder import forward, init_model, load_model, save_model
from fstat_loss.embedding.errors import ConfigError, ShapeError, TrainingDivergenceError
from fstat_loss.embedding.input.code_table import CodeTable, read_codes
from fstat_loss.embedding.input.experiment_config import ExperimentConfig
from fstat_loss.embedding.input.factorial_dataset import FactorialDataset
from fstat_loss.embedding.metrics import EvaluationConfig, evaluate_disentanglement, recall_at_k
from fstat_loss.embedding.floss import LabeledEmbeddingBatch
from fstat_loss.embedding.sampling import conjunction_labels, split_by_conjunction, split_by_instance
from fstat_loss.embedding.synthdata import (
    DEFAULT_POINTS_PER_CLUSTER,
    GOLDEN_PATTERNS,
    generate_factorial,
    generate_golden_code,
)
from fstat_loss.embedding.training import train
from fstat_loss.embedding.utils import as_label_array, spawn_seeds

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_EVALUATION = 4


@dataclass(frozen=True)
class ExperimentSeeds:
    data: int
    split: int
    init: int
    train: int

    @classmethod
    def from_seed(cls, seed: int) -> ExperimentSeeds:
        return cls(*spawn_seeds(seed, 4))


def load_config(path: Union[str, None], seed: Union[int, None]) -> ExperimentConfig:
    if path is None:
        raise ConfigError("[main] --config is required")
    return ExperimentConfig.from_file(path).with_seed(seed)


def load_dataset(config: ExperimentConfig, seeds: ExperimentSeeds) -> FactorialDataset:
    """Dataset file when it exists, otherwise the dataset generated from the configured spec or preset."""
    path = config.dataset.path
    if path is not None and os.path.exists(path):
        return FactorialDataset.from_file(path)
    spec = config.dataset.factor_spec()
    if spec is None:
        raise ConfigError(f"[main] Dataset file not found: {path}")
    return generate_factorial(spec, np.random.default_rng(seeds.data))


def split_rows(config: ExperimentConfig, dataset: FactorialDataset, seeds: ExperimentSeeds):
    labels = conjunction_labels(dataset)
    split = split_by_conjunction if config.split_by == "conjunction" else split_by_instance
    return split(labels, config.split.folds, config.split.fold, np.random.default_rng(seeds.split))


def cmd_gen_data(args) -> int:
    if args.golden is not None:
        golden = generate_golden_code(
            args.golden, args.points_per_cluster, args.jitter, np.random.default_rng(args.seed or 0)
        )
        path = args.out or f"golden_{args.golden}.csv"
        golden.to_file(path)
        print(f"Golden code {args.golden}: {len(golden)} points, factors {', '.join(golden.factor_names)} -> {path}")
        return EXIT_OK

    config = load_config(args.config, args.seed)
    spec = config.dataset.factor_spec()
    if spec is None:
        raise ConfigError("[gen-data] The dataset section needs a preset or a spec")
    dataset = generate_factorial(spec, np.random.default_rng(ExperimentSeeds.from_seed(config.seed).data))
    path = args.out or config.dataset.path or "dataset.csv"
    dataset.to_file(path)
    print(
        f"{len(dataset)} instances, {len(spec.factors)} factors "
        f"({', '.join(f'{f.name}:{f.value_count}' for f in spec.factors)}) -> {path}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, args.seed)
    seeds = ExperimentSeeds.from_seed(config.seed)
    dataset = load_dataset(config, seeds)
    train_rows, validation_rows = split_rows(config, dataset, seeds)
    log.info(f"[train] {len(train_rows)} training and {len(validation_rows)} validation instances")

    model = init_model(config.layer_sizes(dataset.spec.observation_dim), np.random.default_rng(seeds.init))
    result = train(
        model, dataset, config.sampler_config(), config.train_config(seed=seeds.train), train_rows, validation_rows
    )

    model_path = _output_path(args.out, config, "model", "model.json")
    save_model(result.model, model_path)
    log_path = config.output.log or os.path.splitext(model_path)[0] + ".log.csv"
    result.log.to_csv(log_path)
    plots = _output_path(args.plots, config, "plots")
    if plots is not None:
        os.makedirs(plots, exist_ok=True)
        result.log.plot(os.path.join(plots, "training.html"))
    print(f"Best epoch {result.best_epoch} of {len(result.log) - 1} -> {model_path}, {log_path}")
    return EXIT_OK


def _check_compatible(model_input_dim: int, dataset: FactorialDataset):
    if model_input_dim != dataset.spec.observation_dim:
        raise ShapeError(
            f"[main] Model input dimension {model_input_dim} does not match observation dimension "
            f"{dataset.spec.observation_dim}"
        )


def _optional_config(args) -> Union[ExperimentConfig, None]:
    return None if args.config is None else load_config(args.config, args.seed)


def _output_path(given: Union[str, None], config: Union[ExperimentConfig, None], name: str, default=None):
    """Command-line path, else the path of the configuration's output section, else ``default``."""
    if given is not None:
        return given
    configured = None if config is None else getattr(config.output, name)
    return default if configured is None else configured


def cmd_embed(args) -> int:
    config = _optional_config(args)
    model = load_model(args.model)
    dataset = FactorialDataset.from_file(args.data)
    _check_compatible(model.input_dim, dataset)
    codes = forward(model, dataset.observations())
    names = dataset.class_factor_names
    table = CodeTable.from_arrays(
        codes, dataset.factor_matrix(names), names, metadata={"model": args.model, "dataset": args.data}
    )
    path = _output_path(args.out, config, "codes", "codes.csv")
    table.to_file(path)
    print(f"{len(table)} codes of dimension {model.embedding_dim} -> {path}")
    return EXIT_OK


def _codes_to_evaluate(
    args, config: Union[ExperimentConfig, None]
) -> tuple[np.ndarray, np.ndarray, list[str], dict]:
    if args.codes_direct:
        table = read_codes(args.data)
        return table.codes(), table.factor_matrix(), table.factor_names, {"codes": args.data}

    if args.model is None:
        raise ConfigError("[eval] --model is required unless --codes-direct is given")
    model = load_model(args.model)
    dataset = FactorialDataset.from_file(args.data)
    _check_compatible(model.input_dim, dataset)
    metadata = {"model": args.model, "dataset": args.data}
    if config is None:
        log.warning("[eval] No --config given: every instance is scored, training instances included")
        rows = np.arange(len(dataset))
        metadata["rows"] = "all"
    else:
        _, rows = split_rows(config, dataset, ExperimentSeeds.from_seed(config.seed))
        metadata.update(
            {"rows": "validation", "seed": config.seed, "fold": config.split.fold, "folds": config.split.folds}
        )
    names = dataset.class_factor_names
    codes = forward(model, dataset.observations()[rows])
    return codes, dataset.factor_matrix(names)[rows], names, metadata


def cmd_eval(args) -> int:
    config = _optional_config(args)
    codes, factor_values, names, metadata = _codes_to_evaluate(args, config)
    classes = as_label_array([tuple(int(v) for v in row) for row in factor_values])
    report = evaluate_disentanglement(
        codes,
        factor_values,
        names,
        EvaluationConfig(explicitness_split=args.explicitness_split, seed=args.seed or 0),
        metadata=metadata,
        recall_labels=classes,
    )
    if args.k != 1:
        recall = recall_at_k(LabeledEmbeddingBatch(codes, classes), k=args.k)
        report.metadata["recall_at_k"] = {"k": args.k, "value": recall}

    path = _output_path(args.out, config, "report", "report.json")
    report.save(path)
    mi_csv = _output_path(args.mi_csv, config, "mi_csv")
    if mi_csv is not None:
        report.mutual_information.to_csv(mi_csv)
    plots = _output_path(args.plots, config, "plots")
    if plots is not None:
        os.makedirs(plots, exist_ok=True)
        report.mutual_information.plot(os.path.join(plots, "mutual_information.html"))
    print(
        f"modularity {report.modularity_mean:.4f}, explicitness {report.explicitness_mean:.4f}, "
        f"recall@1 {report.recall_at_1:.4f} -> {path}"
    )
    return EXIT_OK


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fstat_loss", description="F-statistic loss for deep embeddings")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON or YAML)")
    common.add_argument("--seed", type=int, help="overrides the configuration seed")
    common.add_argument("--out", help="output file")
    common.add_argument("--plots", help="directory for HTML figures")

    gen_data = commands.add_parser("gen-data", parents=[common], help="generate a dataset or a golden code")
    gen_data.add_argument("--golden", choices=sorted(GOLDEN_PATTERNS), help="golden code pattern")
    gen_data.add_argument("--points-per-cluster", type=_positive_int, default=DEFAULT_POINTS_PER_CLUSTER)
    gen_data.add_argument("--jitter", type=float, default=0.0, help="Gaussian jitter of golden codes")
    gen_data.set_defaults(func=cmd_gen_data)

    train_parser = commands.add_parser("train", parents=[common], help="train an encoder")
    train_parser.set_defaults(func=cmd_train)

    embed = commands.add_parser("embed", parents=[common], help="write the codes of a dataset")
    embed.add_argument("--model", required=True)
    embed.add_argument("--data", required=True)
    embed.set_defaults(func=cmd_embed)

    evaluate = commands.add_parser("eval", parents=[common], help="evaluate codes or a trained model")
    evaluate.add_argument("--model")
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--codes-direct", action="store_true", help="treat --data as a codes file")
    evaluate.add_argument("--k", type=_positive_int, default=1, help="neighbours of recall@k")
    evaluate.add_argument("--mi-csv", help="CSV of (dimension, factor, mi)")
    evaluate.add_argument("--explicitness-split", action="store_true", help="score explicitness on held-out halves")
    evaluate.set_defaults(func=cmd_eval)
    return parser


def main(argv: Union[list[str], None] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    log.basicConfig(level=getattr(log, args.log_level), format="%(levelname)s %(message)s")

    if args.command == "gen-data" and args.golden is None and args.config is None:
        log.error("[main] gen-data needs --config or --golden")
        return EXIT_CONFIG

    try:
        return args.func(args)
    except TrainingDivergenceError as error:
        log.error(f"[main] Training diverged: {error}")
        return EXIT_TRAINING
    except ShapeError as error:
        log.error(f"[main] {error}")
        return EXIT_EVALUATION if args.command in ("eval", "embed") else EXIT_CONFIG
    except (ValueError, OSError) as error:
        log.error(f"[main] {error}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
