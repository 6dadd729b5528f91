from __future__ import annotations

import logging as log
from dataclasses import dataclass, field
from typing import Any, Union

import yaml

from fstat_loss.embedding.errors import ConfigError
from fstat_loss.embedding.input.factor_spec import FactorSpec
from fstat_loss.embedding.sampling import SamplerConfig, ORACLE_KINDS
from fstat_loss.embedding.training import TrainConfig


def int_list(values) -> list[int]:
    if isinstance(values, (int, str)):
        values = [values]
    return [int(v) for v in values]


class ConfigSection:
    """A validated configuration section.

    Subclasses declare the schema the way tables do: known fields, required fields, default values and the
    callable that coerces every value. Unknown keys are errors.

    Attributes:
        _fields (list): known keys.
        _required_fields (list): keys that must be present.
        _default_values (dict): value of missing keys.
        _fields_type (dict): coercion of every key.

    Raises:
        ConfigError: unknown or missing key, or a value that cannot be coerced.

    Example:
        >>> from fstat_loss.embedding.input.experiment_config import LossSection
        >>> LossSection({"kind": "triplet", "margin": "0.2"}).margin
        0.2
        >>> LossSection({"dd": 3})
        Traceback (most recent call last):
            ...
        fstat_loss.embedding.errors.ConfigError: [LossSection] Unknown keys: dd
    """

    _fields = []
    _required_fields = []
    _default_values = {}
    _fields_type = {}

    def __init__(self, values: Union[dict, None] = None):
        values = {} if values is None else values
        if not isinstance(values, dict):
            raise ConfigError(f"[{self.__class__.__name__}] Expected a mapping, got {type(values).__name__}")

        unknown = [k for k in values if k not in self._fields]
        if len(unknown) > 0:
            raise ConfigError(f"[{self.__class__.__name__}] Unknown keys: {', '.join(str(k) for k in unknown)}")
        missing = [k for k in self._required_fields if k not in values]
        if len(missing) > 0:
            raise ConfigError(f"[{self.__class__.__name__}] Missing keys: {', '.join(missing)}")

        for name in self._fields:
            value = values.get(name, self._default_values.get(name))
            if value is not None and name in self._fields_type:
                try:
                    value = self._fields_type[name](value)
                except (TypeError, ValueError) as error:
                    raise ConfigError(f"[{self.__class__.__name__}] Invalid value for {name}: {value!r}") from error
            setattr(self, name, value)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self._fields}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.to_dict()})"


class DatasetSection(ConfigSection):
    _fields = ["path", "preset", "spec", "instances_per_combination"]
    _default_values = {}
    _fields_type = {"path": str, "preset": str, "spec": dict, "instances_per_combination": int}

    def __init__(self, values: Union[dict, None] = None):
        super().__init__(values)
        if self.path is None and self.preset is None and self.spec is None:
            raise ConfigError(f"[{self.__class__.__name__}] One of path, preset or spec is needed")
        if self.preset is not None and self.spec is not None:
            raise ConfigError(f"[{self.__class__.__name__}] preset and spec are mutually exclusive")

    def factor_spec(self) -> Union[FactorSpec, None]:
        """Recipe of the dataset, or None when the dataset is only given by path."""
        from fstat_loss.embedding.example import PRESETS

        if self.spec is not None:
            return FactorSpec.from_dict(self.spec)
        if self.preset is None:
            return None
        if self.preset not in PRESETS:
            raise ConfigError(
                f"[{self.__class__.__name__}] Unknown preset {self.preset!r}, expected one of {list(PRESETS)}"
            )
        if self.instances_per_combination is None:
            return PRESETS[self.preset]()
        return PRESETS[self.preset](instances_per_combination=self.instances_per_combination)


class LossSection(ConfigSection):
    _fields = ["kind", "d", "margin", "learning_rate", "phi_floor", "grand_mean"]
    _default_values = {"kind": "fstat", "d": 2, "margin": 0.1, "phi_floor": 1e-12, "grand_mean": "unweighted"}
    _fields_type = {
        "kind": str,
        "d": int,
        "margin": float,
        "learning_rate": float,
        "phi_floor": float,
        "grand_mean": str,
    }


class OracleSection(ConfigSection):
    _fields = ["kind", "class_factor", "max_labels", "max_per_label"]
    _default_values = {"kind": "conjunction", "max_labels": 12}
    _fields_type = {"kind": str, "class_factor": str, "max_labels": int, "max_per_label": int}

    def __init__(self, values: Union[dict, None] = None):
        super().__init__(values)
        if self.kind not in ORACLE_KINDS:
            raise ConfigError(
                f"[{self.__class__.__name__}] Unknown oracle {self.kind!r}, expected one of {ORACLE_KINDS}"
            )


class EncoderSection(ConfigSection):
    _fields = ["hidden", "embedding_dim"]
    _default_values = {"hidden": [64], "embedding_dim": 16}
    _fields_type = {"hidden": int_list, "embedding_dim": int}


class TrainingSection(ConfigSection):
    _fields = ["max_epochs", "patience", "validation"]
    _default_values = {"max_epochs": 200, "patience": 10}
    _fields_type = {"max_epochs": int, "patience": int, "validation": str}


class SplitSection(ConfigSection):
    _fields = ["folds", "fold", "by"]
    _default_values = {"folds": 5, "fold": 0}
    _fields_type = {"folds": int, "fold": int, "by": str}

    def __init__(self, values: Union[dict, None] = None):
        super().__init__(values)
        if self.folds < 2 or not 0 <= self.fold < self.folds:
            raise ConfigError(f"[{self.__class__.__name__}] Invalid fold {self.fold} of {self.folds}")
        if self.by not in (None, "conjunction", "instance"):
            raise ConfigError(f"[{self.__class__.__name__}] Unknown split {self.by!r}")


class OutputSection(ConfigSection):
    _fields = ["model", "log", "report", "codes", "mi_csv", "plots"]
    _fields_type = {name: str for name in _fields}


_SECTIONS = {
    "dataset": DatasetSection,
    "loss": LossSection,
    "oracle": OracleSection,
    "encoder": EncoderSection,
    "training": TrainingSection,
    "split": SplitSection,
    "output": OutputSection,
}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment from a single seed.

    Example:
        >>> from fstat_loss.embedding.input.experiment_config import ExperimentConfig
        >>> config = ExperimentConfig.from_dict({"dataset": {"preset": "desk"}, "oracle": {"kind": "factor"}})
        >>> config.validation, config.split_by, config.sampler_config().per_label("fstat")
        ('explicitness', 'instance', 5)
        >>> ExperimentConfig.from_dict({"dataset": {"preset": "desk"}, "loss": {"d": 32}})
        Traceback (most recent call last):
            ...
        fstat_loss.embedding.errors.ConfigError: [ExperimentConfig] d=32 exceeds the embedding dimension 16
    """

    dataset: DatasetSection
    loss: LossSection = field(default_factory=LossSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    split: SplitSection = field(default_factory=SplitSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    def __post_init__(self):
        if self.loss.kind == "fstat" and self.loss.d > self.encoder.embedding_dim:
            raise ConfigError(
                f"[{self.__class__.__name__}] d={self.loss.d} exceeds the embedding dimension "
                f"{self.encoder.embedding_dim}"
            )
        self.train_config()

    @classmethod
    def from_dict(cls, values: Any) -> ExperimentConfig:
        if not isinstance(values, dict):
            raise ConfigError(f"[{cls.__name__}] The configuration must be a mapping")
        unknown = [k for k in values if k not in _SECTIONS and k != "seed"]
        if len(unknown) > 0:
            raise ConfigError(f"[{cls.__name__}] Unknown keys: {', '.join(str(k) for k in unknown)}")
        if "dataset" not in values:
            raise ConfigError(f"[{cls.__name__}] Missing keys: dataset")
        sections = {name: section(values.get(name)) for name, section in _SECTIONS.items()}
        try:
            seed = int(values.get("seed", 0))
        except (TypeError, ValueError) as error:
            raise ConfigError(f"[{cls.__name__}] Invalid seed: {values.get('seed')!r}") from error
        return cls(seed=seed, **sections)

    @classmethod
    def from_file(cls, path: str) -> ExperimentConfig:
        """Read a JSON or YAML configuration file."""
        try:
            with open(path, "r") as f:
                values = yaml.safe_load(f)
        except OSError as error:
            raise ConfigError(f"[{cls.__name__}] Cannot read configuration {path}: {error}") from error
        except yaml.YAMLError as error:
            raise ConfigError(f"[{cls.__name__}] Invalid configuration {path}: {error}") from error
        log.info(f"[{cls.__name__}] Configuration read from {path}")
        return cls.from_dict(values)

    def with_seed(self, seed: Union[int, None]) -> ExperimentConfig:
        if seed is not None:
            self.seed = int(seed)
        return self

    def to_dict(self) -> dict:
        return {**{name: getattr(self, name).to_dict() for name in _SECTIONS}, "seed": self.seed}

    @property
    def validation(self) -> str:
        if self.training.validation is not None:
            return self.training.validation
        return "explicitness" if self.oracle.kind == "factor" else "recall@1"

    @property
    def split_by(self) -> str:
        if self.split.by is not None:
            return self.split.by
        return "instance" if self.oracle.kind == "factor" else "conjunction"

    def layer_sizes(self, input_dim: int) -> list[int]:
        return [int(input_dim)] + list(self.encoder.hidden) + [self.encoder.embedding_dim]

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            oracle=self.oracle.kind,
            max_labels=self.oracle.max_labels,
            max_per_label=self.oracle.max_per_label,
            class_factor=self.oracle.class_factor,
        )

    def train_config(self, seed: Union[int, None] = None) -> TrainConfig:
        return TrainConfig(
            loss=self.loss.kind,
            d=self.loss.d,
            margin=self.loss.margin,
            learning_rate=self.loss.learning_rate,
            phi_floor=self.loss.phi_floor,
            grand_mean=self.loss.grand_mean,
            max_epochs=self.training.max_epochs,
            patience=self.training.patience,
            validation=self.validation,
            seed=self.seed if seed is None else seed,
        )
