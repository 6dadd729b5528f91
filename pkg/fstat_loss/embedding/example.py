from fstat_loss.embedding.input.experiment_config import ExperimentConfig
from fstat_loss.embedding.input.factor_spec import Factor, FactorSpec


def sprites_like_spec(instances_per_combination: int = 1, observation_dim: int = 64) -> FactorSpec:
    """Seven class factors with 672 identities, plus a pose factor treated as noise."""
    return FactorSpec(
        factors=[
            Factor("body", 2),
            Factor("arms", 2),
            Factor("hair", 3),
            Factor("gender", 2),
            Factor("armor", 2),
            Factor("greaves", 2),
            Factor("weapon", 7),
            Factor("pose", 4, "noise"),
        ],
        instances_per_combination=instances_per_combination,
        observation_dim=observation_dim,
        observation_noise_sd=0.05,
        mixing_seed=2018,
    )


def norb_like_spec(instances_per_combination: int = 1, observation_dim: int = 64) -> FactorSpec:
    """Toy identity with binary elevation and azimuth buckets; lighting is noise."""
    return FactorSpec(
        factors=[
            Factor("toy", 50),
            Factor("elevation", 2),
            Factor("azimuth", 2),
            Factor("lighting", 6, "noise"),
        ],
        instances_per_combination=instances_per_combination,
        observation_dim=observation_dim,
        observation_noise_sd=0.05,
        mixing_seed=2004,
    )


def desk_spec(instances_per_combination: int = 40) -> FactorSpec:
    """Three binary class factors and one binary noise factor mixed into 32 observation dimensions."""
    return FactorSpec(
        factors=[
            Factor("shape", 2),
            Factor("color", 2),
            Factor("size", 2),
            Factor("light", 2, "noise"),
        ],
        instances_per_combination=instances_per_combination,
        observation_dim=32,
        observation_noise_sd=0.1,
        mixing_seed=7,
    )


PRESETS = {"sprites_like": sprites_like_spec, "norb_like": norb_like_spec, "desk": desk_spec}


def example() -> ExperimentConfig:
    """F-statistic loss under the conjunction oracle on the desk dataset."""
    return ExperimentConfig.from_dict(
        {
            "dataset": {"preset": "desk"},
            "loss": {"kind": "fstat", "d": 2},
            "oracle": {"kind": "conjunction"},
            "encoder": {"hidden": [64], "embedding_dim": 16},
            "training": {"max_epochs": 200, "patience": 10},
            "split": {"folds": 4, "fold": 0},
            "seed": 0,
        }
    )
