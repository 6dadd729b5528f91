"""Ground-truth generators.

``generate_factorial`` builds observation datasets from independent discrete factors through a fixed random
nonlinear mixing. ``generate_golden_code`` builds the sixteen two-dimensional reference codes used to check the
disentanglement metrics: eight clean panels (``a`` .. ``h``) and their noisy counterparts (``i`` .. ``p``).
"""

from __future__ import annotations

import itertools
import logging as log
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from fstat_loss.embedding.errors import ConfigError, SizeError
from fstat_loss.embedding.input.code_table import GoldenCode, code_columns
from fstat_loss.embedding.input.factor_spec import FactorSpec
from fstat_loss.embedding.input.factorial_dataset import FactorialDataset, observation_columns

MAX_INSTANCES = 10_000_000
MAX_CELLS = 200_000_000
NOISY_DISPLACED_SHARE = 0.4
DEFAULT_POINTS_PER_CLUSTER = 250


def generate_factorial(spec: FactorSpec, rng: np.random.Generator) -> FactorialDataset:
    """Every factor-value combination ``instances_per_combination`` times, mixed into observations.

    Observations are ``tanh(onehot @ A + a) @ B`` plus Gaussian noise of sd ``observation_noise_sd``. The mixing
    weights ``A``, ``a`` and ``B`` depend only on ``spec.mixing_seed``; ``rng`` only draws the noise.

    Args:
        spec (FactorSpec): dataset recipe.
        rng (np.random.Generator): generator for the observation noise.

    Raises:
        SizeError: too many instances or observation cells to enumerate.

    Returns:
        FactorialDataset: the generated dataset.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.input.factor_spec import Factor, FactorSpec
        >>> from fstat_loss.embedding.synthdata import generate_factorial
        >>> spec = FactorSpec([Factor("a", 2), Factor("b", 2), Factor("c", 2)], 5, 8)
        >>> len(generate_factorial(spec, np.random.default_rng(0)))
        40
    """
    if spec.instance_count > MAX_INSTANCES or spec.instance_count * spec.observation_dim > MAX_CELLS:
        raise SizeError(
            f"[generate_factorial] {spec.instance_count} instances of width {spec.observation_dim} exceed the limit"
        )

    combinations = np.array(list(itertools.product(*[range(c) for c in spec.value_counts])), dtype=np.int64)
    factor_values = np.repeat(combinations, int(spec.instances_per_combination), axis=0)

    offsets = np.concatenate([[0], np.cumsum(spec.value_counts)[:-1]])
    one_hot = np.zeros((len(factor_values), spec.one_hot_width))
    for j, offset in enumerate(offsets):
        one_hot[np.arange(len(factor_values)), offset + factor_values[:, j]] = 1.0

    mixing = np.random.default_rng(spec.mixing_seed)
    first = mixing.normal(0.0, 1.0 / np.sqrt(len(spec.factors)), size=(spec.one_hot_width, spec.mixing_hidden))
    shift = mixing.normal(0.0, 0.5, size=spec.mixing_hidden)
    second = mixing.normal(0.0, 1.0 / np.sqrt(spec.mixing_hidden), size=(spec.mixing_hidden, spec.observation_dim))
    observations = np.tanh(one_hot @ first + shift) @ second
    if spec.observation_noise_sd > 0.0:
        observations = observations + rng.normal(0.0, spec.observation_noise_sd, size=observations.shape)

    data = pd.DataFrame(observations, columns=observation_columns(spec.observation_dim))
    for j, name in enumerate(spec.factor_names):
        data.insert(j, name, factor_values[:, j])
    data.insert(0, "instance", np.arange(len(factor_values)))

    log.info(
        f"[generate_factorial] {len(data)} instances, {len(spec.factors)} factors "
        f"({len(spec.class_factor_names)} class factors), observation dim {spec.observation_dim}"
    )
    return FactorialDataset(spec, data)


@dataclass(frozen=True)
class GoldenPattern:
    """Cluster geometry of a golden code.

    Attributes:
        centers (np.ndarray): [Shape (4, 2)] cluster centres.
        labels (dict[str, list[int]]): factor value of every cluster, per factor.
        modular (bool): expected modularity flag.
        explicit (dict[str, bool]): expected explicitness flag per factor.
        noisy (bool): a share of every cluster is displaced onto all centres.
    """

    centers: np.ndarray
    labels: dict
    modular: bool
    explicit: dict
    noisy: bool = False


def _rotate45(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    centred = points - points.mean(axis=0)
    c = s = np.sqrt(0.5)
    return centred @ np.array([[c, s], [-s, c]])


_SQUARE = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
_RECTANGLE = [(0.0, 0.0), (2.0, 0.0), (0.0, 1.0), (2.0, 1.0)]
_LINE = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]
_X_BIT = [0, 1, 0, 1]
_Y_BIT = [0, 0, 1, 1]
_XOR = [0, 1, 1, 0]
_FOUR = [0, 1, 2, 3]

_CLEAN_PATTERNS = {
    "a": GoldenPattern(np.array(_SQUARE), {"f1": _X_BIT, "f2": _Y_BIT}, True, {"f1": True, "f2": True}),
    "b": GoldenPattern(_rotate45(_SQUARE), {"f1": _X_BIT, "f2": _Y_BIT}, False, {"f1": True, "f2": True}),
    "c": GoldenPattern(np.array(_SQUARE), {"f1": _FOUR}, True, {"f1": True}),
    "d": GoldenPattern(_rotate45(_SQUARE), {"f1": _FOUR}, True, {"f1": True}),
    "e": GoldenPattern(np.array(_SQUARE), {"f1": _X_BIT, "f2": _XOR}, False, {"f1": True, "f2": False}),
    "f": GoldenPattern(_rotate45(_RECTANGLE), {"f1": _X_BIT, "f2": _XOR}, False, {"f1": True, "f2": False}),
    "g": GoldenPattern(np.array(_LINE), {"f1": _FOUR}, True, {"f1": False}),
    "h": GoldenPattern(_rotate45(_LINE), {"f1": _FOUR}, True, {"f1": False}),
}

GOLDEN_PATTERNS: dict[str, GoldenPattern] = {
    **_CLEAN_PATTERNS,
    **{
        noisy_id: GoldenPattern(
            clean.centers, clean.labels, clean.modular, {name: False for name in clean.labels}, noisy=True
        )
        for noisy_id, clean in zip("ijklmnop", _CLEAN_PATTERNS.values())
    },
}


def generate_golden_code(
    pattern: str,
    points_per_cluster: int = DEFAULT_POINTS_PER_CLUSTER,
    jitter_sd: float = 0.0,
    rng: Union[np.random.Generator, None] = None,
) -> GoldenCode:
    """Two-dimensional code realizing one of the sixteen reference patterns.

    In the noisy patterns ``i`` .. ``p`` a share of 0.4 of every cluster (rounded down to a multiple of 4) is
    placed evenly on the four centres, cycling through them, so the clusters overlap and no factor stays linearly
    recoverable. ``jitter_sd`` adds Gaussian noise on top; with ``jitter_sd = 0`` the code is deterministic.

    Args:
        pattern (str): pattern id, ``a`` .. ``p``.
        points_per_cluster (int, optional): points per cluster. Defaults to 250.
        jitter_sd (float, optional): Gaussian jitter. Defaults to 0.
        rng (np.random.Generator, optional): generator for the jitter. Defaults to a generator seeded with 0.

    Raises:
        ConfigError: unknown pattern, non-positive cluster size or negative jitter.

    Returns:
        GoldenCode: the code with its expected flags.

    Example:
        >>> from fstat_loss.embedding.synthdata import generate_golden_code
        >>> golden = generate_golden_code("e", points_per_cluster=1)
        >>> golden.codes().tolist()
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
        >>> golden.factor_matrix().tolist()
        [[0, 0], [1, 1], [0, 1], [1, 0]]
    """
    if pattern not in GOLDEN_PATTERNS:
        raise ConfigError(f"[generate_golden_code] Unknown pattern {pattern!r}, expected one of a..p")
    if points_per_cluster < 1:
        raise ConfigError(f"[generate_golden_code] points_per_cluster must be positive: {points_per_cluster}")
    if jitter_sd < 0.0:
        raise ConfigError(f"[generate_golden_code] jitter_sd must be non-negative: {jitter_sd}")

    spec = GOLDEN_PATTERNS[pattern]
    n_clusters = len(spec.centers)
    displaced = 0
    if spec.noisy:
        displaced = int(round(NOISY_DISPLACED_SHARE * points_per_cluster)) // n_clusters * n_clusters

    positions, cluster_of = [], []
    for cluster in range(n_clusters):
        at = np.full(points_per_cluster, cluster)
        at[points_per_cluster - displaced :] = np.arange(displaced) % n_clusters
        positions.append(spec.centers[at])
        cluster_of.append(np.full(points_per_cluster, cluster))
    codes = np.concatenate(positions)
    cluster_of = np.concatenate(cluster_of)

    if jitter_sd > 0.0:
        rng = np.random.default_rng(0) if rng is None else rng
        codes = codes + rng.normal(0.0, jitter_sd, size=codes.shape)

    factor_names = list(spec.labels)
    data = pd.DataFrame(codes, columns=code_columns(2))
    for j, name in enumerate(factor_names):
        data.insert(j, name, np.asarray(spec.labels[name])[cluster_of])
    data.insert(0, "instance", np.arange(len(codes)))
    return GoldenCode(pattern, spec.modular, spec.explicit, factor_names, data)
