"""Episodic minibatches for the three supervision regimes.

* class oracle: labels are the values of one class factor;
* conjunction oracle: labels are conjunctions of all class factors;
* unnamed-factor oracle: labels are the values of one factor chosen round-robin, whose identity is recorded in
  the episode provenance but never handed to a loss.

Episode construction only reads labels and factor values, never embeddings.
"""

from __future__ import annotations

import logging as log
from dataclasses import dataclass
from typing import Union

import numpy as np

from fstat_loss.embedding.errors import ConfigError, InsufficientDataError
from fstat_loss.embedding.input.factorial_dataset import FactorialDataset
from fstat_loss.embedding.utils import as_label_array, encode_labels

ORACLE_KINDS = ("class", "factor", "conjunction")


@dataclass(frozen=True)
class Episode:
    """One minibatch.

    Attributes:
        indices (np.ndarray): instance rows in the dataset.
        labels (np.ndarray): opaque label of every instance.
        oracle (str): oracle kind that built the episode.
        factor (int | None): factor index grouping a factor episode, for diagnostics only.
    """

    indices: np.ndarray
    labels: np.ndarray
    oracle: str
    factor: Union[int, None] = None

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "labels", as_label_array(self.labels))
        if self.indices.shape != self.labels.shape:
            raise ValueError(f"[Episode] {len(self.indices)} indices but {len(self.labels)} labels")
        _, codes = encode_labels(self.labels)
        if len(codes) > 0 and np.min(np.bincount(codes)) < 2:
            raise InsufficientDataError("[Episode] Every label needs at least 2 instances")

    @property
    def n_labels(self) -> int:
        return len(encode_labels(self.labels)[0])


def conjunction_labels(dataset: FactorialDataset, factor_names: Union[list[str], None] = None) -> np.ndarray:
    """Class identity of every instance: the tuple of its values on the class factors (noise factors excluded).

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.input.factor_spec import Factor, FactorSpec
        >>> from fstat_loss.embedding.sampling import conjunction_labels
        >>> from fstat_loss.embedding.synthdata import generate_factorial
        >>> spec = FactorSpec([Factor("a", 2), Factor("b", 2), Factor("light", 3, "noise")], 1, 8)
        >>> labels = conjunction_labels(generate_factorial(spec, np.random.default_rng(0)))
        >>> len(labels), len(set(labels.tolist())), labels[0]
        (12, 4, (0, 0))
    """
    names = dataset.class_factor_names if factor_names is None else factor_names
    if len(names) == 0:
        raise ConfigError("[conjunction_labels] The dataset has no class factor")
    values = dataset.factor_matrix(names)
    return as_label_array([tuple(int(v) for v in row) for row in values])


def oracle_labels(dataset: FactorialDataset, oracle: str, class_factor: Union[str, None] = None) -> np.ndarray:
    """Per-instance labels of the class or conjunction oracle."""
    if oracle == "conjunction":
        return conjunction_labels(dataset)
    if oracle == "class":
        name = dataset.class_factor_names[0] if class_factor is None else class_factor
        if name not in dataset.class_factor_names:
            raise ConfigError(f"[oracle_labels] {name} is not a class factor of the dataset")
        return dataset.factor_matrix([name])[:, 0]
    raise ConfigError(f"[oracle_labels] No per-instance class labels for oracle {oracle!r}")


def _grouped_sample(
    labels: np.ndarray, pool: np.ndarray, max_labels: int, max_per_label: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Up to ``max_labels`` labels with at least 2 members in ``pool``, then up to ``max_per_label`` members each."""
    values, codes = encode_labels(labels[pool])
    counts = np.bincount(codes, minlength=len(values))
    eligible = np.flatnonzero(counts >= 2)
    if len(eligible) < 2:
        raise InsufficientDataError(
            f"[sampling] {len(eligible)} label(s) with at least 2 instances, at least 2 are needed"
        )

    chosen = rng.choice(eligible, size=min(max_labels, len(eligible)), replace=False)
    indices = []
    for code in chosen:
        members = pool[codes == code]
        indices.append(rng.choice(members, size=min(max_per_label, len(members)), replace=False))
    indices = np.concatenate(indices)
    return indices, labels[indices]


def _check_limits(max_labels: int, max_per_label: int):
    if max_labels < 2:
        raise ConfigError(f"[sampling] max_labels must be at least 2: {max_labels}")
    if max_per_label < 2:
        raise ConfigError(f"[sampling] max_per_label must be at least 2: {max_per_label}")


def sample_class_episode(
    labels,
    max_labels: int = 12,
    max_per_label: int = 10,
    rng: Union[np.random.Generator, None] = None,
    pool: Union[np.ndarray, None] = None,
    oracle: str = "class",
) -> Episode:
    """Episode of up to ``max_labels`` classes with up to ``max_per_label`` instances each, without replacement.

    Args:
        labels: class label of every instance of the dataset.
        max_labels (int, optional): maximum number of classes. Defaults to 12.
        max_per_label (int, optional): maximum number of instances per class. Defaults to 10.
        rng (np.random.Generator, optional): random generator. Defaults to a generator seeded with 0.
        pool (np.ndarray, optional): instance rows to sample from. Defaults to every instance.
        oracle (str, optional): provenance recorded in the episode. Defaults to ``class``.

    Raises:
        InsufficientDataError: fewer than 2 classes with at least 2 instances in the pool.

    Returns:
        Episode: the sampled episode.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.sampling import sample_class_episode
        >>> labels = np.repeat(["A", "B", "C"], 20)
        >>> episode = sample_class_episode(labels, rng=np.random.default_rng(0))
        >>> episode.n_labels, len(episode.indices)
        (3, 30)
    """
    _check_limits(max_labels, max_per_label)
    labels = as_label_array(labels)
    rng = np.random.default_rng(0) if rng is None else rng
    pool = np.arange(len(labels)) if pool is None else np.asarray(pool, dtype=np.int64)
    indices, episode_labels = _grouped_sample(labels, pool, max_labels, max_per_label, rng)
    return Episode(indices=indices, labels=episode_labels, oracle=oracle)


def _factor_episode(
    factor_values: np.ndarray,
    factor: int,
    max_values: int,
    max_per_value: int,
    rng: np.random.Generator,
    pool: np.ndarray,
) -> Episode:
    indices, labels = _grouped_sample(factor_values[:, factor], pool, max_values, max_per_value, rng)
    return Episode(indices=indices, labels=labels, oracle="factor", factor=factor)


def sample_factor_episode(
    dataset: FactorialDataset,
    factor_cycle_position: int,
    max_values: int = 12,
    max_per_value: int = 5,
    rng: Union[np.random.Generator, None] = None,
    pool: Union[np.ndarray, None] = None,
) -> Episode:
    """Episode grouped by the values of one class factor, chosen by ``factor_cycle_position`` in the factor cycle.

    Factors with fewer than 2 values represented by at least 2 instances are skipped in cycle order.

    Args:
        dataset (FactorialDataset): dataset.
        factor_cycle_position (int): position in the cycle over class factors (taken modulo their number).
        max_values (int, optional): maximum number of factor values. Defaults to 12.
        max_per_value (int, optional): maximum number of instances per value. Defaults to 5.
        rng (np.random.Generator, optional): random generator. Defaults to a generator seeded with 0.
        pool (np.ndarray, optional): instance rows to sample from. Defaults to every instance.

    Raises:
        InsufficientDataError: every factor is degenerate in the pool.

    Returns:
        Episode: episode whose ``factor`` is the index of the grouping factor in the dataset.
    """
    _check_limits(max_values, max_per_value)
    rng = np.random.default_rng(0) if rng is None else rng
    pool = np.arange(len(dataset)) if pool is None else np.asarray(pool, dtype=np.int64)
    factors = dataset.class_factor_indices
    factor_values = dataset.factor_matrix()
    for shift in range(len(factors)):
        factor = factors[(factor_cycle_position + shift) % len(factors)]
        try:
            return _factor_episode(factor_values, factor, max_values, max_per_value, rng, pool)
        except InsufficientDataError:
            log.debug(f"[sample_factor_episode] Factor {dataset.factor_names[factor]} skipped")
    raise InsufficientDataError("[sample_factor_episode] Every factor has fewer than 2 usable values")


class EpisodeSampler:
    """Episodes of one training epoch for a given oracle.

    Class and conjunction epochs consume the pool of training instances without replacement until no episode can
    be formed. Factor epochs run in rounds of one episode per class factor; each factor draws from its own pool,
    which is refilled when it runs dry, and the epoch ends once every factor's pool has been used up at least once.

    Attributes:
        dataset (FactorialDataset): dataset.
        oracle (str): ``class``, ``factor`` or ``conjunction``.
        indices (np.ndarray): training instance rows.
        max_labels (int): maximum labels (classes or factor values) per episode.
        max_per_label (int): maximum instances per label.
        rng (np.random.Generator): random generator owned by the sampler.
        class_factor (str | None): factor of the class oracle.
    """

    def __init__(
        self,
        dataset: FactorialDataset,
        oracle: str,
        indices: Union[np.ndarray, None] = None,
        max_labels: int = 12,
        max_per_label: int = 10,
        rng: Union[np.random.Generator, None] = None,
        class_factor: Union[str, None] = None,
    ):
        if oracle not in ORACLE_KINDS:
            raise ConfigError(f"[{self.__class__.__name__}] Unknown oracle {oracle!r}, expected one of {ORACLE_KINDS}")
        _check_limits(max_labels, max_per_label)
        self.dataset = dataset
        self.oracle = oracle
        self.indices = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
        self.max_labels = max_labels
        self.max_per_label = max_per_label
        self.rng = np.random.default_rng(0) if rng is None else rng
        self.class_factor = class_factor
        if oracle == "factor":
            self._factor_values = dataset.factor_matrix()
            self.labels = None
        else:
            self.labels = oracle_labels(dataset, oracle, class_factor)

    def epoch(self) -> list[Episode]:
        if self.oracle == "factor":
            episodes = self._factor_epoch()
        else:
            episodes = self._class_epoch()
        log.debug(f"[{self.__class__.__name__}] {len(episodes)} {self.oracle} episodes")
        return episodes

    def _class_epoch(self) -> list[Episode]:
        pool = self.rng.permutation(self.indices)
        episodes = []
        while True:
            try:
                episode = sample_class_episode(
                    self.labels, self.max_labels, self.max_per_label, self.rng, pool, oracle=self.oracle
                )
            except InsufficientDataError:
                if len(episodes) == 0:
                    raise
                return episodes
            episodes.append(episode)
            pool = pool[~np.isin(pool, episode.indices)]

    def _factor_epoch(self) -> list[Episode]:
        factors = list(self.dataset.class_factor_indices)
        pools = {factor: self.rng.permutation(self.indices) for factor in factors}
        used_up = {factor: False for factor in factors}
        episodes = []

        while len(factors) > 0 and not all(used_up[factor] for factor in factors):
            for factor in list(factors):
                try:
                    episode = self._draw(factor, pools[factor])
                except InsufficientDataError:
                    used_up[factor] = True
                    pools[factor] = self.rng.permutation(self.indices)
                    try:
                        episode = self._draw(factor, pools[factor])
                    except InsufficientDataError:
                        log.warning(
                            f"[{self.__class__.__name__}] Factor {self.dataset.factor_names[factor]} "
                            f"has fewer than 2 usable values and is skipped"
                        )
                        factors.remove(factor)
                        continue
                episodes.append(episode)
                pools[factor] = pools[factor][~np.isin(pools[factor], episode.indices)]

        if len(episodes) == 0:
            raise InsufficientDataError(f"[{self.__class__.__name__}] No factor can form an episode")
        return episodes

    def _draw(self, factor: int, pool: np.ndarray) -> Episode:
        return _factor_episode(self._factor_values, factor, self.max_labels, self.max_per_label, self.rng, pool)


def conjunction_folds(labels, folds: int, rng: np.random.Generator) -> dict:
    """Fold of every distinct class label; classes are shuffled then dealt to folds in turn.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.sampling import conjunction_folds
        >>> assignment = conjunction_folds(["a", "b", "c", "d", "a"], 2, np.random.default_rng(0))
        >>> sorted(assignment.values())
        [0, 0, 1, 1]
    """
    if folds < 2:
        raise ConfigError(f"[conjunction_folds] At least 2 folds are needed: {folds}")
    values, _ = encode_labels(labels)
    if len(values) < folds:
        raise InsufficientDataError(f"[conjunction_folds] {len(values)} classes cannot fill {folds} folds")
    order = rng.permutation(len(values))
    return {values[i]: position % folds for position, i in enumerate(order)}


def _check_fold(folds: int, fold: int):
    if not 0 <= fold < folds:
        raise ConfigError(f"[sampling] Fold {fold} outside 0..{folds - 1}")


def split_by_conjunction(labels, folds: int, fold: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Training and validation rows, disjoint on class labels; validation holds the classes of ``fold``."""
    _check_fold(folds, fold)
    assignment = conjunction_folds(labels, folds, rng)
    in_fold = np.array([assignment[label] == fold for label in as_label_array(labels).tolist()], dtype=bool)
    return np.flatnonzero(~in_fold), np.flatnonzero(in_fold)


def split_by_instance(labels, folds: int, fold: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Training and validation rows where every class is dealt across folds, so both sides see every class."""
    _check_fold(folds, fold)
    _, codes = encode_labels(labels)
    assigned = np.empty(len(codes), dtype=np.int64)
    for code in range(codes.max() + 1):
        members = rng.permutation(np.flatnonzero(codes == code))
        assigned[members] = np.arange(len(members)) % folds
    return np.flatnonzero(assigned != fold), np.flatnonzero(assigned == fold)


@dataclass(frozen=True)
class SamplerConfig:
    """Oracle and episode size.

    Attributes:
        oracle (str): ``class``, ``factor`` or ``conjunction``.
        max_labels (int): maximum labels per episode.
        max_per_label (int | None): maximum instances per label; by default 5 for F-statistic factor episodes and
            10 otherwise.
        class_factor (str | None): factor of the class oracle, the first class factor by default.
    """

    oracle: str = "conjunction"
    max_labels: int = 12
    max_per_label: Union[int, None] = None
    class_factor: Union[str, None] = None

    def __post_init__(self):
        if self.oracle not in ORACLE_KINDS:
            raise ConfigError(f"[SamplerConfig] Unknown oracle {self.oracle!r}, expected one of {ORACLE_KINDS}")

    def per_label(self, loss: str) -> int:
        if self.max_per_label is not None:
            return self.max_per_label
        return 5 if self.oracle == "factor" and loss == "fstat" else 10

    def sampler(self, dataset: FactorialDataset, loss: str, indices, rng: np.random.Generator) -> EpisodeSampler:
        return EpisodeSampler(
            dataset,
            self.oracle,
            indices=indices,
            max_labels=self.max_labels,
            max_per_label=self.per_label(loss),
            rng=rng,
            class_factor=self.class_factor,
        )
