import numpy as np
import pytest

from fstat_loss.embedding.errors import ConfigError, InsufficientDataError
from fstat_loss.embedding.sampling import (
    Episode,
    EpisodeSampler,
    SamplerConfig,
    conjunction_folds,
    conjunction_labels,
    oracle_labels,
    sample_class_episode,
    sample_factor_episode,
    split_by_conjunction,
    split_by_instance,
)
from fstat_loss.embedding.utils import encode_labels


def label_counts(labels):
    _, codes = encode_labels(labels)
    return np.bincount(codes)


def test_episode_requires_two_instances_per_label():
    with pytest.raises(InsufficientDataError):
        Episode(indices=[0, 1, 2], labels=["A", "A", "B"], oracle="class")
    assert Episode(indices=[0, 1, 2, 3], labels=["A", "A", "B", "B"], oracle="class").n_labels == 2


def test_class_episode_takes_every_label_when_few():
    labels = np.repeat(["A", "B", "C"], 20)
    episode = sample_class_episode(labels, rng=np.random.default_rng(1))
    assert episode.n_labels == 3
    assert label_counts(episode.labels).tolist() == [10, 10, 10]
    assert len(set(episode.indices.tolist())) == 30
    np.testing.assert_array_equal(labels[episode.indices], episode.labels)


def test_class_episode_respects_limits():
    labels = np.repeat(np.arange(30), 4)
    episode = sample_class_episode(labels, max_labels=12, max_per_label=2, rng=np.random.default_rng(1))
    assert episode.n_labels == 12
    assert np.all(label_counts(episode.labels) == 2)


def test_class_episode_skips_singletons():
    labels = np.array(["A", "A", "B", "C", "C", "D"])
    episode = sample_class_episode(labels, rng=np.random.default_rng(0))
    assert sorted(set(episode.labels.tolist())) == ["A", "C"]


def test_class_episode_needs_two_usable_labels():
    with pytest.raises(InsufficientDataError):
        sample_class_episode(np.array(["A", "A", "B"]))


def test_class_episode_stays_in_pool():
    labels = np.repeat([0, 1, 2, 3], 5)
    pool = np.arange(10)
    episode = sample_class_episode(labels, pool=pool, rng=np.random.default_rng(0))
    assert set(episode.indices.tolist()) <= set(pool.tolist())
    assert sorted(set(episode.labels.tolist())) == [0, 1]


@pytest.mark.parametrize("kwargs", [{"max_labels": 1}, {"max_per_label": 1}])
def test_class_episode_rejects_small_limits(kwargs):
    with pytest.raises(ConfigError):
        sample_class_episode(np.repeat([0, 1], 3), **kwargs)


def test_factor_episode_cycles_over_class_factors(tiny_dataset):
    factors = [sample_factor_episode(tiny_dataset, position).factor for position in range(4)]
    # light is a noise factor and never groups an episode
    assert factors == [0, 1, 0, 1]


def test_factor_episode_groups_by_factor_value(tiny_dataset):
    episode = sample_factor_episode(tiny_dataset, 1, rng=np.random.default_rng(3))
    np.testing.assert_array_equal(tiny_dataset.factor_matrix()[episode.indices, 1], episode.labels)
    assert episode.n_labels == 3
    assert np.all(label_counts(episode.labels) == 5)
    assert episode.oracle == "factor"


def test_factor_episode_skips_degenerate_factor(tiny_dataset):
    # every row with shape 0 only: the shape factor has a single value
    pool = np.flatnonzero(tiny_dataset.factor_matrix()[:, 0] == 0)
    episode = sample_factor_episode(tiny_dataset, 0, pool=pool)
    assert episode.factor == 1


def test_conjunction_labels_exclude_noise(tiny_dataset):
    labels = conjunction_labels(tiny_dataset)
    assert len(set(labels.tolist())) == 6
    assert all(len(label) == 2 for label in labels.tolist())


def test_oracle_labels(tiny_dataset):
    np.testing.assert_array_equal(oracle_labels(tiny_dataset, "class", "color"), tiny_dataset.factor_matrix()[:, 1])
    np.testing.assert_array_equal(oracle_labels(tiny_dataset, "class"), tiny_dataset.factor_matrix()[:, 0])
    with pytest.raises(ConfigError):
        oracle_labels(tiny_dataset, "class", "light")
    with pytest.raises(ConfigError):
        oracle_labels(tiny_dataset, "factor")


def test_class_epoch_uses_instances_once(desk_dataset):
    sampler = EpisodeSampler(desk_dataset, "conjunction", max_labels=4, max_per_label=5, rng=np.random.default_rng(0))
    episodes = sampler.epoch()
    used = np.concatenate([episode.indices for episode in episodes])
    assert len(used) == len(set(used.tolist()))
    assert len(episodes) >= 5
    for episode in episodes:
        assert episode.n_labels >= 2
        assert np.max(label_counts(episode.labels)) <= 5


def test_factor_epoch_runs_equal_rounds(desk_dataset):
    sampler = EpisodeSampler(desk_dataset, "factor", max_labels=12, max_per_label=5, rng=np.random.default_rng(0))
    episodes = sampler.epoch()
    factors = [episode.factor for episode in episodes]
    assert len(factors) % 3 == 0
    assert factors == [0, 1, 2] * (len(factors) // 3)
    for episode in episodes:
        assert np.min(label_counts(episode.labels)) >= 2


def test_sampler_respects_training_rows(desk_dataset):
    train = np.arange(0, len(desk_dataset), 2)
    sampler = EpisodeSampler(desk_dataset, "factor", indices=train, rng=np.random.default_rng(0))
    for episode in sampler.epoch():
        assert np.all(episode.indices % 2 == 0)


def test_sampler_rejects_unknown_oracle(desk_dataset):
    with pytest.raises(ConfigError):
        EpisodeSampler(desk_dataset, "pairs")


def test_conjunction_folds_balance():
    assignment = conjunction_folds(list(range(10)), 4, np.random.default_rng(0))
    assert sorted(np.bincount(list(assignment.values())).tolist()) == [2, 2, 3, 3]


def test_conjunction_folds_errors():
    with pytest.raises(ConfigError):
        conjunction_folds(["a", "b"], 1, np.random.default_rng(0))
    with pytest.raises(InsufficientDataError):
        conjunction_folds(["a", "b"], 3, np.random.default_rng(0))


def test_split_by_conjunction_is_disjoint_on_classes(desk_dataset):
    labels = conjunction_labels(desk_dataset)
    train, val = split_by_conjunction(labels, 4, 1, np.random.default_rng(0))
    assert len(train) + len(val) == len(labels)
    train_classes = set(labels[train].tolist())
    val_classes = set(labels[val].tolist())
    assert train_classes.isdisjoint(val_classes)
    assert len(val_classes) == 2


def test_split_by_instance_keeps_every_class(desk_dataset):
    labels = conjunction_labels(desk_dataset)
    train, val = split_by_instance(labels, 5, 0, np.random.default_rng(0))
    assert set(train.tolist()).isdisjoint(val.tolist())
    assert len(train) + len(val) == len(labels)
    assert set(labels[train].tolist()) == set(labels[val].tolist()) == set(labels.tolist())
    assert len(val) == len(labels) // 5


def test_split_rejects_fold_outside_range():
    with pytest.raises(ConfigError):
        split_by_instance(["a", "b"], 2, 2, np.random.default_rng(0))


def test_sampler_config_per_label_defaults():
    assert SamplerConfig(oracle="factor").per_label("fstat") == 5
    assert SamplerConfig(oracle="factor").per_label("triplet") == 10
    assert SamplerConfig(oracle="conjunction").per_label("fstat") == 10
    assert SamplerConfig(oracle="class", max_per_label=3).per_label("fstat") == 3
    with pytest.raises(ConfigError):
        SamplerConfig(oracle="pairs")
