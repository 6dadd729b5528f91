import numpy as np
import pytest
from scipy import stats

from conftest import numeric_gradient, random_batch
from fstat_loss.embedding.errors import ConfigError, DegenerateClassError, InsufficientClassesError
from fstat_loss.embedding.floss import (
    FLossConfig,
    LabeledEmbeddingBatch,
    build_separation_table,
    f_loss,
    f_loss_and_grad,
    f_loss_grad,
    f_statistic_per_dim,
    select_dimensions,
    separation_probability,
)


def one_dim_batch(alpha_values, beta_values):
    values = list(alpha_values) + list(beta_values)
    labels = ["A"] * len(alpha_values) + ["B"] * len(beta_values)
    return LabeledEmbeddingBatch(np.array(values, dtype=float)[:, None], np.array(labels))


@pytest.mark.parametrize(
    "alpha_values, beta_values, expected",
    [([0.0, 1.0], [10.0, 11.0], 200.0), ([-1.0, 1.0], [-1.0, 1.0], 0.0), ([0.0, 2.0], [1.0, 3.0], 0.5)],
)
def test_f_statistic_examples(alpha_values, beta_values, expected):
    batch = one_dim_batch(alpha_values, beta_values)
    assert f_statistic_per_dim(batch, "A", "B", 0) == pytest.approx(expected, abs=1e-12)


def test_f_statistic_needs_two_members():
    batch = one_dim_batch([0.0], [1.0, 2.0])
    with pytest.raises(DegenerateClassError):
        f_statistic_per_dim(batch, "A", "B", 0)


@pytest.mark.parametrize("s, n_tilde, expected", [(0.0, 2.0, 0.0), (200.0, 2.0, 0.9950372), (0.5, 2.0, 0.4472136)])
def test_separation_probability_examples(s, n_tilde, expected):
    assert separation_probability(s, n_tilde) == pytest.approx(expected, abs=1e-7)


def test_separation_probability_rejects_small_degrees_of_freedom():
    with pytest.raises(ValueError):
        separation_probability(1.0, 0.5)


def test_squared_t_statistic_on_balanced_batches(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        alpha, beta = rng.normal(0.0, 1.0, n), rng.normal(rng.normal(0.0, 2.0), rng.uniform(0.2, 3.0), n)
        t = stats.ttest_ind(alpha, beta, equal_var=True).statistic
        s = f_statistic_per_dim(one_dim_batch(alpha, beta), "A", "B", 0)
        assert s == pytest.approx(t**2, rel=1e-9)


def test_squared_t_statistic_with_weighted_grand_mean(rng):
    for _ in range(1000):
        n_alpha, n_beta = rng.integers(2, 12, size=2)
        alpha, beta = rng.normal(0.0, 1.0, n_alpha), rng.normal(rng.normal(0.0, 2.0), 1.0, n_beta)
        t = stats.ttest_ind(alpha, beta, equal_var=True).statistic
        s = f_statistic_per_dim(one_dim_batch(alpha, beta), "A", "B", 0, grand_mean="weighted")
        assert s == pytest.approx(t**2, rel=1e-9)


def test_separation_table_pairs_and_consistency(rng):
    batch = random_batch(rng, n_labels=3, per_label=3, dim=4)
    table = build_separation_table(batch)
    assert table.pairs == [(0, 1), (0, 2), (1, 2)]
    assert table.phi.shape == table.s.shape == (3, 4)
    np.testing.assert_array_equal(table.n_tilde, [4.0, 4.0, 4.0])
    np.testing.assert_allclose(table.phi, separation_probability(table.s, table.n_tilde[:, None]), atol=1e-15)
    for p, (alpha, beta) in enumerate(table.pairs):
        for k in range(4):
            assert table.s[p, k] == pytest.approx(f_statistic_per_dim(batch, alpha, beta, k), rel=1e-10)


def test_separation_table_composed_example(separated_batch):
    table = build_separation_table(separated_batch)
    assert table.pairs == [("A", "B")]
    assert table.s[0, 0] == pytest.approx(200.0)
    assert table.phi[0, 0] == pytest.approx(0.9950372, abs=1e-7)


def test_separation_table_needs_two_labels():
    batch = LabeledEmbeddingBatch(np.zeros((3, 2)), np.array(["A", "A", "A"]))
    with pytest.raises(InsufficientClassesError):
        build_separation_table(batch)


@pytest.mark.parametrize(
    "phi, d, expected", [([0.9, 0.99, 0.5], 2, [0, 1]), ([0.5, 0.5, 0.5], 1, [0]), ([0.1, 0.2, 0.99, 0.3], 1, [2])]
)
def test_select_dimensions(phi, d, expected):
    assert select_dimensions(np.array(phi), d).tolist() == expected


def test_select_dimensions_rejects_large_d():
    with pytest.raises(ConfigError):
        select_dimensions(np.array([0.5, 0.6]), 3)


def test_f_loss_breaks_ties_like_select_dimensions(separated_batch):
    embeddings = np.repeat(separated_batch.embeddings, 3, axis=1)
    result = f_loss_and_grad(LabeledEmbeddingBatch(embeddings, separated_batch.labels), FLossConfig(d=1))
    assert result.loss == pytest.approx(f_loss(separated_batch, FLossConfig(d=1)), rel=1e-12)
    assert np.any(result.grad[:, 0] != 0.0)
    assert np.all(result.grad[:, 1:] == 0.0)


def test_f_loss_example(separated_batch):
    assert f_loss(separated_batch, FLossConfig(d=1)) == pytest.approx(-np.log(np.sqrt(200.0 / 202.0)), rel=1e-10)


def test_f_loss_rejects_d_above_dimension(separated_batch):
    with pytest.raises(ConfigError):
        f_loss(separated_batch, FLossConfig(d=2))


def test_f_loss_is_zero_when_separation_saturates():
    batch = LabeledEmbeddingBatch(np.array([[0.0], [0.0], [1e3], [1e3]]), np.array([0, 0, 1, 1]))
    assert f_loss(batch, FLossConfig(d=1)) == pytest.approx(0.0, abs=1e-12)


def test_f_loss_floor_keeps_loss_finite():
    batch = one_dim_batch([-1.0, 1.0], [-1.0, 1.0])
    result = f_loss_and_grad(batch, FLossConfig(d=1))
    assert result.loss == pytest.approx(-np.log(1e-12))
    assert result.min_selected_phi == 0.0
    assert np.all(np.isfinite(result.grad))


def test_f_loss_adds_over_pairs(rng):
    batch = random_batch(rng, n_labels=3, per_label=4, dim=3)
    cfg = FLossConfig(d=2)
    total = 0.0
    for alpha, beta in [(0, 1), (0, 2), (1, 2)]:
        keep = np.isin(batch.labels, [alpha, beta])
        total += f_loss(LabeledEmbeddingBatch(batch.embeddings[keep], batch.labels[keep]), cfg)
    assert f_loss(batch, cfg) == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("grand_mean", ["unweighted", "weighted"])
@pytest.mark.parametrize("d", [1, 2])
def test_f_loss_grad_matches_finite_differences(rng, grand_mean, d):
    cfg = FLossConfig(d=d, grand_mean=grand_mean)
    for _ in range(10):
        counts = list(rng.integers(2, 6, size=int(rng.integers(2, 4))))
        batch = random_batch(rng, dim=3, counts=counts, offset=0.8)
        grad = f_loss_grad(batch, cfg)
        numeric = numeric_gradient(lambda z: f_loss(LabeledEmbeddingBatch(z, batch.labels), cfg), batch.embeddings)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-7 * max(1.0, np.max(np.abs(numeric))))


def test_f_loss_grad_pushes_close_means_apart():
    batch = one_dim_batch([-1.0, 1.0], [-0.99, 1.01])
    grad = f_loss_grad(batch, FLossConfig(d=1))
    alpha_shift, beta_shift = grad[:2].sum(), grad[2:].sum()
    assert alpha_shift > 0.0 > beta_shift


def test_f_loss_grad_vanishes_once_separated():
    batch = LabeledEmbeddingBatch(
        np.array([[0.0, 0.0], [0.0, 0.0], [50.0, 50.0], [50.0, 50.0]]), np.array(["A", "A", "B", "B"])
    )
    assert np.max(np.abs(f_loss_grad(batch, FLossConfig(d=2)))) < 1e-6


def test_f_loss_translation_invariance(rng):
    for _ in range(20):
        batch = random_batch(rng, n_labels=3, per_label=4, dim=3)
        moved = LabeledEmbeddingBatch(batch.embeddings + rng.normal(0.0, 5.0, size=3), batch.labels)
        cfg = FLossConfig(d=2)
        assert f_loss(moved, cfg) == pytest.approx(f_loss(batch, cfg), rel=1e-9, abs=1e-12)


def test_f_loss_permutation_invariance(rng):
    batch = random_batch(rng, n_labels=3, per_label=5, dim=3)
    order = np.concatenate([rng.permutation(np.flatnonzero(batch.labels == label)) for label in (2, 0, 1)])
    shuffled = LabeledEmbeddingBatch(batch.embeddings[order], batch.labels[order])
    swapped = LabeledEmbeddingBatch(batch.embeddings, np.array([{0: 1, 1: 0, 2: 2}[v] for v in batch.labels]))
    cfg = FLossConfig(d=1)
    assert f_loss(shuffled, cfg) == pytest.approx(f_loss(batch, cfg), rel=1e-9)
    assert f_loss(swapped, cfg) == pytest.approx(f_loss(batch, cfg), rel=1e-9)


def test_f_statistic_scale_invariance(rng):
    batch = random_batch(rng, n_labels=2, per_label=4, dim=2)
    scaled = LabeledEmbeddingBatch(batch.embeddings * np.array([-3.5, 1.0]), batch.labels)
    assert f_statistic_per_dim(scaled, 0, 1, 0) == pytest.approx(f_statistic_per_dim(batch, 0, 1, 0), rel=1e-10)


def rotate45(points):
    c = s = np.sqrt(0.5)
    return points @ np.array([[c, s], [-s, c]])


def test_f_loss_is_not_rotation_invariant():
    points = np.array([[0.0, 0.0], [0.5, 1.0], [-0.5, 2.0], [3.0, 0.0], [3.5, 1.0], [2.5, 2.0]])
    labels = np.array(["A", "A", "A", "B", "B", "B"])
    cfg = FLossConfig(d=1)
    original = f_loss(LabeledEmbeddingBatch(points, labels), cfg)
    rotated = f_loss(LabeledEmbeddingBatch(rotate45(points), labels), cfg)
    assert abs(rotated - original) > 1e-3


def test_f_loss_monotone_in_mean_gap():
    cfg = FLossConfig(d=1)
    losses = [f_loss(one_dim_batch([0.0, 1.0], [gap, gap + 1.0]), cfg) for gap in np.linspace(0.1, 5.0, 30)]
    assert np.all(np.diff(losses) <= 1e-15)


def test_batch_validates_shapes():
    with pytest.raises(ValueError):
        LabeledEmbeddingBatch(np.zeros((3, 2)), np.array([0, 1]))
    with pytest.raises(ValueError):
        LabeledEmbeddingBatch(np.zeros(3), np.array([0, 1, 1]))


def test_batch_accepts_tuple_labels():
    batch = LabeledEmbeddingBatch(np.arange(8.0).reshape(4, 2), [(0, 1), (0, 1), (1, 0), (1, 0)])
    assert batch.label_values() == [(0, 1), (1, 0)]
    assert batch.members((1, 0)).tolist() == [[4.0, 5.0], [6.0, 7.0]]
