import numpy as np
import pytest

from conftest import numeric_gradient, random_batch
from fstat_loss.embedding.baselines import triplet_loss, triplet_loss_grad
from fstat_loss.embedding.encoder import (
    AdamState,
    EncoderGradients,
    EncoderModel,
    adam_step,
    backward,
    forward,
    init_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from fstat_loss.embedding.errors import DataError, ShapeError, TrainingDivergenceError
from fstat_loss.embedding.floss import FLossConfig, LabeledEmbeddingBatch, f_loss, f_loss_grad


def zero_model(layer_sizes):
    return EncoderModel(
        layer_sizes,
        [np.zeros((i, o)) for i, o in zip(layer_sizes[:-1], layer_sizes[1:])],
        [np.zeros(o) for o in layer_sizes[1:]],
    )


def set_parameters(model, flat):
    """Model with every parameter taken from a flat vector (weights first, then biases)."""
    arrays, offset = [], 0
    for p in model.weights + model.biases:
        arrays.append(flat[offset : offset + p.size].reshape(p.shape))
        offset += p.size
    return EncoderModel(model.layer_sizes, arrays[: model.n_layers], arrays[model.n_layers :])


def flatten(arrays):
    return np.concatenate([a.ravel() for a in arrays])


def test_forward_zero_model():
    np.testing.assert_array_equal(forward(zero_model([3, 4, 2]), np.ones((5, 3))), np.zeros((5, 2)))


def test_forward_identity_layer(rng):
    x = rng.normal(size=(4, 3))
    model = EncoderModel([3, 3], [np.eye(3)], [np.zeros(3)])
    np.testing.assert_array_equal(forward(model, x), x)


def test_forward_hand_computed():
    model = EncoderModel(
        [2, 2, 2],
        [np.array([[1.0, -1.0], [2.0, 1.0]]), np.array([[1.0, 0.0], [1.0, -2.0]])],
        [np.array([0.0, 0.5]), np.array([0.0, 1.0])],
    )
    # hidden: relu([1 + 2, -1 + 1 + 0.5]) = [3, 0.5]; output: [3 + 0.5, 0 - 1 + 1]
    np.testing.assert_allclose(forward(model, [[1.0, 1.0]]), [[3.5, 0.0]])


def test_forward_rejects_wrong_input_dimension():
    with pytest.raises(ShapeError):
        forward(zero_model([3, 2]), np.ones((2, 4)))


def test_model_rejects_non_finite_parameters():
    with pytest.raises(DataError):
        EncoderModel([1, 1], [np.array([[np.nan]])], [np.zeros(1)])


def test_backward_zero_upstream(rng):
    model = init_model([3, 5, 2], rng)
    grads = backward(model, rng.normal(size=(4, 3)), np.zeros((4, 2)))
    assert all(np.all(g == 0.0) for g in grads.arrays())


def test_backward_linear_one_by_one():
    w, b, x = 1.5, 0.25, 2.0
    model = EncoderModel([1, 1], [np.array([[w]])], [np.array([b])])
    z = forward(model, [[x]])
    # L = z^2 / 2, so dL/dz = z, dL/dw = z x and dL/db = z
    grads = backward(model, [[x]], z)
    assert grads.weights[0][0, 0] == pytest.approx((w * x + b) * x)
    assert grads.biases[0][0] == pytest.approx(w * x + b)


def test_backward_rejects_wrong_upstream_shape(rng):
    model = init_model([3, 2], rng)
    with pytest.raises(ShapeError):
        backward(model, np.ones((4, 3)), np.ones((4, 3)))


def _end_to_end_check(rng, loss, loss_grad):
    model = init_model([4, 6, 3], rng)
    model.biases = [rng.normal(0.0, 0.3, size=b.shape) for b in model.biases]
    batch = random_batch(rng, n_labels=3, per_label=3, dim=4, offset=0.7)
    x, labels = batch.embeddings, batch.labels

    def total(flat):
        return loss(LabeledEmbeddingBatch(forward(set_parameters(model, flat), x), labels))

    grads = backward(model, x, loss_grad(LabeledEmbeddingBatch(forward(model, x), labels)))
    numeric = numeric_gradient(total, flatten(model.weights + model.biases))
    analytic = flatten(grads.arrays())
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7 * max(1.0, np.max(np.abs(numeric))))


def test_end_to_end_gradient_fstat(rng):
    cfg = FLossConfig(d=2)
    for _ in range(20):
        _end_to_end_check(rng, lambda batch: f_loss(batch, cfg), lambda batch: f_loss_grad(batch, cfg))


def test_end_to_end_gradient_triplet(rng):
    for _ in range(20):
        _end_to_end_check(rng, lambda batch: triplet_loss(batch, 0.5), lambda batch: triplet_loss_grad(batch, 0.5))


def test_adam_zero_gradient_keeps_parameters(rng):
    model = init_model([3, 4, 2], rng)
    state = AdamState.zeros(model, 1e-3)
    grads = EncoderGradients([np.zeros_like(w) for w in model.weights], [np.zeros_like(b) for b in model.biases])
    new_model, new_state = adam_step(model, grads, state)
    assert new_state.step == 1
    for old, new in zip(model.weights + model.biases, new_model.weights + new_model.biases):
        np.testing.assert_array_equal(old, new)


def test_adam_first_step():
    model = EncoderModel([1, 1], [np.array([[1.0]])], [np.array([0.0])])
    grads = EncoderGradients([np.array([[0.5]])], [np.array([-2.0])])
    new_model, _ = adam_step(model, grads, AdamState.zeros(model, 0.1))
    assert new_model.weights[0][0, 0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8))
    assert new_model.biases[0][0] == pytest.approx(0.1 * 2.0 / (2.0 + 1e-8))


def test_adam_constant_gradient_moves_by_learning_rate():
    model = EncoderModel([1, 1], [np.array([[0.0]])], [np.array([0.0])])
    state = AdamState.zeros(model, 0.01)
    grads = EncoderGradients([np.array([[3.0]])], [np.array([-0.2])])
    for _ in range(100):
        previous = model
        model, state = adam_step(model, grads, state)
    assert previous.weights[0][0, 0] - model.weights[0][0, 0] == pytest.approx(0.01, rel=1e-6)
    assert model.biases[0][0] - previous.biases[0][0] == pytest.approx(0.01, rel=1e-6)
    assert state.step == 100


def test_adam_rejects_non_finite_gradient(rng):
    model = init_model([2, 2], rng)
    grads = EncoderGradients([np.full((2, 2), np.inf)], [np.zeros(2)])
    with pytest.raises(TrainingDivergenceError):
        adam_step(model, grads, AdamState.zeros(model, 1e-3))


def test_model_file_round_trip(rng, tmp_path):
    model = init_model([5, 7, 3], rng)
    path = tmp_path / "model.json"
    save_model(model, str(path))
    loaded = load_model(str(path))
    assert loaded.layer_sizes == [5, 7, 3]
    for original, restored in zip(model.weights + model.biases, loaded.weights + loaded.biases):
        np.testing.assert_array_equal(original, restored)


def test_model_document_version_is_checked(rng):
    document = model_to_dict(init_model([2, 2], rng))
    document["version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(document)


def test_init_model_is_seeded():
    first = init_model([4, 8, 2], np.random.default_rng(3))
    second = init_model([4, 8, 2], np.random.default_rng(3))
    for a, b in zip(first.weights, second.weights):
        np.testing.assert_array_equal(a, b)
