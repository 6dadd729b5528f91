import numpy as np
import pytest

from fstat_loss.embedding.example import desk_spec
from fstat_loss.embedding.floss import LabeledEmbeddingBatch
from fstat_loss.embedding.input.factor_spec import Factor, FactorSpec
from fstat_loss.embedding.synthdata import generate_factorial


@pytest.fixture
def rng():
    return np.random.default_rng(20180501)


@pytest.fixture
def separated_batch():
    """1-D batch with the two classes ten units apart."""
    return LabeledEmbeddingBatch(np.array([[0.0], [1.0], [10.0], [11.0]]), np.array(["A", "A", "B", "B"]))


@pytest.fixture
def tiny_spec():
    return FactorSpec(
        factors=[Factor("shape", 2), Factor("color", 3), Factor("light", 2, "noise")],
        instances_per_combination=4,
        observation_dim=8,
        observation_noise_sd=0.05,
        mixing_seed=3,
        mixing_hidden=8,
    )


@pytest.fixture
def tiny_dataset(tiny_spec):
    return generate_factorial(tiny_spec, np.random.default_rng(0))


@pytest.fixture
def desk_dataset():
    return generate_factorial(desk_spec(instances_per_combination=10), np.random.default_rng(1))


def random_batch(rng, n_labels=3, per_label=4, dim=3, spread=1.0, offset=1.5, counts=None):
    """Gaussian clusters with means drawn ``offset`` apart on average."""
    counts = [per_label] * n_labels if counts is None else counts
    embeddings, labels = [], []
    for label, count in enumerate(counts):
        center = rng.normal(0.0, offset, size=dim)
        embeddings.append(center + rng.normal(0.0, spread, size=(count, dim)))
        labels += [label] * count
    return LabeledEmbeddingBatch(np.concatenate(embeddings), np.array(labels))


def numeric_gradient(func, x, h=1e-6):
    """Central finite differences of a scalar function of an array."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[index] = h
        grad[index] = (func(x + step) - func(x - step)) / (2.0 * h)
    return grad
