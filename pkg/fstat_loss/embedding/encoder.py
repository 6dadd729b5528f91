"""Fully connected ReLU encoder with analytic backpropagation and ADAM updates.

Weights are stored as ``(fan_in, fan_out)`` matrices so that a layer computes ``h @ W + b`` on a batch of row
vectors. Hidden layers use ReLU and the output layer is linear.
"""

from __future__ import annotations

import json
import logging as log
from dataclasses import dataclass, field

import numpy as np

from fstat_loss.embedding.errors import DataError, ShapeError, TrainingDivergenceError

MODEL_FORMAT = "fstat_loss.encoder"
MODEL_VERSION = 1


@dataclass
class EncoderModel:
    """Parameters of the encoder.

    Attributes:
        layer_sizes (list[int]): input dimension, hidden dimensions and embedding dimension D.
        weights (list[np.ndarray]): one ``(layer_sizes[i], layer_sizes[i + 1])`` matrix per layer.
        biases (list[np.ndarray]): one ``(layer_sizes[i + 1],)`` vector per layer.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.encoder import EncoderModel
        >>> EncoderModel([2, 3], [np.zeros((3, 2))], [np.zeros(3)])
        Traceback (most recent call last):
            ...
        fstat_loss.embedding.errors.ShapeError: [EncoderModel] Layer 0 weights have shape (3, 2), expected (2, 3)
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = [int(size) for size in self.layer_sizes]
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.layer_sizes) < 2 or any(size < 1 for size in self.layer_sizes):
            raise ShapeError(f"[EncoderModel] Invalid layer sizes: {self.layer_sizes}")
        if len(self.weights) != self.n_layers or len(self.biases) != self.n_layers:
            raise ShapeError(
                f"[EncoderModel] Expected {self.n_layers} layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected:
                raise ShapeError(f"[EncoderModel] Layer {i} weights have shape {w.shape}, expected {expected}")
            if b.shape != (expected[1],):
                raise ShapeError(f"[EncoderModel] Layer {i} biases have shape {b.shape}, expected ({expected[1]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataError(f"[EncoderModel] Layer {i} has non-finite parameters")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> EncoderModel:
        return EncoderModel(
            list(self.layer_sizes), [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )


@dataclass
class EncoderGradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases


@dataclass
class AdamState:
    """ADAM optimizer state.

    Attributes:
        learning_rate (float): step size.
        step (int): number of updates applied.
        m (list[np.ndarray]): first-moment estimates, weights first then biases.
        v (list[np.ndarray]): second-moment estimates, same layout as ``m``.
    """

    learning_rate: float
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ValueError(f"[AdamState] Learning rate must be positive: {self.learning_rate}")
        if self.step < 0:
            raise ValueError(f"[AdamState] Step must be non-negative: {self.step}")

    @classmethod
    def zeros(cls, model: EncoderModel, learning_rate: float, **kwargs) -> AdamState:
        parameters = model.weights + model.biases
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p) for p in parameters],
            v=[np.zeros_like(p) for p in parameters],
            **kwargs,
        )


def init_model(layer_sizes: list[int], rng: np.random.Generator) -> EncoderModel:
    """Uniform ``±sqrt(6 / (fan_in + fan_out))`` weights and zero biases.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.encoder import init_model
        >>> model = init_model([4, 8, 2], np.random.default_rng(0))
        >>> [w.shape for w in model.weights], model.embedding_dim
        ([(4, 8), (8, 2)], 2)
    """
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return EncoderModel(list(layer_sizes), weights, biases)


def _check_observations(model: EncoderModel, observations) -> np.ndarray:
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim != 2 or observations.shape[1] != model.input_dim:
        raise ShapeError(
            f"[encoder] Observations of shape {observations.shape} do not match input dimension {model.input_dim}"
        )
    return observations


def _activations(model: EncoderModel, observations: np.ndarray) -> list[np.ndarray]:
    """Inputs of every layer followed by the output of the last one."""
    activations = [observations]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        pre_activation = activations[-1] @ w + b
        last = i == model.n_layers - 1
        activations.append(pre_activation if last else np.maximum(pre_activation, 0.0))
    return activations


def forward(model: EncoderModel, observations) -> np.ndarray:
    """Embeddings of a batch of observations, shape (N, D).

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.encoder import EncoderModel, forward
        >>> model = EncoderModel([2, 2, 1], [np.array([[1.0, -1.0], [1.0, 1.0]]), np.array([[1.0], [2.0]])],
        ...                      [np.array([0.0, -1.0]), np.array([0.5])])
        >>> forward(model, [[1.0, 2.0]]).tolist()
        [[3.5]]
    """
    return _activations(model, _check_observations(model, observations))[-1]


def backward(model: EncoderModel, observations, upstream_grad) -> EncoderGradients:
    """Gradients of a loss with respect to every parameter given ``∂L/∂z`` for every embedding.

    The forward pass is recomputed from ``observations``.

    Raises:
        ShapeError: observations or upstream gradient of the wrong shape.
    """
    observations = _check_observations(model, observations)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    if upstream_grad.shape != (observations.shape[0], model.embedding_dim):
        raise ShapeError(
            f"[encoder] Upstream gradient of shape {upstream_grad.shape}, "
            f"expected {(observations.shape[0], model.embedding_dim)}"
        )

    activations = _activations(model, observations)
    weight_grads: list[np.ndarray] = [np.empty(0)] * model.n_layers
    bias_grads: list[np.ndarray] = [np.empty(0)] * model.n_layers
    delta = upstream_grad
    for i in reversed(range(model.n_layers)):
        weight_grads[i] = activations[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (activations[i] > 0.0)
    return EncoderGradients(weights=weight_grads, biases=bias_grads)


def adam_step(model: EncoderModel, grads: EncoderGradients, state: AdamState) -> tuple[EncoderModel, AdamState]:
    """One bias-corrected ADAM update. Returns a new model and a new state.

    Raises:
        TrainingDivergenceError: non-finite gradient.
        ShapeError: gradients and parameters of different shapes.
    """
    arrays = grads.arrays()
    parameters = model.weights + model.biases
    if len(arrays) != len(parameters) or any(g.shape != p.shape for g, p in zip(arrays, parameters)):
        raise ShapeError("[adam_step] Gradients do not match the model parameters")
    if not all(np.all(np.isfinite(g)) for g in arrays):
        message = f"[adam_step] Non-finite gradient at step {state.step + 1}"
        log.error(message)
        raise TrainingDivergenceError(message)

    m_state = state.m if len(state.m) > 0 else [np.zeros_like(p) for p in parameters]
    v_state = state.v if len(state.v) > 0 else [np.zeros_like(p) for p in parameters]
    step = state.step + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step

    new_parameters, new_m, new_v = [], [], []
    for p, g, m, v in zip(parameters, arrays, m_state, v_state):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g**2
        update = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        new_parameters.append(p - update)
        new_m.append(m)
        new_v.append(v)

    n = model.n_layers
    new_model = EncoderModel(list(model.layer_sizes), new_parameters[:n], new_parameters[n:])
    new_state = AdamState(
        learning_rate=state.learning_rate,
        step=step,
        m=new_m,
        v=new_v,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return new_model, new_state


def model_to_dict(model: EncoderModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(document: dict) -> EncoderModel:
    if document.get("format") != MODEL_FORMAT:
        raise ValueError(f"[encoder] Unknown model format: {document.get('format')}")
    if document.get("version") != MODEL_VERSION:
        raise ValueError(f"[encoder] Unsupported model version: {document.get('version')}")
    return EncoderModel(document["layer_sizes"], document["weights"], document["biases"])


def save_model(model: EncoderModel, path: str):
    """Write the model as a JSON document with row-major parameter arrays."""
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f)
        f.write("\n")


def load_model(path: str) -> EncoderModel:
    with open(path, "r") as f:
        return model_from_dict(json.load(f))
