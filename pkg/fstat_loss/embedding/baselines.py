"""Triplet loss baseline, evaluated on every triplet of a batch with plain L2 distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fstat_loss.embedding.errors import EmptyTripletError
from fstat_loss.embedding.floss import LabeledEmbeddingBatch


@dataclass(frozen=True)
class TripletResult:
    loss: float
    grad: np.ndarray
    active_fraction: float


def _pairwise(embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distances ``‖z_i - z_j‖`` and unit vectors ``(z_i - z_j) / ‖z_i - z_j‖`` (zero for coincident points)."""
    difference = embeddings[:, None, :] - embeddings[None, :, :]
    distance = np.sqrt(np.sum(difference**2, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(distance[..., None] > 0.0, difference / distance[..., None], 0.0)
    return distance, unit


def _valid_triplets(batch: LabeledEmbeddingBatch) -> np.ndarray:
    """Boolean mask ``[a, p, n]`` of anchor-positive-negative triplets."""
    _, codes = batch.label_index()
    same = codes[:, None] == codes[None, :]
    positive = same & ~np.eye(len(codes), dtype=bool)
    negative = ~same
    valid = positive[:, :, None] & negative[:, None, :]
    if not np.any(valid):
        raise EmptyTripletError("[triplet_loss] The batch contains no (anchor, positive, negative) triplet")
    return valid


def triplet_loss_and_grad(batch: LabeledEmbeddingBatch, margin: float, with_grad: bool = True) -> TripletResult:
    """Mean hinge ``max(0, ‖z_a - z_p‖ - ‖z_a - z_n‖ + margin)`` over all triplets and its subgradient.

    Args:
        batch (LabeledEmbeddingBatch): embeddings and labels.
        margin (float): non-negative margin.
        with_grad (bool, optional): compute the gradient. Defaults to True.

    Raises:
        ValueError: negative margin.
        EmptyTripletError: no valid triplet in the batch.

    Returns:
        TripletResult: loss, gradient and share of triplets with an active hinge.
    """
    if margin < 0.0:
        raise ValueError(f"[triplet_loss] Margin must be non-negative: {margin}")

    valid = _valid_triplets(batch)
    distance, unit = _pairwise(batch.embeddings)
    hinge = distance[:, :, None] - distance[:, None, :] + margin
    active = valid & (hinge > 0.0)
    n_triplets = int(np.sum(valid))
    loss = float(np.sum(np.where(active, hinge, 0.0)) / n_triplets)
    active_fraction = float(np.sum(active) / n_triplets)

    grad = np.zeros_like(batch.embeddings)
    if not with_grad:
        return TripletResult(loss=loss, grad=grad, active_fraction=active_fraction)

    # weight[a, x]: active triplets with x as positive of a, minus those with x as negative of a
    weight = np.sum(active, axis=2).astype(np.float64) - np.sum(active, axis=1).astype(np.float64)
    grad = np.einsum("ix,ixk->ik", weight + weight.T, unit) / n_triplets
    return TripletResult(loss=loss, grad=grad, active_fraction=active_fraction)


def triplet_loss(batch: LabeledEmbeddingBatch, margin: float) -> float:
    """Mean triplet loss over every valid triplet in the batch.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.baselines import triplet_loss
        >>> from fstat_loss.embedding.floss import LabeledEmbeddingBatch
        >>> batch = LabeledEmbeddingBatch(np.array([[0.0], [1.0], [0.5]]), np.array(["A", "A", "B"]))
        >>> round(triplet_loss(batch, 0.1), 12)
        0.6
        >>> batch = LabeledEmbeddingBatch(np.array([[0.0], [0.0], [1.0]]), np.array(["A", "A", "B"]))
        >>> triplet_loss(batch, 0.1)
        0.0
    """
    return triplet_loss_and_grad(batch, margin, with_grad=False).loss


def triplet_loss_grad(batch: LabeledEmbeddingBatch, margin: float) -> np.ndarray:
    """Subgradient of :func:`triplet_loss`; coincident points contribute a zero distance gradient."""
    return triplet_loss_and_grad(batch, margin).grad
