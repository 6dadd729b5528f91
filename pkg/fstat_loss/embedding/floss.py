"""F-statistic loss.

For every unordered pair of labels ``(α, β)`` in a batch and every embedding
dimension ``k`` the two-class F statistic ``s`` is turned into a separation
probability ``Φ = Pr(S < s | equal means)`` with ``S ~ F(1, ñ)``. For each pair
only the ``d`` best separated dimensions contribute ``-ln Φ`` to the loss.

The selected dimensions are recomputed on every call and treated as constants
when differentiating.
"""

from __future__ import annotations

import logging as log
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable

import numpy as np

from fstat_loss.embedding.errors import ConfigError, DegenerateClassError, InsufficientClassesError, ShapeError
from fstat_loss.embedding.specfun import f_cdf, f_cdf_and_density
from fstat_loss.embedding.utils import as_label_array, encode_labels

WITHIN_FLOOR = 1e-12
GRAND_MEAN_KINDS = ("unweighted", "weighted")


@dataclass(frozen=True)
class LabeledEmbeddingBatch:
    """Embeddings ``z_ij`` grouped by an opaque label (class or factor value).

    Attributes:
        embeddings (np.ndarray): [Shape (N, D)] embedding vectors.
        labels (np.ndarray): [Shape (N,)] label of every embedding.
    """

    embeddings: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        embeddings = np.asarray(self.embeddings, dtype=np.float64)
        labels = as_label_array(self.labels)
        if embeddings.ndim != 2:
            raise ShapeError(f"[LabeledEmbeddingBatch] Embeddings must be a 2-D array, got shape {embeddings.shape}")
        if labels.shape != (embeddings.shape[0],):
            raise ShapeError(
                f"[LabeledEmbeddingBatch] Expected {embeddings.shape[0]} labels, got shape {labels.shape}"
            )
        object.__setattr__(self, "embeddings", embeddings)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def label_values(self) -> list[Hashable]:
        """Distinct labels in order of first appearance."""
        return self.label_index()[0]

    def label_index(self) -> tuple[list[Hashable], np.ndarray]:
        """Distinct labels and, for every embedding, the position of its label in that list."""
        return encode_labels(self.labels)

    def members(self, label: Hashable) -> np.ndarray:
        mask = np.array([value == label for value in self.labels.tolist()], dtype=bool)
        return self.embeddings[mask]


@dataclass(frozen=True)
class SeparationTable:
    """Separation of every label pair on every dimension.

    Attributes:
        pairs (list[tuple]): unordered label pairs in enumeration order.
        phi (np.ndarray): [Shape (P, D)] separation probabilities.
        s (np.ndarray): [Shape (P, D)] F statistics.
        n_tilde (np.ndarray): [Shape (P,)] degrees of freedom ``n_α + n_β - 2``.
    """

    pairs: list[tuple[Hashable, Hashable]]
    phi: np.ndarray
    s: np.ndarray
    n_tilde: np.ndarray


@dataclass(frozen=True)
class FLossConfig:
    """Hyper-parameters of the F-statistic loss.

    Attributes:
        d (int): number of dimensions to separate per pair.
        phi_floor (float): lower clamp of Φ before taking the logarithm.
        grand_mean (str): ``unweighted`` mean of the two class means, or the n-``weighted`` ANOVA grand mean.
    """

    d: int
    phi_floor: float = 1e-12
    grand_mean: str = "unweighted"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"[FLossConfig] d must be a positive integer: {self.d}")
        if not 0.0 < self.phi_floor < 1.0:
            raise ConfigError(f"[FLossConfig] phi_floor must lie in (0, 1): {self.phi_floor}")
        if self.grand_mean not in GRAND_MEAN_KINDS:
            raise ConfigError(f"[FLossConfig] grand_mean must be one of {GRAND_MEAN_KINDS}: {self.grand_mean}")

    def check_dim(self, dim: int):
        if self.d > dim:
            raise ConfigError(f"[FLossConfig] d={self.d} exceeds the embedding dimension {dim}")


@dataclass(frozen=True)
class FLossResult:
    loss: float
    grad: np.ndarray
    min_selected_phi: float


@dataclass(frozen=True)
class _PairStatistics:
    labels: list[Hashable]
    label_of: np.ndarray
    first: np.ndarray
    second: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    mean_gap: np.ndarray
    within: np.ndarray
    within_clamped: np.ndarray
    between_factor: np.ndarray
    n_tilde: np.ndarray
    s: np.ndarray


def _between_factor(n_alpha, n_beta, grand_mean: str):
    """``c`` such that the between-class sum of squares equals ``c (z̄_α - z̄_β)^2``."""
    if grand_mean == "weighted":
        return n_alpha * n_beta / (n_alpha + n_beta)
    return (n_alpha + n_beta) / 4.0


def _pair_statistics(batch: LabeledEmbeddingBatch, grand_mean: str) -> _PairStatistics:
    labels, label_of = batch.label_index()
    if len(labels) < 2:
        raise InsufficientClassesError(f"[floss] At least 2 labels are needed, got {len(labels)}")

    counts = np.bincount(label_of, minlength=len(labels)).astype(np.float64)
    degenerate = [labels[i] for i in np.flatnonzero(counts < 2)]
    if len(degenerate) > 0:
        raise DegenerateClassError(f"[floss] Labels with fewer than 2 members: {degenerate}")

    sums = np.zeros((len(labels), batch.dim))
    np.add.at(sums, label_of, batch.embeddings)
    means = sums / counts[:, None]
    residuals = batch.embeddings - means[label_of]
    squares = np.zeros_like(sums)
    np.add.at(squares, label_of, residuals**2)

    pair_index = np.array(list(combinations(range(len(labels)), 2)), dtype=np.int64)
    first, second = pair_index[:, 0], pair_index[:, 1]
    mean_gap = means[first] - means[second]
    within = squares[first] + squares[second]
    within_clamped = within < WITHIN_FLOOR
    n_tilde = counts[first] + counts[second] - 2.0
    between_factor = _between_factor(counts[first], counts[second], grand_mean)
    s = n_tilde[:, None] * between_factor[:, None] * mean_gap**2 / np.maximum(within, WITHIN_FLOOR)

    return _PairStatistics(
        labels=labels,
        label_of=label_of,
        first=first,
        second=second,
        counts=counts,
        means=means,
        mean_gap=mean_gap,
        within=np.maximum(within, WITHIN_FLOOR),
        within_clamped=within_clamped,
        between_factor=between_factor,
        n_tilde=n_tilde,
        s=s,
    )


def f_statistic_per_dim(
    batch: LabeledEmbeddingBatch, alpha: Hashable, beta: Hashable, k: int, grand_mean: str = "unweighted"
) -> float:
    """Two-class F statistic of labels ``alpha`` and ``beta`` on dimension ``k``.

    ``s = ñ Σ_i n_i (z̄_i - z̿)^2 / Σ_ij (z_ij - z̄_i)^2`` with ``ñ = n_α + n_β - 2``; the denominator is clamped
    below by 1e-12.

    Args:
        batch (LabeledEmbeddingBatch): embeddings and labels.
        alpha (Hashable): first label.
        beta (Hashable): second label, different from ``alpha``.
        k (int): dimension index.
        grand_mean (str, optional): ``unweighted`` or ``weighted`` grand mean. Defaults to ``unweighted``.

    Raises:
        DegenerateClassError: if a label has fewer than 2 members.

    Returns:
        float: non-negative F statistic.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.floss import LabeledEmbeddingBatch, f_statistic_per_dim
        >>> batch = LabeledEmbeddingBatch(np.array([[0.0], [1.0], [10.0], [11.0]]), np.array(["A", "A", "B", "B"]))
        >>> round(f_statistic_per_dim(batch, "A", "B", 0), 9)
        200.0
    """
    if alpha == beta:
        raise ValueError(f"[f_statistic_per_dim] Labels must differ: {alpha}")
    if not 0 <= k < batch.dim:
        raise ShapeError(f"[f_statistic_per_dim] Dimension {k} out of range for D={batch.dim}")

    groups = [batch.members(label)[:, k] for label in (alpha, beta)]
    for label, group in zip((alpha, beta), groups):
        if len(group) < 2:
            raise DegenerateClassError(f"[f_statistic_per_dim] Label {label} has {len(group)} member(s)")

    counts = np.array([len(g) for g in groups], dtype=np.float64)
    class_means = np.array([g.mean() for g in groups])
    if grand_mean == "weighted":
        grand = np.sum(counts * class_means) / np.sum(counts)
    else:
        grand = class_means.mean()
    between = np.sum(counts * (class_means - grand) ** 2)
    within = sum(np.sum((g - m) ** 2) for g, m in zip(groups, class_means))
    n_tilde = counts.sum() - 2.0
    return float(n_tilde * between / max(within, WITHIN_FLOOR))


def separation_probability(s, n_tilde):
    """Probability ``Φ = Pr(S < s)`` for ``S ~ F(1, ñ)``.

    Example:
        >>> from fstat_loss.embedding.floss import separation_probability
        >>> separation_probability(0.0, 2.0)
        0.0
        >>> round(separation_probability(0.5, 2.0), 7)
        0.4472136
    """
    if np.any(np.asarray(n_tilde) < 1):
        raise ValueError(f"[separation_probability] Degrees of freedom must be at least 1: {n_tilde}")
    return f_cdf(s, 1, n_tilde)


def build_separation_table(batch: LabeledEmbeddingBatch, grand_mean: str = "unweighted") -> SeparationTable:
    """F statistics and separation probabilities for every label pair and dimension.

    Raises:
        InsufficientClassesError: fewer than 2 labels.
        DegenerateClassError: a label with fewer than 2 members.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.floss import LabeledEmbeddingBatch, build_separation_table
        >>> labels = np.array(["A", "A", "B", "B", "C", "C"])
        >>> table = build_separation_table(LabeledEmbeddingBatch(np.arange(12.0).reshape(6, 2), labels))
        >>> table.pairs
        [('A', 'B'), ('A', 'C'), ('B', 'C')]
        >>> table.phi.shape
        (3, 2)
    """
    stats = _pair_statistics(batch, grand_mean)
    phi = separation_probability(stats.s, stats.n_tilde[:, None])
    pairs = [(stats.labels[i], stats.labels[j]) for i, j in zip(stats.first, stats.second)]
    return SeparationTable(pairs=pairs, phi=phi, s=stats.s, n_tilde=stats.n_tilde)


def select_dimensions(table_row: np.ndarray, d: int) -> np.ndarray:
    """Indices of the ``d`` largest separation probabilities, ties broken by the lowest index.

    Args:
        table_row (np.ndarray): [Shape (D,)] Φ values of one pair.
        d (int): number of dimensions to select.

    Raises:
        ConfigError: if ``d`` exceeds the number of dimensions.

    Returns:
        np.ndarray: selected indices in increasing order.

    Example:
        >>> from fstat_loss.embedding.floss import select_dimensions
        >>> select_dimensions([0.9, 0.99, 0.5], 2).tolist()
        [0, 1]
        >>> select_dimensions([0.5, 0.5, 0.5], 1).tolist()
        [0]
    """
    table_row = np.asarray(table_row, dtype=np.float64)
    if d > table_row.shape[-1]:
        raise ConfigError(f"[select_dimensions] d={d} exceeds the number of dimensions {table_row.shape[-1]}")
    order = np.argsort(-table_row, kind="stable")
    return np.sort(order[:d])


def _selection_mask(phi: np.ndarray, d: int) -> np.ndarray:
    mask = np.zeros(phi.shape, dtype=bool)
    for pair, row in enumerate(phi):
        mask[pair, select_dimensions(row, d)] = True
    return mask


def f_loss_and_grad(batch: LabeledEmbeddingBatch, cfg: FLossConfig, with_grad: bool = True) -> FLossResult:
    """F-statistic loss, its gradient with respect to the embeddings and the smallest selected Φ.

    The gradient follows ``∂L/∂Φ = -1/Φ`` (zero where Φ is clamped), ``∂Φ/∂s = I'(x) ñ / (s + ñ)^2`` and the
    quotient rule on ``s``. Dimensions outside a pair's selection receive no gradient from that pair.

    Args:
        batch (LabeledEmbeddingBatch): embeddings and labels.
        cfg (FLossConfig): loss configuration.
        with_grad (bool, optional): compute the gradient. Defaults to True.

    Returns:
        FLossResult: loss, gradient (zeros when ``with_grad`` is False) and smallest selected Φ.
    """
    cfg.check_dim(batch.dim)
    stats = _pair_statistics(batch, cfg.grand_mean)
    phi, density = f_cdf_and_density(stats.s, stats.n_tilde[:, None])
    selected = _selection_mask(phi, cfg.d)
    clamped_phi = np.clip(phi, cfg.phi_floor, 1.0)

    loss = 0.0
    for pair in range(phi.shape[0]):
        loss += float(-np.sum(np.log(clamped_phi[pair][selected[pair]])))
    min_selected_phi = float(np.min(phi[selected]))

    grad = np.zeros_like(batch.embeddings)
    if not with_grad:
        return FLossResult(loss=loss, grad=grad, min_selected_phi=min_selected_phi)

    active = selected & (phi >= cfg.phi_floor)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d_loss_d_s = np.where(active, -density / phi, 0.0)
        gap_term = np.where(
            active,
            d_loss_d_s * 2.0 * stats.n_tilde[:, None] * stats.between_factor[:, None] * stats.mean_gap / stats.within,
            0.0,
        )
        spread_term = np.where(active & ~stats.within_clamped, d_loss_d_s * 2.0 * stats.s / stats.within, 0.0)

    n_labels = len(stats.labels)
    shift = np.zeros((n_labels, batch.dim))
    np.add.at(shift, stats.first, gap_term / stats.counts[stats.first][:, None])
    np.add.at(shift, stats.second, -gap_term / stats.counts[stats.second][:, None])
    spread = np.zeros((n_labels, batch.dim))
    np.add.at(spread, stats.first, spread_term)
    np.add.at(spread, stats.second, spread_term)

    residuals = batch.embeddings - stats.means[stats.label_of]
    grad = shift[stats.label_of] - spread[stats.label_of] * residuals
    return FLossResult(loss=loss, grad=grad, min_selected_phi=min_selected_phi)


def f_loss(batch: LabeledEmbeddingBatch, cfg: FLossConfig) -> float:
    """F-statistic loss ``L_F = -Σ_pairs Σ_{k ∈ D_αβ} ln max(Φ, phi_floor)``.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.floss import FLossConfig, LabeledEmbeddingBatch, f_loss
        >>> batch = LabeledEmbeddingBatch(np.array([[0.0], [1.0], [10.0], [11.0]]), np.array([0, 0, 1, 1]))
        >>> round(f_loss(batch, FLossConfig(d=1)), 7)
        0.0049752
    """
    return f_loss_and_grad(batch, cfg, with_grad=False).loss


def f_loss_grad(batch: LabeledEmbeddingBatch, cfg: FLossConfig) -> np.ndarray:
    """Gradient of :func:`f_loss` with respect to every embedding coordinate, shape (N, D)."""
    result = f_loss_and_grad(batch, cfg)
    log.debug(f"[f_loss_grad] loss={result.loss:.6g} min selected phi={result.min_selected_phi:.6g}")
    return result.grad
