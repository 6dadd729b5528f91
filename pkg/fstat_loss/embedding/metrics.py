"""Evaluation of embeddings.

* ``recall_at_k``: nearest-neighbour retrieval with L2 distances.
* modularity: every code dimension should carry information about at most one factor. The mutual information
  ``m_if`` between the 20-bin histogram of dimension ``i`` and factor ``f`` is compared with a template holding
  only its largest entry.
* explicitness: one-vs-rest logistic regression on the whole code recovers every factor value, scored by ROC AUC.
"""

from __future__ import annotations

import logging as log
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.stats import rankdata
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import mutual_info_score

from fstat_loss.embedding.errors import ConfigError, DataError, ShapeError
from fstat_loss.embedding.floss import LabeledEmbeddingBatch
from fstat_loss.embedding.output.disentanglement_report import DisentanglementReport, MutualInformationTable
from fstat_loss.embedding.utils import encode_labels

DEFAULT_BINS = 20
L2_PENALTY = 1e-4
MAX_ITERATIONS = 5000
TOLERANCE = 1e-8
SCORE_DECIMALS = 10


@dataclass(frozen=True)
class MutualInfoMatrix:
    """Mutual information in nats, shape (code dimensions, factors)."""

    m: np.ndarray
    factor_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeError(f"[MutualInfoMatrix] Expected a 2-D matrix, got shape {m.shape}")
        if np.any(m < 0.0):
            raise DataError("[MutualInfoMatrix] Mutual information must be non-negative")
        object.__setattr__(self, "m", m)

    def to_table(self) -> MutualInformationTable:
        names = self.factor_names or [f"factor{j}" for j in range(self.m.shape[1])]
        rows = [
            {"dimension": i, "factor": name, "mi": float(self.m[i, j])}
            for i in range(self.m.shape[0])
            for j, name in enumerate(names)
        ]
        return MutualInformationTable(factor_names=names, data=pd.DataFrame(rows), sort=False)


@dataclass(frozen=True)
class ModularityResult:
    per_dim: np.ndarray
    mean: float


@dataclass(frozen=True)
class ExplicitnessResult:
    per_value: dict
    mean: float


def discretize_code(values, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin index of every value in ``bins`` equal-width bins over ``[min, max]``; the top bin is closed.

    Example:
        >>> from fstat_loss.embedding.metrics import discretize_code
        >>> discretize_code([0.0, 0.5, 1.0], bins=2).tolist()
        [0, 1, 1]
        >>> discretize_code([3.0, 3.0]).tolist()
        [0, 0]
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if bins < 1:
        raise ConfigError(f"[discretize_code] bins must be positive: {bins}")
    if not np.all(np.isfinite(values)):
        raise DataError("[discretize_code] Code values must be finite")
    if len(values) == 0 or values.min() == values.max():
        return np.zeros(len(values), dtype=np.int64)
    edges = np.histogram_bin_edges(values, bins=bins)
    return np.digitize(values, edges[1:-1]).astype(np.int64)


def mutual_information(code_bins, factor_values) -> float:
    """Plug-in mutual information in nats between two discrete sequences.

    Example:
        >>> from fstat_loss.embedding.metrics import mutual_information
        >>> round(mutual_information([0, 0, 1, 1], [5, 5, 7, 7]), 7)
        0.6931472
    """
    _, code_bins = encode_labels(np.asarray(code_bins).ravel())
    _, factor_values = encode_labels(np.asarray(factor_values).ravel())
    if len(code_bins) != len(factor_values):
        raise ShapeError(f"[mutual_information] Lengths differ: {len(code_bins)} and {len(factor_values)}")
    if len(code_bins) == 0:
        raise ShapeError("[mutual_information] At least one instance is needed")
    return float(max(mutual_info_score(factor_values, code_bins), 0.0))


def mutual_information_matrix(
    codes, factor_values, factor_names: Union[list[str], None] = None, bins: int = DEFAULT_BINS
) -> MutualInfoMatrix:
    """Mutual information between every discretized code dimension and every factor."""
    codes = np.asarray(codes, dtype=np.float64)
    factor_values = np.asarray(factor_values)
    if codes.ndim != 2 or factor_values.ndim != 2 or len(codes) != len(factor_values):
        raise ShapeError(
            f"[mutual_information_matrix] Codes {codes.shape} and factor values {factor_values.shape} do not align"
        )
    binned = [discretize_code(codes[:, i], bins) for i in range(codes.shape[1])]
    m = np.array(
        [[mutual_information(b, factor_values[:, j]) for j in range(factor_values.shape[1])] for b in binned]
    )
    names = list(factor_names) if factor_names is not None else [f"factor{j}" for j in range(m.shape[1])]
    return MutualInfoMatrix(m.reshape(codes.shape[1], factor_values.shape[1]), names)


def modularity_score(m: Union[MutualInfoMatrix, np.ndarray]) -> ModularityResult:
    """Per-dimension modularity ``1 - δ_i`` and its mean.

    ``δ_i = Σ_f (m_if - t_if)^2 / (θ_i^2 (N - 1))`` where ``θ_i = max_f m_if`` and the template ``t_i`` keeps
    ``θ_i`` at the largest entry and zeros elsewhere. Dimensions with ``θ_i = 0`` score 0.

    Raises:
        ConfigError: fewer than 2 factors.

    Example:
        >>> from fstat_loss.embedding.metrics import modularity_score
        >>> modularity_score([[1.0, 0.0, 0.0], [0.8, 0.4, 0.0], [0.5, 0.5, 0.5]]).per_dim.round(12).tolist()
        [1.0, 0.875, 0.0]
    """
    m = m.m if isinstance(m, MutualInfoMatrix) else np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"[modularity_score] Expected a 2-D matrix, got shape {m.shape}")
    n_factors = m.shape[1]
    if n_factors < 2:
        raise ConfigError(f"[modularity_score] At least 2 factors are needed, got {n_factors}")

    theta = m.max(axis=1)
    template = np.zeros_like(m)
    rows = np.arange(m.shape[0])
    template[rows, m.argmax(axis=1)] = theta
    with np.errstate(divide="ignore", invalid="ignore"):
        deviation = np.sum((m - template) ** 2, axis=1) / (theta**2 * (n_factors - 1))
    per_dim = np.where(theta > 0.0, 1.0 - deviation, 0.0)
    per_dim = np.clip(per_dim, 0.0, 1.0)
    return ModularityResult(per_dim=per_dim, mean=float(np.mean(per_dim)))


def roc_auc(scores, positives) -> float:
    """Area under the ROC curve by the rank-sum formula with average ranks for ties.

    Example:
        >>> from fstat_loss.embedding.metrics import roc_auc
        >>> roc_auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True])
        0.75
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_positive = int(positives.sum())
    n_negative = len(positives) - n_positive
    if n_positive == 0 or n_negative == 0:
        raise DataError("[roc_auc] Both positive and negative instances are needed")
    ranks = rankdata(scores, method="average")
    return float((ranks[positives].sum() - n_positive * (n_positive + 1) / 2.0) / (n_positive * n_negative))


def _standardize(codes: np.ndarray) -> np.ndarray:
    sd = codes.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    return (codes - codes.mean(axis=0)) / sd


def _one_vs_rest_scores(train_x: np.ndarray, train_y: np.ndarray, test_x: np.ndarray) -> np.ndarray:
    """Decision values of an L2-penalized logistic regression (penalty ``L2_PENALTY`` on the mean log-loss)."""
    classifier = LogisticRegression(C=1.0 / (L2_PENALTY * len(train_y)), tol=TOLERANCE, max_iter=MAX_ITERATIONS)
    classifier.fit(train_x, train_y)
    return np.round(classifier.decision_function(test_x), SCORE_DECIMALS)


def _stratified_halves(values: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    first, second = [], []
    for value in np.unique(values):
        members = rng.permutation(np.flatnonzero(values == value))
        half = len(members) // 2
        first.append(members[:half])
        second.append(members[half:])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def explicitness_auc(
    codes, factor_values, split: bool = False, rng: Union[np.random.Generator, None] = None
) -> ExplicitnessResult:
    """One-vs-rest logistic regression AUC of every value of one factor, using the whole code as input.

    Codes are standardized per dimension. Values with fewer than 2 instances are skipped with a warning.

    Args:
        codes: [Shape (N, D)] code vectors.
        factor_values: [Shape (N,)] value of the factor for every instance.
        split (bool, optional): fit on one stratified half and score the other. Defaults to in-sample.
        rng (np.random.Generator, optional): generator for the split. Defaults to a generator seeded with 0.

    Raises:
        ShapeError: codes and values do not align.
        DataError: fewer than 2 usable values.

    Returns:
        ExplicitnessResult: AUC per value and their mean.
    """
    codes = np.asarray(codes, dtype=np.float64)
    factor_values = np.asarray(factor_values).ravel()
    if codes.ndim != 2 or len(codes) != len(factor_values):
        raise ShapeError(f"[explicitness_auc] Codes {codes.shape} and {len(factor_values)} values do not align")
    if not np.all(np.isfinite(codes)):
        raise DataError("[explicitness_auc] Codes must be finite")

    values, counts = np.unique(factor_values, return_counts=True)
    skipped = values[counts < 2].tolist()
    if len(skipped) > 0:
        log.warning(f"[explicitness_auc] Values with fewer than 2 instances skipped: {skipped}")
    keep = np.isin(factor_values, values[counts >= 2])
    codes, factor_values = _standardize(codes[keep]), factor_values[keep]
    values = np.unique(factor_values)
    if len(values) < 2:
        raise DataError(f"[explicitness_auc] At least 2 values with 2 instances are needed, got {len(values)}")

    if split:
        train, test = _stratified_halves(factor_values, np.random.default_rng(0) if rng is None else rng)
    else:
        train = test = np.arange(len(factor_values))

    per_value = {}
    for value in values:
        target = factor_values == value
        scores = _one_vs_rest_scores(codes[train], target[train], codes[test])
        per_value[value.item() if hasattr(value, "item") else value] = roc_auc(scores, target[test])
    return ExplicitnessResult(per_value=per_value, mean=float(np.mean(list(per_value.values()))))


def recall_at_k(
    references: LabeledEmbeddingBatch,
    queries: Union[LabeledEmbeddingBatch, None] = None,
    k: int = 1,
) -> float:
    """Share of queries whose ``k`` nearest references (L2) include one with the same label.

    When ``queries`` is omitted the references are queried against themselves, each excluding itself.

    Example:
        >>> import numpy as np
        >>> from fstat_loss.embedding.floss import LabeledEmbeddingBatch
        >>> from fstat_loss.embedding.metrics import recall_at_k
        >>> references = LabeledEmbeddingBatch(np.array([[0.0], [10.0]]), np.array(["A", "B"]))
        >>> recall_at_k(references, LabeledEmbeddingBatch(np.array([[1.0], [9.0]]), np.array(["A", "A"])))
        0.5
    """
    if k < 1:
        raise ConfigError(f"[recall_at_k] k must be at least 1: {k}")
    if len(references.labels) == 0:
        raise DataError("[recall_at_k] References are empty")
    same_set = queries is None or queries is references
    queries = references if queries is None else queries
    if queries.dim != references.dim:
        raise ShapeError(f"[recall_at_k] Queries of dimension {queries.dim}, references of {references.dim}")

    distances = cdist(queries.embeddings, references.embeddings)
    if same_set:
        np.fill_diagonal(distances, np.inf)
    available = len(references.labels) - (1 if same_set else 0)
    if available < 1:
        raise DataError("[recall_at_k] No reference left once the query itself is excluded")
    nearest = np.argsort(distances, axis=1, kind="stable")[:, : min(k, available)]

    _, codes = encode_labels(np.concatenate([references.labels, queries.labels]))
    reference_codes, query_codes = codes[: len(references.labels)], codes[len(references.labels) :]
    hits = np.any(reference_codes[nearest] == query_codes[:, None], axis=1)
    return float(np.mean(hits))


@dataclass(frozen=True)
class EvaluationConfig:
    """Options of :func:`evaluate_disentanglement`.

    Attributes:
        bins (int): histogram bins per code dimension.
        explicitness_split (bool): score explicitness on a held-out stratified half.
        seed (int): seed of the explicitness split.
    """

    bins: int = DEFAULT_BINS
    explicitness_split: bool = False
    seed: int = 0


def evaluate_disentanglement(
    codes,
    factor_values,
    factor_names: list[str],
    config: Union[EvaluationConfig, None] = None,
    metadata: Union[dict, None] = None,
    recall_labels=None,
) -> DisentanglementReport:
    """Modularity and explicitness of a code with respect to the given factors, plus recall@1 on request.

    With a single factor every dimension trivially informs at most one factor and scores 1. Factors showing fewer
    than 2 usable values among the instances (a held-out conjunction fold can fix a factor) are left out of the
    explicitness scores with a warning.

    Args:
        codes: [Shape (N, D)] code vectors.
        factor_values: [Shape (N, F)] factor values aligned with the codes.
        factor_names (list[str]): names of the F factors.
        config (EvaluationConfig, optional): evaluation options.
        metadata (dict, optional): provenance stored in the report.
        recall_labels (optional): class labels; when given recall@1 of the codes against themselves is reported.

    Returns:
        DisentanglementReport: the report.
    """
    config = EvaluationConfig() if config is None else config
    codes = np.asarray(codes, dtype=np.float64)
    factor_values = np.asarray(factor_values).reshape(len(codes), -1)
    if factor_values.shape[1] != len(factor_names):
        raise ShapeError(
            f"[evaluate_disentanglement] {factor_values.shape[1]} factor columns, {len(factor_names)} names"
        )

    mi = mutual_information_matrix(codes, factor_values, factor_names, config.bins)
    if len(factor_names) == 1:
        modularity = np.ones(codes.shape[1])
    else:
        modularity = modularity_score(mi).per_dim

    rng = np.random.default_rng(config.seed)
    explicitness = []
    for j, name in enumerate(factor_names):
        try:
            result = explicitness_auc(codes, factor_values[:, j], split=config.explicitness_split, rng=rng)
        except DataError as error:
            log.warning(f"[evaluate_disentanglement] Factor {name} left out of explicitness: {error}")
            continue
        explicitness += [{"factor": name, "value": value, "auc": auc} for value, auc in result.per_value.items()]

    recall = None
    if recall_labels is not None:
        recall = recall_at_k(LabeledEmbeddingBatch(codes, recall_labels), k=1)

    report = DisentanglementReport(
        modularity_per_dim=[float(v) for v in modularity],
        explicitness_per_factor_value=explicitness,
        mutual_information=mi.to_table(),
        recall_at_1=recall,
        metadata=dict(metadata or {}),
    )
    log.info(
        f"[evaluate_disentanglement] modularity={report.modularity_mean:.4f} "
        f"explicitness={report.explicitness_mean:.4f}" + ("" if recall is None else f" recall@1={recall:.4f}")
    )
    return report
