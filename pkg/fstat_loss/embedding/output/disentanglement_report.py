from __future__ import annotations

import json
import logging as log
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import plotly.graph_objects as go

from fstat_loss.embedding.aggregation import Aggregation


class MutualInformationTable(Aggregation):
    """Long format mutual information, one row per (code dimension, factor)."""

    _columns = ["dimension", "factor", "mi"]
    _indices = ["dimension", "factor"]
    _required_columns = ["dimension", "factor", "mi"]
    _default_column_values = {}
    _columns_type = {"dimension": int, "factor": str, "mi": float}

    def __init__(self, factor_names: Union[list[str], None] = None, **kwargs):
        super().__init__(**kwargs)
        self.factor_names = factor_names

    def matrix(self) -> np.ndarray:
        factor_names = self.factor_names or sorted(self._data["factor"].unique().tolist())
        pivot = self._data.pivot(index="dimension", columns="factor", values="mi")
        return pivot[factor_names].to_numpy(dtype=np.float64)

    def plot(self, path: str, width: int = 700, height: int = 600, title: str = "Mutual information (nats)"):
        """Heatmap of the mutual information between every code dimension and every factor."""
        factor_names = self.factor_names or sorted(self._data["factor"].unique().tolist())
        dimensions = sorted(self._data["dimension"].unique().tolist())
        fig = go.Figure(
            data=[
                go.Heatmap(
                    z=self.matrix(),
                    x=factor_names,
                    y=[f"z{d}" for d in dimensions],
                    colorscale="Viridis",
                    colorbar=dict(title="nats"),
                )
            ]
        )
        fig.update_layout(width=width, height=height, title=title, xaxis_title="factor", yaxis_title="dimension")
        fig.write_html(path)
        log.info(f"[{self.__class__.__name__}] Heatmap written to {path}")


def _json_value(value):
    """Non-finite floats become None (JSON null), recursively."""
    if isinstance(value, dict):
        return {key: _json_value(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(item) for item in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


@dataclass
class DisentanglementReport:
    """Modularity, explicitness and recall of a code.

    Attributes:
        modularity_per_dim (list[float]): ``1 - δ_i`` of every code dimension.
        explicitness_per_factor_value (list[dict]): ``{"factor", "value", "auc"}`` records.
        mutual_information (MutualInformationTable): mutual information behind the modularity scores.
        recall_at_1 (float | None): recall@1 when it was computed.
        metadata (dict): free-form provenance (seed, dataset, model).
    """

    modularity_per_dim: list[float]
    explicitness_per_factor_value: list[dict]
    mutual_information: MutualInformationTable
    recall_at_1: Union[float, None] = None
    metadata: dict = field(default_factory=dict)

    @property
    def modularity_mean(self) -> float:
        return float(np.mean(self.modularity_per_dim))

    @property
    def explicitness_mean(self) -> float:
        if len(self.explicitness_per_factor_value) == 0:
            return float("nan")
        return float(np.mean([record["auc"] for record in self.explicitness_per_factor_value]))

    def explicitness_by_factor(self) -> dict[str, float]:
        factors: dict[str, list[float]] = {}
        for record in self.explicitness_per_factor_value:
            factors.setdefault(record["factor"], []).append(record["auc"])
        return {factor: float(np.mean(aucs)) for factor, aucs in factors.items()}

    def to_dict(self) -> dict:
        """JSON-ready document. A mean with nothing to average (no factor could be scored) is None."""
        document = {
            "modularity": {"per_dim": [float(v) for v in self.modularity_per_dim], "mean": self.modularity_mean},
            "explicitness": {
                "per_factor_value": self.explicitness_per_factor_value,
                "per_factor": self.explicitness_by_factor(),
                "mean": self.explicitness_mean,
            },
            "recall_at_1": self.recall_at_1,
            "metadata": self.metadata,
        }
        return _json_value(document)

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
        log.info(f"[{self.__class__.__name__}] Report written to {path}")
