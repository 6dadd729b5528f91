from __future__ import annotations

import logging as log

import plotly.graph_objects as go
from plotly.subplots import make_subplots

from fstat_loss.embedding.aggregation import Aggregation


class TrainingLog(Aggregation):
    """One row per training epoch.

    ``grad_norm`` is the largest absolute gradient of the loss with respect to the embeddings seen during the epoch
    and ``min_phi`` the smallest separation probability among the selected dimensions (empty for the triplet loss).

    Example:
        >>> from fstat_loss.embedding.output.training_log import TrainingLog
        >>> training_log = TrainingLog()
        >>> training_log.add(epoch=1, train_loss=0.5, val_metric=0.75, grad_norm=0.1)
        >>> training_log["val_metric"].tolist()
        [0.75]
    """

    _columns = ["epoch", "train_loss", "val_metric", "grad_norm", "min_phi"]
    _indices = ["epoch"]
    _required_columns = ["epoch", "train_loss", "val_metric"]
    _default_column_values = {"grad_norm": float("nan"), "min_phi": float("nan")}
    _columns_type = {"epoch": int, "train_loss": float, "val_metric": float, "grad_norm": float, "min_phi": float}

    def __init__(self, name: str = "training", **kwargs):
        super().__init__(**kwargs)
        self.name = name

    def to_csv(self, path: str):
        super().to_csv(path)
        log.info(f"[{self.__class__.__name__}] {len(self)} epochs written to {path}")

    def plot(self, path: str, width: int = 900, height: int = 500):
        """Train loss and validation metric per epoch."""
        fig = make_subplots(specs=[[{"secondary_y": True}]])
        fig.add_trace(go.Scatter(x=self._data["epoch"], y=self._data["train_loss"], name="train loss"))
        fig.add_trace(
            go.Scatter(x=self._data["epoch"], y=self._data["val_metric"], name="validation metric"), secondary_y=True
        )
        fig.update_layout(width=width, height=height, title=self.name, xaxis_title="epoch")
        fig.update_yaxes(title_text="train loss", secondary_y=False)
        fig.update_yaxes(title_text="validation metric", secondary_y=True)
        fig.write_html(path)
        log.info(f"[{self.__class__.__name__}] Training curves written to {path}")
