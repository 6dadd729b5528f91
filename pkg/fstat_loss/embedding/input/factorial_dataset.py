from __future__ import annotations

import logging as log
from typing import Union

import numpy as np
import pandas as pd

from fstat_loss.embedding.aggregation import Aggregation
from fstat_loss.embedding.errors import DataError
from fstat_loss.embedding.input.factor_spec import FactorSpec

DATASET_KIND = "factorial_dataset"


def observation_columns(observation_dim: int) -> list[str]:
    return [f"o{i}" for i in range(observation_dim)]


class FactorialDataset(Aggregation):
    """Instances with an observation vector and one integer value per generative factor.

    Columns are ``instance``, one column per factor and ``o0 .. o{M-1}``.

    Example:
        >>> import pandas as pd
        >>> from fstat_loss.embedding.input.factor_spec import Factor, FactorSpec
        >>> from fstat_loss.embedding.input.factorial_dataset import FactorialDataset
        >>> spec = FactorSpec([Factor("a", 2)], 1, 2)
        >>> dataset = FactorialDataset(spec, pd.DataFrame({"instance": [1, 0], "a": [1, 0], "o0": [0.5, 0.0],
        ...                                                 "o1": [1.5, 1.0]}))
        >>> dataset.factor_matrix().tolist(), dataset.observations().tolist()
        ([[0], [1]], [[0.0, 1.0], [0.5, 1.5]])
    """

    def __init__(self, spec: FactorSpec, data: Union[pd.DataFrame, None] = None, **kwargs):
        self.spec = spec
        self._columns = ["instance"] + spec.factor_names + observation_columns(spec.observation_dim)
        self._indices = ["instance"]
        self._required_columns = list(self._columns)
        self._default_column_values = {}
        self._columns_type = {
            "instance": int,
            **{name: int for name in spec.factor_names},
            **{column: float for column in observation_columns(spec.observation_dim)},
        }
        super().__init__(data=data, **kwargs)
        self._check_values()

    def _check_values(self):
        for factor in self.spec.factors:
            values = self._data[factor.name]
            if len(values) > 0 and (values.min() < 0 or values.max() >= factor.value_count):
                raise DataError(
                    f"[{self.__class__.__name__}] Values of factor {factor.name} outside 0..{factor.value_count - 1}"
                )
        if not np.all(np.isfinite(self.observations())):
            raise DataError(f"[{self.__class__.__name__}] Non-finite observations")

    @property
    def factor_names(self) -> list[str]:
        return self.spec.factor_names

    @property
    def class_factor_names(self) -> list[str]:
        return self.spec.class_factor_names

    @property
    def class_factor_indices(self) -> list[int]:
        return [self.factor_names.index(name) for name in self.class_factor_names]

    def observations(self) -> np.ndarray:
        return self._data[observation_columns(self.spec.observation_dim)].to_numpy(dtype=np.float64)

    def factor_matrix(self, names: Union[list[str], None] = None) -> np.ndarray:
        """Factor values, shape (N, F), for ``names`` (all factors by default)."""
        names = self.factor_names if names is None else names
        return self._data[names].to_numpy(dtype=np.int64)

    def to_file(self, path: str):
        super().to_file(path, header={"kind": DATASET_KIND, "spec": self.spec.to_dict()})
        log.info(f"[{self.__class__.__name__}] {len(self)} instances written to {path}")

    @classmethod
    def from_file(cls, path: str) -> FactorialDataset:
        header, data = Aggregation.read_file(path)
        if header.get("kind") != DATASET_KIND:
            raise DataError(f"[{cls.__name__}] {path} is not a factorial dataset file: kind={header.get('kind')}")
        return cls(FactorSpec.from_dict(header["spec"]), data)
