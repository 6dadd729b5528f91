from __future__ import annotations

from typing import Union

import numpy as np
import pandas as pd

from fstat_loss.embedding.aggregation import Aggregation
from fstat_loss.embedding.errors import DataError

CODES_KIND = "codes"


def code_columns(code_dim: int) -> list[str]:
    return [f"z{i}" for i in range(code_dim)]


class CodeTable(Aggregation):
    """Codes (embeddings) of labelled instances.

    Columns are ``instance``, one integer column per factor and ``z0 .. z{D-1}``.

    Example:
        >>> import pandas as pd
        >>> from fstat_loss.embedding.input.code_table import CodeTable
        >>> table = CodeTable(["f1"], 2, pd.DataFrame({"instance": [0, 1], "f1": [0, 1], "z0": [0.0, 1.0],
        ...                                            "z1": [0.0, 0.0]}))
        >>> table.codes().shape, table.factor_matrix().ravel().tolist()
        ((2, 2), [0, 1])
    """

    def __init__(
        self,
        factor_names: list[str],
        code_dim: int,
        data: Union[pd.DataFrame, None] = None,
        metadata: Union[dict, None] = None,
        **kwargs,
    ):
        self.factor_names = list(factor_names)
        self.code_dim = int(code_dim)
        self.metadata = dict(metadata or {})
        self._columns = ["instance"] + self.factor_names + code_columns(self.code_dim)
        self._indices = ["instance"]
        self._required_columns = list(self._columns)
        self._default_column_values = {}
        self._columns_type = {
            "instance": int,
            **{name: int for name in self.factor_names},
            **{column: float for column in code_columns(self.code_dim)},
        }
        super().__init__(data=data, **kwargs)

    @classmethod
    def from_arrays(
        cls, codes: np.ndarray, factor_values: np.ndarray, factor_names: list[str], metadata: Union[dict, None] = None
    ) -> CodeTable:
        codes = np.asarray(codes, dtype=np.float64)
        factor_values = np.asarray(factor_values, dtype=np.int64).reshape(len(codes), len(factor_names))
        data = pd.DataFrame(codes, columns=code_columns(codes.shape[1]))
        for j, name in enumerate(factor_names):
            data.insert(j, name, factor_values[:, j])
        data.insert(0, "instance", np.arange(len(codes)))
        return cls(factor_names, codes.shape[1], data, metadata=metadata)

    def codes(self) -> np.ndarray:
        return self._data[code_columns(self.code_dim)].to_numpy(dtype=np.float64)

    def factor_matrix(self) -> np.ndarray:
        return self._data[self.factor_names].to_numpy(dtype=np.int64)

    def header(self) -> dict:
        return {"kind": CODES_KIND, "factors": self.factor_names, "code_dim": self.code_dim, **self.metadata}

    def to_file(self, path: str):
        super().to_file(path, header=self.header())


class GoldenCode(CodeTable):
    """Hand-built two-dimensional code with known disentangling properties.

    Attributes:
        pattern (str): pattern id, ``a`` .. ``p``.
        expected_modular (bool): whether the code is modular.
        expected_explicit (dict[str, bool]): whether each factor is linearly recoverable from the code.
    """

    def __init__(
        self,
        pattern: str,
        expected_modular: bool,
        expected_explicit: dict[str, bool],
        factor_names: list[str],
        data: Union[pd.DataFrame, None] = None,
        **kwargs,
    ):
        self.pattern = pattern
        self.expected_modular = bool(expected_modular)
        self.expected_explicit = {name: bool(expected_explicit[name]) for name in factor_names}
        super().__init__(factor_names, 2, data, **kwargs)

    @property
    def expected_all_explicit(self) -> bool:
        return all(self.expected_explicit.values())

    def header(self) -> dict:
        return {
            **super().header(),
            "pattern": self.pattern,
            "expected_modular": self.expected_modular,
            "expected_explicit": self.expected_explicit,
        }


def read_codes(path: str) -> CodeTable:
    """Read a codes file; files carrying a pattern id come back as :class:`GoldenCode`."""
    header, data = Aggregation.read_file(path)
    if header.get("kind") != CODES_KIND:
        raise DataError(f"[read_codes] {path} is not a codes file: kind={header.get('kind')}")
    factor_names = list(header["factors"])
    if "pattern" in header:
        return GoldenCode(
            header["pattern"], header["expected_modular"], header["expected_explicit"], factor_names, data
        )
    metadata = {k: v for k, v in header.items() if k not in ("kind", "factors", "code_dim")}
    return CodeTable(factor_names, int(header["code_dim"]), data, metadata=metadata)
