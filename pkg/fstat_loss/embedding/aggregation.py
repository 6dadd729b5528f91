"""Schema-checked pandas tables.

Datasets, code tables, training logs and mutual-information tables are all pandas frames with a fixed set of
columns, a key identifying each row and a dtype per column. :class:`Aggregation` holds the frame and brings every
assigned frame into that shape.
"""

from __future__ import annotations

import json
import logging as log
from typing import Union

import pandas as pd

FLOAT_FORMAT = "%.17g"
HEADER_PREFIX = "#"


class Aggregation:
    """Table whose columns, key and dtypes are declared by the subclass.

    Class attributes declare the schema. Tables whose columns depend on the content (factor names, observation or
    code width) set the same attributes on the instance before calling ``__init__``.

    Attributes:
        _columns (list): columns of the table, in output order.
        _indices (list): columns forming the row key. Rows sharing a key keep the last one.
        _required_columns (list): columns that must be present in an assigned frame.
        _default_column_values (dict): value of an optional column when it is absent or empty.
        _columns_type (dict): dtype each column is cast to.

    Raises:
        ValueError: a required column is missing.
        TypeError: the assigned data is not a DataFrame.
    """

    _columns = []
    _indices = []
    _required_columns = []
    _default_column_values = {}
    _columns_type = {}

    def __init__(self, data: Union[pd.DataFrame, None] = None, sort: bool = True):
        """
        Args:
            data (Union[pd.DataFrame, None], optional): table content. None gives an empty table. Defaults to None.
            sort (bool, optional): keep rows ordered by key. Defaults to True.

        Examples:
            >>> from fstat_loss.embedding.aggregation import Aggregation
            >>> Aggregation()
            Empty Aggregation
        """
        self._sort = sort
        self.data = data

    @property
    def data(self) -> pd.DataFrame:
        """Copy of the table.

        Examples:
            >>> import pandas as pd
            >>> from fstat_loss.embedding.aggregation import Aggregation
            >>> table = Aggregation()
            >>> table._columns = ['epoch', 'train_loss']
            >>> table._indices = ['epoch']
            >>> table._required_columns = ['epoch']
            >>> table.data = pd.DataFrame([{'train_loss': 0.5}])
            Traceback (most recent call last):
                ...
            ValueError: [Aggregation] Required columns not found: epoch

            Cells are cast to the declared dtype and absent optional columns take their default:

            >>> table._default_column_values = {'train_loss': 0.0}
            >>> table._columns_type = {'epoch': int, 'train_loss': float}
            >>> table.data = pd.DataFrame([{'epoch': '2'}, {'epoch': 1, 'train_loss': 0.5}])
            >>> table
               epoch  train_loss
            0      1         0.5
            1      2         0.0
        """
        return self.__data.copy()

    @property
    def _data(self) -> pd.DataFrame:
        """The table itself, for read-only queries."""
        return self.__data

    @data.setter
    def data(self, data: Union[pd.DataFrame, None]):
        if data is None:
            data = pd.DataFrame(columns=self._columns)
        self.__data = self._conform(data)

    def _conform(self, data: pd.DataFrame) -> pd.DataFrame:
        if not isinstance(data, pd.DataFrame):
            raise TypeError(f"[{self.__class__.__name__}] Invalid data type: {type(data).__name__}")

        missing = [c for c in self._required_columns if c not in data.columns]
        if len(missing) > 0:
            raise ValueError(f"[{self.__class__.__name__}] Required columns not found: {', '.join(map(str, missing))}")
        unknown = [c for c in data.columns if c not in self._columns]
        if len(unknown) > 0:
            log.warning(f"[{self.__class__.__name__}] Ignoring unknown columns: {', '.join(map(str, unknown))}")

        data = data.copy()
        for column in self._columns:
            if column not in data.columns:
                data[column] = self._default_column_values.get(column)
        defaults = {c: v for c, v in self._default_column_values.items() if c in data.columns}
        if len(defaults) > 0:
            data = data.fillna(defaults)

        data = data[self._columns]
        casts = {c: t for c, t in self._columns_type.items() if data[c].dtype != t}
        if len(casts) > 0:
            data = data.astype(casts)

        if len(self._indices) > 0 and len(data) > 0:
            data = data.drop_duplicates(subset=self._indices, keep="last")
            if self._sort:
                data = data.sort_values(by=self._indices, kind="stable")
        return data.reset_index(drop=True)

    def add(self, **values):
        """Append one row, replacing the row with the same key if there is one.

        Examples:
            >>> from fstat_loss.embedding.aggregation import Aggregation
            >>> table = Aggregation()
            >>> table._columns = ['epoch', 'train_loss']
            >>> table._indices = ['epoch']
            >>> table.add(epoch=0, train_loss=1.5)
            >>> table.add(epoch=0, train_loss=0.5)
            >>> table
               epoch  train_loss
            0      0         0.5
        """
        row = self._conform(pd.DataFrame([values]))
        self.data = row if len(self._data) == 0 else pd.concat([self._data, row], ignore_index=True)

    def to_csv(self, path: str):
        self._data.to_csv(path, index=False, float_format=FLOAT_FORMAT)

    def to_file(self, path: str, header: dict):
        """Write a ``#``-prefixed JSON header line followed by the table as CSV.

        Args:
            path (str): output file.
            header (dict): JSON serializable metadata.
        """
        with open(path, "w", newline="") as f:
            f.write(HEADER_PREFIX + json.dumps(header, sort_keys=True) + "\n")
            self._data.to_csv(f, index=False, float_format=FLOAT_FORMAT)

    @staticmethod
    def read_file(path: str) -> tuple[dict, pd.DataFrame]:
        """Header and table of a file written by :meth:`to_file`.

        Raises:
            ValueError: the first line is not a JSON header.
        """
        with open(path, "r", newline="") as f:
            first_line = f.readline()
            if not first_line.startswith(HEADER_PREFIX):
                raise ValueError(f"[Aggregation] Missing JSON header in {path}")
            header = json.loads(first_line[len(HEADER_PREFIX):])
            data = pd.read_csv(f, float_precision="round_trip")
        return header, data

    def __len__(self) -> int:
        return len(self._data)

    def __getitem__(self, column: str | list) -> pd.Series | pd.DataFrame:
        return self.data[column]

    def __repr__(self) -> str:
        if len(self) == 0:
            return f"Empty {self.__class__.__name__}"
        return repr(self._data)
