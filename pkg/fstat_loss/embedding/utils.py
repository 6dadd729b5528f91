from __future__ import annotations

import functools
import logging as log
from typing import Any, Iterable

import numpy as np

from fstat_loss.embedding.errors import TrainingDivergenceError


def unique(my_list: Iterable) -> list:
    """Get the unique values of a list keeping the order in which the elements appear.

    Labels are enumerated with this function, so class pairs always come out in
    first-appearance order.

    Args:
        my_list (Iterable): elements with repetitions.

    Returns:
        list: list without repeated elements.

    Example:
        >>> from fstat_loss.embedding.utils import unique
        >>> unique([1, "1", 2, 1, 3])
        [1, '1', 2, 3]
        >>> unique(["b", "a", "b"])
        ['b', 'a']
    """
    used = set()
    return [x for x in my_list if x not in used and (used.add(x) or True)]


def _short_repr(value: Any) -> str:
    if isinstance(value, np.ndarray):
        return f"ndarray(shape={value.shape})"
    text = repr(value)
    return text if len(text) <= 80 else f"{type(value).__name__}(...)"


def _all_finite(value: Any) -> bool:
    if isinstance(value, (tuple, list)):
        return all(_all_finite(v) for v in value)
    if isinstance(value, (float, int, np.floating, np.ndarray)):
        return bool(np.all(np.isfinite(value)))
    return True


def check_finite_decorator(func):
    """Decorator that checks that every numeric value returned by ``func`` is finite. In case it is not, the call is
    logged with its arguments and a TrainingDivergenceError is raised. Otherwise the value is returned untouched.

    Args:
        func (function): loss or gradient function.

    Returns:
        The value returned by ``func``.

    Example:
        >>> from fstat_loss.embedding.utils import check_finite_decorator
        >>> @check_finite_decorator
        ... def finite_func():
        ...     return 1.0
        >>> finite_func()
        1.0
        >>> @check_finite_decorator
        ... def infinite_func():
        ...     return float("inf")
        >>> infinite_func()
        Traceback (most recent call last):
            ...
        fstat_loss.embedding.errors.TrainingDivergenceError: [infinite_func] Non-finite result: infinite_func()
    """

    @functools.wraps(func)
    def wrapper_decorator(*args, **kargs):
        value = func(*args, **kargs)
        if not _all_finite(value):
            args_repr = ", ".join([_short_repr(a) for a in args] + [f"{k}={_short_repr(v)}" for k, v in kargs.items()])
            message = f"[{func.__name__}] Non-finite result: {func.__name__}({args_repr})"
            log.error(message)
            raise TrainingDivergenceError(message)
        return value

    return wrapper_decorator


def as_label_array(labels: Iterable) -> np.ndarray:
    """One-dimensional array of labels. Tuple labels (factor conjunctions) are kept as single elements.

    Example:
        >>> from fstat_loss.embedding.utils import as_label_array
        >>> as_label_array([(0, 1), (1, 1)]).shape
        (2,)
        >>> as_label_array(["A", "B", "A"]).tolist()
        ['A', 'B', 'A']
    """
    if isinstance(labels, np.ndarray) and labels.ndim == 1:
        return labels
    labels = list(labels)
    if any(isinstance(label, tuple) for label in labels):
        array = np.empty(len(labels), dtype=object)
        array[:] = labels
        return array
    return np.asarray(labels)


def encode_labels(labels: Iterable) -> tuple[list, np.ndarray]:
    """Distinct labels in order of first appearance and the position of every label in that list.

    Example:
        >>> from fstat_loss.embedding.utils import encode_labels
        >>> values, codes = encode_labels(["b", "a", "b"])
        >>> values, codes.tolist()
        (['b', 'a'], [0, 1, 0])
    """
    labels = as_label_array(labels).tolist()
    values = unique(labels)
    position = {value: i for i, value in enumerate(values)}
    return values, np.array([position[label] for label in labels], dtype=np.int64)


def spawn_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 64-bit seeds derived from one seed.

    Example:
        >>> from fstat_loss.embedding.utils import spawn_seeds
        >>> spawn_seeds(7, 3) == spawn_seeds(7, 3), len(set(spawn_seeds(7, 3)))
        (True, 3)
    """
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
