"""Order statistics shared by the estimators."""

from typing import Iterable, Union

import numpy as np

from src.core.errors import ParameterError


def lower_median(values: Union[np.ndarray, Iterable[float]]) -> float:
    """
    Lower median: the element of rank floor((n - 1) / 2) in sorted order.

    Raises:
        ParameterError: If values is empty.
    """
    arr = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values).ravel())
    if arr.size == 0:
        raise ParameterError("median of an empty collection")
    return arr[(arr.size - 1) // 2].item()
