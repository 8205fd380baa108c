"""
Base model classes with common functionality.

Domain types are frozen dataclasses holding numpy arrays. This module
provides the shared serialization and representation helpers.
"""

import dataclasses
from typing import Any

import numpy as np


class ArrayModel:
    """
    Mixin for dataclass models whose fields include numpy arrays.

    Provides:
    - A dictionary view with arrays summarized by shape
    - A compact ``__repr__`` that never prints array contents
    """

    def to_dict(self) -> dict:
        """
        Convert the model instance to a dictionary.

        Returns:
            dict: Field values; arrays are replaced by their shape and dtype
        """
        result: dict[str, Any] = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, np.ndarray):
                value = {"shape": list(value.shape), "dtype": str(value.dtype)}
            result[field.name] = value
        return result

    def __repr__(self) -> str:
        parts = []
        for key, value in self.to_dict().items():
            if isinstance(value, dict) and "shape" in value:
                value = "x".join(str(s) for s in value["shape"]) or "scalar"
            parts.append(f"{key}={value}")
        return f"<{self.__class__.__name__}({', '.join(parts)})>"


def frozen_array(values: Any, dtype=np.float64, ndim: int | None = None) -> np.ndarray:
    """
    Copy ``values`` into a contiguous read-only array.

    Args:
        values: Array-like input
        dtype: Target dtype
        ndim: Required number of dimensions, if any

    Returns:
        np.ndarray: C-contiguous array with the write flag cleared

    Raises:
        ValueError: If ``ndim`` is given and does not match
    """
    array = np.array(values, dtype=dtype, order="C", copy=True)
    if ndim is not None and array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array
