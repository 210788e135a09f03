"""Immutable dense float64 tensors.

All gradient-bearing computation runs in 64-bit so finite-difference checks
at 1e-5 relative tolerance are meaningful. Tensors are value types: once
constructed their storage is frozen, which is what makes computation records
safe to differentiate while other records reuse the same tensors.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import NumericError


class Tensor:
    """A frozen float64 array with row-major storage."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in tensor of shape {arr.shape}")
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        """Read-only ndarray view of the values."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def item(self) -> float:
        """The value of a scalar (shape ()) tensor."""
        return float(self._data)

    def tolist(self):
        return self._data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self._data!r})"


def tensor(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data)


def zeros(shape: int | Iterable[int]) -> Tensor:
    return Tensor(np.zeros(shape))


def ones(shape: int | Iterable[int]) -> Tensor:
    return Tensor(np.ones(shape))
