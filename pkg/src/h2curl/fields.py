"""Callable vector fields with their curl and curl-curl."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Field:
    """A smooth 2D vector field given by closed-form callables.

    ``value(x, y)`` returns an array of shape ``x.shape + (2,)``; ``curl``
    returns ``x.shape``; ``curlcurl`` returns ``x.shape + (2,)``.
    """

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    curl: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    curlcurl: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __call__(self, x, y):
        return self.value(x, y)


def constant_field(c1: float, c2: float) -> Field:
    def value(x, y):
        x = np.asarray(x, dtype=float)
        out = np.empty(np.broadcast(x, y).shape + (2,))
        out[..., 0] = c1
        out[..., 1] = c2
        return out

    def zero(x, y):
        return np.zeros(np.broadcast(np.asarray(x, float), y).shape)

    def zero_vec(x, y):
        return np.zeros(np.broadcast(np.asarray(x, float), y).shape + (2,))

    return Field(value, zero, zero_vec)
