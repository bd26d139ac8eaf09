"""Dense-tensor substrate shared by every other module.

Tensors are plain ``numpy.float64`` arrays in row-major (C) order with the
temporal axis outermost.  This module adds the few domain records and
helpers the SGS operator needs on top of numpy: the feature sequence
container, a seeded generator, spatial pooling and a central-difference
gradient oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Tensor = np.ndarray


class SgsError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SgsError, ValueError):
    """Shapes of the operands do not agree."""


class ConfigError(SgsError, ValueError):
    """Invalid configuration value."""


class NonFiniteError(SgsError, ValueError):
    """A NaN or infinity showed up where finite values are required."""


@dataclass(frozen=True)
class FeatureSequence:
    """Temporal stack of feature maps with shape ``(T, C, H, W)``."""

    frames: Tensor

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64, order="C")
        if frames.ndim != 4:
            raise DimensionError(f"expected a T x C x H x W tensor, got shape {frames.shape}")
        if min(frames.shape) < 1:
            raise DimensionError(f"all dimensions must be >= 1, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise NonFiniteError("feature sequence contains non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def C(self) -> int:
        return self.frames.shape[1]

    @property
    def H(self) -> int:
        return self.frames.shape[2]

    @property
    def W(self) -> int:
        return self.frames.shape[3]

    def permuted(self, order) -> "FeatureSequence":
        return FeatureSequence(self.frames[np.asarray(order)])


class SeededRng:
    """Seeded random stream backed by numpy's PCG64 bit generator.

    The algorithm is fixed (PCG64 with the seed fed through numpy's
    ``SeedSequence``), so equal seeds give equal streams on every platform.
    An instance is single-owner; use :meth:`child` to hand out independent
    streams instead of sharing one between threads.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape, scale=1.0) -> Tensor:
        return self._gen.standard_normal(shape) * scale

    def uniform(self, low, high, shape) -> Tensor:
        return self._gen.uniform(low, high, shape)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n) -> np.ndarray:
        return self._gen.permutation(n)

    def child(self, key: int) -> "SeededRng":
        """Independent stream derived from ``(seed, key)``."""
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, int(key)])
        rng = SeededRng.__new__(SeededRng)
        rng.seed = self.seed
        rng._gen = np.random.Generator(np.random.PCG64(ss))
        return rng


def gap_spatial(seq: FeatureSequence) -> Tensor:
    """Mean over H x W of every (t, c) map; returns a ``(T, C)`` tensor."""
    return seq.frames.mean(axis=(2, 3))


def gap_spatial_backward(grad_pooled: Tensor, H: int, W: int) -> Tensor:
    """Spread a ``(T, C)`` gradient uniformly over each H x W map."""
    grad_pooled = np.asarray(grad_pooled, dtype=np.float64)
    if grad_pooled.ndim != 2:
        raise DimensionError(f"expected a T x C gradient, got shape {grad_pooled.shape}")
    scaled = grad_pooled / (H * W)
    return np.broadcast_to(scaled[:, :, None, None], grad_pooled.shape + (H, W)).copy()


def finite_diff(fn: Callable[[Tensor], float], at: Tensor, eps: float | None = None) -> Tensor:
    """Central-difference gradient of a scalar function.

    ``eps=None`` uses a per-coordinate step of ``1e-6 * max(1, |at[i]|)``;
    an explicit ``eps`` is used as-is for every coordinate.
    """
    at = np.array(at, dtype=np.float64)
    if eps is not None and not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    flat = at.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        x0 = flat[i]
        h = eps if eps is not None else 1e-6 * max(1.0, abs(x0))
        flat[i] = x0 + h
        f_plus = float(fn(at))
        flat[i] = x0 - h
        f_minus = float(fn(at))
        flat[i] = x0
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            index = tuple(int(j) for j in np.unravel_index(i, at.shape))
            raise NonFiniteError(f"function is not finite at probe index {index}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(at.shape)
