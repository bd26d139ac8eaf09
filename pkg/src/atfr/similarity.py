"""Embedding network mapping each feature map to a point in similarity space.

The network is spatial global average pooling followed by two pointwise
(kernel size 1) temporal convolutions with output widths ``C`` and ``L``.
Because the kernels have size 1 every time step is transformed
independently, so the two convolutions are ordinary affine maps applied row
by row.  A ReLU sits between them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .core import (
    DimensionError,
    FeatureSequence,
    NonFiniteError,
    SeededRng,
    Tensor,
    gap_spatial,
    gap_spatial_backward,
)


@dataclass
class SimilarityParams:
    """Weights of the embedding network.

    ``w1`` is ``C x C``, ``b1`` has length ``C``, ``w2`` is ``L x C`` and
    ``b2`` has length ``L``.  The same record type carries gradients.
    """

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.array(getattr(self, f.name), dtype=np.float64))
        C = self.w1.shape[0]
        if self.w1.shape != (C, C) or self.b1.shape != (C,):
            raise DimensionError(f"w1/b1 shapes {self.w1.shape}/{self.b1.shape} are not C x C / C")
        if self.w2.ndim != 2 or self.w2.shape[1] != C or self.b2.shape != (self.w2.shape[0],):
            raise DimensionError(f"w2/b2 shapes {self.w2.shape}/{self.b2.shape} are not L x C / L")
        if self.w2.shape[0] < 1:
            raise DimensionError("embedding dimension L must be >= 1")
        for name, arr in self.named():
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError(f"parameter {name} has non-finite entries")

    @property
    def C(self) -> int:
        return self.w1.shape[0]

    @property
    def L(self) -> int:
        return self.w2.shape[0]

    def named(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def flatten(self) -> Tensor:
        return np.concatenate([arr.reshape(-1) for _, arr in self.named()])

    def unflatten(self, flat) -> "SimilarityParams":
        """New params of this shape filled from a flat vector."""
        flat = np.asarray(flat, dtype=np.float64)
        out, pos = {}, 0
        for name, arr in self.named():
            out[name] = flat[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size
        if pos != flat.size:
            raise DimensionError(f"flat vector has {flat.size} entries, expected {pos}")
        return SimilarityParams(**out)

    def zeros_like(self) -> "SimilarityParams":
        return SimilarityParams(*(np.zeros_like(arr) for _, arr in self.named()))

    def copy(self) -> "SimilarityParams":
        return SimilarityParams(*(arr.copy() for _, arr in self.named()))

    def plus(self, other: "SimilarityParams") -> "SimilarityParams":
        return SimilarityParams(*(a + b for (_, a), (_, b) in zip(self.named(), other.named())))

    def sgd_step(self, grad: "SimilarityParams", lr: float) -> "SimilarityParams":
        return SimilarityParams(*(p - lr * g for (_, p), (_, g) in zip(self.named(), grad.named())))


def init_params(C: int, L: int, rng: SeededRng) -> SimilarityParams:
    """Glorot-uniform weights, zero biases."""
    a1 = np.sqrt(6.0 / (C + C))
    a2 = np.sqrt(6.0 / (C + L))
    return SimilarityParams(
        w1=rng.uniform(-a1, a1, (C, C)),
        b1=np.zeros(C),
        w2=rng.uniform(-a2, a2, (L, C)),
        b2=np.zeros(L),
    )


@dataclass(frozen=True)
class EmbedCache:
    pooled: Tensor      # T x C
    pre: Tensor         # T x C, before the ReLU
    hidden: Tensor      # T x C, after the ReLU
    spatial: tuple      # (H, W) of the originating sequence


def embed_pooled(pooled: Tensor, params: SimilarityParams) -> tuple[Tensor, EmbedCache]:
    """Run the two pointwise layers on already pooled ``T x C`` features."""
    pooled = np.asarray(pooled, dtype=np.float64)
    if pooled.ndim != 2 or pooled.shape[1] != params.C:
        raise DimensionError(f"pooled features {pooled.shape} do not match C={params.C}")
    pre = pooled @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    z = hidden @ params.w2.T + params.b2
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("similarity vectors are not finite")
    return z, EmbedCache(pooled=pooled, pre=pre, hidden=hidden, spatial=(1, 1))


def embed_forward(seq: FeatureSequence, params: SimilarityParams) -> tuple[Tensor, EmbedCache]:
    """Similarity vectors ``z`` with shape ``T x L`` plus the backward cache."""
    if seq.C != params.C:
        raise DimensionError(f"sequence has C={seq.C} channels but params expect C={params.C}")
    z, cache = embed_pooled(gap_spatial(seq), params)
    return z, EmbedCache(cache.pooled, cache.pre, cache.hidden, (seq.H, seq.W))


def embed_backward(grad_z: Tensor, cache: EmbedCache, params: SimilarityParams):
    """Chain rule through both affine maps and the ReLU gate.

    Returns ``(grad_params, grad_pooled)``.  The ReLU subgradient at exactly
    zero is taken as 0.  Use :func:`pooled_grad_to_frames` to map
    ``grad_pooled`` back onto the frames.
    """
    grad_z = np.asarray(grad_z, dtype=np.float64)
    T = cache.pooled.shape[0]
    if grad_z.shape != (T, params.L):
        raise DimensionError(f"grad_z shape {grad_z.shape} does not match ({T}, {params.L})")
    grad_w2 = grad_z.T @ cache.hidden
    grad_b2 = grad_z.sum(axis=0)
    grad_hidden = grad_z @ params.w2
    grad_pre = grad_hidden * (cache.pre > 0.0)
    grad_w1 = grad_pre.T @ cache.pooled
    grad_b1 = grad_pre.sum(axis=0)
    grad_pooled = grad_pre @ params.w1
    return SimilarityParams(grad_w1, grad_b1, grad_w2, grad_b2), grad_pooled


def pooled_grad_to_frames(grad_pooled: Tensor, cache: EmbedCache) -> Tensor:
    return gap_spatial_backward(grad_pooled, *cache.spatial)
