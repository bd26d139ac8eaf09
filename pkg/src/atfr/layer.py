"""The full similarity guided sampling layer: embed, bin, sample, and back.

Bin geometry is on the stop-gradient path.  Passing ``geometry=`` to
:func:`sgs_apply` freezes it (the mode used by the finite-difference
checks); otherwise it is rebuilt from the current coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import (
    DEGENERATE_EPS,
    MEASURES,
    MODES,
    BinGeometry,
    MultiDimGeometry,
    binning_coordinates,
    coordinate_kinds,
    magnitudes,
    make_geometry,
    make_multidim_geometry,
    spherical_backward,
)
from .core import ConfigError, DimensionError, FeatureSequence, Tensor
from .sampler import (
    KERNELS,
    SampledSequence,
    WeightAssignment,
    sample_backward,
    sample_backward_multidim,
    sample_forward,
    sample_forward_multidim,
)
from .similarity import EmbedCache, SimilarityParams, embed_backward, embed_forward, pooled_grad_to_frames


@dataclass(frozen=True)
class SgsConfig:
    bins: int
    mode: str = "strict"
    kind: str = "linear"
    measure: str = "magnitude"
    bins_per_coord: tuple | None = None
    normalize: bool = False
    eps_abs: float = DEGENERATE_EPS

    def __post_init__(self):
        if isinstance(self.bins, bool) or int(self.bins) != self.bins or self.bins < 1:
            raise ConfigError(f"bins must be a positive integer, got {self.bins!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.kind not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.measure not in MEASURES:
            raise ConfigError(f"unknown measure {self.measure!r}; expected one of {MEASURES}")
        if self.bins_per_coord is not None:
            object.__setattr__(self, "bins_per_coord", tuple(int(b) for b in self.bins_per_coord))

    def axis_bins(self, K: int) -> tuple:
        if self.bins_per_coord is None:
            return (int(self.bins),) * K
        if len(self.bins_per_coord) != K:
            raise ConfigError(f"bins_per_coord has {len(self.bins_per_coord)} entries, measure needs {K}")
        return self.bins_per_coord


@dataclass(frozen=True)
class SgsCache:
    seq: FeatureSequence
    params: SimilarityParams
    config: SgsConfig
    z: Tensor
    coords: Tensor                      # T x K bin coordinates
    geometry: BinGeometry | MultiDimGeometry
    embed: EmbedCache
    assignment: WeightAssignment
    sampled: SampledSequence


@dataclass
class SgsGradients:
    frames: Tensor
    params: SimilarityParams


def build_geometry(coords: Tensor, config: SgsConfig, L: int):
    if config.measure == "magnitude":
        return make_geometry(coords[:, 0], config.bins, config.mode, config.eps_abs)
    kinds = coordinate_kinds(config.measure, L)
    return make_multidim_geometry(coords, config.axis_bins(len(kinds)), config.mode, kinds, config.eps_abs)


def sgs_apply(seq: FeatureSequence, params: SimilarityParams, config: SgsConfig,
              geometry: BinGeometry | MultiDimGeometry | None = None):
    """Forward pass; returns ``(SampledSequence, SgsCache)``."""
    z, embed_cache = embed_forward(seq, params)
    coords = binning_coordinates(z, config.measure)
    if geometry is None:
        geometry = build_geometry(coords, config, params.L)
    if config.measure == "magnitude":
        if not isinstance(geometry, BinGeometry):
            raise DimensionError("magnitude measure needs a one-dimensional BinGeometry")
        sampled, assignment = sample_forward(seq, coords[:, 0], geometry, config.kind, config.normalize)
    else:
        if not isinstance(geometry, MultiDimGeometry):
            raise DimensionError(f"measure {config.measure!r} needs a MultiDimGeometry")
        sampled, assignment = sample_forward_multidim(seq, coords, geometry, config.kind, config.normalize)
    cache = SgsCache(seq, params, config, z, coords, geometry, embed_cache, assignment, sampled)
    return sampled, cache


def sgs_backward(grad_out: Tensor, cache: SgsCache) -> SgsGradients:
    """Gradients with respect to the input frames and the embedding weights."""
    cfg = cache.config
    if cfg.measure == "magnitude":
        grad_frames, grad_delta = sample_backward(
            grad_out, cache.assignment, cache.seq, cache.coords[:, 0], cache.geometry,
            cfg.kind, cfg.normalize, cache.sampled)
        norms = magnitudes(cache.z).delta
        safe = norms > 0
        grad_z = np.zeros_like(cache.z)
        grad_z[safe] = grad_delta[safe, None] * cache.z[safe] / norms[safe, None]
    else:
        grad_frames, grad_coords = sample_backward_multidim(
            grad_out, cache.assignment, cache.seq, cache.coords, cache.geometry,
            cfg.kind, cfg.normalize, cache.sampled)
        full = np.zeros_like(cache.z)
        if cfg.measure == "angular":
            full[:, 1:] = grad_coords
        else:
            full[:] = grad_coords
        grad_z = spherical_backward(full, cache.z)
    grad_params, grad_pooled = embed_backward(grad_z, cache.embed, cache.params)
    grad_frames = grad_frames + pooled_grad_to_frames(grad_pooled, cache.embed)
    return SgsGradients(grad_frames, grad_params)
