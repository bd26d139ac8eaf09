"""Differentiable bin sampling.

Every frame ``t`` is sampled into bin ``b`` with weight ``Psi(delta_t, beta_b)``
and each output map is the weighted sum of its members.  Two kernels are
supported:

``linear``
    ``max(0, 1 - |delta - beta| / gamma)``.  Outputs are plain weighted sums.
``kronecker``
    membership ``floor(|delta - beta| / gamma) == 0`` (strictly inside the
    bin), and each output is the average of its members.

With centre spacing ``2 gamma`` and half-width ``gamma`` a coordinate has
positive weight in at most one bin, so the forward only evaluates the bin
that contains it (plus its two neighbours, to be safe at the edges).
Bins that receive no weight are dropped; the rest keep ascending bin order.

Two situations collapse the whole sequence into one output, the plain
average of all frames: a degenerate geometry (all coordinates ~0), and the
case where no frame has positive weight anywhere (e.g. every frame sits on
the outer edge of the last bin in strict mode).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import BinGeometry, MultiDimGeometry
from .core import ConfigError, DimensionError, FeatureSequence, NonFiniteError, Tensor

KERNELS = ("linear", "kronecker")
# normalised distances this close to 1 are on the bin edge; rounding in
# gamma and the centres otherwise leaves edge points a ~1e-16 weight
EDGE_TOL = 1e-12


@dataclass(frozen=True)
class WeightAssignment:
    """Sparse ``(t, bin, weight)`` triples in ascending ``t`` order.

    ``bins`` are flat row-major indices into ``grid_shape`` (the bin index
    itself in the one-dimensional case).  ``factors`` holds the per-axis
    kernel values of each triple, ``counts`` the member count of each
    triple's bin.  ``collapsed`` marks the single-average fallback.
    """

    t: np.ndarray
    bins: np.ndarray
    weights: np.ndarray
    factors: np.ndarray
    counts: np.ndarray
    grid_shape: tuple
    kind: str
    collapsed: bool = False

    def triples(self):
        return list(zip(self.t.tolist(), self.bins.tolist(), self.weights.tolist()))


@dataclass(frozen=True)
class SampledSequence:
    outputs: Tensor            # B' x C x H x W
    surviving_bins: tuple      # original bin indices (tuples for a multi-dim grid)
    bin_weight_sums: Tensor    # total kernel weight per surviving bin

    @property
    def B_prime(self) -> int:
        return self.outputs.shape[0]


def _check_kind(kind):
    if kind not in KERNELS:
        raise ConfigError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def kernel_weight(kind: str, delta_t, beta_b, gamma):
    """Un-normalised kernel value; works on scalars and arrays alike."""
    _check_kind(kind)
    dist = np.abs(np.asarray(delta_t, dtype=np.float64) - beta_b) / gamma
    dist = np.where(np.abs(dist - 1.0) <= EDGE_TOL, 1.0, dist)
    if kind == "linear":
        w = np.maximum(0.0, 1.0 - dist)
    else:
        w = (np.floor(dist) == 0).astype(np.float64)
    return w if w.ndim else float(w)


def kernel_slope(delta_t, beta_b, gamma):
    """Derivative of the linear kernel with respect to ``delta_t``.

    ``+1/gamma`` on ``(beta - gamma, beta]``, ``-1/gamma`` on
    ``(beta, beta + gamma)``, zero elsewhere.  The half-open split at the
    centre is the subgradient convention used throughout.
    """
    d = np.asarray(delta_t, dtype=np.float64)
    rising = (beta_b - gamma < d) & (d <= beta_b)
    falling = (beta_b < d) & (d < beta_b + gamma)
    return (rising.astype(np.float64) - falling.astype(np.float64)) / gamma


def _axis_candidates(kind, coord, geom: BinGeometry):
    """Best bin and its kernel value for each coordinate along one axis."""
    T = coord.shape[0]
    if geom.degenerate:
        return np.zeros(T, dtype=np.int64), np.ones(T)
    B = geom.bin_count
    base = np.clip(np.floor(coord / (2.0 * geom.gamma)), 0, B - 1).astype(np.int64)
    best_idx = base.copy()
    best_w = np.zeros(T)
    for offset in (0, -1, 1):
        idx = base + offset
        valid = (idx >= 0) & (idx < B)
        idx = np.clip(idx, 0, B - 1)
        w = kernel_weight(kind, coord, geom.centers[idx], geom.gamma)
        w = np.where(valid, w, 0.0)
        better = w > best_w
        best_idx = np.where(better, idx, best_idx)
        best_w = np.where(better, w, best_w)
    return best_idx, best_w


def _collapsed(frames, grid_shape, kind):
    T = frames.shape[0]
    w = np.full(T, 1.0 / T)
    assignment = WeightAssignment(
        t=np.arange(T), bins=np.zeros(T, dtype=np.int64), weights=w,
        factors=np.ones((T, len(grid_shape))), counts=np.full(T, T, dtype=np.int64),
        grid_shape=grid_shape, kind=kind, collapsed=True,
    )
    out = np.zeros((1,) + frames.shape[1:])
    for t in range(T):
        out[0] += w[t] * frames[t]
    return out, assignment


def _sample(frames, coords, axes, kind, normalize):
    _check_kind(kind)
    T = frames.shape[0]
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] != T or coords.shape[1] != len(axes):
        raise DimensionError(f"coordinates of shape {coords.shape} do not match T={T}, K={len(axes)}")
    if not np.all(np.isfinite(coords)):
        raise NonFiniteError("bin coordinates are not finite")
    grid_shape = tuple(g.bin_count for g in axes)

    if all(g.degenerate for g in axes):
        out, assignment = _collapsed(frames, grid_shape, kind)
        return out, (0,), np.ones(1), assignment

    idx = np.empty((T, len(axes)), dtype=np.int64)
    factors = np.empty((T, len(axes)))
    for k, g in enumerate(axes):
        idx[:, k], factors[:, k] = _axis_candidates(kind, coords[:, k], g)
    raw = factors[:, 0].copy()
    for k in range(1, len(axes)):
        raw = raw * factors[:, k]

    active = np.flatnonzero(raw > 0.0)
    if active.size == 0:
        out, assignment = _collapsed(frames, grid_shape, kind)
        return out, (0,), np.ones(1), assignment

    flat = np.ravel_multi_index(tuple(idx[active].T), grid_shape)
    surviving, slot, counts = np.unique(flat, return_inverse=True, return_counts=True)
    member_counts = counts[slot]
    weights = raw[active] if kind == "linear" else 1.0 / member_counts

    out = np.zeros((surviving.size,) + frames.shape[1:])
    for j, t in enumerate(active):
        out[slot[j]] += weights[j] * frames[t]
    weight_sums = np.zeros(surviving.size)
    np.add.at(weight_sums, slot, weights)
    if normalize and kind == "linear":
        out /= weight_sums[:, None, None, None]

    assignment = WeightAssignment(
        t=active, bins=flat, weights=weights, factors=factors[active],
        counts=member_counts, grid_shape=grid_shape, kind=kind,
    )
    return out, surviving, weight_sums, assignment


def _label(surviving, grid_shape):
    if len(grid_shape) == 1:
        return tuple(int(b) for b in surviving)
    return tuple(tuple(int(i) for i in np.unravel_index(int(b), grid_shape)) for b in surviving)


def sample_forward(seq: FeatureSequence, delta, geom: BinGeometry, kind: str = "linear",
                   normalize: bool = False) -> tuple[SampledSequence, WeightAssignment]:
    """Aggregate frames into bins along a single coordinate.

    ``normalize`` divides each linear-kernel output by its total weight; it
    is off by default so outputs stay plain weighted sums.
    """
    delta = np.asarray(getattr(delta, "delta", delta), dtype=np.float64).reshape(-1)
    if delta.shape[0] != seq.T:
        raise DimensionError(f"delta has length {delta.shape[0]} but the sequence has T={seq.T}")
    out, surviving, sums, assignment = _sample(seq.frames, delta[:, None], (geom,), kind, normalize)
    return SampledSequence(out, _label(surviving, assignment.grid_shape), sums), assignment


def sample_forward_multidim(seq: FeatureSequence, coords: Tensor, geom: MultiDimGeometry,
                            kind: str = "linear", normalize: bool = False):
    """Aggregate frames into a ``B_1 x ... x B_K`` grid of bins.

    A frame's weight for a grid bin is the product of its per-axis kernel
    values.  Surviving bins come back in lexicographic grid order.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != geom.K:
        raise DimensionError(f"coordinates of shape {coords.shape} do not match K={geom.K}")
    if coords.shape[0] != seq.T:
        raise DimensionError(f"coordinates have {coords.shape[0]} rows but the sequence has T={seq.T}")
    out, surviving, sums, assignment = _sample(seq.frames, coords, geom.axes, kind, normalize)
    return SampledSequence(out, _label(surviving, assignment.grid_shape), sums), assignment


def _backward(grad_out, assignment: WeightAssignment, frames, coords, axes, normalize, outputs):
    T = frames.shape[0]
    grad_out = np.asarray(grad_out, dtype=np.float64)
    surviving, slot = np.unique(assignment.bins, return_inverse=True)
    if grad_out.shape != (surviving.size,) + frames.shape[1:]:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match "
                             f"({surviving.size}, {', '.join(map(str, frames.shape[1:]))})")
    if assignment.t.size and assignment.t.max() >= T:
        raise DimensionError("assignment refers to frames beyond the sequence length")

    grad_frames = np.zeros_like(frames)
    grad_coords = np.zeros((T, len(axes)))
    w = assignment.weights
    use_norm = normalize and assignment.kind == "linear" and not assignment.collapsed
    if use_norm:
        sums = np.zeros(surviving.size)
        np.add.at(sums, slot, w)
    for j, t in enumerate(assignment.t):
        g = grad_out[slot[j]]
        scale = w[j] / sums[slot[j]] if use_norm else w[j]
        grad_frames[t] += scale * g

    if assignment.kind != "linear" or assignment.collapsed:
        return grad_frames, grad_coords

    for j, t in enumerate(assignment.t):
        g = grad_out[slot[j]]
        if use_norm:
            dloss_dw = float(np.vdot(g, frames[t] - outputs[slot[j]])) / sums[slot[j]]
        else:
            dloss_dw = float(np.vdot(g, frames[t]))
        cell = np.unravel_index(int(assignment.bins[j]), assignment.grid_shape)
        for k, geom in enumerate(axes):
            if geom.degenerate:
                continue
            others = np.prod(np.delete(assignment.factors[j], k))
            slope = kernel_slope(coords[t, k], geom.centers[cell[k]], geom.gamma)
            grad_coords[t, k] += dloss_dw * others * float(slope)
    return grad_frames, grad_coords


def sample_backward(grad_out, assignment: WeightAssignment, seq: FeatureSequence, delta,
                    geom: BinGeometry, kind: str = "linear", normalize: bool = False,
                    sampled: SampledSequence | None = None):
    """Gradients of a loss with respect to the frames and to ``delta``.

    Bin geometry is treated as constant.  The Kronecker kernel is piecewise
    constant, so its ``delta`` gradient is zero everywhere.  With
    ``normalize`` the matching forward result must be passed as ``sampled``.
    """
    if kind != assignment.kind:
        raise ConfigError(f"assignment was built with kernel {assignment.kind!r}, not {kind!r}")
    delta = np.asarray(getattr(delta, "delta", delta), dtype=np.float64).reshape(-1)
    if delta.shape[0] != seq.T:
        raise DimensionError(f"delta has length {delta.shape[0]} but the sequence has T={seq.T}")
    outputs = sampled.outputs if sampled is not None else None
    if normalize and kind == "linear" and outputs is None:
        raise ConfigError("normalized backward needs the forward outputs")
    grad_frames, grad_coords = _backward(grad_out, assignment, seq.frames, delta[:, None],
                                         (geom,), normalize, outputs)
    return grad_frames, grad_coords[:, 0]


def sample_backward_multidim(grad_out, assignment: WeightAssignment, seq: FeatureSequence,
                             coords: Tensor, geom: MultiDimGeometry, kind: str = "linear",
                             normalize: bool = False, sampled: SampledSequence | None = None):
    """Multi-axis counterpart of :func:`sample_backward`; returns ``T x K`` coordinate grads."""
    if kind != assignment.kind:
        raise ConfigError(f"assignment was built with kernel {assignment.kind!r}, not {kind!r}")
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (seq.T, geom.K):
        raise DimensionError(f"coordinates of shape {coords.shape} do not match ({seq.T}, {geom.K})")
    outputs = sampled.outputs if sampled is not None else None
    if normalize and kind == "linear" and outputs is None:
        raise ConfigError("normalized backward needs the forward outputs")
    return _backward(grad_out, assignment, seq.frames, coords, geom.axes, normalize, outputs)
