"""Bin coordinates and bin geometry.

Each similarity vector is reduced to one coordinate (its L2 norm) or to
several (its spherical coordinates).  Bins along a coordinate all have the
same half-width ``gamma`` and centres ``(2b - 1) * gamma`` for
``b = 1..B`` (stored zero-based here, so ``centers[i] = (2i + 1) * gamma``).

Two modes fix ``gamma``:

* ``strict``: ``gamma = max / (2B)``.  The largest coordinate lands exactly
  on the outer edge of the last bin, where both sampling kernels give it
  zero weight.
* ``centered``: ``gamma = max / (2B - 1)``, which puts the largest
  coordinate on the centre of the last bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DimensionError, NonFiniteError, Tensor

MODES = ("strict", "centered")
MEASURES = ("magnitude", "angular", "spherical")
DEGENERATE_EPS = 1e-12

# fixed upper end of each coordinate kind; None means "use the observed max"
COORD_RANGES = {"radial": None, "polar": math.pi, "azimuthal": 2.0 * math.pi}


@dataclass(frozen=True)
class MagnitudeTrack:
    delta: Tensor
    measure: str = "magnitude"


@dataclass(frozen=True)
class BinGeometry:
    bin_count: int
    gamma: float
    centers: Tensor
    mode: str
    degenerate: bool = False
    delta_max: float = 0.0

    @property
    def edges(self) -> Tensor:
        """Lower edges of every bin followed by the upper edge of the last."""
        return np.append(self.centers - self.gamma, self.centers[-1] + self.gamma)


@dataclass(frozen=True)
class MultiDimGeometry:
    axes: tuple[BinGeometry, ...]
    kinds: tuple[str, ...]

    @property
    def K(self) -> int:
        return len(self.axes)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(g.bin_count for g in self.axes)


def magnitudes(z: Tensor) -> MagnitudeTrack:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"expected T x L similarity vectors, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("similarity vectors are not finite")
    return MagnitudeTrack(np.sqrt(np.sum(z * z, axis=1)))


def to_spherical(z: Tensor) -> Tensor:
    """Radius followed by the ``L - 1`` hyperspherical angles of every row.

    Angles ``1..L-2`` lie in ``[0, pi]``; the last one lies in ``[0, 2 pi)``.
    Rows (or trailing sub-vectors) that are exactly zero get angle 0.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] < 2:
        raise DimensionError(f"spherical coordinates need T x L with L >= 2, got {z.shape}")
    T, L = z.shape
    out = np.zeros((T, L))
    # tail[:, k] = ||z[:, k:]||
    tail = np.sqrt(np.cumsum((z * z)[:, ::-1], axis=1)[:, ::-1])
    out[:, 0] = tail[:, 0]
    for k in range(L - 2):
        out[:, k + 1] = np.arctan2(tail[:, k + 1], z[:, k])
    last = np.arctan2(z[:, L - 1], z[:, L - 2])
    last = np.where(last < 0.0, last + 2.0 * math.pi, last)
    # -0.0 inputs or a tiny negative wrap must not escape the half-open range
    last = np.where(last >= 2.0 * math.pi, 0.0, last)
    out[:, L - 1] = last
    return out


def from_spherical(coords: Tensor) -> Tensor:
    """Inverse of :func:`to_spherical`."""
    coords = np.asarray(coords, dtype=np.float64)
    T, L = coords.shape
    z = np.zeros((T, L))
    running = coords[:, 0].copy()
    for k in range(L - 1):
        z[:, k] = running * np.cos(coords[:, k + 1])
        running = running * np.sin(coords[:, k + 1])
    z[:, L - 1] = running
    return z


def spherical_backward(grad_coords: Tensor, z: Tensor) -> Tensor:
    """Map a gradient over spherical coordinates back onto ``z``.

    Zero-length sub-vectors contribute nothing (their angles are constant
    by convention).
    """
    z = np.asarray(z, dtype=np.float64)
    T, L = z.shape
    g = np.asarray(grad_coords, dtype=np.float64)
    if g.shape != (T, L):
        raise DimensionError(f"grad shape {g.shape} does not match {z.shape}")
    tail = np.sqrt(np.cumsum((z * z)[:, ::-1], axis=1)[:, ::-1])
    grad_z = np.zeros_like(z)

    r = tail[:, 0]
    safe = r > 0
    grad_z[safe] += g[safe, :1] * z[safe] / r[safe, None]

    for k in range(L - 2):
        x, y = z[:, k], tail[:, k + 1]
        denom = x * x + y * y
        ok = denom > 0
        d_x = np.where(ok, -y / np.where(ok, denom, 1.0), 0.0)
        d_y = np.where(ok, x / np.where(ok, denom, 1.0), 0.0)
        grad_z[:, k] += g[:, k + 1] * d_x
        ok_y = y > 0
        scale = np.where(ok_y, g[:, k + 1] * d_y / np.where(ok_y, y, 1.0), 0.0)
        grad_z[:, k + 1:] += scale[:, None] * z[:, k + 1:]

    x, y = z[:, L - 2], z[:, L - 1]
    denom = x * x + y * y
    ok = denom > 0
    inv = np.where(ok, 1.0 / np.where(ok, denom, 1.0), 0.0)
    grad_z[:, L - 2] += g[:, L - 1] * (-y * inv)
    grad_z[:, L - 1] += g[:, L - 1] * (x * inv)
    return grad_z


def coordinate_kinds(measure: str, L: int) -> tuple[str, ...]:
    """Kinds of the coordinates used for binning under ``measure``."""
    if measure == "magnitude":
        return ("radial",)
    if L < 2:
        raise ConfigError(f"measure {measure!r} needs L >= 2")
    angles = ("polar",) * (L - 2) + ("azimuthal",)
    if measure == "angular":
        return angles
    if measure == "spherical":
        return ("radial",) + angles
    raise ConfigError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def binning_coordinates(z: Tensor, measure: str) -> Tensor:
    """``T x K`` coordinates fed to the sampler for a given measure."""
    if measure == "magnitude":
        return magnitudes(z).delta[:, None]
    coordinate_kinds(measure, np.shape(z)[1])
    sph = to_spherical(z)
    return sph[:, 1:] if measure == "angular" else sph


def _geometry_from_max(delta_max: float, B: int, mode: str, eps_abs: float) -> BinGeometry:
    if isinstance(B, bool) or int(B) != B or B < 1:
        raise ConfigError(f"bin count must be a positive integer, got {B!r}")
    B = int(B)
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not math.isfinite(delta_max):
        raise NonFiniteError("maximum bin coordinate is not finite")
    if delta_max <= eps_abs:
        return BinGeometry(B, 0.0, np.zeros(B), mode, degenerate=True, delta_max=delta_max)
    gamma = delta_max / (2 * B) if mode == "strict" else delta_max / (2 * B - 1)
    centers = (2.0 * np.arange(1, B + 1) - 1.0) * gamma
    return BinGeometry(B, gamma, centers, mode, degenerate=False, delta_max=delta_max)


def make_geometry(delta, B: int, mode: str = "strict", eps_abs: float = DEGENERATE_EPS) -> BinGeometry:
    """Bin half-width and centres from the largest coordinate and ``B``."""
    if isinstance(delta, MagnitudeTrack):
        delta = delta.delta
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    if delta.size == 0:
        raise DimensionError("cannot build bins from an empty track")
    return _geometry_from_max(float(np.max(delta)), B, mode, eps_abs)


def make_multidim_geometry(coords: Tensor, bins_per_coord, mode: str = "strict", kinds=None,
                           eps_abs: float = DEGENERATE_EPS) -> MultiDimGeometry:
    """Independent geometry per coordinate column.

    Angular kinds bin over their fixed range (``pi`` or ``2 pi``) instead of
    the observed maximum.  ``kinds`` defaults to all-radial.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2:
        raise DimensionError(f"expected T x K coordinates, got shape {coords.shape}")
    T, K = coords.shape
    bins_per_coord = list(bins_per_coord)
    if len(bins_per_coord) != K:
        raise DimensionError(f"{len(bins_per_coord)} bin counts given for {K} coordinates")
    kinds = tuple(kinds) if kinds is not None else ("radial",) * K
    if len(kinds) != K:
        raise DimensionError(f"{len(kinds)} coordinate kinds given for {K} coordinates")
    axes = []
    for k, (B, kind) in enumerate(zip(bins_per_coord, kinds)):
        if kind not in COORD_RANGES:
            raise ConfigError(f"unknown coordinate kind {kind!r}")
        fixed = COORD_RANGES[kind]
        if fixed is None:
            axes.append(make_geometry(coords[:, k], B, mode, eps_abs))
        else:
            axes.append(_geometry_from_max(fixed, B, mode, eps_abs))
    return MultiDimGeometry(tuple(axes), kinds)
