"""Seeded synthetic feature clips in three redundancy regimes."""

from dataclasses import dataclass

import numpy as np

from ..core import ConfigError, FeatureSequence, SeededRng

REGIMES = ("redundant", "diverse", "drifting")


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape, regime and noise of one clip.

    ``redundant``: one base frame repeated, plus N(0, sigma^2) noise.
    ``diverse``: independent N(0, 1) frames.
    ``drifting``: linear interpolation between two N(0, 1) frames, plus noise.
    """

    T: int
    C: int
    H: int
    W: int
    regime: str = "redundant"
    sigma: float = 0.0
    seed: int = 42

    def __post_init__(self):
        if min(self.T, self.C, self.H, self.W) < 1:
            raise ConfigError("clip dimensions must be positive")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if not self.sigma >= 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")


def gen_clip(spec: SyntheticSpec) -> FeatureSequence:
    rng = SeededRng(spec.seed)
    frame_shape = (spec.C, spec.H, spec.W)
    if spec.regime == "diverse":
        frames = rng.normal((spec.T,) + frame_shape)
    elif spec.regime == "redundant":
        base = rng.normal(frame_shape)
        noise = rng.normal((spec.T,) + frame_shape, spec.sigma)
        frames = base[None] + noise
    else:
        start, end = rng.normal(frame_shape), rng.normal(frame_shape)
        alpha = np.linspace(0.0, 1.0, spec.T) if spec.T > 1 else np.zeros(1)
        frames = (1.0 - alpha)[:, None, None, None] * start + alpha[:, None, None, None] * end
        frames = frames + rng.normal((spec.T,) + frame_shape, spec.sigma)
    return FeatureSequence(frames)
