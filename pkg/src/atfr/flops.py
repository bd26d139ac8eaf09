"""Analytic FLOP counts for a stack of layers as a function of clip length.

Convention: one multiply-accumulate is 2 FLOPs.  Pooling, activations and
biases are counted as 0.  Only ratios matter for the reduction figures, so
the convention just has to be applied consistently.

Stack files are line oriented::

    input 14 14                        # optional, spatial size H W (default 1 1)
    conv3d c_in c_out kt kh kw st sh sw pad=same
    fc c_in c_out
    pool

``pad=same`` gives ``ceil(n / stride)`` outputs per axis, ``pad=valid``
gives ``(n - k) // stride + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import ConfigError

FLOP_CONVENTION = "multiply-accumulate = 2 FLOPs; pooling, activation and bias = 0 FLOPs"


@dataclass(frozen=True)
class LayerSpec:
    kind: str                          # conv3d | fc | pool
    c_in: int = 0
    c_out: int = 0
    kernel: tuple = (1, 1, 1)
    stride: tuple = (1, 1, 1)
    padding: str = "same"

    def __post_init__(self):
        if self.kind not in ("conv3d", "fc", "pool"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "pool":
            return
        if self.c_in < 1 or self.c_out < 1:
            raise ConfigError(f"{self.kind} channels must be positive, got {self.c_in}->{self.c_out}")
        if self.kind == "conv3d":
            if len(self.kernel) != 3 or len(self.stride) != 3:
                raise ConfigError("conv3d needs three kernel sizes and three strides")
            if min(self.kernel) < 1:
                raise ConfigError(f"kernel sizes must be positive, got {self.kernel}")
            if min(self.stride) < 1:
                raise ConfigError(f"strides must be >= 1, got {self.stride}")
            if self.padding not in ("same", "valid"):
                raise ConfigError(f"padding must be 'same' or 'valid', got {self.padding!r}")

    def output_shape(self, t_len: int, h: int, w: int) -> tuple[int, int, int]:
        if self.kind != "conv3d":
            return t_len, h, w
        dims = []
        for n, k, s in zip((t_len, h, w), self.kernel, self.stride):
            if self.padding == "same":
                dims.append(math.ceil(n / s))
            else:
                if k > n:
                    raise ConfigError(f"kernel {self.kernel} is larger than the input {(t_len, h, w)}")
                dims.append((n - k) // s + 1)
        return tuple(dims)


@dataclass(frozen=True)
class FlopStack:
    layers: tuple
    height: int = 1
    width: int = 1


@dataclass
class FlopReport:
    per_clip: list = field(default_factory=list)    # (clip id, B', flops)
    average_flops: float = 0.0
    baseline_flops: float = 0.0
    reduction_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "convention": FLOP_CONVENTION,
            "average_flops": self.average_flops,
            "average_gflops": self.average_flops / 1e9,
            "baseline_flops": self.baseline_flops,
            "baseline_gflops": self.baseline_flops / 1e9,
            "reduction_fraction": self.reduction_fraction,
            "clips": [{"clip_id": c, "b_prime": b, "flops": f} for c, b, f in self.per_clip],
        }


def layer_flops(layer: LayerSpec, t_len: int, h: int = 1, w: int = 1) -> int:
    if t_len < 1:
        raise ConfigError(f"temporal length must be >= 1, got {t_len}")
    if layer.kind == "pool":
        return 0
    if layer.kind == "fc":
        return 2 * layer.c_in * layer.c_out
    t_out, h_out, w_out = layer.output_shape(t_len, h, w)
    kt, kh, kw = layer.kernel
    return 2 * layer.c_in * layer.c_out * kt * kh * kw * t_out * h_out * w_out


def stack_flops(stack, t_len: int, h: int | None = None, w: int | None = None) -> int:
    """Total over the stack, passing each layer's output size to the next."""
    if isinstance(stack, FlopStack):
        layers = stack.layers
        h = stack.height if h is None else h
        w = stack.width if w is None else w
    else:
        layers = stack
        h = 1 if h is None else h
        w = 1 if w is None else w
    if t_len < 1:
        raise ConfigError(f"temporal length must be >= 1, got {t_len}")
    total = 0
    for layer in layers:
        total += layer_flops(layer, t_len, h, w)
        t_len, h, w = layer.output_shape(t_len, h, w)
    return total


def report(results, stack, t_full: int) -> FlopReport:
    """Per-clip and average FLOPs for clips that ran at length ``B'``.

    ``results`` is an iterable of ``(clip_id, b_prime)`` pairs.
    """
    per_clip = []
    for clip_id, b_prime in results:
        b_prime = int(b_prime)
        if not 1 <= b_prime <= t_full:
            raise ConfigError(f"clip {clip_id}: B'={b_prime} is outside [1, {t_full}]")
        per_clip.append((clip_id, b_prime, stack_flops(stack, b_prime)))
    baseline = stack_flops(stack, t_full)
    if per_clip:
        average = sum(f for _, _, f in per_clip) / len(per_clip)
    else:
        average = float(baseline)
    reduction = 1.0 - average / baseline if baseline else 0.0
    return FlopReport(per_clip, average, float(baseline), reduction)


def parse_stack(text: str) -> FlopStack:
    layers = []
    h = w = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "input" and len(tok) == 3:
                h, w = int(tok[1]), int(tok[2])
                if h < 1 or w < 1:
                    raise ConfigError("input size must be positive")
            elif tok[0] == "pool" and len(tok) == 1:
                layers.append(LayerSpec("pool"))
            elif tok[0] == "fc" and len(tok) == 3:
                layers.append(LayerSpec("fc", int(tok[1]), int(tok[2])))
            elif tok[0] == "conv3d" and len(tok) == 10 and tok[9].startswith("pad="):
                nums = [int(x) for x in tok[1:9]]
                layers.append(LayerSpec("conv3d", nums[0], nums[1], tuple(nums[2:5]),
                                        tuple(nums[5:8]), tok[9][4:]))
            else:
                raise ConfigError(f"unrecognised layer line {line!r}")
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"stack line {lineno}: {exc}") from None
    return FlopStack(tuple(layers), h, w)


def load_stack(path) -> FlopStack:
    return parse_stack(Path(path).read_text())
