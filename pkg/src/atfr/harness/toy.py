"""Toy classifier trained end to end through the SGS layer.

Model: SGS layer -> mean over the surviving bins -> one affine layer ->
softmax.  Trained with plain minibatch SGD (no momentum, no decay) on a
synthetic task whose classes are the clip regimes.  Everything is seeded
and strictly sequential, so equal configs give bit-identical runs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core import ConfigError, SeededRng, SgsError
from ..layer import SgsConfig, sgs_apply, sgs_backward
from ..similarity import SimilarityParams, init_params
from .demo import clip_seed
from .synthetic import REGIMES, SyntheticSpec, gen_clip


class DivergenceError(SgsError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite in epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class ToyModelConfig:
    bins: int = 8
    kernel: str = "linear"
    mode: str = "strict"
    measure: str = "magnitude"
    embed_dim: int = 8
    classes: int = 2
    T: int = 8
    C: int = 4
    H: int = 4
    W: int = 4
    sigma: float = 0.0
    clips_per_class: int = 16
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 8
    seed: int = 42

    def __post_init__(self):
        if not 2 <= self.classes <= len(REGIMES):
            raise ConfigError(f"classes must be between 2 and {len(REGIMES)}, got {self.classes}")
        if self.epochs < 0 or self.batch_size < 1 or self.clips_per_class < 1:
            raise ConfigError("epochs must be >= 0, batch_size and clips_per_class >= 1")
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.learning_rate}")
        self.sgs_config()

    def sgs_config(self) -> SgsConfig:
        return SgsConfig(self.bins, mode=self.mode, kind=self.kernel, measure=self.measure)

    @classmethod
    def from_json(cls, path) -> "ToyModelConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainReport:
    loss_curve: list
    accuracy: float
    mean_b_prime: dict
    similarity: SimilarityParams = field(repr=False)
    initial_similarity: SimilarityParams = field(repr=False)
    head_w: np.ndarray = field(repr=False)
    head_b: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "loss_curve": self.loss_curve,
            "final_loss": self.loss_curve[-1] if self.loss_curve else None,
            "accuracy": self.accuracy,
            "mean_b_prime": self.mean_b_prime,
        }


def make_dataset(config: ToyModelConfig):
    clips, labels = [], []
    for label in range(config.classes):
        regime = REGIMES[label]
        for i in range(config.clips_per_class):
            spec = SyntheticSpec(config.T, config.C, config.H, config.W, regime, config.sigma,
                                 clip_seed(config.seed, label * config.clips_per_class + i))
            clips.append(gen_clip(spec))
            labels.append(label)
    return clips, np.array(labels)


def _forward(clip, params, head_w, head_b, sgs):
    sampled, cache = sgs_apply(clip, params, sgs)
    feat = sampled.outputs.mean(axis=0).reshape(-1)
    logits = head_w @ feat + head_b
    logits = logits - logits.max()
    probs = np.exp(logits) / np.exp(logits).sum()
    return probs, feat, sampled, cache


def train_toy(config: ToyModelConfig) -> TrainReport:
    rng = SeededRng(config.seed)
    sgs = config.sgs_config()
    clips, labels = make_dataset(config)
    n = len(clips)
    D = config.C * config.H * config.W
    params = init_params(config.C, config.embed_dim, rng.child(1))
    initial = params.copy()
    a = np.sqrt(6.0 / (D + config.classes))
    head_w = rng.child(2).uniform(-a, a, (config.classes, D))
    head_b = np.zeros(config.classes)
    order_rng = rng.child(3)

    curve = []
    for epoch in range(config.epochs):
        losses = np.zeros(n)
        order = order_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            g_params = params.zeros_like()
            g_w = np.zeros_like(head_w)
            g_b = np.zeros_like(head_b)
            for i in batch:
                probs, feat, sampled, cache = _forward(clips[i], params, head_w, head_b, sgs)
                losses[i] = -np.log(probs[labels[i]])
                d_logits = probs.copy()
                d_logits[labels[i]] -= 1.0
                g_w += np.outer(d_logits, feat)
                g_b += d_logits
                d_feat = (head_w.T @ d_logits).reshape(sampled.outputs.shape[1:])
                grad_out = np.broadcast_to(d_feat / sampled.B_prime, sampled.outputs.shape)
                grads = sgs_backward(grad_out, cache)
                g_params = g_params.plus(grads.params)
            scale = config.learning_rate / len(batch)
            params = params.sgd_step(g_params, scale)
            head_w = head_w - scale * g_w
            head_b = head_b - scale * g_b
        epoch_loss = float(losses.mean())
        if not np.isfinite(epoch_loss) or not np.all(np.isfinite(params.flatten())):
            raise DivergenceError(epoch)
        curve.append(epoch_loss)

    correct = 0
    b_primes = {REGIMES[c]: [] for c in range(config.classes)}
    for clip, label in zip(clips, labels):
        probs, _, sampled, _ = _forward(clip, params, head_w, head_b, sgs)
        correct += int(np.argmax(probs) == label)
        b_primes[REGIMES[label]].append(sampled.B_prime)
    return TrainReport(
        loss_curve=curve,
        accuracy=correct / n,
        mean_b_prime={k: float(np.mean(v)) for k, v in b_primes.items()},
        similarity=params,
        initial_similarity=initial,
        head_w=head_w,
        head_b=head_b,
    )


def write_train_outputs(out_dir, config: ToyModelConfig, result: TrainReport):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {"config": asdict(config), **result.to_dict()}
    (out / "train_report.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    with open(out / "loss_curve.csv", "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(result.loss_curve):
            fh.write(f"{i},{loss!r}\n")
