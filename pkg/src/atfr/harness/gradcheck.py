"""Finite-difference checks of the analytic SGS backward pass.

Each case draws a random clip and random embedding weights and compares
the analytic gradient of ``loss = sum_b sum O_b^2`` against central
differences with the bin geometry frozen.

The frozen geometry is built from the radial maximum inflated by a random
2-25 %.  Geometry taken straight from the forward pass always puts the
largest coordinate on a kink (the outer edge in strict mode, the last
centre in centered mode), where one-sided and two-sided derivatives
disagree.  Draws where any coordinate still sits within ``1e-3 * gamma`` of
a kink, or a ReLU input sits near zero, are redrawn from the next
sub-stream.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..binning import BinGeometry, MultiDimGeometry
from ..core import ConfigError, FeatureSequence, SeededRng, finite_diff
from ..layer import SgsConfig, build_geometry, sgs_apply, sgs_backward
from ..similarity import SimilarityParams, init_params

KINK_MARGIN = 1e-3
RELU_MARGIN = 1e-4
MAX_ATTEMPTS = 200


@dataclass(frozen=True)
class GradcheckCase:
    T: int
    C: int
    H: int
    W: int
    L: int
    B: int
    mode: str = "strict"
    kind: str = "linear"
    measure: str = "magnitude"
    seed: int = 0

    def sgs_config(self) -> SgsConfig:
        return SgsConfig(self.B, mode=self.mode, kind=self.kind, measure=self.measure)


@dataclass
class CaseResult:
    case: GradcheckCase
    errors: dict          # group -> normwise relative error
    attempts: int
    b_prime: int
    seconds: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values())

    def passed(self, tol: float) -> bool:
        return self.max_error <= tol


def relative_error(analytic, numeric) -> float:
    """``max|a - n| / max(max|a|, max|n|)``; 0 when both are identically 0."""
    a = np.asarray(analytic).ravel()
    n = np.asarray(numeric).ravel()
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - n)) / scale)


def default_suite(seed: int = 42) -> list[GradcheckCase]:
    """20 linear magnitude cases, 4 Kronecker and 4 multi-dimensional ones."""
    rng = SeededRng(seed).child(7)
    cases = []
    for i in range(20):
        T = int(rng.integers(2, 33))
        big = T > 16
        cases.append(GradcheckCase(
            T=T,
            C=int(rng.integers(1, 9 if big else 17)),
            H=int(rng.integers(1, 3)),
            W=int(rng.integers(1, 3)),
            L=int(rng.integers(1, 9)),
            B=int(rng.integers(1, 33)),
            mode=("strict", "centered")[i % 2],
            kind="linear",
            seed=int(rng.integers(0, 2**31)),
        ))
    for i in range(4):
        cases.append(GradcheckCase(
            T=int(rng.integers(2, 17)), C=int(rng.integers(1, 9)), H=2, W=2,
            L=int(rng.integers(1, 9)), B=int(rng.integers(2, 17)),
            mode=("strict", "centered")[i % 2], kind="kronecker",
            seed=int(rng.integers(0, 2**31)),
        ))
    for i, measure in enumerate(("angular", "spherical", "angular", "spherical")):
        cases.append(GradcheckCase(
            T=int(rng.integers(2, 13)), C=int(rng.integers(2, 7)), H=2, W=1,
            L=int(rng.integers(2, 5)), B=int(rng.integers(2, 5)),
            mode=("strict", "centered")[i % 2], kind="linear", measure=measure,
            seed=int(rng.integers(0, 2**31)),
        ))
    return cases


def load_cases(path) -> list[GradcheckCase]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ConfigError("gradcheck case file must hold a JSON list")
    try:
        return [GradcheckCase(**entry) for entry in data]
    except TypeError as exc:
        raise ConfigError(f"bad gradcheck case: {exc}") from None


def _draw(case: GradcheckCase, rng: SeededRng):
    frames = rng.normal((case.T, case.C, case.H, case.W))
    p = init_params(case.C, case.L, rng)
    params = SimilarityParams(p.w1, rng.normal(case.C, 0.1), p.w2, rng.normal(case.L, 0.1))
    return FeatureSequence(frames), params


def _axis_clear(coord, geom: BinGeometry) -> bool:
    if geom.degenerate:
        return True
    d = np.abs(coord[:, None] - geom.centers[None, :])
    margin = KINK_MARGIN * geom.gamma
    return bool(np.all(d >= margin) and np.all(np.abs(d - geom.gamma) >= margin))


def clear_of_kinks(cache) -> bool:
    """True when no coordinate or ReLU input sits near a non-smooth point."""
    if np.any(np.abs(cache.embed.pre) < RELU_MARGIN):
        return False
    geom = cache.geometry
    if isinstance(geom, BinGeometry):
        return _axis_clear(cache.coords[:, 0], geom) and bool(np.all(cache.coords[:, 0] > RELU_MARGIN))
    assert isinstance(geom, MultiDimGeometry)
    for k, (g, kind) in enumerate(zip(geom.axes, geom.kinds)):
        col = cache.coords[:, k]
        if not _axis_clear(col, g):
            return False
        # angle wrap-around and undefined angles
        if kind == "azimuthal" and np.any((col < KINK_MARGIN) | (col > 2 * math.pi - KINK_MARGIN)):
            return False
        if kind == "polar" and np.any((col < KINK_MARGIN) | (col > math.pi - KINK_MARGIN)):
            return False
    return bool(np.all(np.abs(cache.z) > RELU_MARGIN))


def frozen_geometry(coords, case: GradcheckCase, inflate: float):
    """Case geometry built from coordinates whose radial max is inflated."""
    scaled = np.array(coords, dtype=np.float64)
    if case.measure in ("magnitude", "spherical"):
        scaled[:, 0] *= 1.0 + inflate
    return build_geometry(scaled, case.sgs_config(), case.L)


def _loss(seq, params, config, geometry) -> float:
    sampled, _ = sgs_apply(seq, params, config, geometry=geometry)
    return float(np.sum(sampled.outputs ** 2))


def run_case(case: GradcheckCase) -> CaseResult:
    config = case.sgs_config()
    base = SeededRng(case.seed)
    for attempt in range(1, MAX_ATTEMPTS + 1):
        rng = base.child(attempt)
        seq, params = _draw(case, rng)
        _, probe = sgs_apply(seq, params, config)
        geometry = frozen_geometry(probe.coords, case, float(rng.uniform(0.02, 0.25, None)))
        sampled, cache = sgs_apply(seq, params, config, geometry=geometry)
        if clear_of_kinks(cache):
            break
    else:
        raise ConfigError(f"no kink-free draw for {case} after {MAX_ATTEMPTS} attempts")

    started = time.perf_counter()
    grads = sgs_backward(2.0 * sampled.outputs, cache)

    fd_frames = finite_diff(lambda x: _loss(FeatureSequence(x), params, config, geometry), seq.frames)
    flat = params.flatten()
    fd_flat = finite_diff(lambda x: _loss(seq, params.unflatten(x), config, geometry), flat)
    fd_params = params.unflatten(fd_flat)

    errors = {"frames": relative_error(grads.frames, fd_frames)}
    for (name, analytic), (_, numeric) in zip(grads.params.named(), fd_params.named()):
        errors[name] = relative_error(analytic, numeric)
    return CaseResult(case, errors, attempt, sampled.B_prime, time.perf_counter() - started)


def run_suite(cases, tol: float = 1e-5):
    results = [run_case(c) for c in cases]
    failures = [r for r in results if not r.passed(tol)]
    return results, failures


def suite_report(results, tol: float) -> dict:
    return {
        "tolerance": tol,
        "passed": all(r.passed(tol) for r in results),
        "cases": [
            {
                "case": asdict(r.case),
                "max_relative_error": r.max_error,
                "errors": r.errors,
                "b_prime": r.b_prime,
                "draw_attempts": r.attempts,
                "passed": r.passed(tol),
            }
            for r in results
        ],
    }
