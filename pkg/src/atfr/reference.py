"""Brute-force bin sampling used as an oracle for the optimized sampler.

Every (frame, bin) pair is visited and the kernels are written out inline,
so nothing here shares code with :mod:`atfr.sampler`.  Slow by design.
"""

import itertools
import math

import numpy as np


def _dist(d, beta, gamma):
    r = abs(d - beta) / gamma
    return 1.0 if abs(r - 1.0) <= 1e-12 else r


def _linear(d, beta, gamma):
    return max(0.0, 1.0 - _dist(d, beta, gamma))


def _delta_member(d, beta, gamma):
    return 1.0 if math.floor(_dist(d, beta, gamma)) == 0 else 0.0


def naive_sample(frames, coords, axes, kind, normalize=False):
    """Reference forward over all grid bins.

    ``frames`` is ``T x C x H x W``, ``coords`` is ``T x K`` and ``axes`` a
    sequence of K bin geometries.  Returns ``(outputs, surviving)`` where
    ``surviving`` lists the kept grid cells as index tuples in lexicographic
    order.
    """
    frames = np.asarray(frames, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    T = frames.shape[0]
    K = len(axes)

    def average_all():
        acc = np.zeros(frames.shape[1:])
        for t in range(T):
            acc += (1.0 / T) * frames[t]
        return acc[None], [(0,) * K]

    if all(g.degenerate for g in axes):
        return average_all()

    outputs, surviving = [], []
    for cell in itertools.product(*(range(g.bin_count) for g in axes)):
        acc = np.zeros(frames.shape[1:])
        total = 0.0
        for t in range(T):
            psi = 1.0
            for k in range(K):
                g = axes[k]
                if g.degenerate:
                    # a flat axis routes everything to its first bin
                    psi *= 1.0 if cell[k] == 0 else 0.0
                    continue
                beta = g.centers[cell[k]]
                if kind == "linear":
                    psi *= _linear(coords[t, k], beta, g.gamma)
                else:
                    psi *= _delta_member(coords[t, k], beta, g.gamma)
            if psi > 0.0:
                acc += psi * frames[t]
                total += psi
        if total == 0.0:
            continue
        if kind == "kronecker" or normalize:
            acc = acc / total
        outputs.append(acc)
        surviving.append(cell)
    if not outputs:
        return average_all()
    return np.stack(outputs), surviving


def naive_sample_1d(frames, delta, geom, kind, normalize=False):
    out, cells = naive_sample(frames, np.asarray(delta, dtype=np.float64)[:, None], [geom], kind, normalize)
    return out, [c[0] for c in cells]
