import numpy as np
import pytest

from atfr.core import DimensionError, FeatureSequence, SeededRng, finite_diff
from atfr.similarity import (
    SimilarityParams,
    embed_backward,
    embed_forward,
    embed_pooled,
    init_params,
    pooled_grad_to_frames,
)


def identity_params(C):
    return SimilarityParams(np.eye(C), np.zeros(C), np.eye(C), np.zeros(C))


def random_params(rng, C, L):
    return SimilarityParams(rng.normal(size=(C, C)), rng.normal(size=C),
                            rng.normal(size=(L, C)), rng.normal(size=L))


class TestForward:
    def test_identity_parameters(self):
        z, _ = embed_pooled(np.array([[3.0, 4.0]]), identity_params(2))
        np.testing.assert_array_equal(z, [[3.0, 4.0]])

    def test_zero_second_layer_gives_bias(self, rng):
        params = SimilarityParams(rng.normal(size=(3, 3)), rng.normal(size=3), np.zeros((2, 3)), [5.0, 5.0])
        z, _ = embed_forward(FeatureSequence(rng.normal(size=(4, 3, 2, 2))), params)
        np.testing.assert_array_equal(z, np.full((4, 2), 5.0))

    def test_hand_example_relu(self):
        params = SimilarityParams(np.eye(2), np.zeros(2), [[3.0, 1.0]], [0.0])
        z, cache = embed_pooled(np.array([[-1.0, 2.0]]), params)
        np.testing.assert_array_equal(cache.hidden, [[0.0, 2.0]])
        np.testing.assert_array_equal(z, [[2.0]])

    def test_pools_spatially_first(self):
        frames = np.array([3.0, 3.0, 4.0, 4.0]).reshape(1, 2, 2, 1)
        z, _ = embed_forward(FeatureSequence(frames), identity_params(2))
        np.testing.assert_array_equal(z, [[3.0, 4.0]])

    def test_channel_mismatch(self, rng):
        with pytest.raises(DimensionError):
            embed_forward(FeatureSequence(rng.normal(size=(2, 3, 1, 1))), identity_params(2))

    def test_time_steps_independent(self, rng):
        params = random_params(rng, 4, 3)
        pooled = rng.normal(size=(6, 4))
        perm = rng.permutation(6)
        z, _ = embed_pooled(pooled, params)
        z_perm, _ = embed_pooled(pooled[perm], params)
        np.testing.assert_array_equal(z_perm, z[perm])

    def test_deterministic(self, rng):
        params = random_params(rng, 4, 3)
        seq = FeatureSequence(rng.normal(size=(5, 4, 2, 2)))
        assert embed_forward(seq, params)[0].tobytes() == embed_forward(seq, params)[0].tobytes()


class TestInit:
    def test_glorot_bounds_and_zero_bias(self):
        p = init_params(5, 3, SeededRng(0))
        assert np.all(np.abs(p.w1) <= np.sqrt(6 / 10))
        assert np.all(np.abs(p.w2) <= np.sqrt(6 / 8))
        assert not p.b1.any() and not p.b2.any()

    def test_seeded(self):
        a = init_params(4, 2, SeededRng(3)).flatten()
        b = init_params(4, 2, SeededRng(3)).flatten()
        np.testing.assert_array_equal(a, b)


class TestBackward:
    def test_zero_upstream(self, rng):
        params = random_params(rng, 3, 2)
        _, cache = embed_pooled(rng.normal(size=(4, 3)), params)
        grads, grad_pooled = embed_backward(np.zeros((4, 2)), cache, params)
        assert not grads.flatten().any()
        assert not grad_pooled.any()

    def test_identity_chain(self, rng):
        params = identity_params(3)
        pooled = rng.uniform(0.5, 2.0, size=(4, 3))
        _, cache = embed_pooled(pooled, params)
        g = rng.normal(size=(4, 3))
        _, grad_pooled = embed_backward(g, cache, params)
        np.testing.assert_array_equal(grad_pooled, g)

    def test_shape_mismatch(self, rng):
        params = random_params(rng, 3, 2)
        _, cache = embed_pooled(rng.normal(size=(4, 3)), params)
        with pytest.raises(DimensionError):
            embed_backward(np.zeros((4, 3)), cache, params)

    @pytest.mark.parametrize("draw", range(20))
    def test_matches_finite_differences(self, draw):
        rng = np.random.default_rng(draw)
        T, C, L = rng.integers(1, 9, size=3)
        H, W = rng.integers(1, 4, size=2)
        params = random_params(rng, C, L)
        seq = FeatureSequence(rng.normal(size=(T, C, H, W)))
        z, cache = embed_forward(seq, params)
        # keep the ReLU inputs away from their kink
        assert np.all(np.abs(cache.pre) > 1e-4) or pytest.skip("draw lands on the ReLU kink")
        grads, grad_pooled = embed_backward(2 * z, cache, params)

        loss_p = lambda flat: float(np.sum(embed_forward(seq, params.unflatten(flat))[0] ** 2))
        fd = params.unflatten(finite_diff(loss_p, params.flatten()))
        for (name, a), (_, n) in zip(grads.named(), fd.named()):
            np.testing.assert_allclose(a, n, rtol=1e-6, atol=1e-6 * np.max(np.abs(n)), err_msg=name)

        loss_x = lambda x: float(np.sum(embed_forward(FeatureSequence(x), params)[0] ** 2))
        fd_frames = finite_diff(loss_x, seq.frames)
        analytic = pooled_grad_to_frames(grad_pooled, cache)
        np.testing.assert_allclose(analytic, fd_frames, rtol=1e-6, atol=1e-6 * np.max(np.abs(fd_frames)))


class TestParamsRecord:
    def test_flatten_roundtrip(self, rng):
        p = random_params(rng, 3, 2)
        q = p.unflatten(p.flatten())
        for (_, a), (_, b) in zip(p.named(), q.named()):
            np.testing.assert_array_equal(a, b)

    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionError):
            SimilarityParams(np.eye(2), np.zeros(3), np.eye(2), np.zeros(2))
