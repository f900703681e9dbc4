import numpy as np
import pytest

from mmvpipe import ExecutorSpec, execute
from mmvpipe.errors import ChannelMismatch
from mmvpipe.executors import gaussian_kernel_1d


def batch_of(shape, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, size=shape).astype(np.float32)


class TestSpecValidation:
    def test_kind_gate(self):
        with pytest.raises(ValueError):
            ExecutorSpec(kind="mystery")

    def test_identity_needs_matching_channels(self):
        with pytest.raises(ValueError):
            ExecutorSpec(kind="identity", in_channels=1, out_channels=2)

    def test_blur_sigma_positive(self):
        with pytest.raises(ValueError):
            ExecutorSpec(kind="blur", sigma=(0.0, 1.0))

    def test_scalar_sigma_broadcasts(self):
        spec = ExecutorSpec(kind="blur", sigma=2.0, spatial_rank=3)
        assert spec.sigma == (2.0, 2.0, 2.0)

    def test_external_needs_command(self):
        with pytest.raises(ValueError):
            ExecutorSpec(kind="external", command=())


class TestBuiltins:
    def test_identity_bitwise(self):
        batch = batch_of((2, 1, 8, 8))
        out = execute(ExecutorSpec(kind="identity"), batch)
        assert out.tobytes() == batch.tobytes()

    def test_affine(self):
        batch = np.array([0.0, 0.5], dtype=np.float32).reshape(2, 1, 1, 1)
        out = execute(ExecutorSpec(kind="affine", gain=2.0, bias=1.0), batch)
        np.testing.assert_allclose(out.ravel(), [1.0, 2.0], atol=1e-7)

    def test_threshold_is_exactly_binary(self):
        batch = batch_of((1, 1, 16, 16), seed=3)
        out = execute(ExecutorSpec(kind="threshold", threshold=0.5), batch)
        assert set(np.unique(out)) <= {0.0, 1.0}
        np.testing.assert_array_equal(out, (batch >= 0.5).astype(np.float32))

    def test_blur_impulse_matches_kernel_oracle(self):
        sigma = 1.0
        batch = np.zeros((1, 1, 11, 11), dtype=np.float32)
        batch[0, 0, 5, 5] = 1.0
        out = execute(ExecutorSpec(kind="blur", sigma=(sigma, sigma)), batch)
        k = gaussian_kernel_1d(sigma)
        expected = np.outer(k, k)  # impulse response of the separable kernel
        r = (len(k) - 1) // 2
        region = out[0, 0, 5 - r : 5 + r + 1, 5 - r : 5 + r + 1]
        assert np.abs(region - expected).max() <= 1e-6
        assert abs(float(out.sum()) - 1.0) <= 1e-6

    def test_blur_preserves_channel_means(self):
        batch = batch_of((1, 3, 24, 24), seed=9)
        out = execute(ExecutorSpec(kind="blur", sigma=(2.0, 2.0), in_channels=3, out_channels=3), batch)
        for c in range(3):
            assert abs(float(out[0, c].mean()) - float(batch[0, c].mean())) <= 1e-5

    def test_blur_3d(self):
        batch = batch_of((1, 1, 6, 10, 10), seed=2)
        spec = ExecutorSpec(kind="blur", sigma=(1.0, 1.0, 1.0), spatial_rank=3)
        out = execute(spec, batch)
        assert out.shape == batch.shape

    def test_determinism(self):
        batch = batch_of((2, 1, 9, 9), seed=5)
        spec = ExecutorSpec(kind="blur", sigma=(1.5, 1.5))
        assert execute(spec, batch).tobytes() == execute(spec, batch).tobytes()

    def test_channel_mismatch(self):
        batch = batch_of((1, 2, 4, 4))
        with pytest.raises(ChannelMismatch):
            execute(ExecutorSpec(kind="identity"), batch)

    def test_rank_mismatch(self):
        batch = batch_of((1, 1, 4, 4, 4))
        with pytest.raises(ValueError):
            execute(ExecutorSpec(kind="identity", spatial_rank=2), batch)

    def test_builtin_refuses_external_spec(self):
        from mmvpipe.executors import BuiltinExecutor

        with pytest.raises(ValueError):
            BuiltinExecutor(ExecutorSpec(kind="external", command=("x",)))


class TestKernelShape:
    def test_kernel_is_normalized_and_symmetric(self):
        for sigma in (0.5, 1.0, 2.5):
            k = gaussian_kernel_1d(sigma)
            assert abs(k.sum() - 1.0) <= 1e-12
            np.testing.assert_allclose(k, k[::-1])
            assert len(k) == 2 * int(4.0 * sigma + 0.5) + 1
