import numpy as np
import pytest
from scipy import ndimage as ndi

from mmvpipe import (
    ExecutorSpec,
    NDImage,
    gaussian_importance,
    make_executor,
    plan_windows,
    run_over_outer_axes,
    run_sliding,
)
from mmvpipe.errors import ChannelMismatch, ExecutorFailure, ShapeMismatch
from mmvpipe.tiling import WEIGHT_FLOOR

from conftest import make_image


class TestPlanWindows:
    def test_single_window_when_shape_equals_window(self):
        plan = plan_windows((8, 8), (8, 8), overlap=0.5)
        assert len(plan.windows) == 1
        assert plan.windows[0].offsets == (0, 0)
        assert plan.padded_shape == (8, 8)

    def test_stride_rule_hand_enumeration(self):
        plan = plan_windows((10,) , (4,), overlap=0.25)
        offsets = [w.offsets[0] for w in plan.windows]
        assert offsets == [0, 3, 6]  # stride floor(4 * 0.75) = 3; last ends at 10

    def test_final_window_shifted_back(self):
        plan = plan_windows((11,), (4,), overlap=0.0)
        offsets = [w.offsets[0] for w in plan.windows]
        assert offsets == [0, 4, 7]
        assert offsets[-1] + 4 == 11

    def test_small_image_gets_padded_space(self):
        plan = plan_windows((3, 9), (5, 4), overlap=0.0)
        assert plan.padded_shape == (5, 9)
        assert all(w.sizes == (5, 4) for w in plan.windows)

    def test_windows_sorted_lexicographically(self):
        plan = plan_windows((9, 9), (4, 4), overlap=0.5)
        offsets = [w.offsets for w in plan.windows]
        assert offsets == sorted(offsets)

    def test_coverage_on_random_plans(self, rng):
        for _ in range(500):
            rank = int(rng.integers(1, 4))
            shape = tuple(int(rng.integers(1, 65 if rank < 3 else 33)) for _ in range(rank))
            window = tuple(int(rng.integers(1, s + 3)) for s in shape)
            overlap = float(rng.uniform(0.0, 0.9))
            plan = plan_windows(shape, window, overlap)
            covered = np.zeros(plan.padded_shape, dtype=bool)
            for roi in plan.windows:
                covered[roi.slices()] = True
            assert covered.all()

    def test_window_count_monotone_in_overlap(self):
        counts = [
            len(plan_windows((32, 32), (8, 8), o).windows) for o in (0.0, 0.25, 0.5, 0.75)
        ]
        assert counts == sorted(counts)


class TestGaussianImportance:
    def test_degenerate_window(self):
        imp = gaussian_importance((1, 1), 0.125)
        assert imp.array.shape == (1, 1)
        assert imp.array[0, 0] == 1.0

    def test_direct_formula_window5(self):
        # second axis has extent 1, so the first column is the pure 1D profile
        imp = gaussian_importance((5, 1), 0.125)
        sigma = 0.125 * 5
        center = 2.0
        expected = np.exp(-((np.arange(5) - center) ** 2) / (2 * sigma**2))
        expected /= expected.max()
        expected = np.maximum(expected, WEIGHT_FLOOR)
        np.testing.assert_allclose(imp.array[:, 0], expected, atol=1e-7)
        assert expected[0] > WEIGHT_FLOOR  # raw edge value ~6e-3 sits above the floor

    def test_floor_applies_for_tight_sigma(self):
        imp = gaussian_importance((33, 33), 0.05)
        assert imp.array.min() == np.float32(WEIGHT_FLOOR)

    def test_center_max_one_and_positive(self, rng):
        for _ in range(10):
            window = tuple(int(rng.integers(1, 12)) for _ in range(int(rng.integers(2, 4))))
            imp = gaussian_importance(window, float(rng.uniform(0.05, 0.5)))
            assert imp.array.max() == 1.0
            assert imp.array.min() > 0.0

    def test_reflection_symmetry(self, rng):
        for _ in range(10):
            window = tuple(int(rng.integers(2, 10)) for _ in range(2))
            imp = gaussian_importance(window, float(rng.uniform(0.05, 0.5)))
            for axis in range(2):
                np.testing.assert_allclose(imp.array, np.flip(imp.array, axis=axis), atol=1e-7)


def identity_executor(rank=2, channels=1):
    return make_executor(ExecutorSpec(kind="identity", spatial_rank=rank,
                                      in_channels=channels, out_channels=channels))


class TestRunSliding:
    def test_identity_round_trip(self):
        img = make_image((33, 47), "YX", seed=1)
        plan = plan_windows(img.spatial_shape(), (16, 16), overlap=0.25)
        imp = gaussian_importance((16, 16))
        out = run_sliding(img, identity_executor(), plan, imp, batch_size=4)
        assert np.abs(out.data - img.data).max() <= 1e-5

    def test_identity_with_padding(self):
        img = make_image((5, 5), "YX", seed=2)
        plan = plan_windows((5, 5), (8, 8), overlap=0.0)
        imp = gaussian_importance((8, 8))
        out = run_sliding(img, identity_executor(), plan, imp)
        assert out.shape == (5, 5)
        assert np.abs(out.data - img.data).max() <= 1e-5

    def test_affine_blending_invariance(self):
        img = NDImage(np.full((20, 20), 3.25, dtype=np.float32), "YX")
        spec = ExecutorSpec(kind="affine", gain=1.0, bias=1.0)
        plan = plan_windows((20, 20), (8, 8), overlap=0.5)
        imp = gaussian_importance((8, 8))
        out = run_sliding(img, make_executor(spec), plan, imp)
        assert np.abs(out.data - (img.data + 1.0)).max() <= 1e-5

    def test_blur_seamless_against_whole_image_oracle(self):
        sigma = 1.0
        radius = int(4.0 * sigma + 0.5)
        img = make_image((64, 64), "YX", seed=3)
        spec = ExecutorSpec(kind="blur", sigma=(sigma, sigma))
        imp = gaussian_importance((32, 32), 0.125)
        whole = ndi.gaussian_filter(img.data.astype(np.float64), sigma, mode="reflect",
                                    truncate=4.0).astype(np.float32)

        plans = {o: plan_windows((64, 64), (32, 32), o) for o in (0.25, 0.5)}
        tiled = {
            o: run_sliding(img, make_executor(spec), plan, imp, batch_size=2)
            for o, plan in plans.items()
        }

        # at generous overlap the blend matches whole-image blur away from
        # the image border (the testable core of seam-free stitching)
        band = radius
        interior = (slice(band, -band), slice(band, -band))
        assert np.abs(tiled[0.5].data[interior] - whole[interior]).max() <= 2e-2

        # the two overlaps agree except within half a blur radius of the
        # sparser plan's tile seams
        seam_mask = np.zeros((64, 64), dtype=bool)
        half = max(1, radius // 2)
        for roi in plans[0.25].windows:
            for axis, (off, size) in enumerate(zip(roi.offsets, roi.sizes)):
                for edge in (off, off + size - 1):
                    if edge in (0, 63):
                        continue
                    lo, hi = max(0, edge - half), min(64, edge + half + 1)
                    if axis == 0:
                        seam_mask[lo:hi, :] = True
                    else:
                        seam_mask[:, lo:hi] = True
        delta = np.abs(tiled[0.5].data - tiled[0.25].data)
        assert delta[interior][~seam_mask[interior]].max() <= 2e-2

    def test_multichannel_and_channel_growth(self):
        class ChannelDoubler:
            spec = ExecutorSpec(kind="external", command=("unused",), in_channels=2,
                                out_channels=4, spatial_rank=2)

            def __call__(self, batch):
                return np.concatenate([batch, batch], axis=1)

        img = make_image((2, 16, 16), "CYX", seed=4)
        plan = plan_windows((16, 16), (8, 8), 0.25)
        imp = gaussian_importance((8, 8))
        out = run_sliding(img, ChannelDoubler(), plan, imp)
        assert out.axes == "CYX"
        assert out.shape == (4, 16, 16)

    def test_wrong_channels(self):
        img = make_image((3, 16, 16), "CYX")
        plan = plan_windows((16, 16), (8, 8), 0.25)
        imp = gaussian_importance((8, 8))
        with pytest.raises(ChannelMismatch):
            run_sliding(img, identity_executor(channels=1), plan, imp)

    def test_executor_exception_wrapped_with_window(self):
        class Boom:
            spec = ExecutorSpec(kind="external", command=("unused",))

            def __call__(self, batch):
                raise RuntimeError("synthetic failure")

        img = make_image((16, 16), "YX")
        plan = plan_windows((16, 16), (8, 8), 0.25)
        imp = gaussian_importance((8, 8))
        with pytest.raises(ExecutorFailure, match="window batch"):
            run_sliding(img, Boom(), plan, imp)

    def test_wrong_output_shape(self):
        class WrongShape:
            spec = ExecutorSpec(kind="external", command=("unused",))

            def __call__(self, batch):
                return batch[..., :-1]

        img = make_image((16, 16), "YX")
        plan = plan_windows((16, 16), (8, 8), 0.25)
        imp = gaussian_importance((8, 8))
        with pytest.raises(ShapeMismatch):
            run_sliding(img, WrongShape(), plan, imp)

    def test_worker_count_tolerance(self):
        img = make_image((48, 48), "YX", seed=9)
        spec = ExecutorSpec(kind="blur", sigma=(1.0, 1.0))
        plan = plan_windows((48, 48), (16, 16), 0.5)
        imp = gaussian_importance((16, 16))
        one = run_sliding(img, make_executor(spec), plan, imp, batch_size=2, workers=1)
        four = run_sliding(img, make_executor(spec), plan, imp, batch_size=2, workers=4)
        assert np.abs(one.data - four.data).max() <= 1e-5


class TestRunOverOuterAxes:
    def test_timelapse_identity(self):
        img = make_image((3, 20, 20), "TYX", seed=5)
        out = run_over_outer_axes(img, identity_executor(), (8, 8), overlap=0.25)
        assert out.axes == "TYX"
        assert out.extent("T") == 3
        assert np.abs(out.data - img.data).max() <= 1e-5

    def test_2d_executor_over_zyx_matches_per_plane(self):
        img = make_image((4, 16, 16), "ZYX", seed=6)
        out = run_over_outer_axes(img, identity_executor(), (8, 8), overlap=0.25)
        assert out.shape == img.shape
        # loop-unrolled oracle: each plane processed independently
        from mmvpipe.tiling import gaussian_importance as gi, plan_windows as pw

        plan = pw((16, 16), (8, 8), 0.25)
        imp = gi((8, 8))
        for z in range(4):
            plane = NDImage(img.data[z], "YX")
            expected = run_sliding(plane, identity_executor(), plan, imp)
            np.testing.assert_allclose(out.data[z], expected.data, atol=1e-6)

    def test_3d_executor_consumes_z(self):
        img = make_image((6, 16, 16), "ZYX", seed=7)
        out = run_over_outer_axes(img, identity_executor(rank=3), (4, 8, 8), overlap=0.25)
        assert out.shape == img.shape
        assert np.abs(out.data - img.data).max() <= 1e-5

    def test_5d_image(self):
        img = make_image((2, 1, 3, 12, 12), "TCZYX", seed=8)
        out = run_over_outer_axes(img, identity_executor(), (6, 6), overlap=0.25)
        assert out.axes == "TCZYX"
        assert out.shape == img.shape
        assert np.abs(out.data - img.data).max() <= 1e-5

    def test_channel_mismatch(self):
        img = make_image((2, 12, 12), "CYX")
        with pytest.raises(ChannelMismatch):
            run_over_outer_axes(img, identity_executor(channels=1), (6, 6))
