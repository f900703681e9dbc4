"""Sliding-window inference with gaussian-weighted blending.

Windows of a fixed size are planned over the spatial axes (the final
window on each axis is shifted back to end exactly at the image edge),
each window is run through an executor, and outputs are accumulated as
``sum(out * weight) / sum(weight)`` with a gaussian importance map peaked
at the window center. With enough overlap the blend is seam-free; with an
identity executor it reproduces the input to float accuracy.
"""

from __future__ import annotations

import itertools
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ChannelMismatch, ExecutorFailure, PipelineError, ShapeMismatch
from .ndimage import NDImage, ROI, ensure_axes, pad

WEIGHT_FLOOR = 1e-3
DEFAULT_SIGMA_SCALE = 0.125
DEFAULT_OVERLAP = 0.25


@dataclass(frozen=True)
class TilingPlan:
    """Overlapping windows covering (the padded version of) a spatial shape."""

    spatial_shape: tuple[int, ...]
    window_size: tuple[int, ...]
    overlap: float
    padded_shape: tuple[int, ...]
    windows: tuple[ROI, ...]


def _axis_offsets(extent: int, window: int, stride: int) -> list[int]:
    if extent == window:
        return [0]
    offsets = list(range(0, extent - window + 1, stride))
    if offsets[-1] != extent - window:
        offsets.append(extent - window)  # final window shifted back to the edge
    return offsets


def plan_windows(spatial_shape, window_size, overlap: float = DEFAULT_OVERLAP) -> TilingPlan:
    """Plan the window set; images smaller than the window get a padded space."""
    spatial_shape = tuple(int(s) for s in spatial_shape)
    window_size = tuple(int(w) for w in window_size)
    if len(spatial_shape) != len(window_size):
        raise ValueError(f"window rank {len(window_size)} != spatial rank {len(spatial_shape)}")
    if any(w < 1 for w in window_size):
        raise ValueError(f"window extents must be >= 1, got {window_size}")
    if not (0.0 <= overlap < 1.0):
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    padded = tuple(max(s, w) for s, w in zip(spatial_shape, window_size))
    per_axis = []
    for extent, window in zip(padded, window_size):
        stride = max(1, math.floor(window * (1.0 - overlap)))
        per_axis.append(_axis_offsets(extent, window, stride))
    windows = tuple(
        ROI(tuple(offs), window_size) for offs in itertools.product(*per_axis)
    )
    return TilingPlan(spatial_shape, window_size, overlap, padded, windows)


@dataclass(frozen=True)
class ImportanceMap:
    """Gaussian blending weights over one window, max 1 at the center."""

    window_size: tuple[int, ...]
    sigma_scale: float
    weights: NDImage

    @property
    def array(self) -> np.ndarray:
        return self.weights.data


def gaussian_importance(window_size, sigma_scale: float = DEFAULT_SIGMA_SCALE) -> ImportanceMap:
    """Separable gaussian centered on the window, sigma = sigma_scale * extent.

    Normalized so the maximum equals 1, then floored at 1e-3 so every
    position keeps a nonzero vote in the blend.
    """
    window_size = tuple(int(w) for w in window_size)
    if sigma_scale <= 0:
        raise ValueError(f"sigma_scale must be positive, got {sigma_scale}")
    axes_1d = []
    for n in window_size:
        center = (n - 1) / 2.0
        sigma = sigma_scale * n
        x = np.arange(n, dtype=np.float64)
        axes_1d.append(np.exp(-((x - center) ** 2) / (2.0 * sigma**2)))
    weights = axes_1d[0]
    for a in axes_1d[1:]:
        weights = np.multiply.outer(weights, a)
    weights = weights / weights.max()
    weights = np.maximum(weights, WEIGHT_FLOOR)
    spatial = "ZYX"[-len(window_size):]
    return ImportanceMap(window_size, sigma_scale, NDImage(weights.astype(np.float32), spatial))


def _pad_amounts(shape, padded) -> tuple[tuple[int, ...], tuple[int, ...]]:
    before = tuple((p - s) // 2 for s, p in zip(shape, padded))
    after = tuple(p - s - b for s, p, b in zip(shape, padded, before))
    return before, after


def run_sliding(
    img: NDImage,
    executor,
    plan: TilingPlan,
    importance: ImportanceMap,
    batch_size: int = 1,
    workers: int = 1,
) -> NDImage:
    """Run the executor over every planned window and blend the results.

    The input must carry exactly the plan's spatial axes (plus an optional
    channel axis); the output has the executor's declared channel count.
    """
    spec = executor.spec
    rank = len(plan.window_size)
    if spec.spatial_rank != rank:
        raise ValueError(f"plan rank {rank} != executor spatial rank {spec.spatial_rank}")
    if importance.window_size != plan.window_size:
        raise ValueError("importance map window does not match the plan window")
    spatial = img.spatial_axes()
    if len(spatial) != rank:
        raise ValueError(f"image spatial axes {spatial!r} do not match plan rank {rank}")
    if img.spatial_shape() != plan.spatial_shape:
        raise ValueError(
            f"image spatial shape {img.spatial_shape()} != plan shape {plan.spatial_shape}"
        )
    for label in img.axes:
        if label not in "C" + spatial:
            raise ValueError(f"run_sliding cannot handle outer axis {label!r}; "
                             "use run_over_outer_axes")

    had_channel = img.has_axis("C")
    work = ensure_axes(img.as_f32(), "C" + spatial)
    channels = work.extent("C")
    if channels != spec.in_channels:
        raise ChannelMismatch(f"image has {channels} channels, executor wants {spec.in_channels}")

    if plan.padded_shape != plan.spatial_shape:
        before, after = _pad_amounts(plan.spatial_shape, plan.padded_shape)
        work = pad(work, (0,) + before, (0,) + after, mode="reflect")

    data = work.data
    weight_map = importance.array.astype(np.float32)
    value = np.zeros((spec.out_channels,) + plan.padded_shape, dtype=np.float32)
    weight = np.zeros(plan.padded_shape, dtype=np.float32)
    lock = threading.Lock()

    def window_slices(roi: ROI):
        return (slice(None),) + roi.slices()

    def run_batch(batch_index: int, rois: tuple[ROI, ...]):
        batch = np.stack([data[window_slices(r)] for r in rois])
        try:
            out = executor(batch)
        except PipelineError:
            raise
        except Exception as exc:  # wrap foreign executor failures with context
            raise ExecutorFailure(
                f"executor failed on window batch {batch_index} "
                f"(first window offset {rois[0].offsets}): {exc}"
            ) from exc
        out = np.asarray(out)
        expected = (len(rois), spec.out_channels) + plan.window_size
        if out.shape != expected:
            raise ShapeMismatch(f"executor returned {out.shape}, expected {expected}")
        with lock:
            for roi, piece in zip(rois, out):
                sl = window_slices(roi)
                value[sl] += piece * weight_map
                weight[roi.slices()] += weight_map

    batch_size = max(1, int(batch_size))
    batches = [
        plan.windows[i : i + batch_size] for i in range(0, len(plan.windows), batch_size)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_batch, i, rois) for i, rois in enumerate(batches)]
            for f in futures:
                f.result()
    else:
        for i, rois in enumerate(batches):
            run_batch(i, rois)

    blended = value / weight  # weight is strictly positive: coverage + floor
    if plan.padded_shape != plan.spatial_shape:
        before, _ = _pad_amounts(plan.spatial_shape, plan.padded_shape)
        sl = (slice(None),) + tuple(
            slice(b, b + s) for b, s in zip(before, plan.spatial_shape)
        )
        blended = blended[sl]

    out_img = NDImage(np.ascontiguousarray(blended), "C" + spatial, img.pixel_size)
    if not had_channel and spec.out_channels == 1:
        out_img = NDImage(out_img.data[0], spatial, img.pixel_size)
    return out_img


def run_over_outer_axes(
    img: NDImage,
    executor,
    window_size,
    overlap: float = DEFAULT_OVERLAP,
    sigma_scale: float = DEFAULT_SIGMA_SCALE,
    batch_size: int = 1,
    workers: int = 1,
) -> NDImage:
    """Apply tiled inference across T (and Z, for 2D executors) positions.

    Slices the image down to what the executor consumes, runs
    ``run_sliding`` per slice, and reassembles along the outer axes.
    """
    spec = executor.spec
    channels = img.extent("C") if img.has_axis("C") else 1
    if channels != spec.in_channels:
        raise ChannelMismatch(f"image has {channels} channels, executor wants {spec.in_channels}")
    rank = spec.spatial_rank
    spatial = ("YX" if rank == 2 else "ZYX")
    for label in spatial:
        if label not in img.axes:
            raise ValueError(f"image lacks required spatial axis {label!r} (axes={img.axes!r})")

    outer = [a for a in img.axes if a not in spatial and a != "C"]
    slice_shape = tuple(img.extent(a) for a in spatial)
    plan = plan_windows(slice_shape, window_size, overlap)
    importance = gaussian_importance(plan.window_size, sigma_scale)

    if not outer:
        return run_sliding(img, executor, plan, importance, batch_size, workers)

    outer_extents = [img.extent(a) for a in outer]
    outer_positions = list(itertools.product(*[range(n) for n in outer_extents]))
    pieces = []
    for pos in outer_positions:
        sel = []
        for a in img.axes:
            if a in outer:
                sel.append(pos[outer.index(a)])
            else:
                sel.append(slice(None))
        piece_axes = "".join(a for a in img.axes if a not in outer)
        piece = NDImage(np.ascontiguousarray(img.data[tuple(sel)]), piece_axes, img.pixel_size)
        pieces.append(run_sliding(piece, executor, plan, importance, batch_size, workers))

    # reassemble: stack results back along the outer axes in canonical order
    result_axes = "".join(
        a for a in "TCZYX"
        if a in outer or a in pieces[0].axes
    )
    piece_shape = pieces[0].shape
    out_shape = []
    for a in result_axes:
        if a in outer:
            out_shape.append(img.extent(a))
        else:
            out_shape.append(piece_shape[pieces[0].axes.index(a)])
    out = np.empty(tuple(out_shape), dtype=np.float32)
    for pos, piece in zip(outer_positions, pieces):
        sel = []
        for a in result_axes:
            if a in outer:
                sel.append(pos[outer.index(a)])
            else:
                sel.append(slice(None))
        out[tuple(sel)] = piece.data
    return NDImage(out, result_axes, img.pixel_size)


def count_windows(plan: TilingPlan) -> int:
    return len(plan.windows)
