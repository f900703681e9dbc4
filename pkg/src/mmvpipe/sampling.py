"""Per-epoch dataset subsets and cost-map-aware random patch extraction.

Both operations are deterministic given their explicit inputs: the epoch
subset is a pure function of (ids, fraction, reload interval, epoch, seed)
and patch sampling consumes a caller-supplied random generator.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Manifest
from .errors import AllExcluded
from .ndimage import NDImage, ROI, crop

MAX_PATCH_TRIES = 20


def _ring_order(ids: list[str], seed: int) -> list[str]:
    return sorted(ids, key=lambda i: hashlib.sha256(f"ring:{seed}:{i}".encode()).hexdigest())


def epoch_subset(
    manifest: Manifest, fraction: float, reload_every: int, epoch: int, seed: int
) -> list[str]:
    """Ids to load for this epoch when only a fraction of the data fits.

    The ids form a seed-shuffled ring; each block of ``reload_every``
    epochs takes the next ``ceil(fraction * N)`` entries along the ring,
    so any ``ceil(1/fraction)`` consecutive blocks cover every sample.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if reload_every < 1:
        raise ValueError(f"reload_every must be >= 1, got {reload_every}")
    ids = manifest.ids()
    if not ids:
        raise ValueError("manifest is empty")
    n = len(ids)
    take = math.ceil(fraction * n)
    ring = _ring_order(ids, seed)
    block = epoch // reload_every
    start = (block * take) % n
    doubled = ring + ring
    return doubled[start : start + take]


@dataclass(frozen=True)
class PatchPair:
    """Congruent source/target/cost crops plus their origin in the parent."""

    source: NDImage
    target: NDImage
    cost: NDImage
    origin: ROI


def _spatial_roi_for(img: NDImage, offsets: dict[str, int], sizes: dict[str, int]) -> ROI:
    offs, szs = [], []
    for i, axis in enumerate(img.axes):
        if axis in offsets:
            offs.append(offsets[axis])
            szs.append(sizes[axis])
        else:
            offs.append(0)
            szs.append(img.shape[i])
    return ROI(tuple(offs), tuple(szs))


def sample_patch(
    source: NDImage,
    target: NDImage,
    costmap: NDImage | None,
    patch_size,
    rng: np.random.Generator,
) -> PatchPair:
    """Draw one uniformly random spatial patch, rejecting zero-cost regions.

    Draws with a cost sum of zero are rejected and retried up to
    ``MAX_PATCH_TRIES`` times; a missing cost map means every position is
    trainable (all-ones cost patch).
    """
    spatial = source.spatial_axes()
    patch_size = tuple(int(s) for s in patch_size)
    if len(patch_size) != len(spatial):
        raise ValueError(f"patch_size has {len(patch_size)} entries for spatial axes {spatial!r}")
    for axis, size in zip(spatial, patch_size):
        if size < 1 or size > source.extent(axis):
            raise ValueError(
                f"patch size {size} invalid for axis {axis} of extent {source.extent(axis)}"
                " (pad smaller images upstream)"
            )
    for other in (target, costmap):
        if other is None:
            continue
        if other.spatial_axes() != spatial or other.spatial_shape() != source.spatial_shape():
            raise ValueError(
                f"spatially incongruent inputs: {other.spatial_shape()} vs {source.spatial_shape()}"
            )
    if costmap is not None and bool((costmap.data < 0).any()):
        raise ValueError("cost map values must be non-negative")

    sizes = dict(zip(spatial, patch_size))
    for _ in range(MAX_PATCH_TRIES):
        offsets = {
            axis: int(rng.integers(0, source.extent(axis) - sizes[axis] + 1)) for axis in spatial
        }
        origin = _spatial_roi_for(source, offsets, sizes)
        if costmap is None:
            cost_patch = NDImage(np.ones(patch_size, dtype=np.float32), spatial)
        else:
            cost_patch = crop(costmap, _spatial_roi_for(costmap, offsets, sizes))
            if float(cost_patch.data.sum()) == 0.0:
                continue
        return PatchPair(
            source=crop(source, origin),
            target=crop(target, _spatial_roi_for(target, offsets, sizes)),
            cost=cost_patch,
            origin=origin,
        )
    raise AllExcluded(
        f"no patch with nonzero cost found in {MAX_PATCH_TRIES} draws at size {patch_size}"
    )
