"""N-dimensional image values with named axes, plus crop/pad primitives.

Axes follow the bioimaging convention T, C, Z, Y, X in that fixed order;
images store between 2 and 5 of them (Y and X always present). All
operations are pure: inputs are never mutated and every image freezes its
buffer at construction time, so values are safe to share between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ReflectTooSmall, RoiOutOfBounds

CANONICAL_AXES = "TCZYX"
SPATIAL_AXES = "ZYX"

# f32 is the pipeline dtype; u8/u16 appear only at I/O boundaries.
ALLOWED_DTYPES = (np.float32, np.uint8, np.uint16)


@dataclass(frozen=True)
class NDImage:
    """Immutable image with canonical named axes.

    The buffer is frozen in place at construction (``writeable`` flag
    cleared); pass a copy if you need to keep mutating the source array.

    :ivar data: contiguous row-major array, one dim per axis label
    :ivar axes: axis labels, a subsequence of ``"TCZYX"``
    :ivar pixel_size: optional per-spatial-axis physical size in micrometers;
        informational only, never used in computation
    """

    data: np.ndarray
    axes: str
    pixel_size: dict[str, float] | None = None

    def __post_init__(self):
        axes = self.axes
        if not (2 <= len(axes) <= 5):
            raise ValueError(f"axes must have 2-5 labels, got {axes!r}")
        positions = [CANONICAL_AXES.find(a) for a in axes]
        if -1 in positions or sorted(positions) != positions or len(set(axes)) != len(axes):
            raise ValueError(f"axes must be a subsequence of {CANONICAL_AXES!r}, got {axes!r}")
        if "Y" not in axes or "X" not in axes:
            raise ValueError(f"Y and X axes are required, got {axes!r}")
        arr = np.ascontiguousarray(self.data)
        if arr.dtype not in [np.dtype(d) for d in ALLOWED_DTYPES]:
            raise ValueError(f"unsupported dtype {arr.dtype}; use f32 (or u8/u16 at I/O boundaries)")
        if arr.ndim != len(axes):
            raise ValueError(f"data has {arr.ndim} dims but {len(axes)} axes given")
        if any(n < 1 for n in arr.shape):
            raise ValueError(f"all extents must be >= 1, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def has_axis(self, label: str) -> bool:
        return label in self.axes

    def axis_index(self, label: str) -> int:
        idx = self.axes.find(label)
        if idx == -1:
            raise ValueError(f"image has no {label!r} axis (axes={self.axes!r})")
        return idx

    def extent(self, label: str) -> int:
        return self.shape[self.axis_index(label)]

    def spatial_axes(self) -> str:
        """Labels in Z, Y, X order that are present on this image."""
        return "".join(a for a in SPATIAL_AXES if a in self.axes)

    def spatial_shape(self) -> tuple[int, ...]:
        return tuple(self.extent(a) for a in self.spatial_axes())

    def as_f32(self) -> "NDImage":
        """Return this image with a float32 buffer (no value rescale)."""
        if self.dtype == np.float32:
            return self
        return NDImage(self.data.astype(np.float32), self.axes, self.pixel_size)


@dataclass(frozen=True)
class ROI:
    """Per-axis (offset, size) rectangle; one entry per axis of the subject image."""

    offsets: tuple[int, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.offsets) != len(self.sizes):
            raise ValueError("offsets and sizes must have equal length")
        if any(o < 0 for o in self.offsets) or any(s < 1 for s in self.sizes):
            raise ValueError(f"offsets must be >= 0 and sizes >= 1, got {self}")

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(o, o + s) for o, s in zip(self.offsets, self.sizes))


def crop(img: NDImage, roi: ROI) -> NDImage:
    """Extract the ROI as a new image; axes and dtype are preserved."""
    if len(roi.offsets) != img.data.ndim:
        raise ValueError(f"ROI rank {len(roi.offsets)} != image rank {img.data.ndim}")
    for axis, (off, size, extent) in enumerate(zip(roi.offsets, roi.sizes, img.shape)):
        if off + size > extent:
            raise RoiOutOfBounds(
                f"axis {img.axes[axis]}: offset {off} + size {size} exceeds extent {extent}"
            )
    return NDImage(img.data[roi.slices()].copy(), img.axes, img.pixel_size)


def pad(
    img: NDImage,
    before: tuple[int, ...],
    after: tuple[int, ...],
    mode: str = "constant",
    value: float = 0.0,
) -> NDImage:
    """Extend the image by `before`/`after` elements per axis.

    ``constant`` fills with `value`; ``reflect`` mirrors without repeating
    the edge element and therefore needs extent >= 2 on padded axes.
    """
    if len(before) != img.data.ndim or len(after) != img.data.ndim:
        raise ValueError("before/after must have one count per axis")
    if any(b < 0 for b in before) or any(a < 0 for a in after):
        raise ValueError("pad counts must be non-negative")
    widths = tuple(zip(before, after))
    if mode == "constant":
        out = np.pad(img.data, widths, mode="constant", constant_values=value)
    elif mode == "reflect":
        for axis, (b, a) in enumerate(widths):
            if (b or a) and img.shape[axis] < 2:
                raise ReflectTooSmall(
                    f"axis {img.axes[axis]} has extent 1; reflect padding is undefined"
                )
        out = np.pad(img.data, widths, mode="reflect")
    else:
        raise ValueError(f"unknown pad mode {mode!r}")
    return NDImage(out.astype(img.dtype, copy=False), img.axes, img.pixel_size)


def ensure_axes(img: NDImage, required) -> NDImage:
    """Insert singleton axes so the image carries every axis in `required`.

    `required` must be a superset of the image's axes; data values are
    unchanged and new axes land at their canonical positions.
    """
    required_set = set(required)
    missing_req = required_set - set(CANONICAL_AXES)
    if missing_req:
        raise ValueError(f"unknown axis labels {sorted(missing_req)}")
    if not required_set.issuperset(img.axes):
        raise ValueError(
            f"required axes {sorted(required_set)} do not cover image axes {img.axes!r}"
        )
    target = "".join(a for a in CANONICAL_AXES if a in required_set or a in img.axes)
    if target == img.axes:
        return img
    arr = img.data
    for pos, label in enumerate(target):
        if label not in img.axes:
            arr = np.expand_dims(arr, pos)
    return NDImage(arr, target, img.pixel_size)
