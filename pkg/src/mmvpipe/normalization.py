"""Intensity normalization: percentile clipping, z-score, and center-Z z-score.

Statistics are always computed in float64 over the whole image (or the
center Z chunk), with population standard deviation, and the result is
returned as float32. Percentiles use linear interpolation between order
statistics (the inclusive method).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyImage, NoZAxis, ZeroVariance
from .ndimage import NDImage


@dataclass(frozen=True)
class NormSpec:
    """Declarative description of one intensity normalization.

    kind ``percentile`` clips to the [p_lo, p_hi] percentile range and
    rescales to [out_lo, out_hi]; ``standard`` is a plain z-score;
    ``center`` is a z-score whose statistics come from the middle
    ``center_fraction`` of Z slices.
    """

    kind: str = "percentile"
    p_lo: float = 0.5
    p_hi: float = 99.5
    out_lo: float = -1.0
    out_hi: float = 1.0
    center_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("percentile", "standard", "center"):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if not (0.0 <= self.p_lo < self.p_hi <= 100.0):
            raise ValueError(f"need 0 <= p_lo < p_hi <= 100, got [{self.p_lo}, {self.p_hi}]")
        if not self.out_lo < self.out_hi:
            raise ValueError(f"need out_lo < out_hi, got [{self.out_lo}, {self.out_hi}]")
        if not (0.0 < self.center_fraction <= 1.0):
            raise ValueError(f"center_fraction must be in (0, 1], got {self.center_fraction}")


def percentile_norm(img: NDImage, spec: NormSpec = NormSpec()) -> NDImage:
    """Clip to the spec's percentile range and rescale to [out_lo, out_hi].

    A degenerate clip range (constant image) maps everything to the
    midpoint of the output range.
    """
    if img.data.size < 2:
        raise EmptyImage("percentile normalization needs at least 2 elements")
    values = img.data.astype(np.float64)
    v_lo, v_hi = np.percentile(values, [spec.p_lo, spec.p_hi], method="linear")
    if v_lo == v_hi:
        out = np.full(img.shape, (spec.out_lo + spec.out_hi) / 2.0, dtype=np.float32)
        return NDImage(out, img.axes, img.pixel_size)
    clipped = np.clip(values, v_lo, v_hi)
    scale = (spec.out_hi - spec.out_lo) / (v_hi - v_lo)
    out = (clipped - v_lo) * scale + spec.out_lo
    return NDImage(out.astype(np.float32), img.axes, img.pixel_size)


def _zscore(img: NDImage, stats_region: np.ndarray) -> NDImage:
    region = stats_region.astype(np.float64)
    mu = region.mean()
    sigma = region.std()  # population std
    if sigma == 0.0:
        raise ZeroVariance("statistics region has zero standard deviation")
    out = (img.data.astype(np.float64) - mu) / sigma
    return NDImage(out.astype(np.float32), img.axes, img.pixel_size)


def standard_norm(img: NDImage) -> NDImage:
    """Subtract the mean intensity and divide by the population std."""
    if img.data.size == 0:
        raise EmptyImage("cannot normalize an empty image")
    return _zscore(img, img.data)


def center_z_slice(z_extent: int, center_fraction: float) -> slice:
    """Z index range of the centered chunk: round(fraction * extent) slices, min 1."""
    chunk = int(round(center_fraction * z_extent))
    chunk = min(max(chunk, 1), z_extent)
    start = (z_extent - chunk) // 2
    return slice(start, start + chunk)


def center_norm(img: NDImage, center_fraction: float = 0.5) -> NDImage:
    """Z-score the whole image with mean/std taken from the middle Z chunk."""
    if not img.has_axis("Z"):
        raise NoZAxis(f"center normalization needs a Z axis (axes={img.axes!r})")
    if not (0.0 < center_fraction <= 1.0):
        raise ValueError(f"center_fraction must be in (0, 1], got {center_fraction}")
    z = img.axis_index("Z")
    sel = [slice(None)] * img.data.ndim
    sel[z] = center_z_slice(img.extent("Z"), center_fraction)
    return _zscore(img, img.data[tuple(sel)])


def apply_norm(img: NDImage, spec: NormSpec) -> NDImage:
    """Dispatch a NormSpec to its implementation."""
    if spec.kind == "percentile":
        return percentile_norm(img, spec)
    if spec.kind == "standard":
        return standard_norm(img)
    return center_norm(img, spec.center_fraction)
