"""Evaluation measures: Pearson correlation, SSIM, Dice/F1, IoU.

Set-level evaluation aggregates per-sample values into mean +/- population
std reports rendered with 3 decimals (``pearson: 0.864 ± 0.021 (n=50)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .errors import NonBinaryInput, TooSmallForWindow, ZeroVariance
from .formats import read_image
from .ndimage import NDImage

MASK_METRICS = ("dice", "iou")
METRIC_NAMES = ("pearson", "ssim", "dice", "iou")


def _values(img) -> np.ndarray:
    arr = img.data if isinstance(img, NDImage) else np.asarray(img)
    return np.asarray(arr, dtype=np.float64)


def _spatial_array(img) -> np.ndarray:
    """Drop singleton leading axes so SSIM sees a plain 2D/3D array."""
    arr = _values(img)
    while arr.ndim > 2 and arr.shape[0] == 1:
        arr = arr[0]
    return arr


def pearson(a, b) -> float:
    """Product-moment correlation over all elements."""
    x = _values(a).ravel()
    y = _values(b).ravel()
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {_values(a).shape} vs {_values(b).shape}")
    if x.std() == 0.0 or y.std() == 0.0:
        raise ZeroVariance("pearson is undefined for a constant image")
    return float(np.corrcoef(x, y)[0, 1])


def ssim(a, b, window: int = 7, k1: float = 0.01, k2: float = 0.03, data_range: float = 1.0) -> float:
    """Mean local SSIM with uniform window statistics (2D or 3D).

    ``data_range`` must be supplied by the caller; it is never inferred
    from the dtype.
    """
    x = _spatial_array(a)
    y = _spatial_array(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim not in (2, 3):
        raise ValueError(f"ssim supports 2D/3D images, got effective rank {x.ndim}")
    if window % 2 != 1 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if data_range <= 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    if any(n < window for n in x.shape):
        raise TooSmallForWindow(f"extents {x.shape} smaller than the {window}-wide window")

    def local_mean(v):
        return ndi.uniform_filter(v, size=window, mode="constant")

    mu_x = local_mean(x)
    mu_y = local_mean(y)
    mu_xx = local_mean(x * x)
    mu_yy = local_mean(y * y)
    mu_xy = local_mean(x * y)
    var_x = mu_xx - mu_x * mu_x
    var_y = mu_yy - mu_y * mu_y
    cov = mu_xy - mu_x * mu_y

    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    r = window // 2
    valid = tuple(slice(r, n - r) for n in x.shape)  # windows fully inside the image
    return float(ssim_map[valid].mean())


def _binary(img, name: str) -> np.ndarray:
    arr = _values(img)
    if not np.isin(arr, (0.0, 1.0)).all():
        raise NonBinaryInput(f"{name} mask contains values outside {{0, 1}}")
    return arr.astype(bool)


def dice_f1(pred, gt) -> float:
    """Pixel-level Dice / F1: 2|P∩G| / (|P|+|G|); 1.0 when both masks are empty."""
    p = _binary(pred, "pred")
    g = _binary(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def iou(pred, gt) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    p = _binary(pred, "pred")
    g = _binary(gt, "gt")
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    union = int((p | g).sum())
    if union == 0:
        return 1.0
    return int((p & g).sum()) / union


@dataclass(frozen=True)
class MetricReport:
    """Per-sample values for one metric plus their mean/std aggregate."""

    name: str
    sample_ids: tuple[str, ...]
    values: tuple[float, ...]
    errors: tuple[tuple[str, str], ...] = ()  # (sample id, message) pairs

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.values)) if self.values else float("nan")  # population std

    def line(self) -> str:
        return f"{self.name}: {self.mean:.3f} ± {self.std:.3f} (n={self.n})"

    def to_dict(self) -> dict:
        return {
            "metric": self.name,
            "per_sample": dict(zip(self.sample_ids, self.values)),
            "mean": self.mean,
            "std": self.std,
            "n": self.n,
            "warnings": [{"id": i, "error": m} for i, m in self.errors],
        }


def _compute_one(name: str, pred: NDImage, gt: NDImage, threshold: float, data_range: float) -> float:
    if name == "pearson":
        return pearson(pred, gt)
    if name == "ssim":
        return ssim(pred, gt, data_range=data_range)
    binarized = NDImage((pred.data >= threshold).astype(np.float32), pred.axes)
    if name == "dice":
        return dice_f1(binarized, gt)
    if name == "iou":
        return iou(binarized, gt)
    raise ValueError(f"unknown metric {name!r}; known: {METRIC_NAMES}")


def evaluate_set(
    manifest, metric_names, threshold: float = 0.5, data_range: float = 1.0
) -> list[MetricReport]:
    """Evaluate prediction/ground-truth pairs (manifest source vs target).

    Per-sample failures are collected as warnings on the report and
    excluded from the aggregates rather than aborting the whole set.
    """
    for name in metric_names:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {name!r}; known: {METRIC_NAMES}")
    loaded: list[tuple[str, NDImage | None, NDImage | None, str | None]] = []
    for record in manifest.records:
        try:
            pred = read_image(record.source_path)
            gt = read_image(record.target_path)
            loaded.append((record.id, pred, gt, None))
        except Exception as exc:
            loaded.append((record.id, None, None, str(exc)))

    reports = []
    for name in metric_names:
        ids: list[str] = []
        values: list[float] = []
        errors: list[tuple[str, str]] = []
        for sample_id, pred, gt, load_error in loaded:
            if load_error is not None:
                errors.append((sample_id, load_error))
                continue
            try:
                value = _compute_one(name, pred, gt, threshold, data_range)
            except Exception as exc:
                errors.append((sample_id, str(exc)))
                continue
            ids.append(sample_id)
            values.append(float(value))
        reports.append(MetricReport(name, tuple(ids), tuple(values), tuple(errors)))
    return reports
