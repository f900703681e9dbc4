"""Macenko stain normalization for H&E RGB images.

Stain mixing is linear in optical density, OD = -log(I / io). The method
finds the two dominant stain directions from the eigenvectors of the OD
covariance (robust extreme angles at the alpha / 100-alpha percentiles),
re-expresses pixel concentrations in a fixed reference basis, and
re-exponentiates back to RGB.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStains, TooFewStainPixels
from .ndimage import NDImage

# Reference hematoxylin/eosin basis and max concentrations carried over from
# the widely used public implementation lineage of the method. Columns are
# unit-norm OD vectors over (R, G, B); hematoxylin first.
REFERENCE_STAIN_MATRIX = np.array(
    [[0.5626, 0.2159],
     [0.7201, 0.8012],
     [0.4062, 0.5581]]
)
REFERENCE_MAX_CONCENTRATIONS = np.array([1.9705, 1.0308])

_PARALLEL_ANGLE = 1e-6  # radians; below this the two stain directions coincide


def _unit_columns(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=0, keepdims=True)


@dataclass(frozen=True)
class StainParams:
    """Tuning knobs and reference basis for Macenko normalization.

    :ivar io: transmitted-light reference intensity (white level)
    :ivar alpha: robust-angle percentile, in (0, 50)
    :ivar beta: OD transparency threshold; pixels with any component below
        beta are excluded from fitting
    :ivar stain_matrix: 3x2 reference basis, unit-norm columns (H then E)
    :ivar max_concentrations: reference per-stain 99th-percentile concentrations
    """

    io: float = 255.0
    alpha: float = 1.0
    beta: float = 0.15
    stain_matrix: np.ndarray = field(default_factory=lambda: REFERENCE_STAIN_MATRIX.copy())
    max_concentrations: np.ndarray = field(
        default_factory=lambda: REFERENCE_MAX_CONCENTRATIONS.copy()
    )

    def __post_init__(self):
        if self.io <= 0:
            raise ValueError(f"io must be positive, got {self.io}")
        if not (0.0 < self.alpha < 50.0):
            raise ValueError(f"alpha must be in (0, 50), got {self.alpha}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        m = np.asarray(self.stain_matrix, dtype=np.float64)
        if m.shape != (3, 2):
            raise ValueError(f"stain matrix must be 3x2, got {m.shape}")
        norms = np.linalg.norm(m, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-3):
            raise ValueError(f"stain matrix columns must be unit norm, got norms {norms}")
        object.__setattr__(self, "stain_matrix", m)
        object.__setattr__(
            self, "max_concentrations", np.asarray(self.max_concentrations, dtype=np.float64)
        )


def _rgb_pixels(img: NDImage) -> np.ndarray:
    """Flatten a CYX C=3 image to an (N, 3) float64 pixel list."""
    if img.axes != "CYX" or img.extent("C") != 3:
        raise ValueError(f"stain normalization expects a CYX image with C=3, got {img.axes} {img.shape}")
    return img.data.reshape(3, -1).T.astype(np.float64)


def _optical_density(pixels: np.ndarray, io: float) -> np.ndarray:
    # inputs are contracted to (0, io]; clamp defensively so log stays finite
    clamped = np.clip(pixels, io * 1e-6, io)
    return -np.log(clamped / io)


def macenko_fit(img: NDImage, params: StainParams = StainParams()):
    """Estimate the stain basis and max concentrations of an H&E image.

    Returns ``(stain_matrix, max_concentrations)`` where the matrix is 3x2
    with unit-norm columns and hematoxylin (the larger red-channel OD
    component) listed first.
    """
    pixels = _rgb_pixels(img)
    od = _optical_density(pixels, params.io)
    od_hat = od[np.all(od >= params.beta, axis=1)]
    if od_hat.shape[0] < 2:
        raise TooFewStainPixels(
            f"{od_hat.shape[0]} pixels above the beta={params.beta} transparency threshold"
        )

    _, eigvecs = np.linalg.eigh(np.cov(od_hat.T))
    plane = eigvecs[:, 1:3]  # two largest eigenvalues
    # orient the plane basis toward the positive OD octant so percentile
    # angles cannot straddle the atan2 branch cut for physical stains
    for col in range(2):
        if plane[:, col].sum() < 0:
            plane[:, col] = -plane[:, col]

    proj = od_hat @ plane
    phi = np.arctan2(proj[:, 1], proj[:, 0])
    phi_lo, phi_hi = np.percentile(phi, [params.alpha, 100.0 - params.alpha])
    v_lo = plane @ np.array([np.cos(phi_lo), np.sin(phi_lo)])
    v_hi = plane @ np.array([np.cos(phi_hi), np.sin(phi_hi)])
    for v in (v_lo, v_hi):
        if v.sum() < 0:
            v *= -1.0

    angle = np.arccos(np.clip(abs(np.dot(v_lo, v_hi)), -1.0, 1.0))
    if angle < _PARALLEL_ANGLE:
        raise DegenerateStains("the two extreme stain directions coincide")

    if v_lo[0] > v_hi[0]:
        stains = np.column_stack([v_lo, v_hi])
    else:
        stains = np.column_stack([v_hi, v_lo])
    stains = _unit_columns(stains)

    concentrations = np.linalg.lstsq(stains, od.T, rcond=None)[0]
    max_c = np.percentile(concentrations, 99.0, axis=1)
    return stains, max_c


def stain_concentrations(img: NDImage, stains: np.ndarray, io: float) -> np.ndarray:
    """Per-pixel stain concentrations (2, N) of the image in the given basis."""
    od = _optical_density(_rgb_pixels(img), io)
    return np.linalg.lstsq(stains, od.T, rcond=None)[0]


def macenko_normalize(img: NDImage, params: StainParams = StainParams()) -> NDImage:
    """Re-express the image in the reference stain basis.

    Concentrations are scaled so each stain's 99th percentile matches the
    reference maxima, then rendered through the reference matrix back to
    RGB intensities in (0, io].
    """
    stains, max_c = macenko_fit(img, params)
    concentrations = stain_concentrations(img, stains, params.io)
    scale = params.max_concentrations / np.maximum(max_c, 1e-12)
    concentrations = concentrations * scale[:, None]
    rgb = params.io * np.exp(-(params.stain_matrix @ concentrations))
    rgb = np.minimum(rgb, params.io)
    c, y, x = img.shape
    out = rgb.reshape(3, y, x).astype(np.float32)
    return NDImage(out, "CYX", img.pixel_size)
