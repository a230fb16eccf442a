"""CIELab conversion and cross-view chromaticity statistics."""

from dataclasses import dataclass

import numpy as np

from src.errors import ImagingError
from src.models import ChromaStats
from .imaging import Image


SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
D65_WHITE = np.array([0.95047, 1.0, 1.08883])
DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabImage:
    L: np.ndarray
    a: np.ndarray
    b: np.ndarray


def srgb_decode(values: np.ndarray) -> np.ndarray:
    """IEC 61966-2-1 transfer function, encoded -> linear."""
    v = np.clip(values, 0.0, 1.0)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > DELTA**3, np.cbrt(t), t / (3 * DELTA**2) + 4.0 / 29.0)


def rgb_to_lab(image: Image) -> LabImage:
    """sRGB (D65) to L*a*b*; inputs are clamped to [0, 1]."""
    xyz = srgb_decode(image.data) @ SRGB_TO_XYZ.T
    f = _lab_f(xyz / D65_WHITE)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(L=np.maximum(L, 0.0), a=a, b=b)


def chroma_dispersion(images: list[Image], mask: np.ndarray | None = None) -> ChromaStats:
    """Spread of (a*, b*) pooled over the masked pixels of all images.

    `view_mean_spread` is the pooled standard deviation of the per-image
    mean chromaticity, which is zero when every view has the same cast.
    """
    if len(images) < 2:
        raise ImagingError("chroma_dispersion needs at least two images")
    shape = images[0].shape
    if any(img.shape != shape for img in images):
        raise ImagingError("chroma_dispersion images must share dimensions")

    if mask is None:
        mask = np.ones(shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ImagingError(f"mask shape {mask.shape} does not match images {shape}")
    if not mask.any():
        raise ImagingError("empty mask")

    a_samples, b_samples, a_means, b_means = [], [], [], []
    for image in images:
        lab = rgb_to_lab(image)
        a_view, b_view = lab.a[mask], lab.b[mask]
        a_samples.append(a_view)
        b_samples.append(b_view)
        a_means.append(a_view.mean())
        b_means.append(b_view.mean())

    a_all = np.concatenate(a_samples)
    b_all = np.concatenate(b_samples)
    std_a, std_b = float(a_all.std()), float(b_all.std())
    spread = float(np.sqrt(np.var(a_means) + np.var(b_means)))
    return ChromaStats(
        std_a=std_a,
        std_b=std_b,
        pooled=float(np.sqrt(std_a**2 + std_b**2)),
        view_mean_spread=spread,
    )
