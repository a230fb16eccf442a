"""Image container, PNG I/O and quality metrics."""

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import torch
import torch.nn.functional as F

from src.errors import ImagingError


PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class Image:
    """H x W x 3 grid of sRGB-encoded intensities, channel order R, G, B."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImagingError(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImagingError("image must be at least 1 x 1")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def clamped(self) -> "Image":
        return Image(np.clip(self.data, 0.0, 1.0))

    def to_tensor(self, dtype: torch.dtype = torch.float64) -> torch.Tensor:
        return torch.as_tensor(self.data, dtype=dtype).clone()

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor) -> "Image":
        return cls(tensor.detach().to(torch.float64).cpu().numpy())

    @classmethod
    def uniform(cls, height: int, width: int, rgb: tuple[float, float, float]) -> "Image":
        return cls(np.broadcast_to(np.asarray(rgb, dtype=np.float64), (height, width, 3)).copy())


# File I/O


def load_image(path: Path | str) -> Image:
    """Load an 8- or 16-bit RGB PNG into [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise ImagingError(f"image not found: {path}")

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImagingError(f"could not decode image: {path}")
    if raw.size == 0:
        raise ImagingError(f"zero-sized image: {path}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ImagingError(f"not an RGB image: {path}")

    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImagingError(f"unsupported bit depth {raw.dtype} in {path}")

    rgb = raw[..., ::-1].astype(np.float64) / scale
    return Image(rgb)


def save_image(image: Image, path: Path | str, bits: int = 8) -> Path:
    """Clamp to [0, 1], round to nearest code value and write an RGB PNG."""
    if bits not in (8, 16):
        raise ImagingError(f"bit depth must be 8 or 16, got {bits}")
    path = Path(path)
    peak = float(2**bits - 1)
    dtype = np.uint8 if bits == 8 else np.uint16

    codes = np.floor(np.clip(image.data, 0.0, 1.0) * peak + 0.5).astype(dtype)
    bgr = np.ascontiguousarray(codes[..., ::-1])
    if not cv2.imwrite(str(path), bgr):
        raise ImagingError(f"could not write image: {path}")
    return path


# Metrics


def _check_same_shape(a: Image, b: Image) -> None:
    if a.shape != b.shape:
        raise ImagingError(f"dimension mismatch: {a.shape} vs {b.shape}")


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0, capped at 99 dB."""
    _check_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * float(np.log10(1.0 / mse)))


def gaussian_window(dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Normalized 11 x 11 Gaussian window with sigma 1.5."""
    coords = torch.arange(SSIM_WINDOW, dtype=dtype) - (SSIM_WINDOW - 1) / 2.0
    g = torch.exp(-(coords**2) / (2.0 * SSIM_SIGMA**2))
    g = g / g.sum()
    return torch.outer(g, g)


def structural_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Differentiable mean SSIM of two H x W x 3 tensors (valid windows, channels averaged)."""
    if a.shape != b.shape:
        raise ImagingError(f"dimension mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ImagingError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")

    x = a.permute(2, 0, 1).unsqueeze(0)
    y = b.permute(2, 0, 1).unsqueeze(0)
    window = gaussian_window(a.dtype).to(a.device).expand(3, 1, SSIM_WINDOW, SSIM_WINDOW)

    mu_x = F.conv2d(x, window, groups=3)
    mu_y = F.conv2d(y, window, groups=3)
    sigma_x = F.conv2d(x * x, window, groups=3) - mu_x * mu_x
    sigma_y = F.conv2d(y * y, window, groups=3) - mu_y * mu_y
    sigma_xy = F.conv2d(x * y, window, groups=3) - mu_x * mu_y

    numerator = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return (numerator / denominator).mean()


def ssim(a: Image, b: Image) -> float:
    """Mean SSIM in [-1, 1]."""
    _check_same_shape(a, b)
    with torch.no_grad():
        return float(structural_similarity(a.to_tensor(), b.to_tensor()))


def channel_imbalance(images: list[Image]) -> float:
    """Max over channels of the pooled channel mean divided by the min."""
    if not images:
        raise ImagingError("channel_imbalance needs at least one image")
    stacked = np.concatenate([img.data.reshape(-1, 3) for img in images], axis=0)
    means = stacked.mean(axis=0)
    return float(means.max() / max(means.min(), 1e-8))
