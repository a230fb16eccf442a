"""Image services: container and metrics, CIELab, illuminants, degradations, scenes, contact sheets."""

from .imaging import Image, load_image, save_image, psnr, ssim, channel_imbalance
from .lab import LabImage, rgb_to_lab, chroma_dispersion
from .planck import planck_illuminant
from .degrade import (
    apply_color_degradation,
    apply_lightness_degradation,
    apply_mixed,
    degrade,
    sample_params,
    synthesize_views,
)
from .scenegen import make_synthetic_scene
from .image_composite import create_grid_image, save_contact_sheet

__all__ = [
    "Image",
    "load_image",
    "save_image",
    "psnr",
    "ssim",
    "channel_imbalance",
    "LabImage",
    "rgb_to_lab",
    "chroma_dispersion",
    "planck_illuminant",
    "apply_color_degradation",
    "apply_lightness_degradation",
    "apply_mixed",
    "degrade",
    "sample_params",
    "synthesize_views",
    "make_synthetic_scene",
    "create_grid_image",
    "save_contact_sheet",
]
