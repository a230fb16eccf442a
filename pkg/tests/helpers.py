"""Builders for tiny images, cameras and Gaussians used across the tests."""

import numpy as np

from src.models import CameraRecord, GaussianRecord
from src.services.imaging import Image


def random_image(rng: np.random.Generator, height: int = 16, width: int = 16, low: float = 0.0, high: float = 1.0) -> Image:
    return Image(rng.uniform(low, high, size=(height, width, 3)))


def front_camera(view_id: str = "front", size: int = 16, tx: float = 0.0) -> CameraRecord:
    """Identity-rotation camera looking down +z, principal point at the image centre."""
    m = np.eye(4)
    m[0, 3] = tx
    return CameraRecord(
        view_id=view_id,
        fx=float(size),
        fy=float(size),
        cx=(size - 1) / 2.0,
        cy=(size - 1) / 2.0,
        width=size,
        height=size,
        world_to_camera=m.reshape(-1).tolist(),
    )


def gaussian(mu, scale=0.3, color=(0.5, 0.5, 0.5), opacity_logit=0.0, quat=(1.0, 0.0, 0.0, 0.0)) -> GaussianRecord:
    return GaussianRecord(
        mu=list(mu),
        log_scales=[float(np.log(scale))] * 3,
        quat=list(quat),
        opacity_logit=opacity_logit,
        color=list(color),
    )
