"""Deterministic desk-scale synthetic scenes."""

import math

import numpy as np

from src.models import CameraRecord, GaussianRecord, SceneFile


BALL_RADIUS = 0.8
RING_RADIUS = 3.2
ELEVATION = 0.3  # radians
FOCAL_FACTOR = 2.5  # focal length in units of image size; the ball overfills the frame
TINT = 0.12


def look_at(position: np.ndarray, target: np.ndarray | None = None) -> np.ndarray:
    """Row-major 4x4 world-to-camera matrix looking from `position` at `target` (x right, y down, z forward)."""
    target = np.zeros(3) if target is None else target
    forward = target - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)

    R = np.stack([right, down, forward])
    m = np.eye(4)
    m[:3, :3] = R
    m[:3, 3] = -R @ position
    return m


def ring_cameras(n_views: int, size: int, radius: float = RING_RADIUS) -> list[CameraRecord]:
    cameras = []
    focal = FOCAL_FACTOR * size
    center = (size - 1) / 2.0
    for k in range(n_views):
        theta = 2.0 * math.pi * k / n_views
        position = radius * np.array(
            [math.cos(ELEVATION) * math.cos(theta), math.sin(ELEVATION), math.cos(ELEVATION) * math.sin(theta)]
        )
        cameras.append(
            CameraRecord(
                view_id=f"view_{k:03d}",
                fx=focal,
                fy=focal,
                cx=center,
                cy=center,
                width=size,
                height=size,
                world_to_camera=look_at(position).reshape(-1).tolist(),
            )
        )
    return cameras


def random_gaussians(n: int, rng: np.random.Generator) -> list[GaussianRecord]:
    directions = rng.normal(size=(n, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = BALL_RADIUS * rng.uniform(size=n) ** (1.0 / 3.0)
    means = directions * radii[:, None]

    log_scales = np.log(rng.uniform(0.15, 0.35, size=(n, 3)))
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    opacity = rng.uniform(0.7, 0.98, size=n)
    # Grey levels spread over the whole range, each with a small zero-mean tint.
    grey = rng.uniform(0.05, 0.95, size=(n, 1))
    tint = rng.uniform(-TINT, TINT, size=(n, 3))
    colors = np.clip(grey + tint - tint.mean(axis=1, keepdims=True), 0.0, 1.0)

    return [
        GaussianRecord(
            mu=means[i].tolist(),
            log_scales=log_scales[i].tolist(),
            quat=quats[i].tolist(),
            opacity_logit=float(np.log(opacity[i] / (1.0 - opacity[i]))),
            color=colors[i].tolist(),
        )
        for i in range(n)
    ]


def make_synthetic_scene(n_gaussians: int = 30, n_views: int = 10, size: int = 64, seed: int = 0) -> SceneFile:
    """Gaussians in a ball of radius 0.8 seen by cameras on a ring of radius 3.2, slightly above.

    The views are filled edge to edge, with luminance spread over the whole range.
    """
    rng = np.random.default_rng(seed)
    return SceneFile(gaussians=random_gaussians(n_gaussians, rng), cameras=ring_cameras(n_views, size))
