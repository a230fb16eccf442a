"""Scene file models: Gaussians and cameras."""

import math

from pydantic import BaseModel, Field, field_validator, model_validator


class GaussianRecord(BaseModel):
    """One anisotropic 3D Gaussian as stored in a scene file."""

    mu: list[float] = Field(min_length=3, max_length=3, description="World-space centre")
    log_scales: list[float] = Field(min_length=3, max_length=3, description="Log of per-axis standard deviations")
    quat: list[float] = Field(min_length=4, max_length=4, description="Rotation quaternion (w, x, y, z)")
    opacity_logit: float = Field(description="Opacity before the sigmoid")
    color: list[float] = Field(min_length=3, max_length=3, description="Base RGB colour in [0,1]")

    @field_validator("quat")
    @classmethod
    def _nonzero_quat(cls, value: list[float]) -> list[float]:
        if math.sqrt(sum(q * q for q in value)) < 1e-12:
            raise ValueError("quaternion must be non-zero")
        return value

    @field_validator("color")
    @classmethod
    def _color_range(cls, value: list[float]) -> list[float]:
        if any(c < 0.0 or c > 1.0 for c in value):
            raise ValueError("colour components must lie in [0, 1]")
        return value


class CameraRecord(BaseModel):
    """Pinhole camera with a world-to-camera extrinsic (camera looks along +z)."""

    view_id: str
    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    world_to_camera: list[float] = Field(
        min_length=16, max_length=16, description="Row-major 4x4 world-to-camera matrix"
    )
    near: float = Field(default=0.01, gt=0)

    @model_validator(mode="after")
    def _orthonormal_rotation(self) -> "CameraRecord":
        m = self.world_to_camera
        rows = [m[0:3], m[4:7], m[8:11]]
        for i in range(3):
            for j in range(3):
                dot = sum(rows[i][k] * rows[j][k] for k in range(3))
                expected = 1.0 if i == j else 0.0
                if abs(dot - expected) > 1e-6:
                    raise ValueError("extrinsic rotation block must be orthonormal within 1e-6")
        return self

    def matrix(self) -> list[list[float]]:
        """Extrinsic as nested rows."""
        m = self.world_to_camera
        return [m[0:4], m[4:8], m[8:12], m[12:16]]


class SceneFile(BaseModel):
    """Complete scene: Gaussians plus the cameras that observe them."""

    gaussians: list[GaussianRecord] = Field(default_factory=list)
    cameras: list[CameraRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_view_ids(self) -> "SceneFile":
        ids = [c.view_id for c in self.cameras]
        if len(ids) != len(set(ids)):
            raise ValueError("camera view_id values must be unique")
        return self

    def camera(self, view_id: str) -> CameraRecord | None:
        """Look up a camera by view id."""
        for cam in self.cameras:
            if cam.view_id == view_id:
                return cam
        return None
