"""Degradation parameter models."""

from enum import Enum

from pydantic import BaseModel, Field


class DegradationMode(str, Enum):
    """Which synthesis path a view went through."""

    LIGHTNESS = "lightness"
    COLOR = "color"
    MIXED = "mixed"
    NONE = "none"


class Profile(str, Enum):
    """Named degradation protocols."""

    NONE = "none"
    LOW_LIGHT = "low-light-like"
    OVEREXPOSURE = "overexposure-like"
    VARYING = "varying"
    COOL = "cool"
    WARM = "warm"
    MIXED_TEMP = "mixed-temp"
    MIXED_ALL = "mixed-all"

    @property
    def shared_per_scene(self) -> bool:
        """Cool and warm lighting use one draw for every view of a scene."""
        return self in (Profile.COOL, Profile.WARM)


class DegradationParams(BaseModel):
    """Parameters of one synthesized degradation."""

    mode: DegradationMode = DegradationMode.NONE
    K: float = Field(default=1.0, gt=0, description="Exposure scale")
    gamma: float = Field(default=1.0, gt=0, description="Gamma exponent")
    T: float | None = Field(default=None, description="Colour temperature in Kelvin")
    c_B: float = Field(default=1.0, gt=0, description="Brightness factor")
    c_C: float = Field(default=1.0, ge=0, description="Contrast factor")


class ViewDegradation(BaseModel):
    """Degradation record for a single view."""

    view_id: str
    params: DegradationParams


class DegradationManifest(BaseModel):
    """Per-view degradations written by `synth` (analysis only, never read by training)."""

    profile: Profile
    seed: int
    views: list[ViewDegradation] = Field(default_factory=list)
