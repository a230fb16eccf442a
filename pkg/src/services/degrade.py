"""Synthesize lightness, colour and mixed degradations of clean views."""

import logging

import numpy as np

from src.errors import DataError
from src.models import DegradationMode, DegradationParams, DegradeSection, DegradationManifest, Profile, ViewDegradation
from .imaging import Image
from .planck import planck_illuminant


logger = logging.getLogger(__name__)

DARK_K = (0.05, 0.8)
BRIGHT_K = (1.25, 3.0)
GAMMA_RANGE = (0.8, 2.5)

# Temperature ranges in Kelvin.
COOL_T = (8000.0, 9500.0)
WARM_T = (1800.0, 2500.0)
WIDE_T = (1800.0, 9500.0)
MIXED_T = (2500.0, 8000.0)


def apply_lightness_degradation(image: Image, K: float, gamma: float) -> Image:
    """clamp((C * K) ** gamma, 0, 1)."""
    return Image(np.clip((image.data * K) ** gamma, 0.0, 1.0))


def color_degradation_unclamped(image: Image, temperature: float | None, c_B: float, c_C: float) -> np.ndarray:
    """Von Kries tint plus brightness/contrast about the scalar mean, before clamping."""
    rho = planck_illuminant(temperature) if temperature is not None else np.ones(3)
    v = image.data * rho
    bright = c_B * v
    return c_C * bright + (1.0 - c_C) * bright.mean()


def apply_color_degradation(image: Image, temperature: float | None, c_B: float, c_C: float) -> Image:
    return Image(np.clip(color_degradation_unclamped(image, temperature, c_B, c_C), 0.0, 1.0))


def apply_mixed(image: Image, params: DegradationParams) -> Image:
    """Colour degradation first, then lightness."""
    tinted = apply_color_degradation(image, params.T, params.c_B, params.c_C)
    return apply_lightness_degradation(tinted, params.K, params.gamma)


def degrade(image: Image, params: DegradationParams) -> Image:
    """Dispatch on `params.mode`."""
    match params.mode:
        case DegradationMode.NONE:
            return image.clamped()
        case DegradationMode.LIGHTNESS:
            return apply_lightness_degradation(image, params.K, params.gamma)
        case DegradationMode.COLOR:
            return apply_color_degradation(image, params.T, params.c_B, params.c_C)
        case DegradationMode.MIXED:
            return apply_mixed(image, params)
    raise DataError(f"unknown degradation mode: {params.mode}")


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _exposure(rng: np.random.Generator) -> float:
    """K drawn from (0.05, 0.8) or (1.25, 3.0) with equal probability."""
    branch = DARK_K if rng.random() < 0.5 else BRIGHT_K
    return _uniform(rng, branch)


def _apply_fixed(params: DegradationParams, section: DegradeSection) -> DegradationParams:
    updates = {}
    if section.temperature is not None and params.mode in (DegradationMode.COLOR, DegradationMode.MIXED):
        updates["T"] = section.temperature
    if params.mode in (DegradationMode.LIGHTNESS, DegradationMode.MIXED):
        if section.exposure is not None:
            updates["K"] = section.exposure
        if section.gamma is not None:
            updates["gamma"] = section.gamma
    if params.mode in (DegradationMode.COLOR, DegradationMode.MIXED):
        if section.brightness is not None:
            updates["c_B"] = section.brightness
        if section.contrast is not None:
            updates["c_C"] = section.contrast
    return params.model_copy(update=updates) if updates else params


def sample_params(
    profile: Profile | str,
    seed: int,
    view_index: int = 0,
    section: DegradeSection | None = None,
) -> DegradationParams:
    """Deterministic draw for one view under a named profile.

    Cool and warm profiles share one draw across every view of a scene.
    """
    try:
        profile = Profile(profile)
    except ValueError as e:
        raise DataError(f"unknown profile: {profile}") from e
    section = section or DegradeSection(profile=profile, seed=seed)

    draw_index = 0 if profile.shared_per_scene else view_index
    rng = np.random.default_rng([seed, draw_index])

    def jitter() -> tuple[float, float]:
        return _uniform(rng, section.brightness_range), _uniform(rng, section.contrast_range)

    match profile:
        case Profile.NONE:
            params = DegradationParams(mode=DegradationMode.NONE)
        case Profile.LOW_LIGHT:
            params = DegradationParams(
                mode=DegradationMode.LIGHTNESS, K=_uniform(rng, DARK_K), gamma=_uniform(rng, (1.0, GAMMA_RANGE[1]))
            )
        case Profile.OVEREXPOSURE:
            params = DegradationParams(
                mode=DegradationMode.LIGHTNESS, K=_uniform(rng, BRIGHT_K), gamma=_uniform(rng, (GAMMA_RANGE[0], 1.0))
            )
        case Profile.VARYING:
            params = DegradationParams(
                mode=DegradationMode.LIGHTNESS, K=_exposure(rng), gamma=_uniform(rng, GAMMA_RANGE)
            )
        case Profile.COOL | Profile.WARM | Profile.MIXED_TEMP:
            bounds = {Profile.COOL: COOL_T, Profile.WARM: WARM_T, Profile.MIXED_TEMP: WIDE_T}[profile]
            T = _uniform(rng, bounds)
            c_B, c_C = jitter()
            params = DegradationParams(mode=DegradationMode.COLOR, T=T, c_B=c_B, c_C=c_C)
        case Profile.MIXED_ALL:
            T = _uniform(rng, MIXED_T)
            c_B, c_C = jitter()
            params = DegradationParams(
                mode=DegradationMode.MIXED,
                K=_exposure(rng),
                gamma=_uniform(rng, GAMMA_RANGE),
                T=T,
                c_B=c_B,
                c_C=c_C,
            )

    return _apply_fixed(params, section)


def synthesize_views(
    clean: dict[str, Image], section: DegradeSection
) -> tuple[dict[str, Image], DegradationManifest]:
    """Degrade every view (in the given order) and record the drawn parameters."""
    degraded: dict[str, Image] = {}
    manifest = DegradationManifest(profile=section.profile, seed=section.seed)
    for index, (view_id, image) in enumerate(clean.items()):
        params = sample_params(section.profile, section.seed, index, section)
        degraded[view_id] = degrade(image, params)
        manifest.views.append(ViewDegradation(view_id=view_id, params=params))
        logger.debug("degraded %s with %s", view_id, params.model_dump(exclude_none=True))
    return degraded, manifest
