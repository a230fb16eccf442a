"""Tone-curve LUTs, per-view colour matrices, curve priors and the global adjustment.

Curves are 256-entry tensors sampling L(i / 255). Matrices are 3 x 3 tensors
applied to row-vector pixels, so `values @ M`.
"""

import numpy as np
import torch

from src.errors import SingularMatrixError
from src.services.imaging import Image


LUT_SIZE = 256
CURVE_EPS = 1e-4
SINGULAR_DET = 1e-6


def curve_grid(dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Input positions i / 255 of the LUT entries."""
    return torch.arange(LUT_SIZE, dtype=dtype) / (LUT_SIZE - 1)


def identity_curve(dtype: torch.dtype = torch.float64) -> torch.Tensor:
    return curve_grid(dtype)


def check_invertible(M: torch.Tensor) -> None:
    det = torch.linalg.det(M.detach())
    if not torch.isfinite(det) or abs(float(det)) < SINGULAR_DET:
        raise SingularMatrixError("singular color matrix")


def apply_matrix(values: torch.Tensor, M: torch.Tensor) -> torch.Tensor:
    """Per-pixel [r, g, b] @ M; output may leave [0, 1]."""
    check_invertible(M)
    return values @ M


def invert_matrix(M: torch.Tensor) -> torch.Tensor:
    check_invertible(M)
    return torch.linalg.inv(M)


def apply_curve(values: torch.Tensor, curve: torch.Tensor) -> torch.Tensor:
    """Piecewise-linear LUT lookup at clamp(v, 0, 1) * 255, same table for every channel."""
    x = values.clamp(0.0, 1.0) * (LUT_SIZE - 1)
    lower = torch.floor(x.detach()).clamp(max=LUT_SIZE - 2).long()
    w = x - lower.to(x.dtype)
    return curve[lower] * (1.0 - w) + curve[lower + 1] * w


def compose_curve(global_curve: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    return global_curve + bias


# Canonical tone priors


def power_value(x: torch.Tensor, G: torch.Tensor | float) -> torch.Tensor:
    return (x + CURVE_EPS) ** G


def s_curve_value(x: torch.Tensor, A: torch.Tensor | float, B: torch.Tensor | float) -> torch.Tensor:
    """Two-branch S-curve pivoting at A; B = 1 is the identity."""
    A = torch.as_tensor(A, dtype=x.dtype)
    low = x <= A
    # Bases clamped away from 0 so d/dB of base**B stays finite.
    low_base = torch.where(low, 1.0 - x / A, torch.ones_like(x)).clamp_min(1e-12)
    high_base = torch.where(low, torch.ones_like(x), (x - A) / (1.0 - A)).clamp_min(1e-12)
    y_low = A - A * low_base**B
    y_high = A + (1.0 - A) * high_base**B
    return torch.where(low, y_low, y_high)


def power_curve(G: torch.Tensor | float, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    return power_value(curve_grid(dtype), G)


def s_curve(A: torch.Tensor | float, B: torch.Tensor | float, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    return s_curve_value(curve_grid(dtype), A, B)


def cdf_curve(image: Image, dtype: torch.dtype = torch.float64) -> torch.Tensor:
    """Histogram-equalization CDF of the grayscale (channel-mean) intensity."""
    gray = np.clip(image.data.mean(axis=2), 0.0, 1.0)
    bins = np.floor(gray * (LUT_SIZE - 1) + 0.5).astype(np.int64).ravel()
    hist = np.bincount(bins, minlength=LUT_SIZE)
    cdf = np.cumsum(hist) / hist.sum()
    return torch.as_tensor(cdf, dtype=dtype)


def global_adjust(values: torch.Tensor, M: torch.Tensor, curve: torch.Tensor) -> torch.Tensor:
    """L(values @ M) @ M^-1."""
    mapped = apply_matrix(values, M)
    return apply_matrix(apply_curve(mapped, curve), invert_matrix(M))
