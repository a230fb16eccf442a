"""View-adaptive generators: per-view curve bias and scalar parameters from (image, camera)."""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.errors import NonFiniteError
from .colorxform import LUT_SIZE


POOL_SIZE = 32
WIDTH = 16
FFN_WIDTH = 64
LN4 = math.log(4.0)


@dataclass
class ViewScalars:
    """Squashed per-view scalars: Minkowski order S, power G, S-curve pivot A and exponent B."""

    S: torch.Tensor
    G: torch.Tensor
    A: torch.Tensor
    B: torch.Tensor

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in ("S", "G", "A", "B")}


class ViewAdaptiveGenerator(nn.Module):
    """Camera-queried cross-attention over a tiny conv encoding of the image.

    The image is pooled to 32 x 32 and encoded by two stride-2 convs into an
    8 x 8 grid of 16-dim tokens. The flattened world-to-camera matrix is the
    single query. A two-layer feed-forward head maps the attended token to the
    output; its last layer starts at zero.
    """

    def __init__(self, out_dim: int):
        super().__init__()
        self.out_dim = out_dim
        self.encoder = nn.Sequential(
            nn.Conv2d(3, WIDTH, 3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(WIDTH, WIDTH, 3, stride=2, padding=1),
            nn.GELU(),
        )
        self.to_key = nn.Linear(WIDTH, WIDTH)
        self.to_value = nn.Linear(WIDTH, WIDTH)
        self.to_query = nn.Linear(16, WIDTH)
        self.ffn = nn.Sequential(nn.Linear(WIDTH, FFN_WIDTH), nn.GELU(), nn.Linear(FFN_WIDTH, out_dim))
        nn.init.zeros_(self.ffn[-1].weight)
        nn.init.zeros_(self.ffn[-1].bias)

    def forward(self, image: torch.Tensor, world_to_camera: torch.Tensor) -> torch.Tensor:
        """image: H x W x 3, world_to_camera: 4 x 4. Returns a vector of `out_dim`."""
        x = image.permute(2, 0, 1).unsqueeze(0)
        x = F.adaptive_avg_pool2d(x, POOL_SIZE)
        tokens = self.encoder(x).flatten(2).transpose(1, 2).squeeze(0)  # 64 x 16

        keys = self.to_key(tokens)
        values = self.to_value(tokens)
        query = self.to_query(world_to_camera.reshape(1, 16).to(image.dtype))

        weights = torch.softmax(query @ keys.T / math.sqrt(WIDTH), dim=-1)
        attended = weights @ values
        out = self.ffn(attended).squeeze(0)

        if not torch.isfinite(out).all():
            raise NonFiniteError("non-finite activation in view-adaptive generator")
        return out


class CurveBiasGenerator(ViewAdaptiveGenerator):
    def __init__(self):
        super().__init__(LUT_SIZE)


class ScalarGenerator(ViewAdaptiveGenerator):
    def __init__(self):
        super().__init__(4)


def squash_scalars(raw: torch.Tensor) -> ViewScalars:
    # Clamped as well: rounding at saturation can land one ulp outside.
    return ViewScalars(
        S=(1.0 + 11.0 * torch.sigmoid(raw[0])).clamp(1.0, 12.0),
        G=torch.exp(torch.tanh(raw[1]) * LN4).clamp(0.25, 4.0),
        A=(0.05 + 0.9 * torch.sigmoid(raw[2])).clamp(0.05, 0.95),
        B=torch.exp(torch.tanh(raw[3]) * LN4).clamp(0.25, 4.0),
    )


def generate_curve_bias(image: torch.Tensor, world_to_camera: torch.Tensor, generator: CurveBiasGenerator) -> torch.Tensor:
    return generator(image, world_to_camera)


def generate_view_scalars(image: torch.Tensor, world_to_camera: torch.Tensor, generator: ScalarGenerator) -> ViewScalars:
    return squash_scalars(generator(image, world_to_camera))
