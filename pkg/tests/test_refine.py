import pytest
import torch

from src.pipeline.colorxform import global_adjust, identity_curve, power_curve
from src.pipeline.refine import ResidualBranch, pseudo_enhance, pseudo_enhance_unclamped, residual_map


def randomize_head(branch: ResidualBranch, std: float) -> None:
    with torch.no_grad():
        branch.head.weight.normal_(0.0, std)
        branch.head.bias.normal_(0.0, std)


@pytest.fixture
def image(rng) -> torch.Tensor:
    return torch.as_tensor(rng.uniform(size=(16, 16, 3)), dtype=torch.float64)


@pytest.mark.parametrize("block", ["convnext", "resnet"])
def test_zero_head_gives_zero_residual(image, block):
    branch = ResidualBranch(0.1, block).to(torch.float64)
    assert torch.equal(residual_map(image, branch), torch.zeros_like(image))


def test_residual_is_clipped(image):
    branch = ResidualBranch(0.1).to(torch.float64)
    randomize_head(branch, 5.0)
    out = residual_map(image, branch)
    peak = float(out.detach().abs().max())
    assert peak <= 0.1
    assert peak == pytest.approx(0.1)


def test_tiny_images_use_replicate_padding():
    branch = ResidualBranch(0.5).to(torch.float64)
    randomize_head(branch, 0.1)
    assert residual_map(torch.rand(3, 5, 3, dtype=torch.float64), branch).shape == (3, 5, 3)


def test_translation_equivariance_on_interior(rng):
    branch = ResidualBranch(10.0).to(torch.float64)
    randomize_head(branch, 0.3)
    x = torch.as_tensor(rng.uniform(size=(40, 40, 3)), dtype=torch.float64)
    full = residual_map(x, branch)
    shifted = residual_map(x[2:, 3:], branch)
    # Three 7x7 blocks see 9 px of context; compare away from every border.
    assert torch.allclose(full[11:31, 12:31], shifted[9:29, 9:28], atol=1e-10)


def test_clip_must_be_positive():
    with pytest.raises(ValueError):
        ResidualBranch(0.0)


def test_identity_pseudo_enhance(rng):
    x = torch.as_tensor(rng.uniform(-0.2, 1.2, size=(8, 8, 3)), dtype=torch.float64)
    eye = torch.eye(3, dtype=torch.float64)
    zero_branch = ResidualBranch(0.1).to(torch.float64)
    assert torch.allclose(pseudo_enhance(x, eye, identity_curve(), zero_branch), x.clamp(0, 1), atol=1e-12)
    assert torch.allclose(pseudo_enhance(x, eye, identity_curve(), None), x.clamp(0, 1), atol=1e-12)


def test_pseudo_enhance_is_global_plus_residual(image):
    branch = ResidualBranch(0.1).to(torch.float64)
    randomize_head(branch, 0.05)
    M = torch.eye(3, dtype=torch.float64) + 0.02
    curve = power_curve(0.8)
    unclamped = pseudo_enhance_unclamped(image, M, curve, branch)
    assert torch.allclose(unclamped - global_adjust(image, M, curve), residual_map(image, branch), atol=1e-12)

    clamped = pseudo_enhance(image, M, curve, branch)
    interior = (unclamped > 0) & (unclamped < 1)
    assert torch.equal(clamped[interior], unclamped[interior])
    assert clamped.min() >= 0.0 and clamped.max() <= 1.0
