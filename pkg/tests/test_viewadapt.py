import numpy as np
import pytest
import torch
import torch.nn as nn

from src.errors import NonFiniteError
from src.pipeline.viewadapt import (
    CurveBiasGenerator,
    ScalarGenerator,
    generate_curve_bias,
    generate_view_scalars,
    squash_scalars,
)


def extrinsic(tz: float = 3.0) -> torch.Tensor:
    m = torch.eye(4, dtype=torch.float64)
    m[2, 3] = tz
    return m


def randomize(module: nn.Module, std: float = 0.5) -> None:
    with torch.no_grad():
        for p in module.parameters():
            p.normal_(0.0, std)


@pytest.fixture
def image(rng) -> torch.Tensor:
    return torch.as_tensor(rng.uniform(size=(20, 24, 3)), dtype=torch.float64)


def test_zero_head_gives_zero_bias(image):
    gen = CurveBiasGenerator().to(torch.float64)
    bias = generate_curve_bias(image, extrinsic(), gen)
    assert bias.shape == (256,)
    assert torch.equal(bias, torch.zeros(256, dtype=torch.float64))


def test_zero_raw_scalars():
    s = squash_scalars(torch.zeros(4, dtype=torch.float64))
    assert s.as_dict() == pytest.approx({"S": 6.5, "G": 1.0, "A": 0.5, "B": 1.0})


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_saturated_scalars_hit_their_bounds(sign):
    s = squash_scalars(torch.full((4,), sign * 1e3, dtype=torch.float64)).as_dict()
    if sign > 0:
        expected = {"S": 12.0, "G": 4.0, "A": 0.95, "B": 4.0}
    else:
        expected = {"S": 1.0, "G": 0.25, "A": 0.05, "B": 0.25}
    assert s == pytest.approx(expected)
    assert 1.0 <= s["S"] <= 12.0
    assert 0.25 <= s["G"] <= 4.0 and 0.25 <= s["B"] <= 4.0
    assert 0.05 <= s["A"] <= 0.95


def test_zero_head_scalars(image):
    s = generate_view_scalars(image, extrinsic(), ScalarGenerator().to(torch.float64))
    assert s.as_dict() == pytest.approx({"S": 6.5, "G": 1.0, "A": 0.5, "B": 1.0})


def test_deterministic(image):
    gen = CurveBiasGenerator().to(torch.float64)
    randomize(gen.ffn[-1], 0.1)
    assert torch.equal(generate_curve_bias(image, extrinsic(), gen), generate_curve_bias(image, extrinsic(), gen))


def test_scalars_stay_in_range(rng):
    for trial in range(5):
        torch.manual_seed(trial)
        gen = ScalarGenerator().to(torch.float64)
        randomize(gen, std=3.0)
        img = torch.as_tensor(rng.uniform(size=(16, 16, 3)), dtype=torch.float64)
        s = generate_view_scalars(img, extrinsic(float(rng.uniform(1, 5))), gen).as_dict()
        assert 1.0 <= s["S"] <= 12.0
        assert 0.25 <= s["G"] <= 4.0
        assert 0.05 <= s["A"] <= 0.95
        assert 0.25 <= s["B"] <= 4.0


def test_camera_conditions_the_output(image):
    gen = CurveBiasGenerator().to(torch.float64)
    randomize(gen, 0.3)
    near = generate_curve_bias(image, extrinsic(1.0), gen)
    far = generate_curve_bias(image, extrinsic(6.0), gen)
    assert not torch.allclose(near, far)


def test_gradient_reaches_trunk_from_every_head(image):
    gen = ScalarGenerator().to(torch.float64)
    randomize(gen.ffn[-1], 0.2)
    trunk = gen.encoder[0].weight
    for name in ("S", "G", "A", "B"):
        gen.zero_grad()
        getattr(generate_view_scalars(image, extrinsic(), gen), name).backward()
        assert trunk.grad is not None and trunk.grad.abs().sum() > 0


def test_generators_do_not_share_weights():
    bias, scalars = CurveBiasGenerator(), ScalarGenerator()
    assert bias.encoder[0].weight.data_ptr() != scalars.encoder[0].weight.data_ptr()


def test_non_finite_input_is_rejected():
    bad = torch.full((8, 8, 3), float("nan"), dtype=torch.float64)
    with pytest.raises(NonFiniteError):
        generate_curve_bias(bad, extrinsic(), CurveBiasGenerator().to(torch.float64))


def test_arbitrary_image_sizes():
    gen = CurveBiasGenerator().to(torch.float64)
    for h, w in [(4, 4), (32, 32), (65, 40)]:
        out = gen(torch.rand(h, w, 3, dtype=torch.float64), extrinsic()).detach()
        assert out.shape == (256,) and np.isfinite(out.numpy()).all()
