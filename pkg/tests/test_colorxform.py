import numpy as np
import pytest
import torch

from src.errors import SingularMatrixError
from src.pipeline.colorxform import (
    apply_curve,
    apply_matrix,
    cdf_curve,
    compose_curve,
    curve_grid,
    global_adjust,
    identity_curve,
    invert_matrix,
    power_curve,
    power_value,
    s_curve,
    s_curve_value,
)
from src.services.imaging import Image


def t(values) -> torch.Tensor:
    return torch.as_tensor(values, dtype=torch.float64)


@pytest.fixture
def image(rng) -> torch.Tensor:
    return t(rng.uniform(0.0, 1.0, size=(6, 5, 3)))


# Matrices


def test_identity_matrix(image):
    assert torch.equal(apply_matrix(image, torch.eye(3, dtype=torch.float64)), image)


def test_channel_swap(image):
    swap = t([[0, 0, 1], [0, 1, 0], [1, 0, 0]])
    out = apply_matrix(image, swap)
    assert torch.equal(out[..., 0], image[..., 2])
    assert torch.equal(out[..., 2], image[..., 0])


def test_singular_matrix_rejected(image):
    with pytest.raises(SingularMatrixError, match="singular color matrix"):
        apply_matrix(image, torch.zeros(3, 3, dtype=torch.float64))
    with pytest.raises(SingularMatrixError):
        invert_matrix(t([[1, 2, 3], [2, 4, 6], [0, 0, 1]]))


def test_inverse_examples(rng):
    assert torch.equal(invert_matrix(torch.eye(3, dtype=torch.float64)), torch.eye(3, dtype=torch.float64))
    assert torch.allclose(invert_matrix(torch.diag(t([2.0, 4.0, 8.0]))), torch.diag(t([0.5, 0.25, 0.125])))

    M = torch.eye(3, dtype=torch.float64) + t(rng.normal(0.0, 0.2, size=(3, 3)))
    assert torch.allclose(M @ invert_matrix(M), torch.eye(3, dtype=torch.float64), atol=1e-10)
    assert torch.allclose(invert_matrix(invert_matrix(M)), M, atol=1e-9)


# Curves


def test_identity_curve_is_clamp(rng):
    values = t(rng.uniform(-0.5, 1.5, size=(40, 3)))
    assert torch.allclose(apply_curve(values, identity_curve()), values.clamp(0.0, 1.0), atol=1e-12)


def test_constant_curve():
    out = apply_curve(t([[0.0, 0.3, 1.0], [-1.0, 0.77, 2.0]]), torch.full((256,), 0.42, dtype=torch.float64))
    assert torch.allclose(out, torch.full((2, 3), 0.42, dtype=torch.float64), atol=1e-15)


def test_half_lands_between_knots(rng):
    lut = t(rng.uniform(size=256))
    out = apply_curve(t([0.5]), lut)
    assert float(out[0]) == pytest.approx(float(lut[127] + lut[128]) / 2.0, abs=1e-12)


def test_monotone_lut_gives_monotone_output(rng):
    lut = t(np.cumsum(rng.uniform(size=256)))
    lut = lut / lut[-1]
    values = t(np.sort(rng.uniform(-0.1, 1.1, size=200)))
    out = apply_curve(values, lut)
    assert torch.all(torch.diff(out) >= 0)


def test_compose_curve(rng):
    g = identity_curve()
    assert torch.equal(compose_curve(g, torch.zeros(256, dtype=torch.float64)), g)
    shifted = compose_curve(g, torch.full((256,), 0.1, dtype=torch.float64))
    assert torch.allclose(shifted, curve_grid() + 0.1)

    a, b = t(rng.normal(size=256)), t(rng.normal(size=256))
    assert torch.equal(compose_curve(a, b), compose_curve(b, a))


def test_prior_values():
    assert float(power_value(t(0.5), 2.0)) == pytest.approx(0.5001**2, abs=1e-12)
    assert float(s_curve_value(t(0.25), 0.5, 2.0)) == pytest.approx(0.375, abs=1e-12)
    assert float(s_curve_value(t(0.75), 0.5, 2.0)) == pytest.approx(0.625, abs=1e-12)


@pytest.mark.parametrize("A", [0.1, 0.37, 0.5, 0.9])
def test_s_curve_unit_exponent_is_identity(A):
    assert torch.allclose(s_curve(A, 1.0), curve_grid(), atol=1e-12)


def test_prior_curves_span_unit_range():
    p = power_curve(1.7)
    s = s_curve(0.4, 2.5)
    assert float(p[0]) == pytest.approx(1e-4**1.7)
    assert float(s[0]) == pytest.approx(0.0, abs=1e-9)
    assert float(s[-1]) == pytest.approx(1.0, abs=1e-9)
    assert torch.all(torch.diff(p) > 0) and torch.all(torch.diff(s) >= 0)


# CDF curve


def test_cdf_of_uniform_histogram():
    gray = np.arange(256, dtype=np.float64) / 255.0
    image = Image(np.repeat(gray.reshape(16, 16, 1), 3, axis=2))
    cdf = cdf_curve(image)
    assert torch.all((cdf - curve_grid()).abs() <= 1.0 / 256.0 + 1e-12)


def test_cdf_of_constant_image_is_a_step():
    cdf = cdf_curve(Image.uniform(8, 8, (100 / 255, 100 / 255, 100 / 255)))
    assert torch.all(cdf[:100] == 0.0)
    assert torch.all(cdf[100:] == 1.0)


def test_cdf_is_nondecreasing(rng):
    cdf = cdf_curve(Image(rng.beta(0.5, 3.0, size=(12, 12, 3))))
    assert torch.all(torch.diff(cdf) >= 0)
    assert float(cdf[-1]) == pytest.approx(1.0)


# Global adjustment


def test_global_adjust_identity(image):
    out = global_adjust(image, torch.eye(3, dtype=torch.float64), identity_curve())
    assert torch.allclose(out, image.clamp(0.0, 1.0), atol=1e-12)


def test_global_adjust_power_curve():
    out = global_adjust(
        torch.full((2, 2, 3), 0.25, dtype=torch.float64), torch.eye(3, dtype=torch.float64), power_curve(0.5)
    )
    assert torch.allclose(out, torch.full_like(out, 0.2501**0.5), atol=1e-3)


def test_global_adjust_propagates_singular(image):
    with pytest.raises(SingularMatrixError):
        global_adjust(image, torch.zeros(3, 3, dtype=torch.float64), identity_curve())


def test_out_of_range_lookup_has_zero_gradient():
    values = t([[-0.2, 0.5, 1.3]]).requires_grad_(True)
    apply_curve(values, power_curve(0.7)).sum().backward()
    assert values.grad[0, 0] == 0.0 and values.grad[0, 2] == 0.0
    assert values.grad[0, 1] > 0.0
