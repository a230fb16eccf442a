import numpy as np
import pytest
import torch

from src.errors import ImagingError, NonFiniteError
from src.pipeline.colorxform import curve_grid, identity_curve, power_curve, s_curve
from src.pipeline.losses import (
    LossTerms,
    color_constancy_term,
    curve_weight,
    loss_3dgs,
    loss_cc,
    loss_curve,
    loss_reg,
    loss_spa,
    loss_total,
    loss_tv,
)


def t(values) -> torch.Tensor:
    return torch.as_tensor(values, dtype=torch.float64)


def full(value, size: int = 16) -> torch.Tensor:
    return torch.full((size, size, 3), value, dtype=torch.float64)


def zero() -> torch.Tensor:
    return torch.zeros((), dtype=torch.float64)


def terms(**overrides) -> LossTerms:
    values = {name: zero() for name in ("reg", "spa", "tv", "curve", "cc")}
    values.update({k: t(v) for k, v in overrides.items()})
    return LossTerms(**values)


# Reconstruction


def test_loss_3dgs_examples(rng):
    assert float(loss_3dgs(full(0.3), full(0.4), dssim_weight=0.0)) == pytest.approx(0.1)
    img = t(rng.uniform(size=(16, 16, 3)))
    assert float(loss_3dgs(img, img, dssim_weight=1.0)) == pytest.approx(0.0, abs=1e-12)


def test_loss_3dgs_dimension_mismatch():
    with pytest.raises(ImagingError):
        loss_3dgs(full(0.1, 16), full(0.1, 12))


def test_loss_reg_examples(rng):
    a, b, c, d = (t(rng.uniform(size=(16, 16, 3))) for _ in range(4))
    assert float(loss_reg(a, a, b, b)) == pytest.approx(0.0, abs=1e-12)
    assert float(loss_reg(a, b, c, d)) == pytest.approx(float(loss_reg(c, d, a, b)), abs=1e-15)
    assert float(loss_reg(a, b, c, c)) == pytest.approx(float(loss_3dgs(a, b)), abs=1e-12)


# Spatial consistency


def spa_reference(out: np.ndarray, ref: np.ndarray) -> float:
    def pooled(img):
        gray = img.mean(axis=2)
        h, w = gray.shape[0] // 4, gray.shape[1] // 4
        return gray[: 4 * h, : 4 * w].reshape(h, 4, w, 4).mean(axis=(1, 3))

    scale = 0.5 / ref.mean()
    o, r = pooled(out), pooled(ref)
    total = 0.0
    for i in range(o.shape[0]):
        for j in range(o.shape[1]):
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ni, nj = i + di, j + dj
                if 0 <= ni < o.shape[0] and 0 <= nj < o.shape[1]:
                    total += (abs(o[i, j] - o[ni, nj]) - scale * abs(r[i, j] - r[ni, nj])) ** 2
    return total / o.size


@pytest.mark.parametrize("shape", [(8, 8), (12, 8), (16, 20)])
def test_loss_spa_matches_double_loop(rng, shape):
    out = rng.uniform(size=(*shape, 3))
    ref = rng.uniform(0.05, 0.6, size=(*shape, 3))
    assert float(loss_spa(t(out), t(ref))) == pytest.approx(spa_reference(out, ref), abs=1e-10)


def test_loss_spa_zero_cases(rng):
    ref = t(rng.uniform(0.1, 0.9, size=(8, 8, 3)))
    scaled = (0.5 / ref.mean()) * ref
    assert float(loss_spa(scaled, ref)) == pytest.approx(0.0, abs=1e-12)
    assert float(loss_spa(full(0.7, 8), full(0.2, 8))) == 0.0


def test_loss_spa_ignores_constant_offset(rng):
    out = t(rng.uniform(size=(16, 16, 3)))
    ref = t(rng.uniform(size=(16, 16, 3)))
    assert float(loss_spa(out + 0.25, ref)) == pytest.approx(float(loss_spa(out, ref)), abs=1e-12)


def test_loss_spa_needs_two_regions():
    with pytest.raises(ImagingError):
        loss_spa(full(0.5, 6), full(0.5, 6))


# Colour constancy


def test_neutral_images_have_zero_cc(rng):
    v = t(rng.uniform(size=(8, 8, 1)))
    neutral = v.expand(8, 8, 3)
    assert float(color_constancy_term(full(0.4), 2.0)) == pytest.approx(0.0, abs=1e-12)
    assert float(loss_cc([neutral, full(0.0)], [1.0, 7.5])) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("S", [1.0, 2.0, 6.5])
def test_pure_red_cc(S):
    red = torch.zeros((4, 4, 3), dtype=torch.float64)
    red[..., 0] = 1.0
    assert float(color_constancy_term(red, S)) == pytest.approx(2.0 / 3.0 - 0.1, abs=1e-12)


def test_cc_is_bounded_below(rng):
    images = [t(rng.uniform(size=(8, 8, 3))) for _ in range(3)]
    assert float(loss_cc(images, [1.0, 3.0, 12.0])) >= -0.1


def test_cc_is_mean_over_views():
    red = torch.zeros((4, 4, 3), dtype=torch.float64)
    red[..., 0] = 1.0
    assert float(loss_cc([red, full(0.5, 4)], [2.0, 2.0])) == pytest.approx((2.0 / 3.0 - 0.1) / 2.0, abs=1e-12)


def test_cc_order_count_must_match():
    with pytest.raises(ValueError):
        loss_cc([full(0.5, 4)], [])


def test_cc_gradient_reaches_order():
    img = t(np.linspace(0.1, 0.9, 48).reshape(4, 4, 3))
    S = t(3.0).requires_grad_(True)
    color_constancy_term(img, S).backward()
    assert S.grad is not None and torch.isfinite(S.grad)


# Curves


def test_loss_curve_examples(rng):
    prior = power_curve(1.3) * s_curve(0.4, 1.5)
    assert float(loss_curve(prior, prior, power_curve(1.3), s_curve(0.4, 1.5), 1.0)) == 0.0
    assert float(loss_curve(prior, t(rng.uniform(size=256)), power_curve(1.3), s_curve(0.4, 1.5), 0.0)) == 0.0

    offset = prior + 0.1
    for omega in (1.0, 0.1):
        value = float(loss_curve(offset, prior, power_curve(1.3), s_curve(0.4, 1.5), omega))
        assert value == pytest.approx(omega * 0.01 + 0.5 * 0.01, abs=1e-12)


def test_loss_tv_examples():
    assert float(loss_tv(torch.full((256,), 0.3, dtype=torch.float64))) == 0.0
    assert float(loss_tv(identity_curve())) == pytest.approx(1.0 / 65025.0, rel=1e-12)
    step = torch.zeros(256, dtype=torch.float64)
    step[100:] = 1.0
    assert float(loss_tv(step)) == pytest.approx(1.0 / 255.0)


def test_curve_weight_switches_at_boundary():
    assert curve_weight(0) == 1.0
    assert curve_weight(2999) == 1.0
    assert curve_weight(3000) == 0.1
    assert curve_weight(10, switch=10) == 0.1


def test_curve_prior_pulls_lut_to_target():
    target = power_curve(1.0) * s_curve(0.5, 2.0)
    lut = curve_grid().clone().requires_grad_(True)
    optimizer = torch.optim.Adam([lut], lr=5e-3)
    for _ in range(1000):
        optimizer.zero_grad()
        loss = 10.0 * loss_curve(lut, target, power_curve(1.0), s_curve(0.5, 2.0), 1.0)
        loss.backward()
        optimizer.step()
    assert float((lut.detach() - target).abs().max()) < 0.02


# Total


def test_loss_total_examples():
    assert float(loss_total(terms(), eta=0.1)) == 0.0
    assert float(loss_total(terms(tv=0.3), eta=0.1)) == pytest.approx(0.3)
    assert float(loss_total(terms(curve=0.02), eta=0.1)) == pytest.approx(0.2)
    assert float(loss_total(terms(cc=0.5), eta=0.005)) == pytest.approx(0.0025)


def test_loss_total_names_non_finite_component():
    with pytest.raises(NonFiniteError, match="spa"):
        loss_total(terms(spa=float("nan")), eta=0.1)
    with pytest.raises(NonFiniteError, match="cc"):
        loss_total(terms(cc=float("inf")), eta=0.1)
