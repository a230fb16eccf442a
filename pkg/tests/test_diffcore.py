import pytest
import torch

from src.errors import GradientError, NonFiniteError
from src.pipeline.colorxform import invert_matrix
from src.pipeline.diffcore import Parameter, backward, finite_diff_check


def test_square_gradient():
    x = Parameter.create("x", 3.0)
    backward(x.tensor**2)
    assert x.gradient.tolist() == [6.0]


def test_constant_has_zero_gradient():
    x = Parameter.create("x", [1.0, 2.0])
    backward(x.tensor.sum() * 0.0 + 5.0)
    assert torch.equal(x.gradient, torch.zeros(2, dtype=torch.float64))


def test_untracked_loss_is_a_no_op():
    x = Parameter.create("x", 1.0)
    backward(torch.tensor(2.0))
    assert x.tensor.grad is None
    assert x.gradient.tolist() == [0.0]


def test_backward_accumulates_and_reset_clears():
    x = Parameter.create("x", [0.5, -1.5, 2.0])
    backward((x.tensor**3).sum())
    once = x.gradient.clone()
    backward((x.tensor**3).sum())
    assert torch.equal(x.gradient, 2 * once)

    x.reset()
    assert torch.equal(x.gradient, torch.zeros(3, dtype=torch.float64))


def test_backward_rejects_non_scalar():
    x = Parameter.create("x", [1.0, 2.0])
    with pytest.raises(GradientError):
        backward(x.tensor * 2)


def test_backward_rejects_non_finite():
    x = Parameter.create("x", 1.0)
    with pytest.raises(NonFiniteError, match="non-finite objective"):
        backward(x.tensor * float("inf"))


def test_parameter_must_be_leaf():
    base = torch.ones(2, requires_grad=True)
    with pytest.raises(GradientError):
        Parameter("derived", base * 2)


def test_linear_op_is_exact():
    x = Parameter.create("x", 1.0)
    report = finite_diff_check(lambda: 3.0 * x.tensor.sum(), [x], tolerance=1e-6, op="linear")
    assert report.passed
    assert report.max_rel_err < 1e-9
    assert report.op == "linear"


def test_clamp_inside_range_passes():
    x = Parameter.create("x", [0.2, 0.5, 0.7])
    report = finite_diff_check(lambda: (x.tensor.clamp(0.0, 1.0) ** 2).sum(), [x])
    assert report.passed


def test_matrix_inverse_gradient():
    M = Parameter.create("M", torch.diag(torch.tensor([1.0, 2.0, 4.0], dtype=torch.float64)))
    weights = torch.arange(9, dtype=torch.float64).reshape(3, 3) / 10.0
    report = finite_diff_check(lambda: (invert_matrix(M.tensor) * weights).sum(), [M], tolerance=1e-5)
    assert report.passed
    assert len(report.errors) == 9


def test_pass_flag_follows_tolerance():
    x = Parameter.create("x", [0.3, 0.9])
    report = finite_diff_check(lambda: torch.sin(x.tensor).sum(), [x], tolerance=1e-4)
    assert report.passed == (report.max_rel_err < report.tolerance)


def test_entry_subsets():
    x = Parameter.create("x", torch.linspace(0.1, 0.9, 20, dtype=torch.float64))
    sampled = finite_diff_check(lambda: (x.tensor**2).sum(), [x], entries=5)
    assert len(sampled.errors) == 5

    chosen = finite_diff_check(lambda: (x.tensor**2).sum(), [x], indices={"x": [0, 7]})
    assert len(chosen.errors) == 2


def test_check_leaves_values_unchanged():
    x = Parameter.create("x", [0.25, 0.75])
    before = x.values.clone()
    finite_diff_check(lambda: (x.tensor**2).sum(), [x])
    assert torch.equal(x.values, before)


def test_non_deterministic_closure():
    x = Parameter.create("x", 1.0)
    with pytest.raises(GradientError, match="non-deterministic op"):
        finite_diff_check(lambda: x.tensor * torch.rand(()), [x])


def test_step_must_be_positive():
    x = Parameter.create("x", 1.0)
    with pytest.raises(GradientError):
        finite_diff_check(lambda: x.tensor * 2, [x], step=0.0)
