"""Named trainable parameters, a guarded backward pass and central-difference gradient checks."""

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import torch

from src.errors import GradientError, NonFiniteError
from src.models import GradReport


logger = logging.getLogger(__name__)


@dataclass
class Parameter:
    """A named leaf tensor whose gradient accumulates across backward passes."""

    name: str
    tensor: torch.Tensor

    def __post_init__(self):
        if not self.tensor.is_leaf:
            raise GradientError(f"parameter {self.name} must be a leaf tensor")
        self.tensor.requires_grad_(True)

    @classmethod
    def create(cls, name: str, values, dtype: torch.dtype = torch.float64) -> "Parameter":
        tensor = torch.as_tensor(values, dtype=dtype).detach().clone()
        return cls(name=name, tensor=tensor)

    @property
    def values(self) -> torch.Tensor:
        return self.tensor.detach().reshape(-1)

    @property
    def gradient(self) -> torch.Tensor:
        if self.tensor.grad is None:
            return torch.zeros_like(self.values)
        return self.tensor.grad.detach().reshape(-1)

    def reset(self) -> None:
        self.tensor.grad = None


def backward(loss: torch.Tensor, retain_graph: bool = False) -> None:
    """Accumulate d(loss)/d(parameter) into every reachable leaf."""
    if loss.numel() != 1:
        raise GradientError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    if not torch.isfinite(loss).all():
        raise NonFiniteError("non-finite objective")
    if not loss.requires_grad:
        # Constant with respect to every parameter.
        return
    loss.reshape(()).backward(retain_graph=retain_graph)


def finite_diff_check(
    closure: Callable[[], torch.Tensor],
    params: Sequence[Parameter],
    tolerance: float = 1e-4,
    step: float = 1e-5,
    entries: int | None = None,
    indices: Mapping[str, Sequence[int]] | None = None,
    seed: int = 0,
    op: str = "op",
) -> GradReport:
    """Compare autograd gradients against (f(p+h) - f(p-h)) / 2h.

    `entries` limits the check to a seeded random subset of each parameter;
    `indices` names explicit flat entries per parameter name instead.
    Relative error is |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if step <= 0:
        raise GradientError("finite-difference step must be positive")

    with torch.no_grad():
        first, second = closure(), closure()
    if not torch.equal(first, second):
        raise GradientError("non-deterministic op")

    for p in params:
        p.reset()
    backward(closure())
    analytic = [p.gradient.clone() for p in params]

    rng = np.random.default_rng(seed)
    errors: list[float] = []
    for p, grad in zip(params, analytic):
        flat = p.tensor.data.view(-1)
        n = flat.numel()
        if indices is not None and p.name in indices:
            chosen = list(indices[p.name])
        elif entries is None or entries >= n:
            chosen = range(n)
        else:
            chosen = sorted(rng.choice(n, size=entries, replace=False))
        for i in chosen:
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + step
                f_plus = float(closure())
                flat[i] = original - step
                f_minus = float(closure())
                flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = float(grad[i])
            errors.append(abs(a - numeric) / max(1.0, abs(a), abs(numeric)))
        p.reset()

    max_err = max(errors, default=0.0)
    report = GradReport(op=op, max_rel_err=max_err, errors=errors, tolerance=tolerance, passed=max_err < tolerance)
    logger.debug("gradcheck %s: max rel err %.3e (%s)", op, max_err, "pass" if report.passed else "FAIL")
    return report
