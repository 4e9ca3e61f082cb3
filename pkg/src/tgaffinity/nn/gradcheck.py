"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor


@dataclass
class GradCheckReport:
    """Worst relative error over the probed coordinates plus any failures."""

    max_rel_error: float
    probes: int
    failures: list = field(default_factory=list)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def finite_difference_check(
    loss_fn,
    params,
    num_probes: int = 100,
    eps: float = 1e-5,
    seed: int = 0,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the scalar loss from scratch on every call
    (it is re-evaluated after each parameter perturbation). ``params``
    maps names to the tensors the loss depends on. Probed coordinates are
    sampled uniformly; the relative error divides by
    max(|analytic|, |numeric|, 1), so tiny gradients are compared
    absolutely.
    """
    params = dict(params)
    if not params:
        raise ValueError("params must not be empty")
    for name, tensor in params.items():
        if not isinstance(tensor, Tensor) or not tensor.requires_grad:
            raise ValueError(f"param {name!r} is not a gradient-tracking tensor")

    for tensor in params.values():
        tensor.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        for name, t in params.items()
    }

    rng = np.random.default_rng(seed)
    names = sorted(params)
    max_rel = 0.0
    failures = []
    for _ in range(num_probes):
        name = names[int(rng.integers(len(names)))]
        tensor = params[name]
        flat_index = int(rng.integers(tensor.data.size))
        index = np.unravel_index(flat_index, tensor.data.shape)
        original = tensor.data[index]
        tensor.data[index] = original + eps
        f_plus = float(loss_fn().data)
        tensor.data[index] = original - eps
        f_minus = float(loss_fn().data)
        tensor.data[index] = original
        numeric = (f_plus - f_minus) / (2.0 * eps)
        exact = float(analytic[name][index])
        rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1.0)
        max_rel = max(max_rel, rel)
        if rel >= tol:
            failures.append((name, index, exact, numeric, rel))
    return GradCheckReport(max_rel_error=max_rel, probes=num_probes, failures=failures)
