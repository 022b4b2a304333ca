from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import ParameterStore
from .tensor import Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: ParameterStore,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords: int = 12,
    seed: int = 0,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare backprop gradients against central differences.

    Up to ``max_coords`` coordinates per parameter are sampled. Relative
    error is ``|a - n| / max(|a| + |n|, floor)``.
    """
    rng = np.random.default_rng(seed)
    params.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise ValueError("loss is not finite")
    loss.backward()
    analytic = {n: g.copy() for n, g in params.grads().items()}

    report = GradCheckReport(max_rel_error=0.0, tolerance=tolerance)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            up = float(loss_fn().data)
            flat[c] = orig - epsilon
            down = float(loss_fn().data)
            flat[c] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"loss is not finite while perturbing {name}")
            num = (up - down) / (2.0 * epsilon)
            ana = float(analytic[name].reshape(-1)[c])
            rel = abs(ana - num) / max(abs(ana) + abs(num), floor)
            worst = max(worst, rel)
            report.n_checked += 1
        report.per_param[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    params.zero_grad()
    return report
