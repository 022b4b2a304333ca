"""LAMB: Adam moments with a per-parameter trust ratio."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParameterStore


@dataclass
class LambState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    weight_decay: float = 0.0
    trust_min: float = 0.01
    trust_max: float = 10.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def lamb_step(params: ParameterStore, grads: dict[str, np.ndarray], state: LambState) -> None:
    """Apply one LAMB update in place.

    For each parameter ``w`` with gradient ``g``::

        m <- b1 m + (1 - b1) g ;  v <- b2 v + (1 - b2) g^2
        r  = m_hat / (sqrt(v_hat) + eps) + wd * w
        w <- w - lr * clip(||w|| / ||r||, trust_min, trust_max) * r

    A zero norm on either side uses a trust ratio of 1.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * p.data
        w_norm = float(np.linalg.norm(p.data))
        u_norm = float(np.linalg.norm(update))
        if w_norm > 0.0 and u_norm > 0.0:
            trust = min(max(w_norm / u_norm, state.trust_min), state.trust_max)
        else:
            trust = 1.0
        p.data = p.data - state.lr * trust * update
