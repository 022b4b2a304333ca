from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor, _node, _sigmoid, clamp_min, log, log_softmax, total


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite values in {what}")


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy, computed in log-sum-exp form.

    ``max(x, 0) - x*y + log1p(exp(-|x|))`` per element, averaged.
    """
    y = np.asarray(labels, dtype=np.float64)
    x = logits.data
    if x.shape != y.shape:
        raise ValueError(f"logits {x.shape} and labels {y.shape} differ in shape")
    if np.any(np.isnan(x)):
        raise ValueError("NaN in logits")
    n = x.size
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    # +-inf logits with the matching label are fine; the mismatched case is inf loss
    per = np.where(np.isinf(x) & (np.sign(x) == np.where(y > 0.5, 1.0, -1.0)), 0.0, per)
    return _node(
        np.asarray(per.sum() / n),
        (logits,),
        lambda g: ((logits, g * (_sigmoid(x) - y) / n),),
    )


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax."""
    t = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != t.shape[0]:
        raise ValueError("cross_entropy expects [n, V] logits and n targets")
    _check_finite(logits.data, "logits")
    if t.size and (t.min() < 0 or t.max() >= logits.shape[1]):
        raise IndexError("target id out of range")
    lp = log_softmax(logits, axis=-1)
    picked = lp[np.arange(t.size), t]
    return _mean_neg(picked)


def _mean_neg(x: Tensor) -> Tensor:
    return total(x) * (-1.0 / x.data.size)


def nll_of_probs(probs: Tensor, targets: Sequence[int], floor: float = 1e-12) -> tuple[Tensor, int]:
    """Mean ``-log p[target]`` for probability rows; entries below ``floor`` are clamped.

    Returns the loss and the number of clamped positions.
    """
    t = np.asarray(targets, dtype=np.int64)
    picked = probs[np.arange(t.size), t]
    n_clamped = int((picked.data <= floor).sum())
    return _mean_neg(log(clamp_min(picked, floor))), n_clamped
