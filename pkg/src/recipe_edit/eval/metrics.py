from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence


def set_iou(pred: Iterable[Hashable], gold: Iterable[Hashable]) -> float:
    p, g = set(pred), set(gold)
    if not p and not g:
        return 1.0
    return len(p & g) / len(p | g)


def set_f1(pred: Iterable[Hashable], gold: Iterable[Hashable]) -> float:
    p, g = set(pred), set(gold)
    if not p and not g:
        return 1.0
    return 2 * len(p & g) / (len(p) + len(g))


def _prf(pred: set, gold: set) -> tuple[float, float, float]:
    hit = len(pred & gold)
    precision = hit / len(pred) if pred else (1.0 if not gold else 0.0)
    recall = hit / len(gold) if gold else (1.0 if not pred else 0.0)
    # harmonic mean of P and R, written as one division so it is exact
    f1 = 1.0 if not pred and not gold else 2 * hit / (len(pred) + len(gold))
    return precision, recall, f1


@dataclass(frozen=True)
class EditScores:
    ins_precision: float
    ins_recall: float
    ins_f1: float
    del_precision: float
    del_recall: float
    del_f1: float


def edit_metrics(base: Iterable, pred: Iterable, gold: Iterable) -> EditScores:
    """Precision/recall/F1 of insertions and deletions relative to ``base``.

    An empty predicted side scores 1 when the gold side is empty too, else 0.
    """
    b, p, g = set(base), set(pred), set(gold)
    ip, ir, if1 = _prf(p - b, g - b)
    dp, dr, df1 = _prf(b - p, b - g)
    return EditScores(ip, ir, if1, dp, dr, df1)


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Bit-parallel LCS: one bitmask update per token of ``b``."""
    if not a or not b:
        return 0
    masks: dict = {}
    for i, x in enumerate(a):
        masks[x] = masks.get(x, 0) | (1 << i)
    full = (1 << len(a)) - 1
    v = full
    for y in b:
        u = v & masks.get(y, 0)
        v = ((v + u) | (v - u)) & full
    # each zero bit in v marks one matched position of a
    return len(a) - bin(v).count("1")


def rouge_l(pred: Sequence, gold: Sequence, beta: float = 1.0) -> float:
    """LCS F-measure; 0 when either side is empty."""
    if not pred or not gold:
        return 0.0
    lcs = lcs_length(pred, gold)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(pred), lcs / len(gold)
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def distinct_n(texts: Iterable[Sequence], n: int = 2) -> float:
    """Unique n-grams over total n-grams, pooled across texts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seen = set()
    total = 0
    for toks in texts:
        toks = list(toks)
        for i in range(len(toks) - n + 1):
            seen.add(tuple(toks[i : i + n]))
            total += 1
    return len(seen) / total if total else 0.0
