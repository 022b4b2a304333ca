"""Per-pair evaluation and aggregated metric reports."""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..corpus import ConstraintSpec, IngredientVocab, Recipe, RecipePair
from ..rules import check_ingredient_list, check_steps
from ..text import tokenize
from .metrics import distinct_n, edit_metrics, rouge_l, set_f1, set_iou
from .trees import build_action_tree, nted

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemOutput:
    """An edited recipe produced by some system for (base_id, constraint)."""

    base_id: str
    constraint: str
    ingredient_ids: frozenset[int]
    steps: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str]:
        return (self.base_id, self.constraint)

    @classmethod
    def from_json(cls, obj: dict, vocab: IngredientVocab) -> "SystemOutput":
        ids = set()
        for name in obj.get("ingredients", []):
            iid = vocab.id_of(name)
            if iid is None:
                logger.debug("output for %s names unknown ingredient %r", obj.get("base_id"), name)
            else:
                ids.add(iid)
        return cls(str(obj["base_id"]), str(obj["constraint"]), frozenset(ids), tuple(obj.get("steps", [])))


@dataclass
class MetricReport:
    iou: float = 0.0
    f1: float = 0.0
    ins_f1: float = 0.0
    ins_precision: float = 0.0
    del_f1: float = 0.0
    del_precision: float = 0.0
    rouge_l: float = 0.0
    nted: float = 0.0
    distinct2: float = 0.0
    list_violation_rate: float | None = None
    step_violation_rate: float | None = None
    n_pairs: int = 0
    n_missing: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ViolationRates:
    list_rate: float
    step_rate: float
    n_recipes: int
    per_constraint: dict[str, tuple[float, float]] = field(default_factory=dict)


def violation_rates(
    edited: Sequence[SystemOutput], specs: Mapping[str, ConstraintSpec], vocab: IngredientVocab
) -> ViolationRates:
    """Share of edited recipes with at least one list / step violation, over hard constraints."""
    per: dict[str, list[tuple[bool, bool]]] = defaultdict(list)
    for out in edited:
        spec = specs.get(out.constraint)
        if spec is None or not spec.is_hard:
            continue
        per[out.constraint].append(
            (bool(check_ingredient_list(out.ingredient_ids, spec)), bool(check_steps(out.steps, spec, vocab)))
        )
    flags = [f for c in sorted(per) for f in per[c]]

    def rate(xs, k):
        return sum(x[k] for x in xs) / len(xs) if xs else 0.0

    return ViolationRates(
        rate(flags, 0),
        rate(flags, 1),
        len(flags),
        {c: (rate(per[c], 0), rate(per[c], 1)) for c in sorted(per)},
    )


def _steps_tokens(steps: Sequence[str]) -> list[str]:
    return tokenize(" ".join(steps))


def evaluate_pairs(
    outputs: Mapping[tuple[str, str], SystemOutput],
    pairs: Sequence[RecipePair],
    recipes: Mapping[str, Recipe],
    specs: Mapping[str, ConstraintSpec],
    vocab: IngredientVocab,
    verbs: frozenset,
) -> dict:
    """Mean metrics over gold pairs, overall and per constraint.

    A pair without a system output is scored as an empty edit and counted
    in ``n_missing``.
    """
    rows: dict[str, list[dict]] = defaultdict(list)
    used: dict[str, dict[tuple, SystemOutput]] = defaultdict(dict)
    missing: dict[str, int] = defaultdict(int)
    tree_cache: dict = {}

    def tree_of(key, steps):
        if key not in tree_cache:
            tree_cache[key] = build_action_tree(list(steps), verbs, vocab)
        return tree_cache[key]

    for pair in pairs:
        base, gold = recipes[pair.base], recipes[pair.target]
        out = outputs.get(pair.key())
        if out is None:
            missing[pair.constraint] += 1
            out = SystemOutput(pair.base, pair.constraint, frozenset(), ())
        else:
            used[pair.constraint][out.key] = out
        em = edit_metrics(base.ingredient_ids, out.ingredient_ids, gold.ingredient_ids)
        rows[pair.constraint].append(
            {
                "iou": set_iou(out.ingredient_ids, gold.ingredient_ids),
                "f1": set_f1(out.ingredient_ids, gold.ingredient_ids),
                "ins_f1": em.ins_f1,
                "ins_precision": em.ins_precision,
                "del_f1": em.del_f1,
                "del_precision": em.del_precision,
                "rouge_l": rouge_l(_steps_tokens(out.steps), _steps_tokens(gold.steps_text)),
                "nted": nted(tree_of(("out", out.key, out.steps), out.steps), tree_of(("gold", gold.recipe_id), gold.steps_text)),
            }
        )
    if sum(missing.values()):
        logger.warning("%d pairs had no system output", sum(missing.values()))

    def aggregate(row_list, outs, n_missing) -> MetricReport:
        rep = MetricReport(n_pairs=len(row_list), n_missing=n_missing)
        if row_list:
            for k in row_list[0]:
                setattr(rep, k, float(np.mean([r[k] for r in row_list])))
        rep.distinct2 = distinct_n([_steps_tokens(o.steps) for o in outs], 2)
        vr = violation_rates(outs, specs, vocab)
        if vr.n_recipes:
            rep.list_violation_rate, rep.step_violation_rate = vr.list_rate, vr.step_rate
        return rep

    per_constraint = {
        c: aggregate(rows[c], list(used[c].values()), missing[c]).to_dict() for c in sorted(rows)
    }
    all_rows = [r for c in sorted(rows) for r in rows[c]]
    all_outs = [o for c in sorted(used) for o in used[c].values()]
    overall = aggregate(all_rows, all_outs, sum(missing.values()))
    return {"overall": overall.to_dict(), "per_constraint": per_constraint}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def format_report(report: dict) -> str:
    """Plain-text tables: ingredient fidelity, step quality, violation rates."""

    def pct(x):
        return "   --" if x is None else f"{100 * x:6.2f}"

    groups = [("overall", report["overall"])] + sorted(report["per_constraint"].items())
    lines = ["Ingredient edits", f"{'':14s}{'IoU':>8s}{'F1':>8s}{'Ins F1':>8s}{'Ins P':>8s}{'Del F1':>8s}{'Del P':>8s}"]
    for name, r in groups:
        lines.append(
            f"{name:14s}"
            + "".join(f"{pct(r[k]):>8s}" for k in ("iou", "f1", "ins_f1", "ins_precision", "del_f1", "del_precision"))
        )
    lines += ["", "Directions", f"{'':14s}{'ROUGE-L':>8s}{'NTED':>8s}{'D-2':>8s}"]
    for name, r in groups:
        lines.append(f"{name:14s}{pct(r['rouge_l']):>8s}{r['nted']:>8.3f}{pct(r['distinct2']):>8s}")
    lines += ["", "Hard-constraint violations (% of edited recipes)", f"{'':14s}{'List':>8s}{'Steps':>8s}"]
    for name, r in groups:
        if r["list_violation_rate"] is None:
            continue
        lines.append(f"{name:14s}{pct(r['list_violation_rate']):>8s}{pct(r['step_violation_rate']):>8s}")
    return "\n".join(lines) + "\n"
