"""Substitution rules, banned-ingredient detection and the rule-based editor."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .corpus import (
    CONSTRAINTS,
    HARD_CONSTRAINTS,
    ConstraintSpec,
    IngredientVocab,
    Recipe,
    _clean_lines,
)
from .text import tokenize, tokenize_spans

logger = logging.getLogger(__name__)


class RulesFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SubstitutionRule:
    constraint: str
    from_ingredient: int
    to_ingredient: int | None = None


class Mention(NamedTuple):
    span: tuple[int, int]
    ingredient_id: int


@dataclass(frozen=True)
class ViolationReport:
    recipe_id: str
    constraint: str
    list_violations: frozenset[int] = frozenset()
    step_violations: tuple[tuple[int, tuple[int, int], int], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.list_violations and not self.step_violations


# ---------------------------------------------------------------------------
# detection


def check_ingredient_list(ingredients: Iterable[int], spec: ConstraintSpec) -> set[int]:
    if not spec.is_hard:
        return set()
    return set(ingredients) & spec.banned


def filter_ingredient_list(predicted: Iterable[int], spec: ConstraintSpec) -> set[int]:
    return set(predicted) - spec.banned


def _max_form_len(vocab: IngredientVocab) -> int:
    cached = getattr(vocab, "_max_form_len", None)
    if cached is None:
        cached = max((len(f) for f, _ in vocab.surface_forms()), default=0)
        object.__setattr__(vocab, "_max_form_len", cached)
    return cached


def extract_mentions(step: str, vocab: IngredientVocab) -> list[Mention]:
    """Greedy longest-match of ingredient names and aliases, left to right.

    Spans are character offsets into ``step`` and never overlap.
    """
    toks = tokenize_spans(step)
    words = [t for t, _, _ in toks]
    lookup = vocab._lookup
    longest = _max_form_len(vocab)
    out: list[Mention] = []
    i = 0
    while i < len(words):
        for n in range(min(longest, len(words) - i), 0, -1):
            iid = lookup.get(tuple(words[i : i + n]))
            if iid is not None:
                out.append(Mention((toks[i][1], toks[i + n - 1][2]), iid))
                i += n
                break
        else:
            i += 1
    return out


def check_steps(steps: Sequence[str], spec: ConstraintSpec, vocab: IngredientVocab) -> list[tuple[int, tuple[int, int], int]]:
    """(step index, span, ingredient id) for every banned mention."""
    if not spec.is_hard:
        return []
    return [
        (k, m.span, m.ingredient_id)
        for k, step in enumerate(steps)
        for m in extract_mentions(step, vocab)
        if m.ingredient_id in spec.banned
    ]


def check_recipe(recipe: Recipe, spec: ConstraintSpec, vocab: IngredientVocab) -> ViolationReport:
    return ViolationReport(
        recipe.recipe_id,
        spec.constraint_id,
        frozenset(check_ingredient_list(recipe.ingredient_ids, spec)),
        tuple(check_steps(recipe.steps_text, spec, vocab)),
    )


# ---------------------------------------------------------------------------
# rule baseline

_LEFT_CONNECTOR = re.compile(r"(\s*,|\s+and|\s+or|\s*&)\s*$", re.IGNORECASE)
_LEFT_ARTICLE = re.compile(r"\b(the|a|an|some)\s*$", re.IGNORECASE)
_RIGHT_CONNECTOR = re.compile(r"^\s*(,|and\b|or\b|&)\s*", re.IGNORECASE)


def _delete_span(text: str, start: int, end: int) -> str:
    left, right = text[:start], text[end:]
    left = _LEFT_ARTICLE.sub("", left)
    if _LEFT_CONNECTOR.search(left):
        left = _LEFT_CONNECTOR.sub("", left)
    elif _RIGHT_CONNECTOR.search(right):
        right = " " + _RIGHT_CONNECTOR.sub("", right, count=1)
    return left + (" " if left and right and not right[:1].isspace() else "") + right


def _tidy(text: str) -> str:
    text = re.sub(r"\s+", " ", text)
    text = re.sub(r"\s+([,.;:!?)])", r"\1", text)
    text = re.sub(r"^[\s,;:]+", "", text)
    text = re.sub(r"([,;:])\s*([.!?])", r"\2", text)
    return text.strip()


def _rewrite(text: str, mentions: list[Mention], replacement: dict[int, str | None]) -> str:
    for m in sorted(mentions, key=lambda m: m.span[0], reverse=True):
        if m.ingredient_id not in replacement:
            continue
        sub = replacement[m.ingredient_id]
        a, b = m.span
        text = text[:a] + sub + text[b:] if sub is not None else _delete_span(text, a, b)
    return _tidy(text)


def rule_edit(base: Recipe, spec: ConstraintSpec, vocab: IngredientVocab, max_passes: int = 8) -> Recipe:
    """Replace or drop every constraint-violating ingredient, in the list and the text.

    Ingredients with a rule become their substitute; ingredients without one
    are removed from the list and their mentions deleted from the steps.
    For hard constraints every banned mention in the text is handled, even
    if the ingredient was not listed.
    """
    rule_for: dict[int, int | None] = {}
    for r in spec.rules:
        rule_for.setdefault(r.from_ingredient, r.to_ingredient)
    if spec.is_hard:
        violating = set(base.ingredient_ids) & spec.banned
        text_targets = set(spec.banned)
    else:
        violating = set(base.ingredient_ids) & set(rule_for)
        text_targets = set(violating)
    if not violating and not any(
        m.ingredient_id in text_targets for s in base.steps_text for m in extract_mentions(s, vocab)
    ):
        return base

    ingredients = set(base.ingredient_ids) - violating
    for v in violating:
        sub = rule_for.get(v)
        if sub is not None:
            ingredients.add(sub)
    replacement = {
        iid: (vocab.name(rule_for[iid]) if rule_for.get(iid) is not None else None) for iid in text_targets
    }
    steps = list(base.steps_text)
    for _ in range(max_passes):
        changed = False
        for k, step in enumerate(steps):
            ms = [m for m in extract_mentions(step, vocab) if m.ingredient_id in text_targets]
            if ms:
                steps[k] = _rewrite(step, ms, replacement)
                changed = True
        if not changed:
            break
    else:
        # substitutions kept re-creating banned mentions; fall back to deletion,
        # which strictly shortens the text and so terminates
        drop_all = {iid: None for iid in text_targets}
        for k in range(len(steps)):
            while True:
                ms = [m for m in extract_mentions(steps[k], vocab) if m.ingredient_id in text_targets]
                if not ms:
                    break
                steps[k] = _rewrite(steps[k], ms, drop_all)
    steps = [s for s in steps if any(ch.isalnum() for ch in s)]
    return base.with_edits(ingredients, steps or ["(no remaining directions)"])


# ---------------------------------------------------------------------------
# loading


def _default_constraint_dir() -> Path:
    return Path(str(resources.files("recipe_edit").joinpath("data").joinpath("constraints")))


def load_banned(path: Path, vocab: IngredientVocab, strict: bool = False) -> frozenset[int]:
    ids = set()
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        name = line.split("#", 1)[0].strip()
        if not name:
            continue
        iid = vocab.id_of(tokenize(name))
        if iid is None:
            if strict:
                raise RulesFormatError(f"{path}:{n}: unknown ingredient {name!r}")
            logger.debug("%s:%d: banned ingredient %r not in vocabulary", path, n, name)
            continue
        ids.add(iid)
    return frozenset(ids)


def load_rules(
    path: Path,
    vocab: IngredientVocab,
    banned: dict[str, frozenset[int]] | None = None,
    strict: bool = True,
) -> list[SubstitutionRule]:
    """Parse ``constraint<TAB>from<TAB>to`` lines (empty ``to`` = removal-only).

    With ``strict`` an unknown ingredient raises; otherwise the rule is skipped.
    """
    banned = banned or {}
    rules = []
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 2:
            parts.append("")
        if len(parts) != 3:
            raise RulesFormatError(f"{path}:{n}: expected 'constraint<TAB>from<TAB>to'")
        cid, src, dst = (p.strip() for p in parts)
        if cid not in CONSTRAINTS:
            raise RulesFormatError(f"{path}:{n}: unknown constraint {cid!r}")
        src_id = vocab.id_of(tokenize(src))
        dst_id = vocab.id_of(tokenize(dst)) if dst else None
        unknown = [x for x, i in ((src, src_id), (dst, dst_id)) if x and i is None]
        if unknown:
            if strict:
                raise RulesFormatError(f"{path}:{n}: unknown ingredient {unknown[0]!r}")
            logger.debug("%s:%d: skipping rule with unknown ingredient %r", path, n, unknown[0])
            continue
        if cid in HARD_CONSTRAINTS and cid in banned:
            if src_id not in banned[cid]:
                raise RulesFormatError(f"{path}:{n}: {src!r} is not banned under {cid}")
            if dst_id is not None and dst_id in banned[cid]:
                raise RulesFormatError(f"{path}:{n}: substitute {dst!r} is itself banned under {cid}")
        rules.append(SubstitutionRule(cid, src_id, dst_id))
    return rules


def load_constraint_specs(
    vocab: IngredientVocab, constraint_dir: Path | None = None, strict: bool = False
) -> dict[str, ConstraintSpec]:
    """Read ``<dir>/<constraint>/{banned.txt,rules.tsv}`` for every constraint.

    Hard constraints whose banned list resolves to nothing in ``vocab`` are
    skipped (a hard constraint needs a non-empty banned list).
    """
    root = Path(constraint_dir) if constraint_dir is not None else _default_constraint_dir()
    specs: dict[str, ConstraintSpec] = {}
    for cid in CONSTRAINTS:
        d = root / cid
        banned: frozenset[int] = frozenset()
        if cid in HARD_CONSTRAINTS:
            if not (d / "banned.txt").exists():
                logger.warning("no banned list for hard constraint %s; skipping", cid)
                continue
            banned = load_banned(d / "banned.txt", vocab, strict=strict)
            if not banned:
                logger.warning("hard constraint %s has no banned ingredient in the vocabulary; skipping", cid)
                continue
        rules: list[SubstitutionRule] = []
        if (d / "rules.tsv").exists():
            rules = [r for r in load_rules(d / "rules.tsv", vocab, {cid: banned}, strict=strict) if r.constraint == cid]
        specs[cid] = ConstraintSpec(cid, "hard" if cid in HARD_CONSTRAINTS else "soft", banned, tuple(rules))
    return specs
