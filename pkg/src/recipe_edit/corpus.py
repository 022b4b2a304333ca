"""Corpus ingestion, ingredient normalization, constraint tagging and pairing."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .text import tokenize

logger = logging.getLogger(__name__)

CONSTRAINTS = (
    "low-carb",
    "low-calorie",
    "low-fat",
    "low-sugar",
    "vegetarian",
    "gluten-free",
    "dairy-free",
)
HARD_CONSTRAINTS = frozenset({"vegetarian", "gluten-free", "dairy-free"})

Tokens = tuple[str, ...]


class CorpusFormatError(ValueError):
    """A corpus, pairs or vocabulary file could not be parsed."""


class VocabError(ValueError):
    pass


class InsufficientPairsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# lexicons


def _data_lines(name: str) -> list[str]:
    text = resources.files("recipe_edit").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return _clean_lines(text.splitlines())


def _clean_lines(lines: Iterable[str]) -> list[str]:
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


@dataclass(frozen=True)
class Lexicons:
    """Word lists used by ``normalize_ingredient``."""

    units: frozenset[str]
    numbers: frozenset[str]
    brands: tuple[Tokens, ...]
    connectors: frozenset[str] = frozenset({"of", "to", "or", "-", "/", "x"})

    @classmethod
    def default(cls) -> "Lexicons":
        return cls(
            units=frozenset(_data_lines("units.txt")),
            numbers=frozenset(_data_lines("number_words.txt")),
            brands=tuple(sorted({tuple(tokenize(b)) for b in _data_lines("brands.txt")}, key=lambda t: (-len(t), t))),
        )

    @classmethod
    def from_files(cls, units: Path, numbers: Path, brands: Path) -> "Lexicons":
        read = lambda p: _clean_lines(Path(p).read_text(encoding="utf-8").splitlines())  # noqa: E731
        return cls(
            units=frozenset(read(units)),
            numbers=frozenset(read(numbers)),
            brands=tuple(sorted({tuple(tokenize(b)) for b in read(brands)}, key=lambda t: (-len(t), t))),
        )


_DEFAULT_LEXICONS: Lexicons | None = None


def default_lexicons() -> Lexicons:
    global _DEFAULT_LEXICONS
    if _DEFAULT_LEXICONS is None:
        _DEFAULT_LEXICONS = Lexicons.default()
    return _DEFAULT_LEXICONS


_NUMERIC_RE = re.compile(r"^(\d+([.,]\d+)?|[¼-¾⅐-⅞]|\d+[¼-¾⅐-⅞])$")
_WORD_RE = re.compile(r"^[^\W_]")
_PAREN_RE = re.compile(r"\([^)]*\)|\[[^\]]*\]")


def _is_quantity(tok: str, lex: Lexicons) -> bool:
    return bool(_NUMERIC_RE.match(tok)) or tok in lex.numbers


def _strip_once(tokens: list[str], lex: Lexicons) -> list[str]:
    i = 0
    stripped = False
    while i < len(tokens):
        tok = tokens[i]
        if _is_quantity(tok, lex) or tok in lex.units or (stripped and tok in lex.connectors):
            stripped = True
            i += 1
            continue
        break
    tokens = tokens[i:]
    out: list[str] = []
    j = 0
    while j < len(tokens):
        for brand in lex.brands:
            if tuple(tokens[j : j + len(brand)]) == brand:
                j += len(brand)
                break
        else:
            out.append(tokens[j])
            j += 1
    return [t for t in out if _WORD_RE.match(t)]


def normalize_ingredient(raw: str, lexicons: Lexicons | None = None) -> list[str]:
    """Canonical token sequence for a raw ingredient line.

    Drops parentheticals and anything after the first comma (preparation
    notes), strips leading quantity and unit words, removes brand phrases and
    punctuation. Repeats until nothing changes, so the result is a fixed
    point. An empty result means the line carries no ingredient.

    >>> normalize_ingredient("1 tablespoon Knoxville Farms butter")
    ['butter']
    """
    lex = lexicons or default_lexicons()
    text = _PAREN_RE.sub(" ", raw).split(",", 1)[0]
    tokens = tokenize(text)
    while True:
        nxt = _strip_once(tokens, lex)
        if nxt == tokens:
            return tokens
        tokens = nxt


def load_aliases(path: Path | None = None) -> dict[Tokens, Tokens]:
    """alias -> canonical name, from a two-column TSV."""
    if path is None:
        lines = _data_lines("aliases.tsv")
    else:
        lines = _clean_lines(Path(path).read_text(encoding="utf-8").splitlines())
    out: dict[Tokens, Tokens] = {}
    for n, line in enumerate(lines, 1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusFormatError(f"aliases line {n}: expected 'alias<TAB>canonical'")
        out[tuple(tokenize(parts[0]))] = tuple(tokenize(parts[1]))
    return out


# ---------------------------------------------------------------------------
# vocabulary


@dataclass(frozen=True)
class VocabEntry:
    ingredient_id: int
    name: Tokens
    aliases: frozenset[Tokens] = frozenset()

    @property
    def text(self) -> str:
        return " ".join(self.name)


@dataclass
class IngredientVocab:
    entries: list[VocabEntry]
    min_recipe_count: int = 1
    _lookup: dict[Tokens, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for i, e in enumerate(self.entries):
            if e.ingredient_id != i:
                raise VocabError(f"ingredient ids must be dense; entry {i} has id {e.ingredient_id}")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise VocabError("canonical names must be unique")
        self._lookup = {}
        for e in self.entries:
            for a in e.aliases:
                self._lookup[a] = e.ingredient_id
        for e in self.entries:
            self._lookup[e.name] = e.ingredient_id

    def __len__(self) -> int:
        return len(self.entries)

    def name(self, ingredient_id: int) -> str:
        return self.entries[ingredient_id].text

    def id_of(self, name: str | Sequence[str]) -> int | None:
        key = tuple(tokenize(name)) if isinstance(name, str) else tuple(name)
        return self._lookup.get(key)

    def require(self, name: str) -> int:
        i = self.id_of(name)
        if i is None:
            raise KeyError(f"unknown ingredient {name!r}")
        return i

    def resolve(self, raw: str, lexicons: Lexicons | None = None) -> int | None:
        toks = normalize_ingredient(raw, lexicons)
        return self._lookup.get(tuple(toks)) if toks else None

    def surface_forms(self) -> list[tuple[Tokens, int]]:
        """Every (token sequence, id) pair: canonical names and aliases."""
        return sorted(self._lookup.items())

    def to_json(self) -> str:
        obj = {
            "min_recipe_count": self.min_recipe_count,
            "entries": [
                {"id": e.ingredient_id, "name": e.text, "aliases": sorted(" ".join(a) for a in e.aliases)}
                for e in self.entries
            ],
        }
        return json.dumps(obj, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "IngredientVocab":
        try:
            obj = json.loads(text)
            entries = [
                VocabEntry(
                    int(e["id"]),
                    tuple(e["name"].split()),
                    frozenset(tuple(a.split()) for a in e.get("aliases", [])),
                )
                for e in obj["entries"]
            ]
            return cls(entries, int(obj.get("min_recipe_count", 1)))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise CorpusFormatError(f"bad vocabulary file: {exc}") from exc

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "IngredientVocab":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def canonical_name(raw: str, aliases: dict[Tokens, Tokens], lexicons: Lexicons | None = None) -> Tokens:
    toks = tuple(normalize_ingredient(raw, lexicons))
    return aliases.get(toks, toks)


def build_vocab(
    corpus: Sequence["RawRecipe"],
    min_recipe_count: int = 10,
    aliases: dict[Tokens, Tokens] | None = None,
    lexicons: Lexicons | None = None,
) -> IngredientVocab:
    """Ingredient vocabulary of names seen in at least ``min_recipe_count`` recipes.

    Ids are assigned in sorted-name order.
    """
    if not corpus:
        raise VocabError("cannot build a vocabulary from an empty corpus")
    if min_recipe_count < 1:
        raise VocabError("min_recipe_count must be >= 1")
    aliases = load_aliases() if aliases is None else aliases
    counts: Counter[Tokens] = Counter()
    for r in corpus:
        names = {canonical_name(raw, aliases, lexicons) for raw in r.ingredients}
        names.discard(())
        counts.update(names)
    kept = sorted(n for n, c in counts.items() if c >= min_recipe_count)
    if not kept:
        raise VocabError(f"no ingredient appears in >= {min_recipe_count} recipes")
    by_canon: dict[Tokens, set[Tokens]] = defaultdict(set)
    for alias, canon in aliases.items():
        if alias != canon:
            by_canon[canon].add(alias)
    entries = [VocabEntry(i, n, frozenset(by_canon.get(n, ()))) for i, n in enumerate(kept)]
    return IngredientVocab(entries, min_recipe_count)


# ---------------------------------------------------------------------------
# recipes


@dataclass(frozen=True)
class RawRecipe:
    """One corpus-file record, before ingredient resolution."""

    id: str
    name: str
    ingredients: tuple[str, ...]
    steps: tuple[str, ...]
    tags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "ingredients": list(self.ingredients),
            "steps": list(self.steps),
            "tags": list(self.tags),
        }


@dataclass(frozen=True)
class Recipe:
    recipe_id: str
    name_tokens: Tokens
    ingredient_ids: frozenset[int]
    steps_text: tuple[str, ...]
    raw_tags: frozenset[str] = frozenset()
    name: str = ""

    def __post_init__(self):
        if not self.name_tokens:
            raise ValueError(f"recipe {self.recipe_id}: empty name")
        if not self.steps_text:
            raise ValueError(f"recipe {self.recipe_id}: no steps")

    def with_edits(self, ingredient_ids: Iterable[int], steps: Sequence[str]) -> "Recipe":
        return Recipe(self.recipe_id, self.name_tokens, frozenset(ingredient_ids), tuple(steps), self.raw_tags, self.name)


def resolve_recipe(raw: RawRecipe, vocab: IngredientVocab, aliases: dict[Tokens, Tokens] | None = None,
                   lexicons: Lexicons | None = None) -> Recipe | None:
    """Map a raw record onto vocabulary ids; None if the record is unusable."""
    aliases = load_aliases() if aliases is None else aliases
    ids = set()
    for line in raw.ingredients:
        canon = canonical_name(line, aliases, lexicons)
        i = vocab.id_of(canon) if canon else None
        if i is not None:
            ids.add(i)
    name_tokens = tuple(tokenize(raw.name))
    steps = tuple(s for s in raw.steps if s.strip())
    if not name_tokens or not steps or not ids:
        return None
    return Recipe(raw.id, name_tokens, frozenset(ids), steps, frozenset(t.lower() for t in raw.tags), raw.name)


def resolve_corpus(raw: Sequence[RawRecipe], vocab: IngredientVocab, aliases=None, lexicons=None) -> list[Recipe]:
    aliases = load_aliases() if aliases is None else aliases
    out = []
    for r in raw:
        rec = resolve_recipe(r, vocab, aliases, lexicons)
        if rec is None:
            logger.debug("dropping recipe %s (no name, steps or known ingredients)", r.id)
        else:
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class ConstraintSpec:
    constraint_id: str
    kind: str
    banned: frozenset[int] = frozenset()
    rules: tuple = ()

    def __post_init__(self):
        if self.constraint_id not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint_id!r}")
        if self.kind not in ("hard", "soft"):
            raise ValueError(f"kind must be hard or soft, got {self.kind!r}")
        if (self.kind == "hard") != bool(self.banned):
            raise ValueError(f"{self.constraint_id}: hard constraints need a banned list; soft ones must not have one")

    @property
    def is_hard(self) -> bool:
        return self.kind == "hard"


def satisfies(recipe: Recipe, spec: ConstraintSpec) -> bool:
    if spec.constraint_id not in CONSTRAINTS:
        raise ValueError(f"unknown constraint {spec.constraint_id!r}")
    if spec.constraint_id not in recipe.raw_tags:
        return False
    if spec.is_hard:
        return not (recipe.ingredient_ids & spec.banned)
    return True


# ---------------------------------------------------------------------------
# pairing and splits


@dataclass(frozen=True, order=True)
class RecipePair:
    base: str
    target: str
    constraint: str

    def key(self) -> tuple[str, str]:
        return (self.base, self.constraint)


def jaccard(a: frozenset | set, b: frozenset | set) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def contains_contiguous(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0:
        return True
    return any(tuple(haystack[i : i + n]) == tuple(needle) for i in range(len(haystack) - n + 1))


def pair_recipes(
    corpus: Sequence[Recipe],
    spec: ConstraintSpec,
    overlap_min: float = 0.3,
    max_targets_per_base: int | None = None,
    seed: int = 0,
) -> list[RecipePair]:
    """Pair each non-satisfying recipe with satisfying recipes whose name contains its name.

    Targets must contain the base name as a contiguous token run and share
    at least ``overlap_min`` Jaccard overlap of ingredients. If more than
    ``max_targets_per_base`` targets qualify, a seeded sample is kept.
    """
    targets = [r for r in corpus if satisfies(r, spec)]
    by_token: dict[str, set[int]] = defaultdict(set)
    for ti, t in enumerate(targets):
        for tok in t.name_tokens:
            by_token[tok].add(ti)
    rng = np.random.default_rng([seed, _stable_hash(spec.constraint_id)])
    pairs = []
    for base in corpus:
        if satisfies(base, spec):
            continue
        cand = set.intersection(*(by_token.get(tok, set()) for tok in base.name_tokens))
        matched = []
        for ti in sorted(cand):
            t = targets[ti]
            if t.recipe_id == base.recipe_id:
                continue
            if not contains_contiguous(t.name_tokens, base.name_tokens):
                continue
            if jaccard(base.ingredient_ids, t.ingredient_ids) < overlap_min:
                continue
            matched.append(t)
        if max_targets_per_base is not None and len(matched) > max_targets_per_base:
            keep = sorted(rng.choice(len(matched), size=max_targets_per_base, replace=False))
            matched = [matched[i] for i in keep]
        pairs.extend(RecipePair(base.recipe_id, t.recipe_id, spec.constraint_id) for t in matched)
    return pairs


def split_dataset(
    pairs: Sequence[RecipePair], seed: int, n_val: int, n_test: int
) -> tuple[list[RecipePair], list[RecipePair], list[RecipePair]]:
    """Recipe-disjoint train/val/test split.

    Evaluation pairs are drawn in a seeded order that prefers pairs whose
    recipes occur in few other pairs; training pairs touching any
    evaluation recipe are dropped.
    """
    if n_val < 0 or n_test < 0:
        raise ValueError("split sizes must be non-negative")
    if n_val + n_test > 0 and n_val + n_test >= len(pairs):
        raise InsufficientPairsError(f"need more than {n_val + n_test} pairs, have {len(pairs)}")
    if n_val + n_test == 0:
        return list(pairs), [], []
    degree: Counter[str] = Counter()
    for p in pairs:
        degree[p.base] += 1
        degree[p.target] += 1
    rank = np.random.default_rng(seed).permutation(len(pairs))
    order = sorted(range(len(pairs)), key=lambda i: (degree[pairs[i].base] + degree[pairs[i].target], rank[i]))
    used: set[str] = set()
    chosen: list[int] = []
    for i in order:
        if len(chosen) == n_val + n_test:
            break
        p = pairs[i]
        if p.base in used or p.target in used:
            continue
        chosen.append(i)
        used.update((p.base, p.target))
    if len(chosen) < n_val + n_test:
        raise InsufficientPairsError(
            f"only {len(chosen)} recipe-disjoint pairs available for {n_val + n_test} evaluation slots"
        )
    chosen_set = set(chosen)
    val = [pairs[i] for i in chosen[:n_val]]
    test = [pairs[i] for i in chosen[n_val:]]
    train = [
        p
        for i, p in enumerate(pairs)
        if i not in chosen_set and p.base not in used and p.target not in used
    ]
    dropped = len(pairs) - len(train) - len(val) - len(test)
    if dropped:
        logger.info("split: dropped %d training pairs sharing recipes with evaluation pairs", dropped)
    return train, val, test


def _stable_hash(s: str) -> int:
    import zlib

    return zlib.crc32(s.encode("utf-8"))


# ---------------------------------------------------------------------------
# file I/O


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def _iter_json_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _str_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    val = obj.get(key, [] if key == "tags" else None)
    if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
        raise CorpusFormatError(f"{where}: field {key!r} must be a list of strings")
    return tuple(val)


def load_corpus(path: str | Path) -> list[RawRecipe]:
    path = Path(path)
    out = []
    for lineno, obj in _iter_json_lines(path):
        where = f"{path}:{lineno}"
        for key in ("id", "name"):
            if not isinstance(obj.get(key), str):
                raise CorpusFormatError(f"{where}: field {key!r} must be a string")
        out.append(
            RawRecipe(
                obj["id"],
                obj["name"],
                _str_list(obj, "ingredients", where),
                _str_list(obj, "steps", where),
                _str_list(obj, "tags", where),
            )
        )
    return out


def save_corpus(path: str | Path, recipes: Iterable[RawRecipe]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in recipes:
            fh.write(_dumps(r.to_dict()) + "\n")


def load_pairs(path: str | Path) -> list[RecipePair]:
    path = Path(path)
    out = []
    for lineno, obj in _iter_json_lines(path):
        try:
            pair = RecipePair(str(obj["base_id"]), str(obj["target_id"]), str(obj["constraint"]))
        except KeyError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: missing field {exc}") from exc
        if pair.constraint not in CONSTRAINTS:
            raise CorpusFormatError(f"{path}:{lineno}: unknown constraint {pair.constraint!r}")
        out.append(pair)
    return out


def save_pairs(path: str | Path, pairs: Iterable[RecipePair]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(_dumps({"base_id": p.base, "target_id": p.target, "constraint": p.constraint}) + "\n")
