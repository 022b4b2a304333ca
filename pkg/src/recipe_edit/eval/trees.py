"""Ingredient-action trees and ordered tree edit distance (Zhang-Shasha)."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import IngredientVocab, Recipe, _clean_lines
from ..rules import extract_mentions
from ..text import tokenize_spans

SUPER_ROOT = "<root>"


@dataclass
class TreeNode:
    label: str
    children: list["TreeNode"] = field(default_factory=list)

    def add(self, child: "TreeNode") -> "TreeNode":
        self.children.append(child)
        return child

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def to_tuple(self) -> tuple:
        return (self.label, tuple(c.to_tuple() for c in self.children))

    @classmethod
    def from_tuple(cls, t: tuple) -> "TreeNode":
        label, kids = t
        return cls(label, [cls.from_tuple(k) for k in kids])


@dataclass
class ActionTree:
    """Ingredient roots hung under a synthetic super-root."""

    root: TreeNode = field(default_factory=lambda: TreeNode(SUPER_ROOT))

    def size(self) -> int:
        """Node count excluding the super-root."""
        return self.root.size() - 1


def load_verb_lexicon(path: Path | None = None) -> frozenset[tuple[str, ...]]:
    if path is None:
        text = resources.files("recipe_edit").joinpath("data").joinpath("verbs.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(tuple(line.lower().split()) for line in _clean_lines(text.splitlines()))


def _lemma_candidates(tok: str) -> list[str]:
    out = [tok]
    if tok.endswith("ies"):
        out.append(tok[:-3] + "y")
    if tok.endswith("es"):
        out.append(tok[:-2])
    if tok.endswith("s"):
        out.append(tok[:-1])
    if tok.endswith("ied"):
        out.append(tok[:-3] + "y")
    if tok.endswith("ed"):
        out += [tok[:-2], tok[:-1]]
        if len(tok) > 4 and tok[-3] == tok[-4]:
            out.append(tok[:-3])
    if tok.endswith("ing"):
        out += [tok[:-3], tok[:-3] + "e"]
        if len(tok) > 5 and tok[-4] == tok[-5]:
            out.append(tok[:-4])
    return out


def lemmatize(tok: str, lexicon: frozenset[tuple[str, ...]]) -> str:
    for cand in _lemma_candidates(tok):
        if (cand,) in lexicon:
            return cand
    return tok


def extract_verbs(step: str, lexicon: frozenset[tuple[str, ...]], vocab: IngredientVocab) -> list[str]:
    """Action-verb lemmas in order, ignoring tokens inside ingredient mentions."""
    toks = tokenize_spans(step)
    covered = set()
    for m in extract_mentions(step, vocab):
        a, b = m.span
        covered.update(i for i, (_, s, e) in enumerate(toks) if s >= a and e <= b)
    lemmas = [lemmatize(t, lexicon) for t, _, _ in toks]
    longest = max((len(v) for v in lexicon), default=1)
    verbs = []
    i = 0
    while i < len(toks):
        if i in covered:
            i += 1
            continue
        for n in range(min(longest, len(toks) - i), 0, -1):
            if any(j in covered for j in range(i, i + n)):
                continue
            cand = tuple(lemmas[i : i + n])
            if cand in lexicon:
                verbs.append(" ".join(cand))
                i += n
                break
        else:
            i += 1
    return verbs


def build_action_tree(
    recipe: Recipe | Sequence[str],
    verb_lexicon: frozenset[tuple[str, ...]],
    vocab: IngredientVocab,
) -> ActionTree:
    """Workflow tree: each ingredient is a root with the chain of actions applied to it.

    A step's verb chain is hung beneath the current tip of every ingredient
    it mentions (ingredient roots are created on first mention, in label
    order within a step). A step with verbs but no mentions continues the
    most recently created action node, or the super-root if there is none.
    """
    steps = recipe.steps_text if isinstance(recipe, Recipe) else list(recipe)
    tree = ActionTree()
    tips: dict[int, TreeNode] = {}
    last_action: TreeNode | None = None
    for step in steps:
        ids = sorted({m.ingredient_id for m in extract_mentions(step, vocab)}, key=vocab.name)
        verbs = extract_verbs(step, verb_lexicon, vocab)
        if ids:
            for iid in ids:
                if iid not in tips:
                    tips[iid] = tree.root.add(TreeNode(vocab.name(iid)))
                node = tips[iid]
                for v in verbs:
                    node = node.add(TreeNode(v))
                tips[iid] = node
                if verbs:
                    last_action = node
        elif verbs:
            node = last_action or tree.root
            for v in verbs:
                node = node.add(TreeNode(v))
            last_action = node
    return tree


# ---------------------------------------------------------------------------
# Zhang-Shasha


class _Annotated:
    def __init__(self, root: TreeNode):
        self.labels: list[str] = []
        self.lmd: list[int] = []
        stack: list[tuple[TreeNode, bool]] = [(root, False)]
        first_leaf: dict[int, int] = {}
        while stack:
            node, visited = stack.pop()
            if visited or not node.children:
                idx = len(self.labels)
                self.labels.append(node.label)
                self.lmd.append(first_leaf[id(node.children[0])] if node.children else idx)
                first_leaf[id(node)] = self.lmd[-1]
            else:
                stack.append((node, True))
                for c in reversed(node.children):
                    stack.append((c, False))
        n = len(self.labels)
        seen = set()
        keyroots = []
        for i in range(n - 1, -1, -1):
            if self.lmd[i] not in seen:
                seen.add(self.lmd[i])
                keyroots.append(i)
        self.keyroots = sorted(keyroots)


def tree_edit_distance(t1: TreeNode | ActionTree, t2: TreeNode | ActionTree) -> int:
    """Ordered tree edit distance with unit insert, delete and relabel costs."""
    a = _Annotated(t1.root if isinstance(t1, ActionTree) else t1)
    b = _Annotated(t2.root if isinstance(t2, ActionTree) else t2)
    a_lmd, a_lab, b_lmd, b_lab = a.lmd, a.labels, b.lmd, b.labels
    n, m = len(a_lab), len(b_lab)
    td = [[0] * m for _ in range(n)]
    for i in a.keyroots:
        li = a_lmd[i]
        for j in b.keyroots:
            lj = b_lmd[j]
            cols = j - lj + 2
            # fd[x][y]: distance between the first x-1 nodes of subforest i and first y-1 of j
            fd = [list(range(cols))]
            for x in range(1, i - li + 2):
                ii = li + x - 1
                whole_a = a_lmd[ii] == li
                label = a_lab[ii]
                prev, sub, td_row = fd[x - 1], fd[a_lmd[ii] - li], td[ii]
                row = [x] * cols
                for y in range(1, cols):
                    jj = lj + y - 1
                    best = prev[y] + 1
                    left = row[y - 1] + 1
                    if left < best:
                        best = left
                    if whole_a and b_lmd[jj] == lj:
                        diag = prev[y - 1] + (label != b_lab[jj])
                        if diag < best:
                            best = diag
                        td_row[jj] = best
                    else:
                        diag = sub[b_lmd[jj] - lj] + td_row[jj]
                        if diag < best:
                            best = diag
                    row[y] = best
                fd.append(row)
    return td[n - 1][m - 1]


def nted(t1: ActionTree, t2: ActionTree) -> float:
    """TED / (|t1| + |t2|), sizes excluding the shared super-root."""
    denom = t1.size() + t2.size()
    if denom == 0:
        return 0.0
    return tree_edit_distance(t1, t2) / denom
