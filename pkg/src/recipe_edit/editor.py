"""Set-pooled ingredient editor.

An encoder reads ``[constraint token; name tokens]``; a decoder reads the
base ingredient ids (plus identical "slot" inputs for extra positions)
with no positional information and unmasked self-attention, so the rows
it produces are permutation-equivariant in the base ingredients. Each
position is projected to ``|I| + 1`` logits; ingredient logits are
max-pooled over positions and the last column is a per-position eos
logit that decides how many ingredients to return.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import CONSTRAINTS, ConstraintSpec, IngredientVocab, Recipe, RecipePair
from .eval.metrics import set_f1
from .nn import tensor as T
from .nn.layers import TransformerConfig, init_decoder, init_encoder, init_linear, transformer_decoder, transformer_encoder
from .nn.losses import bce_with_logits
from .nn.optim import LambState, lamb_step
from .nn.params import ParameterStore
from .nn.tensor import Tensor, no_grad
from .rules import filter_ingredient_list
from .training import TrainingDiverged, UntrainedModelError, substream

logger = logging.getLogger(__name__)

PAD, UNK = "<pad>", "<unk>"


@dataclass
class EditorConfig:
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    margin: int = 8
    max_positions: int = 64
    max_name_len: int = 32
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 8
    patience: int = 10
    eval_every: int = 1

    @property
    def transformer(self) -> TransformerConfig:
        return TransformerConfig(self.n_layers, self.d_model, self.n_heads, self.d_ff)


@dataclass(frozen=True)
class EditorInput:
    constraint: str
    name_tokens: tuple[str, ...]
    base_ingredient_ids: tuple[int, ...]


@dataclass
class EditorPrediction:
    pooled_probs: np.ndarray
    k_predicted: int
    selected: frozenset[int]
    eos_probs: np.ndarray


class IngredientEditor:
    def __init__(self, store: ParameterStore, config: EditorConfig, name_vocab: list[str], n_ingredients: int):
        self.store = store
        self.config = config
        self.name_vocab = name_vocab
        self.n_ingredients = n_ingredients
        self._name_index = {t: i for i, t in enumerate(name_vocab)}
        self.trained = bool(store.config.get("trained", False))

    @classmethod
    def create(cls, n_ingredients: int, name_tokens: Sequence[str], config: EditorConfig, seed: int = 0) -> "IngredientEditor":
        vocab = [PAD, UNK] + [f"<c:{c}>" for c in CONSTRAINTS] + sorted(set(name_tokens) - {PAD, UNK})
        rng = substream(seed, "init")
        tc = config.transformer
        d = tc.d_model
        store = ParameterStore()
        store.add("enc.embed", rng.normal(0, 1.0, size=(len(vocab), d)))
        store.add("enc.pos", rng.normal(0, 0.1, size=(config.max_name_len + 1, d)))
        init_encoder(store, "enc", tc, rng)
        store.add("dec.embed", rng.normal(0, 1.0, size=(n_ingredients + 1, d)))
        init_decoder(store, "dec", tc, rng)
        init_linear(store, "out.w", d, n_ingredients, rng)
        store.add("out.b", np.zeros(n_ingredients))
        store.add("eos.w", rng.normal(0, 1.0 / np.sqrt(d), size=d))
        store.add("eos.b", np.zeros(()))
        store.add("eos.u", rng.normal(0, 1.0 / np.sqrt(d), size=(config.max_positions, d)))
        store.add("eos.c", np.zeros(config.max_positions))
        model = cls(store, config, vocab, n_ingredients)
        model._sync_store_config()
        return model

    def _sync_store_config(self) -> None:
        self.store.config = {
            "kind": "ingredient-editor",
            "config": asdict(self.config),
            "name_vocab": self.name_vocab,
            "n_ingredients": self.n_ingredients,
            "trained": self.trained,
        }

    def save(self, path: str | Path) -> None:
        self._sync_store_config()
        self.store.save(path)

    @classmethod
    def load(cls, path: str | Path) -> "IngredientEditor":
        store = ParameterStore.load(path)
        if store.config.get("kind") != "ingredient-editor":
            raise ValueError(f"{path} is not an ingredient-editor checkpoint")
        return cls(store, EditorConfig(**store.config["config"]), list(store.config["name_vocab"]), int(store.config["n_ingredients"]))

    def encoder_ids(self, inp: EditorInput) -> list[int]:
        if not inp.name_tokens:
            raise ValueError("empty recipe name")
        if inp.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {inp.constraint!r}")
        unk = self._name_index[UNK]
        names = [self._name_index.get(t, unk) for t in inp.name_tokens[: self.config.max_name_len]]
        return [self._name_index[f"<c:{inp.constraint}>"]] + names


def make_input(recipe: Recipe, constraint: str) -> EditorInput:
    return EditorInput(constraint, recipe.name_tokens, tuple(sorted(recipe.ingredient_ids)))


def default_positions(model: IngredientEditor, inp: EditorInput) -> int:
    return min(len(inp.base_ingredient_ids) + model.config.margin, model.config.max_positions)


def score_positions(model: IngredientEditor, inp: EditorInput, n_positions: int) -> Tensor:
    """Logits of shape [n_positions, |I| + 1]; the last column is eos."""
    if n_positions < 1:
        raise ValueError("need at least one decoder position")
    if n_positions > model.config.max_positions:
        raise ValueError(f"n_positions={n_positions} exceeds max_positions={model.config.max_positions}")
    for i in inp.base_ingredient_ids:
        if not 0 <= i < model.n_ingredients:
            raise IndexError(f"ingredient id {i} outside vocabulary of {model.n_ingredients}")
    s = model.store
    tc = model.config.transformer
    enc_ids = model.encoder_ids(inp)
    x = T.take_rows(s["enc.embed"], enc_ids) + s["enc.pos"][: len(enc_ids)]
    memory = transformer_encoder(x, s, "enc", tc)
    slot = model.n_ingredients
    dec_ids = (list(inp.base_ingredient_ids) + [slot] * n_positions)[:n_positions]
    h = transformer_decoder(T.take_rows(s["dec.embed"], dec_ids), memory, s, "dec", tc, causal=False)
    ingr = h @ s["out.w"] + s["out.b"]
    summary = T.mean(h, axis=0)
    eos = h @ s["eos.w"] + s["eos.b"] + s["eos.u"][:n_positions] @ summary + s["eos.c"][:n_positions]
    return T.concat([ingr, T.reshape(eos, (n_positions, 1))], axis=1)


def pool_scores(logits: Tensor) -> Tensor:
    """Column-wise max over positions, eos column excluded."""
    if logits.shape[0] < 1:
        raise ValueError("need at least one position")
    return T.max_pool(logits[:, :-1], axis=0)


def predict_cardinality(eos_logits: np.ndarray, rng: np.random.Generator) -> int:
    """Scan positions, drawing Bernoulli(sigmoid(eos)); K is the first success, else T."""
    probs = T._sigmoid(np.asarray(eos_logits, dtype=np.float64))
    for k, p in enumerate(probs):
        if rng.random() < p:
            return k
    return len(probs)


def deterministic_cardinality(eos_logits: np.ndarray) -> int:
    """First position whose eos probability exceeds 0.5, else T."""
    hits = np.flatnonzero(T._sigmoid(np.asarray(eos_logits, dtype=np.float64)) > 0.5)
    return int(hits[0]) if hits.size else len(eos_logits)


def select_top_k(pooled_probs: np.ndarray, k: int) -> frozenset[int]:
    """K highest-probability ids, ties going to the lower id."""
    probs = np.asarray(pooled_probs)
    if k > probs.size:
        raise ValueError(f"K={k} exceeds vocabulary size {probs.size}")
    order = np.lexsort((np.arange(probs.size), -probs))
    return frozenset(int(i) for i in order[:k])


def editor_loss(logits: Tensor, target_set: Sequence[int] | frozenset[int], k_true: int) -> Tensor:
    """Set BCE on pooled logits plus BCE of eos logits against one-hot(K).

    When ``k_true`` equals the number of positions the eos target is all
    zeros (no stop inside the window).
    """
    n_pos = logits.shape[0]
    if k_true > n_pos:
        raise ValueError(f"K_true={k_true} exceeds T={n_pos}")
    pooled = pool_scores(logits)
    labels = np.zeros(pooled.shape[0])
    labels[list(target_set)] = 1.0
    eos_target = np.zeros(n_pos)
    if k_true < n_pos:
        eos_target[k_true] = 1.0
    return bce_with_logits(pooled, labels) + bce_with_logits(logits[:, -1], eos_target)


def _example(model: IngredientEditor, base: Recipe, target: Recipe, constraint: str) -> tuple[EditorInput, frozenset[int], int, int]:
    inp = make_input(base, constraint)
    k_true = len(target.ingredient_ids)
    n_pos = max(default_positions(model, inp), k_true + 1)
    if n_pos > model.config.max_positions:
        n_pos = model.config.max_positions
        k_true = min(k_true, n_pos)
    return inp, target.ingredient_ids, k_true, n_pos


def predict(
    model: IngredientEditor,
    inp: EditorInput,
    mode: str = "deterministic",
    rng: np.random.Generator | None = None,
    n_positions: int | None = None,
) -> EditorPrediction:
    n_pos = n_positions or default_positions(model, inp)
    with no_grad():
        logits = score_positions(model, inp, n_pos).data
    pooled = T._sigmoid(logits[:, :-1].max(axis=0))
    eos = logits[:, -1]
    if mode == "sample":
        k = predict_cardinality(eos, rng if rng is not None else np.random.default_rng(0))
    elif mode == "deterministic":
        k = deterministic_cardinality(eos)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    k = min(k, model.n_ingredients)
    selected = select_top_k(pooled, k)
    return EditorPrediction(pooled, k, selected, T._sigmoid(eos))


def edit_ingredients(
    model: IngredientEditor,
    base: Recipe,
    constraint: str,
    spec: ConstraintSpec | None = None,
    hard_filter: bool = False,
    mode: str = "deterministic",
    rng: np.random.Generator | None = None,
) -> EditorPrediction:
    """Predict the edited ingredient set; optionally drop banned ingredients afterwards."""
    if not model.trained:
        raise UntrainedModelError("ingredient editor has not been trained")
    pred = predict(model, make_input(base, constraint), mode, rng)
    if hard_filter and spec is not None and spec.is_hard:
        kept = frozenset(filter_ingredient_list(pred.selected, spec))
        pred = EditorPrediction(pred.pooled_probs, len(kept), kept, pred.eos_probs)
    return pred


def mean_f1(model: IngredientEditor, examples: Sequence[tuple[Recipe, Recipe, str]]) -> float:
    if not examples:
        return 0.0
    return float(np.mean([set_f1(predict(model, make_input(b, c)).selected, t.ingredient_ids) for b, t, c in examples]))


def train_editor(
    pairs: Sequence[RecipePair],
    recipes: dict[str, Recipe],
    vocab: IngredientVocab,
    config: EditorConfig | None = None,
    seed: int = 0,
    val_pairs: Sequence[RecipePair] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> tuple[IngredientEditor, list[dict]]:
    """Train with LAMB on mini-batches; early-stop when validation F1 stops improving.

    Without ``val_pairs`` the training pairs are used for the F1 check. The
    best-F1 parameters are restored at the end.
    """
    config = config or EditorConfig()
    if not pairs:
        raise ValueError("no training pairs")
    train = [(recipes[p.base], recipes[p.target], p.constraint) for p in pairs]
    val = [(recipes[p.base], recipes[p.target], p.constraint) for p in val_pairs] if val_pairs else train
    name_tokens = sorted({t for b, _, _ in train for t in b.name_tokens})
    model = IngredientEditor.create(len(vocab), name_tokens, config, seed)
    examples = [_example(model, b, t, c) for b, t, c in train]
    opt = LambState(lr=config.lr)
    shuffle_rng = substream(seed, "shuffle")
    history: list[dict] = []
    best_f1, best_snap, since_best = -1.0, model.store.snapshot(), 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(examples))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.store.zero_grad()
            for i in batch:
                inp, target, k_true, n_pos = examples[i]
                loss = editor_loss(score_positions(model, inp, n_pos), target, k_true) * (1.0 / len(batch))
                if not np.isfinite(loss.data):
                    rec = {"epoch": epoch, "loss": float("nan")}
                    history.append(rec)
                    model.store.restore(best_snap)
                    raise TrainingDiverged(f"non-finite editor loss at epoch {epoch}", history, model)
                loss.backward()
                losses.append(float(loss.data) * len(batch))
            lamb_step(model.store, model.store.grads(), opt)
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            f1 = mean_f1(model, val)
            record["val_f1"] = f1
            if f1 > best_f1:
                best_f1, best_snap, since_best = f1, model.store.snapshot(), 0
            else:
                since_best += 1
        history.append(record)
        if on_epoch:
            on_epoch(record)
        if best_f1 >= 1.0 or since_best >= config.patience:
            break
    model.store.restore(best_snap)
    model.store.zero_grad()
    model.trained = True
    model._sync_store_config()
    return model, history
