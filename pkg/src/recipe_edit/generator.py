"""Step generator: a conditional language model over direction text.

The encoder reads the ingredient names joined by commas; the decoder is a
causal transformer whose output projection is tied to the token
embeddings. A copy head attends from each decoder state over the raw
input token embeddings and a learned gate mixes the copy distribution
into the vocabulary distribution. Decoding is greedy, optionally with a
trie of banned surface forms whose completions are zeroed out.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import ConstraintSpec, IngredientVocab, Recipe
from .nn import tensor as T
from .nn.layers import NEG_INF, TransformerConfig, init_decoder, init_encoder, transformer_decoder, transformer_encoder
from .nn.losses import nll_of_probs
from .nn.optim import LambState, lamb_step
from .nn.params import ParameterStore
from .nn.tensor import Tensor, no_grad
from .text import detokenize, tokenize
from .training import TrainingDiverged, UntrainedModelError, substream

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS, SEP = "<pad>", "<unk>", "<bos>", "<eos>", "<sep>"
SPECIALS = (PAD, UNK, BOS, EOS, SEP)
COMMA = ","


class WordVocab:
    """Token list with the special tokens first; ids are list positions."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"word vocabulary must start with {SPECIALS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in word vocabulary")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.pad, self.unk, self.bos, self.eos, self.sep = (self.index[t] for t in SPECIALS)
        self.comma = self.index.get(COMMA)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, tok: str) -> bool:
        return tok in self.index

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, self.unk) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


def build_word_vocab(
    step_texts: Iterable[str],
    ingredient_vocab: IngredientVocab | None = None,
    min_freq: int = 1,
) -> WordVocab:
    """Frequency-cut vocabulary; ingredient-name tokens and the comma are always kept."""
    counts: Counter[str] = Counter()
    for text in step_texts:
        counts.update(tokenize(text))
    keep = {t for t, c in counts.items() if c >= min_freq}
    keep.add(COMMA)
    if ingredient_vocab is not None:
        for form, _ in ingredient_vocab.surface_forms():
            keep.update(form)
    keep -= set(SPECIALS)
    return WordVocab(list(SPECIALS) + sorted(keep))


def encode_ingredients(names: Iterable[str], vocab: WordVocab) -> list[int]:
    """Names (sorted) tokenized and joined by a comma token."""
    toks: list[str] = []
    for k, name in enumerate(sorted(names)):
        if k:
            toks.append(COMMA)
        toks.extend(tokenize(name))
    return vocab.encode(toks)


def encode_steps(steps: Sequence[str], vocab: WordVocab) -> list[int]:
    """Steps as one sequence: separator between steps, end token at the end."""
    ids: list[int] = []
    for k, step in enumerate(steps):
        if k:
            ids.append(vocab.sep)
        ids.extend(vocab.encode(tokenize(step)))
    ids.append(vocab.eos)
    return ids


def split_steps(ids: Sequence[int], vocab: WordVocab) -> list[str]:
    steps: list[list[str]] = [[]]
    for i in ids:
        if i == vocab.eos:
            break
        if i == vocab.sep:
            steps.append([])
        elif i not in (vocab.pad, vocab.bos, vocab.unk):
            steps[-1].append(vocab.tokens[i])
    return [detokenize(s) for s in steps if s]


@dataclass
class GeneratorConfig:
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    embed_dim: int | None = None
    max_input_len: int = 128
    max_len: int = 256
    copy: bool = True
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 8
    patience: int = 10
    target_accuracy: float | None = None

    @property
    def transformer(self) -> TransformerConfig:
        return TransformerConfig(self.n_layers, self.d_model, self.n_heads, self.d_ff)


@dataclass
class StepDistribution:
    p_vocab: np.ndarray
    alpha: np.ndarray | None
    p_gen: float
    p_final: np.ndarray
    blocked: frozenset[int] = frozenset()


@dataclass
class GeneratedSteps:
    token_ids: list[int]
    steps: list[str]
    truncated: bool


class StepGenerator:
    def __init__(self, store: ParameterStore, config: GeneratorConfig, vocab: WordVocab):
        self.store = store
        self.config = config
        self.vocab = vocab
        self.trained = bool(store.config.get("trained", False))

    @classmethod
    def create(cls, vocab: WordVocab, config: GeneratorConfig, seed: int = 0) -> "StepGenerator":
        if len(vocab) == 0:
            raise ValueError("empty word vocabulary")
        rng = substream(seed, "init")
        tc = config.transformer
        d = tc.d_model
        store = ParameterStore()
        if config.embed_dim:
            store.add("emb.table", rng.normal(0, 1.0 / np.sqrt(config.embed_dim), size=(len(vocab), config.embed_dim)))
            store.add("emb.factor", rng.normal(0, 1.0, size=(config.embed_dim, d)))
        else:
            store.add("emb.table", rng.normal(0, 1.0, size=(len(vocab), d)))
        store.add("enc.pos", rng.normal(0, 0.1, size=(config.max_input_len, d)))
        store.add("dec.pos", rng.normal(0, 0.1, size=(config.max_len + 1, d)))
        init_encoder(store, "enc", tc, rng)
        init_decoder(store, "dec", tc, rng)
        store.add("out.b", np.zeros(len(vocab)))
        store.add("gen.w", rng.normal(0, 1.0 / np.sqrt(d), size=d))
        store.add("gen.b", np.zeros(()))
        model = cls(store, config, vocab)
        model._sync_store_config()
        return model

    def _sync_store_config(self) -> None:
        self.store.config = {
            "kind": "step-generator",
            "config": asdict(self.config),
            "word_vocab": self.vocab.tokens,
            "trained": self.trained,
        }

    def save(self, path: str | Path) -> None:
        self._sync_store_config()
        self.store.save(path)

    @classmethod
    def load(cls, path: str | Path) -> "StepGenerator":
        store = ParameterStore.load(path)
        if store.config.get("kind") != "step-generator":
            raise ValueError(f"{path} is not a step-generator checkpoint")
        return cls(store, GeneratorConfig(**store.config["config"]), WordVocab(store.config["word_vocab"]))


# ---------------------------------------------------------------------------
# forward pieces


def copy_attention(h: Tensor, input_embeddings: Tensor, copyable: np.ndarray | None = None) -> Tensor:
    """softmax(h E^T / sqrt(K_ingr)) over input positions.

    ``copyable`` masks positions that may not be copied; K_ingr still counts
    every input position.
    """
    k_ingr = input_embeddings.shape[0]
    if k_ingr == 0:
        raise ValueError("copy attention over an empty input")
    if h.shape[-1] != input_embeddings.shape[-1]:
        raise ValueError("decoder state and input embeddings differ in width")
    scores = (h @ input_embeddings.T) * (1.0 / np.sqrt(k_ingr))
    if copyable is not None:
        scores = scores + np.where(copyable, 0.0, NEG_INF)
    return T.softmax(scores, axis=-1)


def gen_gate(h: Tensor, w_gen: Tensor, b_gen: Tensor) -> Tensor:
    return T.sigmoid(h @ w_gen + b_gen)


@dataclass
class _Encoded:
    embeddings: Tensor
    input_embeddings: Tensor
    memory: Tensor
    input_ids: list[int]
    copyable: np.ndarray


@dataclass
class _Decoded:
    p_vocab: Tensor
    alpha: Tensor | None
    p_gen: Tensor | None
    p_final: Tensor


def _check_input(model: StepGenerator, input_ids: Sequence[int]) -> None:
    if not input_ids:
        raise ValueError("empty generator input")
    if len(input_ids) > model.config.max_input_len:
        raise ValueError(f"input of {len(input_ids)} tokens exceeds max_input_len={model.config.max_input_len}")
    if all(i == model.vocab.comma for i in input_ids):
        raise ValueError("generator input has no ingredient tokens")


def _encode(model: StepGenerator, input_ids: Sequence[int]) -> _Encoded:
    _check_input(model, input_ids)
    s = model.store
    table = s["emb.table"]
    emb = table @ s["emb.factor"] if "emb.factor" in s else table
    ids = list(input_ids)
    e_in = T.take_rows(emb, ids)
    memory = transformer_encoder(e_in + s["enc.pos"][: len(ids)], s, "enc", model.config.transformer)
    copyable = np.array([i != model.vocab.comma for i in ids])
    return _Encoded(emb, e_in, memory, ids, copyable)


def _decode(model: StepGenerator, enc: _Encoded, dec_ids: Sequence[int]) -> _Decoded:
    s = model.store
    n = len(dec_ids)
    if n > model.config.max_len + 1:
        raise ValueError(f"decoder prefix of {n} exceeds max_len={model.config.max_len}")
    x = T.take_rows(enc.embeddings, list(dec_ids)) + s["dec.pos"][:n]
    h = transformer_decoder(x, enc.memory, s, "dec", model.config.transformer, causal=True)
    p_vocab = T.softmax(h @ enc.embeddings.T + s["out.b"], axis=-1)
    if not model.config.copy:
        return _Decoded(p_vocab, None, None, p_vocab)
    alpha = copy_attention(h, enc.input_embeddings, enc.copyable)
    gate = T.reshape(gen_gate(h, s["gen.w"], s["gen.b"]), (n, 1))
    onehot = np.zeros((len(enc.input_ids), len(model.vocab)))
    onehot[np.arange(len(enc.input_ids)), enc.input_ids] = 1.0
    copied = alpha @ onehot
    return _Decoded(p_vocab, alpha, gate, gate * p_vocab + (1.0 - gate) * copied)


def step_distribution(model: StepGenerator, input_ids: Sequence[int], prefix: Sequence[int]) -> StepDistribution:
    """Next-token distribution after ``prefix`` (generated tokens, without the start token)."""
    with no_grad():
        out = _decode(model, _encode(model, input_ids), [model.vocab.bos, *prefix])
    return _last_row(out)


def _last_row(out: _Decoded) -> StepDistribution:
    return StepDistribution(
        out.p_vocab.data[-1].copy(),
        None if out.alpha is None else out.alpha.data[-1].copy(),
        1.0 if out.p_gen is None else float(out.p_gen.data[-1, 0]),
        out.p_final.data[-1].copy(),
    )


def lm_loss(model: StepGenerator, input_ids: Sequence[int], target_ids: Sequence[int]) -> tuple[Tensor, int]:
    """Teacher-forced mean ``-log p_final`` of the gold tokens, and the count of floored probabilities."""
    loss, n_clamped, _ = _lm_loss_and_hits(model, input_ids, target_ids)
    return loss, n_clamped


def _lm_loss_and_hits(model, input_ids, target_ids) -> tuple[Tensor, int, int]:
    if not target_ids or target_ids[-1] != model.vocab.eos:
        raise ValueError("target must be non-empty and end with the end token")
    out = _decode(model, _encode(model, input_ids), [model.vocab.bos, *target_ids[:-1]])
    loss, n_clamped = nll_of_probs(out.p_final, target_ids)
    hits = int((out.p_final.data.argmax(axis=1) == np.asarray(target_ids)).sum())
    return loss, n_clamped, hits


# ---------------------------------------------------------------------------
# constrained decoding


@dataclass
class _TrieNode:
    children: dict[int, "_TrieNode"] = field(default_factory=dict)
    ingredient_id: int | None = None


class BlacklistTrie:
    """Token-id sequences spelling banned ingredients."""

    def __init__(self, boundaries: Iterable[int] = ()):
        self.root = _TrieNode()
        self.boundaries = frozenset(boundaries)
        self.depth = 0
        self.n_sequences = 0

    def add(self, seq: Sequence[int], ingredient_id: int) -> None:
        if not seq:
            raise ValueError("empty banned sequence")
        node = self.root
        for tok in seq:
            node = node.children.setdefault(tok, _TrieNode())
        if node.ingredient_id is None:
            self.n_sequences += 1
        node.ingredient_id = ingredient_id
        self.depth = max(self.depth, len(seq))

    def __len__(self) -> int:
        return self.n_sequences

    @classmethod
    def for_constraint(cls, spec: ConstraintSpec, ingredients: IngredientVocab, words: WordVocab) -> "BlacklistTrie":
        """All names and aliases of the banned ingredients that the word vocabulary can spell."""
        trie = cls(boundaries=(words.sep, words.eos, words.bos))
        for form, iid in ingredients.surface_forms():
            if iid in spec.banned and all(t in words for t in form):
                trie.add(words.encode(form), iid)
        return trie

    def blocked_after(self, prefix: Sequence[int]) -> set[int]:
        """Tokens that would complete a banned sequence right after ``prefix``."""
        start = len(prefix)
        for k in range(len(prefix) - 1, -1, -1):
            if prefix[k] in self.boundaries:
                break
            start = k
        ctx = list(prefix[start:])
        blocked = {t for t, c in self.root.children.items() if c.ingredient_id is not None}
        for j in range(max(0, len(ctx) - self.depth + 1), len(ctx)):
            node = self.root
            for tok in ctx[j:]:
                node = node.children.get(tok)
                if node is None:
                    break
            else:
                blocked.update(t for t, c in node.children.items() if c.ingredient_id is not None)
        return blocked


def apply_blacklist(dist: StepDistribution, prefix: Sequence[int], trie: BlacklistTrie) -> StepDistribution:
    """Zero the tokens that would complete a banned sequence and renormalize p_final.

    If nothing is left, p_final becomes uniform over the non-blocked tokens.
    """
    blocked = trie.blocked_after(prefix)
    if not blocked:
        return dist
    p = dist.p_final.copy()
    idx = np.fromiter(blocked, dtype=np.int64)
    p[idx] = 0.0
    mass = p.sum()
    if mass > 0:
        p /= mass
    else:
        p = np.ones_like(p)
        p[idx] = 0.0
        p /= p.sum()
    return StepDistribution(dist.p_vocab, dist.alpha, dist.p_gen, p, frozenset(blocked))


def generate_steps(
    model: StepGenerator,
    input_ids: Sequence[int],
    blacklist: BlacklistTrie | None = None,
    max_len: int | None = None,
) -> GeneratedSteps:
    """Greedy decoding; stops at the end token or after ``max_len`` tokens (flagged as truncated)."""
    if not model.trained:
        raise UntrainedModelError("step generator has not been trained")
    max_len = model.config.max_len if max_len is None else min(max_len, model.config.max_len)
    v = model.vocab
    never = [v.pad, v.bos, v.unk]
    out: list[int] = []
    finished = False
    with no_grad():
        enc = _encode(model, input_ids)
        while len(out) < max_len:
            dist = _last_row(_decode(model, enc, [v.bos, *out]))
            if blacklist is not None:
                dist = apply_blacklist(dist, out, blacklist)
            p = dist.p_final.copy()
            p[never] = -1.0
            tok = int(p.argmax())
            if tok == v.eos:
                finished = True
                break
            out.append(tok)
    return GeneratedSteps(out, split_steps(out, v), truncated=not finished and max_len > 0)


# ---------------------------------------------------------------------------
# training


def recipe_example(recipe: Recipe, ingredients: IngredientVocab, words: WordVocab) -> tuple[list[int], list[int]]:
    names = [ingredients.name(i) for i in recipe.ingredient_ids]
    return encode_ingredients(names, words), encode_steps(recipe.steps_text, words)


def evaluate_lm(model: StepGenerator, examples: Sequence[tuple[list[int], list[int]]]) -> tuple[float, float]:
    """Token-weighted mean loss and teacher-forced next-token accuracy."""
    total_loss, hits, n = 0.0, 0, 0
    with no_grad():
        for inp, tgt in examples:
            loss, _, h = _lm_loss_and_hits(model, inp, tgt)
            total_loss += float(loss.data) * len(tgt)
            hits += h
            n += len(tgt)
    return total_loss / n, hits / n


def train_generator(
    examples: Sequence[tuple[list[int], list[int]]],
    vocab: WordVocab,
    config: GeneratorConfig | None = None,
    seed: int = 0,
    val_examples: Sequence[tuple[list[int], list[int]]] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> tuple[StepGenerator, list[dict]]:
    """Train on (input ids, target ids) examples with LAMB.

    Early stopping watches validation loss when ``val_examples`` is given,
    else training loss; the best parameters are restored. Training also
    stops once training accuracy reaches ``config.target_accuracy``.
    """
    config = config or GeneratorConfig()
    usable = [(i, t) for i, t in examples if len(t) <= config.max_len and len(i) <= config.max_input_len]
    if len(usable) < len(examples):
        logger.warning("skipping %d examples longer than the configured limits", len(examples) - len(usable))
    if not usable:
        raise ValueError("no usable training examples")
    model = StepGenerator.create(vocab, config, seed)
    opt = LambState(lr=config.lr)
    shuffle_rng = substream(seed, "shuffle")
    history: list[dict] = []
    best, best_snap, since_best = np.inf, model.store.snapshot(), 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(usable))
        tok_loss, hits, n_tok, clamped = 0.0, 0, 0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            model.store.zero_grad()
            for i in batch:
                inp, tgt = usable[i]
                loss, n_cl, h = _lm_loss_and_hits(model, inp, tgt)
                if not np.isfinite(loss.data):
                    history.append({"epoch": epoch, "loss": float("nan")})
                    model.store.restore(best_snap)
                    raise TrainingDiverged(f"non-finite step-generator loss at epoch {epoch}", history, model)
                (loss * (1.0 / len(batch))).backward()
                tok_loss += float(loss.data) * len(tgt)
                hits += h
                n_tok += len(tgt)
                clamped += n_cl
            lamb_step(model.store, model.store.grads(), opt)
        record = {"epoch": epoch, "loss": tok_loss / n_tok, "accuracy": hits / n_tok}
        if clamped:
            record["clamped"] = clamped
        monitor = record["loss"]
        if val_examples:
            record["val_loss"], record["val_accuracy"] = evaluate_lm(model, val_examples)
            monitor = record["val_loss"]
        history.append(record)
        if on_epoch:
            on_epoch(record)
        if monitor < best:
            best, best_snap, since_best = monitor, model.store.snapshot(), 0
        else:
            since_best += 1
        if since_best >= config.patience:
            break
        if config.target_accuracy is not None and record["accuracy"] >= config.target_accuracy:
            best_snap = model.store.snapshot()
            break
    model.store.restore(best_snap)
    model.store.zero_grad()
    model.trained = True
    model._sync_store_config()
    return model, history
