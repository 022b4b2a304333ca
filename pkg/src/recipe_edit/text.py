"""Shared word tokenizer.

Lowercased; words may contain inner hyphens/apostrophes ("all-purpose",
"don't"); every other non-space character is its own token. Both the
ingredient editor and the step generator use this, so ingredient names
tokenize identically everywhere.
"""
from __future__ import annotations

import re
from typing import Iterable

_TOKEN_RE = re.compile(r"[^\W_]+(?:['\-][^\W_]+)*|[^\s\w]|_")
_ATTACH_LEFT = {",", ".", ";", ":", "!", "?", ")"}


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def tokenize_spans(text: str) -> list[tuple[str, int, int]]:
    """Tokens with their character offsets in ``text``."""
    return [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def detokenize(tokens: Iterable[str]) -> str:
    """Join tokens; retokenizing the result gives the same tokens back."""
    out: list[str] = []
    for tok in tokens:
        if out and tok not in _ATTACH_LEFT and out[-1] != "(":
            out.append(" ")
        out.append(tok)
    return "".join(out)
