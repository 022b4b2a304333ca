from __future__ import annotations

import pytest
from hypothesis import settings

from recipe_edit.corpus import RecipePair, build_vocab, resolve_corpus
from recipe_edit.rules import load_constraint_specs
from recipe_edit.synthetic import SyntheticSpec, generate_corpus, planted_rule_corpus

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def synthetic_raw():
    return generate_corpus(SyntheticSpec(n_bases=40), seed=1)


@pytest.fixture(scope="session")
def synthetic_vocab(synthetic_raw):
    return build_vocab(synthetic_raw, min_recipe_count=1)


@pytest.fixture(scope="session")
def synthetic_recipes(synthetic_raw, synthetic_vocab):
    return resolve_corpus(synthetic_raw, synthetic_vocab)


@pytest.fixture(scope="session")
def synthetic_specs(synthetic_vocab):
    return load_constraint_specs(synthetic_vocab)


@pytest.fixture(scope="session")
def planted():
    """(recipes by id, vocab, pairs) for the butter -> margarine corpus."""
    raw = planted_rule_corpus(n_pairs=50, seed=0)
    vocab = build_vocab(raw, min_recipe_count=1)
    recipes = {r.recipe_id: r for r in resolve_corpus(raw, vocab)}
    pairs = [RecipePair(f"b{k:03d}", f"t{k:03d}", "dairy-free") for k in range(50)]
    return recipes, vocab, pairs


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
