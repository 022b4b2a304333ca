"""Template-generated recipe corpora with planted substitutions.

Used for fixtures, smoke tests and the scaled-down experiments. Each base
dish can spawn constraint variants whose ingredients follow a fixed
substitution map, so the right edit is known exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import RawRecipe

DISHES: dict[str, tuple[list[str], list[str]]] = {
    "chocolate chip cookies": (
        ["butter", "sugar", "brown sugar", "egg", "all-purpose flour", "baking soda", "salt", "chocolate chips"],
        [
            "preheat the oven to 350 degrees.",
            "cream {butter}, {sugar} and {brown sugar} until fluffy.",
            "beat in {egg}.",
            "stir in {all-purpose flour}, {baking soda} and {salt}.",
            "fold in {chocolate chips}.",
            "bake for 10 minutes and cool on a rack.",
        ],
    ),
    "chicken alfredo": (
        ["chicken breast", "butter", "heavy cream", "parmesan cheese", "garlic", "pasta", "salt", "black pepper"],
        [
            "boil {pasta} until tender and drain.",
            "season {chicken breast} with {salt} and {black pepper} and fry until golden.",
            "melt {butter} and saute {garlic}.",
            "whisk in {heavy cream} and {parmesan cheese} and simmer.",
            "toss {pasta} and {chicken breast} with the sauce and serve.",
        ],
    ),
    "beef chili": (
        ["ground beef", "onion", "garlic", "kidney beans", "tomato", "chili powder", "cumin", "beef stock"],
        [
            "brown {ground beef} with {onion} and {garlic}.",
            "stir in {chili powder} and {cumin}.",
            "add {tomato}, {kidney beans} and {beef stock}.",
            "simmer for 1 hour and serve hot.",
        ],
    ),
    "pancakes": (
        ["all-purpose flour", "milk", "egg", "sugar", "baking powder", "butter", "salt"],
        [
            "sift {all-purpose flour}, {baking powder}, {sugar} and {salt}.",
            "whisk {milk} and {egg} and pour into the dry mix.",
            "melt {butter} in a pan.",
            "pour batter into the pan and cook until golden.",
        ],
    ),
    "mashed potatoes": (
        ["potato", "butter", "milk", "sour cream", "salt", "black pepper"],
        [
            "peel and cube {potato}.",
            "boil {potato} until soft and drain.",
            "mash {potato} with {butter}, {milk} and {sour cream}.",
            "season with {salt} and {black pepper}.",
        ],
    ),
    "chicken stir fry": (
        ["chicken breast", "soy sauce", "garlic", "ginger", "broccoli", "carrot", "rice", "vegetable oil"],
        [
            "cook {rice} and keep warm.",
            "heat {vegetable oil} in a wok.",
            "fry {chicken breast} until browned.",
            "add {garlic}, {ginger}, {broccoli} and {carrot} and stir.",
            "pour in {soy sauce} and toss.",
            "serve over {rice}.",
        ],
    ),
    "mac and cheese": (
        ["pasta", "cheddar cheese", "milk", "butter", "all-purpose flour", "salt"],
        [
            "boil {pasta} and drain.",
            "melt {butter} and whisk in {all-purpose flour}.",
            "stir in {milk} and simmer until thick.",
            "add {cheddar cheese} and {salt} and stir until melted.",
            "fold in {pasta} and bake for 20 minutes.",
        ],
    ),
    "chicken dijon": (
        ["chicken breast", "butter", "light cream", "white wine", "dijon mustard", "onion", "salt"],
        [
            "season {chicken breast} with {salt}.",
            "melt {butter} and brown {chicken breast}.",
            "saute {onion} and add {white wine}.",
            "stir in {light cream} and {dijon mustard} and simmer.",
            "pour the sauce over {chicken breast} and serve.",
        ],
    ),
    "banana bread": (
        ["banana", "sugar", "butter", "egg", "all-purpose flour", "baking soda", "salt", "walnut"],
        [
            "preheat the oven to 350 degrees and grease a loaf pan.",
            "mash {banana} and mix with {butter} and {sugar}.",
            "beat in {egg}.",
            "stir in {all-purpose flour}, {baking soda} and {salt}.",
            "fold in {walnut} and bake for 1 hour.",
        ],
    ),
    "spaghetti bolognese": (
        ["spaghetti", "ground beef", "onion", "garlic", "tomato", "olive oil", "parmesan cheese", "basil"],
        [
            "heat {olive oil} and saute {onion} and {garlic}.",
            "brown {ground beef}.",
            "add {tomato} and simmer for 30 minutes.",
            "boil {spaghetti} and drain.",
            "serve the sauce over {spaghetti} and top with {parmesan cheese} and {basil}.",
        ],
    ),
    "squash casserole": (
        ["squash", "onion", "egg", "sour cream", "cream of chicken soup", "herb stuffing mix", "margarine"],
        [
            "combine {cream of chicken soup}, {sour cream} and {egg}.",
            "fold in {squash} and {onion}.",
            "melt {margarine} and pour over {herb stuffing mix}.",
            "layer half of {herb stuffing mix} in a dish and pour in the squash mixture.",
            "bake for 30 minutes.",
        ],
    ),
    "vegetable soup": (
        ["carrot", "celery", "onion", "potato", "tomato", "chicken stock", "salt", "thyme"],
        [
            "chop {carrot}, {celery}, {onion} and {potato}.",
            "simmer the vegetables in {chicken stock}.",
            "add {tomato}, {thyme} and {salt}.",
            "cook for 40 minutes and serve.",
        ],
    ),
}

SUBSTITUTIONS: dict[str, dict[str, str]] = {
    "dairy-free": {
        "butter": "margarine",
        "milk": "soy milk",
        "heavy cream": "coconut milk",
        "light cream": "coconut milk",
        "sour cream": "cashew cream",
        "parmesan cheese": "nutritional yeast",
        "cheddar cheese": "nutritional yeast",
        "cream of chicken soup": "vegetable stock",
    },
    "gluten-free": {
        "all-purpose flour": "rice flour",
        "soy sauce": "tamari",
        "spaghetti": "rice noodles",
        "pasta": "rice noodles",
        "herb stuffing mix": "cooked rice",
        "cream of chicken soup": "chicken stock",
    },
    "vegetarian": {
        "chicken breast": "tofu",
        "ground beef": "lentils",
        "chicken stock": "vegetable stock",
        "beef stock": "vegetable stock",
        "cream of chicken soup": "vegetable stock",
    },
    "low-fat": {"heavy cream": "milk", "sour cream": "yogurt", "butter": "olive oil", "light cream": "milk"},
    "low-calorie": {"sugar": "stevia", "heavy cream": "milk", "light cream": "milk", "butter": "olive oil"},
    "low-sugar": {"sugar": "stevia", "brown sugar": "stevia"},
    "low-carb": {"pasta": "zucchini", "spaghetti": "zucchini", "rice": "cauliflower", "potato": "cauliflower"},
}

TARGET_PREFIX = {
    "dairy-free": "dairy-free",
    "gluten-free": "gluten-free",
    "vegetarian": "vegetarian",
    "low-fat": "skinny",
    "low-calorie": "light",
    "low-sugar": "sugar-free",
    "low-carb": "low-carb",
}

NAME_WORDS = (
    "texas kansas maine vermont boston memphis denver austin dallas portland seattle chicago "
    "savannah phoenix tulsa omaha napa sonoma tahoe aspen dakota bayou harbor prairie canyon "
    "meadow orchard valley summit cottage farmhouse riverside lakeside hillside coastal highland "
    "country sunday holiday weeknight"
).split()

EXTRAS = ["cinnamon", "nutmeg", "paprika", "oregano", "parsley", "lemon", "vanilla", "honey"]

RARE_INGREDIENTS = (
    "kumquat yuzu sumac tamarind lychee rambutan jicama kohlrabi celeriac fennel radicchio endive "
    "sorrel lovage chervil tarragon marjoram borage salsify parsnip rutabaga taro cassava plantain "
    "persimmon quince loquat guava papaya starfruit feijoa tamarillo pomelo bergamot galangal "
    "lemongrass turmeric fenugreek nigella epazote shiso mitsuba daikon burdock okra chayote "
    "tomatillo nopales huckleberry gooseberry elderberry mulberry cloudberry lingonberry sunchoke "
    "romanesco samphire purslane watercress arugula"
).split()

_QUANTITIES = ["1 cup", "2 cups", "1/2 cup", "1 tablespoon", "2 tablespoons", "1 teaspoon", "1 pound", "3", "2", "1 (8 ounce) package"]
_SLOT_RE = re.compile(r"\{([^}]+)\}")


def render_steps(steps: Sequence[str], mapping: dict[str, str]) -> list[str]:
    return [_SLOT_RE.sub(lambda m: mapping.get(m.group(1), m.group(1)), s) for s in steps]


def _raw_line(name: str, rng: np.random.Generator) -> str:
    return f"{_QUANTITIES[int(rng.integers(len(_QUANTITIES)))]} {name}"


@dataclass
class SyntheticSpec:
    n_bases: int = 24
    constraints: tuple[str, ...] = tuple(TARGET_PREFIX)
    variant_prob: float = 0.6
    extra_prob: float = 0.3
    dishes: tuple[str, ...] = tuple(DISHES)


def generate_corpus(spec: SyntheticSpec | None = None, seed: int = 0) -> list[RawRecipe]:
    """Base recipes plus constraint variants following ``SUBSTITUTIONS``.

    A variant is only emitted when the dish actually changes under the
    constraint's substitution map.
    """
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)
    out: list[RawRecipe] = []
    names_used: set[str] = set()
    for b in range(spec.n_bases):
        dish = spec.dishes[b % len(spec.dishes)]
        ingredients, steps = DISHES[dish]
        ingredients = list(ingredients)
        steps = list(steps)
        for word in rng.permutation(NAME_WORDS):
            name = f"{word} {dish}"
            if name not in names_used:
                break
        names_used.add(name)
        if rng.random() < spec.extra_prob:
            extra = EXTRAS[int(rng.integers(len(EXTRAS)))]
            ingredients.append(extra)
            steps.insert(len(steps) - 1, f"add {{{extra}}}.")
        base_id = f"r{len(out):04d}"
        out.append(
            RawRecipe(base_id, name, tuple(_raw_line(i, rng) for i in ingredients), tuple(render_steps(steps, {})), ())
        )
        for c in spec.constraints:
            sub = {k: v for k, v in SUBSTITUTIONS[c].items() if k in ingredients}
            if not sub or rng.random() >= spec.variant_prob:
                continue
            t_ingr = list(dict.fromkeys(sub.get(i, i) for i in ingredients))
            out.append(
                RawRecipe(
                    f"r{len(out):04d}",
                    f"{TARGET_PREFIX[c]} {name}",
                    tuple(_raw_line(i, rng) for i in t_ingr),
                    tuple(render_steps(steps, sub)),
                    (c,),
                )
            )
    return out


def planted_rule_corpus(n_pairs: int = 50, seed: int = 0, constraint: str = "dairy-free",
                        rule: tuple[str, str] = ("butter", "margarine")) -> list[RawRecipe]:
    """Bases that all contain ``rule[0]``; each has one variant swapping it for ``rule[1]``.

    Nothing else changes between base and target.
    """
    rng = np.random.default_rng(seed)
    src, dst = rule
    dishes = [d for d, (ingr, _) in DISHES.items() if src in ingr]
    out: list[RawRecipe] = []
    combos = [(w, d) for d in dishes for w in NAME_WORDS]
    order = rng.permutation(len(combos))
    if n_pairs > len(combos):
        raise ValueError(f"at most {len(combos)} planted pairs available")
    for k in range(n_pairs):
        word, dish = combos[order[k]]
        ingredients, steps = DISHES[dish]
        ingredients = list(ingredients)
        steps = list(steps)
        if rng.random() < 0.5:
            extra = EXTRAS[int(rng.integers(len(EXTRAS)))]
            ingredients.append(extra)
            steps.insert(len(steps) - 1, f"add {{{extra}}}.")
        name = f"{word} {dish}"
        out.append(RawRecipe(f"b{k:03d}", name, tuple(_raw_line(i, rng) for i in ingredients), tuple(render_steps(steps, {})), ()))
        t_ingr = [dst if i == src else i for i in ingredients]
        out.append(
            RawRecipe(
                f"t{k:03d}",
                f"{TARGET_PREFIX.get(constraint, constraint)} {name}",
                tuple(_raw_line(i, rng) for i in t_ingr),
                tuple(render_steps(steps, {src: dst})),
                (constraint,),
            )
        )
    return out


def rare_ingredient_corpus(n_recipes: int = 40, seed: int = 0) -> list[RawRecipe]:
    """Short recipes, each built around its own rarely seen ingredient."""
    if n_recipes > len(RARE_INGREDIENTS):
        raise ValueError(f"at most {len(RARE_INGREDIENTS)} rare-ingredient recipes")
    rng = np.random.default_rng(seed)
    pool = [RARE_INGREDIENTS[i] for i in rng.permutation(len(RARE_INGREDIENTS))[:n_recipes]]
    templates = [
        ["slice the {x}.", "toss {x} with {olive oil} and {lemon}.", "season with {salt} and serve."],
        ["roast the {x} for 20 minutes.", "drizzle {x} with {olive oil}.", "sprinkle with {salt} and serve."],
        ["peel and chop the {x}.", "simmer {x} with {onion} and {salt}.", "puree until smooth and serve."],
    ]
    shared = {0: ["olive oil", "lemon", "salt"], 1: ["olive oil", "salt"], 2: ["onion", "salt"]}
    out = []
    for k, x in enumerate(pool):
        t = k % len(templates)
        ingredients = [x] + shared[t]
        steps = render_steps([s.replace("{x}", x) for s in templates[t]], {})
        out.append(RawRecipe(f"x{k:03d}", f"{x} dish", tuple(_raw_line(i, rng) for i in ingredients), tuple(steps), ()))
    return out
