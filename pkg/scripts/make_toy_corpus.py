"""Write the bundled toy corpus (about 30 recipes, including a plain Chicken Dijon)."""
from __future__ import annotations

import argparse
from pathlib import Path

from recipe_edit.corpus import RawRecipe, save_corpus
from recipe_edit.synthetic import SyntheticSpec, generate_corpus

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "recipe_edit" / "data" / "toy_corpus.jsonl"

CHICKEN_DIJON = RawRecipe(
    "chicken-dijon",
    "Chicken Dijon",
    (
        "1 pound chicken breast, skinless and boneless",
        "1 tablespoon Knoxville Farms butter",
        "1/2 cup light cream",
        "1/4 cup white wine",
        "2 tablespoons dijon mustard",
        "1 onion, chopped",
        "1 teaspoon salt",
    ),
    (
        "Season the chicken breast with salt.",
        "Melt butter in a skillet and brown the chicken breast.",
        "Saute onion and add white wine.",
        "Stir in light cream and dijon mustard and simmer.",
        "Pour the sauce over the chicken breast and serve.",
    ),
    (),
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bases", type=int, default=8)
    args = ap.parse_args()
    dishes = ("chicken dijon", "chocolate chip cookies", "chicken alfredo", "beef chili", "pancakes",
              "mashed potatoes", "spaghetti bolognese")
    recipes = [CHICKEN_DIJON] + generate_corpus(SyntheticSpec(n_bases=args.bases, dishes=dishes), seed=args.seed)
    save_corpus(args.out, recipes)
    print(f"wrote {len(recipes)} recipes to {args.out}")


if __name__ == "__main__":
    main()
