"""`plot <recipe.json>`: render one figure from simulator outputs.

Exit codes: 0 rendered, 2 bad recipe or schema mismatch, 3 missing inputs
or series.
"""

from __future__ import annotations

import argparse
import sys

from .recipes import FigureRecipe, RecipeError, shipped_recipe
from .render import MissingSeries, SchemaMismatch, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument(
        "recipe",
        help="path to a recipe JSON, or a shipped figure id like fig9",
    )
    parser.add_argument(
        "--root",
        default=".",
        help="directory the recipe's input paths are relative to",
    )
    parser.add_argument("--output", help="override the recipe's output path")
    args = parser.parse_args(argv)
    try:
        if args.recipe.endswith(".json"):
            recipe = FigureRecipe.from_file(args.recipe)
        else:
            recipe = FigureRecipe.from_file(shipped_recipe(args.recipe))
        target = render(recipe, root=args.root, output=args.output)
    except (RecipeError, SchemaMismatch) as exc:
        print(f"recipe error: {exc}", file=sys.stderr)
        return 2
    except MissingSeries as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return 3
    print(target)
    return 0


if __name__ == "__main__":
    sys.exit(main())
