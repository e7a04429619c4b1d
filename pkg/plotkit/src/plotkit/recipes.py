"""Figure recipes: what to read and how to lay it out.

A recipe names the figure, the input run/sweep directories produced by the
simulator CLI, the plot kind, axis labels/scales, and the number of series
the figure must contain.  Rendering refuses inputs whose manifest schema
version differs from the recipe's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

KINDS = (
    "timeseries_overlay",
    "sweep_curves",
    "sweep_xy",
    "sweep_surface",
    "sweep_heatmap",
    "combination_overlay",
)


class RecipeError(ValueError):
    pass


@dataclass
class FigureRecipe:
    figure_id: str
    kind: str
    inputs: list[dict]
    output: str
    x: str = ""
    y: list[str] = field(default_factory=list)
    group_by: str = ""
    series_filter: dict = field(default_factory=dict)
    expected_series: int = 1
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    yscale: str = "linear"
    group_labels: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @staticmethod
    def from_dict(raw: dict) -> "FigureRecipe":
        raw = dict(raw)
        if isinstance(raw.get("y"), str):
            raw["y"] = [raw["y"]]
        known = set(FigureRecipe.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise RecipeError(f"unknown recipe fields: {sorted(unknown)}")
        recipe = FigureRecipe(**raw)
        if recipe.kind not in KINDS:
            raise RecipeError(f"unknown plot kind {recipe.kind!r}")
        if not recipe.inputs:
            raise RecipeError("recipe lists no inputs")
        return recipe

    @staticmethod
    def from_file(path: str | Path) -> "FigureRecipe":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RecipeError(f"cannot read recipe {path}: {exc}")
        return FigureRecipe.from_dict(raw)


def shipped_recipe_dir() -> Path:
    return Path(__file__).resolve().parent / "recipes"


def shipped_recipe(figure_id: str) -> Path:
    path = shipped_recipe_dir() / f"{figure_id}.json"
    if not path.exists():
        raise RecipeError(f"no shipped recipe for {figure_id}")
    return path
