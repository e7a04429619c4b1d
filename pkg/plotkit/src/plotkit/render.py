"""Rendering paths: selection, grouping, and axis transforms only.

Every number drawn here is read verbatim from an input CSV; this module
performs no arithmetic on data (enforced by the no-computation lint in
`plotkit.lint`).  Figures are written as deterministic SVG by default.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import matplotlib
import pandas as pd

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dotflux-plotkit"
import matplotlib.pyplot as plt

from .recipes import FigureRecipe, RecipeError

GROUP_COLORS = {"I": "tab:blue", "II": "tab:orange", "III": "tab:green"}


class SchemaMismatch(RuntimeError):
    pass


class MissingSeries(RuntimeError):
    pass


def check_schema(recipe: FigureRecipe, input_dir: Path) -> None:
    manifest = input_dir.joinpath("manifest.json")
    if not manifest.exists():
        raise MissingSeries(f"no manifest in {input_dir}")
    version = json.loads(manifest.read_text()).get("schema_version")
    if version != recipe.schema_version:
        raise SchemaMismatch(
            f"{input_dir}: schema version {version} != recipe {recipe.schema_version}"
        )


def load_csv(recipe: FigureRecipe, spec: dict, name: str, root: Path) -> pd.DataFrame:
    input_dir = root.joinpath(spec["path"])
    check_schema(recipe, input_dir)
    path = input_dir.joinpath(name)
    if not path.exists():
        raise MissingSeries(f"missing {path}")
    frame = pd.read_csv(path)
    if frame.empty:
        raise MissingSeries(f"empty CSV {path}")
    return frame


def apply_filter(frame: pd.DataFrame, series_filter: dict) -> pd.DataFrame:
    for key, val in series_filter.items():
        frame = frame[frame[key] == val]
    return frame


def finish(fig, recipe: FigureRecipe, ax=None) -> None:
    if ax is not None:
        if recipe.title:
            ax.set_title(recipe.title)
        if recipe.xlabel:
            ax.set_xlabel(recipe.xlabel)
        if recipe.ylabel:
            ax.set_ylabel(recipe.ylabel)
        if recipe.yscale != "linear":
            ax.set_yscale(recipe.yscale)
        ax.legend(loc="best", fontsize=8)


def count_check(recipe: FigureRecipe, found: int, names: list) -> None:
    if found < recipe.expected_series:
        raise MissingSeries(
            f"{recipe.figure_id}: found {found} series, expected "
            f"{recipe.expected_series}; present: {names}"
        )


def render_timeseries_overlay(recipe: FigureRecipe, root: Path, fig):
    ax = fig.add_subplot(111)
    drawn = []
    for spec in recipe.inputs:
        frame = load_csv(recipe, spec, "timeseries.csv", root)
        for column in recipe.y:
            if column not in frame.columns:
                raise MissingSeries(f"{spec['path']}: no column {column}")
            label = spec.get("label", spec["path"])
            ax.plot(frame[recipe.x], frame[column], label=f"{label} {column}", lw=0.9)
            drawn.append(label)
    count_check(recipe, len(drawn), drawn)
    finish(fig, recipe, ax)


def render_sweep_curves(recipe: FigureRecipe, root: Path, fig):
    ax = fig.add_subplot(111)
    drawn = []
    for spec in recipe.inputs:
        frame = apply_filter(
            load_csv(recipe, spec, "sweep.csv", root), recipe.series_filter
        )
        for key, group in frame.groupby(recipe.group_by, sort=True):
            label = recipe.group_labels.get(str(key), f"{recipe.group_by}={key}")
            prefix = spec.get("label", "")
            color = GROUP_COLORS.get(label.split()[0]) if recipe.group_labels else None
            ordered = group.sort_values(recipe.x)
            ax.plot(
                ordered[recipe.x],
                ordered[recipe.y[0]],
                marker="o",
                ms=3,
                lw=1.0,
                color=color,
                label=f"{prefix} {label}".strip(),
            )
            drawn.append(f"{prefix}{key}")
    count_check(recipe, len(drawn), drawn)
    finish(fig, recipe, ax)


def render_sweep_xy(recipe: FigureRecipe, root: Path, fig):
    # Inputs carrying their own x column get one panel each (different
    # abscissas, as in the stationary-point insensitivity panels).
    paneled = any("x" in spec for spec in recipe.inputs)
    drawn = []
    ax = None if paneled else fig.add_subplot(111)
    for pos, spec in enumerate(recipe.inputs, start=1):
        frame = apply_filter(
            load_csv(recipe, spec, "sweep.csv", root), recipe.series_filter
        )
        x_col = spec.get("x", recipe.x)
        ordered = frame.sort_values(x_col)
        target = fig.add_subplot(1, len(recipe.inputs), pos) if paneled else ax
        target.plot(
            ordered[x_col],
            ordered[recipe.y[0]],
            marker="s",
            ms=4,
            label=spec.get("label", spec["path"]),
        )
        if paneled:
            target.set_xlabel(spec.get("xlabel", x_col))
            target.set_ylabel(recipe.ylabel)
            target.legend(loc="best", fontsize=8)
        drawn.append(spec["path"])
    count_check(recipe, len(drawn), drawn)
    if not paneled:
        finish(fig, recipe, ax)
    elif recipe.title:
        fig.suptitle(recipe.title)


def render_sweep_surface(recipe: FigureRecipe, root: Path, fig):
    from mpl_toolkits.mplot3d import Axes3D  # noqa: F401

    spec = recipe.inputs[0]
    frame = apply_filter(
        load_csv(recipe, spec, "sweep.csv", root), recipe.series_filter
    )
    axis_x, axis_y = recipe.x, recipe.group_by
    ax = fig.add_subplot(111, projection="3d")
    ax.plot_trisurf(
        frame[axis_x], frame[axis_y], frame[recipe.y[0]], cmap="viridis", lw=0.2
    )
    count_check(recipe, len(frame[axis_x].unique()), sorted(frame[axis_x].unique()))
    if recipe.title:
        ax.set_title(recipe.title)
    ax.set_xlabel(recipe.xlabel)
    ax.set_ylabel(axis_y)
    ax.set_zlabel(recipe.ylabel)


def render_sweep_heatmap(recipe: FigureRecipe, root: Path, fig):
    spec = recipe.inputs[0]
    frame = apply_filter(
        load_csv(recipe, spec, "sweep.csv", root), recipe.series_filter
    )
    table = frame.pivot_table(
        index=recipe.group_by, columns=recipe.x, values=recipe.y[0], sort=True
    )
    ax = fig.add_subplot(111)
    mesh = ax.pcolormesh(
        table.columns, table.index, table, shading="nearest", cmap="viridis"
    )
    fig.colorbar(mesh, ax=ax, label=recipe.ylabel)
    count_check(recipe, len(table.index), list(table.index))
    if recipe.title:
        ax.set_title(recipe.title)
    ax.set_xlabel(recipe.xlabel)
    ax.set_ylabel(recipe.group_by)


def render_combination_overlay(recipe: FigureRecipe, root: Path, fig):
    """Overlay the precomputed combination columns from combination.csv."""
    ax = fig.add_subplot(111)
    spec = recipe.inputs[0]
    frame = load_csv(recipe, spec, "combination.csv", root)
    for column in recipe.y:
        if column not in frame.columns:
            raise MissingSeries(f"{spec['path']}: no column {column}")
    ordered = frame.sort_values(recipe.x)
    ax.plot(
        ordered[recipe.x], ordered[recipe.y[0]], "o-", label=recipe.y[0], ms=4
    )
    ax.plot(
        ordered[recipe.x], ordered[recipe.y[1]], "s--", label=recipe.y[1], ms=4
    )
    count_check(recipe, len(recipe.y), recipe.y)
    finish(fig, recipe, ax)


RENDERERS = {
    "timeseries_overlay": render_timeseries_overlay,
    "sweep_curves": render_sweep_curves,
    "sweep_xy": render_sweep_xy,
    "sweep_surface": render_sweep_surface,
    "sweep_heatmap": render_sweep_heatmap,
    "combination_overlay": render_combination_overlay,
}


def render(
    recipe: FigureRecipe, root: Union[str, Path] = ".", output: Optional[str] = None
) -> Path:
    """Render one recipe to its output file; returns the written path."""
    root = Path(root)
    fig = plt.figure(figsize=(6.0, 4.2), dpi=100)
    try:
        RENDERERS[recipe.kind](recipe, root, fig)
        target = root.joinpath(output or recipe.output)
        target.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(target, format=target.suffix.lstrip("."), metadata={"Date": None})
    finally:
        plt.close(fig)
    return target
