"""No-computation lint for the rendering code paths.

The renderer may select, group, and relabel data and apply axis
transforms, but must never derive new numbers: every value drawn has to
exist in an input CSV.  This lint walks the AST of `plotkit.render` and
rejects arithmetic constructs and numeric library calls.
"""

from __future__ import annotations

import ast
from pathlib import Path

# Call names that compute rather than select/arrange.
FORBIDDEN_CALLS = {
    "sum", "abs", "round", "pow", "divmod",
    "mean", "std", "var", "cumsum", "diff", "gradient", "interp",
    "add", "subtract", "multiply", "divide", "log", "exp", "sqrt",
}

ALLOWED_UNARY_TARGETS = (ast.Constant,)


class LintViolation(Exception):
    pass


def _call_name(node: ast.Call) -> str:
    fn = node.func
    if isinstance(fn, ast.Attribute):
        return fn.attr
    if isinstance(fn, ast.Name):
        return fn.id
    return ""


def lint_source(source: str, filename: str = "<render>") -> list[str]:
    """Return a list of violations found in rendering source code."""
    tree = ast.parse(source, filename=filename)
    problems = []
    for node in ast.walk(tree):
        if isinstance(node, ast.BinOp):
            problems.append(
                f"{filename}:{node.lineno}: arithmetic operator in render path"
            )
        elif isinstance(node, ast.AugAssign):
            problems.append(f"{filename}:{node.lineno}: augmented assignment")
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            if not isinstance(node.operand, ALLOWED_UNARY_TARGETS):
                problems.append(
                    f"{filename}:{node.lineno}: unary arithmetic on data"
                )
        elif isinstance(node, ast.Call):
            name = _call_name(node)
            if name in FORBIDDEN_CALLS:
                problems.append(
                    f"{filename}:{node.lineno}: computational call {name!r}"
                )
    return problems


def lint_render_module() -> list[str]:
    path = Path(__file__).resolve().parent / "render.py"
    return lint_source(path.read_text(encoding="utf-8"), str(path))


def assert_clean() -> None:
    problems = lint_render_module()
    if problems:
        raise LintViolation("; ".join(problems))
