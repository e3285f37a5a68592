"""Parsing of preset strings such as ``wedge(67.5, 180)`` or ``stretched(0.8, Re)``."""

from __future__ import annotations

import ast


class SpecSyntaxError(ValueError):
    pass


def _literal(node):
    if isinstance(node, ast.Name):
        # Bare identifiers (Re, Im) are taken as strings.
        return node.id
    try:
        return ast.literal_eval(node)
    except ValueError as exc:
        raise SpecSyntaxError(f"unsupported argument {ast.unparse(node)!r}") from exc


def parse_call(text: str) -> tuple[str, list, dict]:
    """Split ``name(a, b, key=c)`` into its name and literal arguments."""
    text = text.strip()
    try:
        tree = ast.parse(text, mode="eval").body
    except SyntaxError as exc:
        raise SpecSyntaxError(f"cannot parse {text!r}: {exc.msg}") from exc
    if isinstance(tree, ast.Name):
        return tree.id, [], {}
    if not isinstance(tree, ast.Call) or not isinstance(tree.func, ast.Name):
        raise SpecSyntaxError(f"expected name(args...), got {text!r}")
    args = [_literal(a) for a in tree.args]
    kwargs = {kw.arg: _literal(kw.value) for kw in tree.keywords}
    return tree.func.id, args, kwargs


def split_pipeline(text: str) -> list[str]:
    """Split ``a(..) | b(..)`` on top-level pipes."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "|" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]
