"""Vectorized arithmetic expressions in ``t`` for scenario files.

Only numbers, ``t``, ``pi``, ``e``, the operators ``+ - * / **``, list
literals and a fixed set of numpy functions are accepted; anything else is
rejected at compile time, so scenario files cannot run arbitrary code.
"""
from __future__ import annotations

import ast
from typing import Callable

import numpy as np

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "log1p": np.log1p,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "where": np.where,
    "heaviside": lambda x: np.heaviside(x, 1.0),
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_CMPOPS = {
    ast.Lt: np.less,
    ast.LtE: np.less_equal,
    ast.Gt: np.greater,
    ast.GtE: np.greater_equal,
}


class ExpressionError(ValueError):
    pass


def _check(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"unsupported constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id != "t" and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError("only unary + and - are allowed")
        _check(node.operand)
    elif isinstance(node, ast.Compare):
        if len(node.ops) != 1 or type(node.ops[0]) not in _CMPOPS:
            raise ExpressionError("only single <, <=, >, >= comparisons are allowed")
        _check(node.left)
        _check(node.comparators[0])
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise ExpressionError("only calls to " + ", ".join(sorted(FUNCTIONS)) + " are allowed")
        for arg in node.args:
            _check(arg)
    elif isinstance(node, (ast.List, ast.Tuple)):
        for elt in node.elts:
            _check(elt)
    else:
        raise ExpressionError(f"unsupported syntax {type(node).__name__}")


def _eval(node: ast.AST, t: np.ndarray):
    if isinstance(node, ast.Constant):
        return np.full(t.shape, float(node.value))
    if isinstance(node, ast.Name):
        return t if node.id == "t" else np.full(t.shape, CONSTANTS[node.id])
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, t), _eval(node.right, t))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, t)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Compare):
        return _CMPOPS[type(node.ops[0])](_eval(node.left, t), _eval(node.comparators[0], t)).astype(float)
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](*[_eval(a, t) for a in node.args])
    # List literal: stack elements on trailing axes.
    return np.stack([_eval(e, t) for e in node.elts], axis=-1)


def compile_expression(source: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``source`` into ``f(ts)`` returning ``ts.shape + element shape``.

    ``[[a, b], [c, d]]`` yields shape ``(m, 2, 2)``; a scalar yields ``(m,)``.
    """
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
    _check(tree)
    body = tree.body

    def f(ts):
        with np.errstate(all="ignore"):
            return np.asarray(_eval(body, np.asarray(ts, dtype=float)), dtype=float)

    return f
