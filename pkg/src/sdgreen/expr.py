"""Minimal arithmetic expressions in ``x`` and ``y`` for right-hand sides.

Built on :mod:`ast`; only numbers, ``x``, ``y``, ``pi``, ``e``, the
operators ``+ - * / **`` and a handful of numpy functions are accepted.
"""

from __future__ import annotations

import ast
import math

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "log": np.log,
             "tanh": np.tanh, "abs": np.abs}
CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.true_divide, ast.Pow: np.power}
_UNARY = {ast.UAdd: np.positive, ast.USub: np.negative}


class ExpressionError(ValueError):
    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} at position {position}: {source!r}")
        self.position = position


class Expression:
    """Parsed expression; call with arrays ``x, y``."""

    def __init__(self, source: str):
        self.source = source
        self._lead = len(source) - len(source.lstrip())
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"syntax error ({exc.msg})", source, self._lead + (exc.offset or 1) - 1) from None
        self._check(tree.body)
        self.tree = tree

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
                raise ExpressionError("unknown function", self.source, self._lead + node.col_offset)
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError("functions take exactly one argument", self.source, self._lead + node.col_offset)
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in ("x", "y") and node.id not in CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r}", self.source, self._lead + node.col_offset)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        else:
            raise ExpressionError("unsupported syntax", self.source, self._lead + getattr(node, "col_offset", 0))

    def _eval(self, node, x, y):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, x, y), self._eval(node.right, x, y))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, x, y))
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](self._eval(node.args[0], x, y))
        if isinstance(node, ast.Name):
            return {"x": x, "y": y}.get(node.id, CONSTANTS.get(node.id))
        return float(node.value)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self._eval(self.tree.body, x, y), np.broadcast(x, y).shape)

    def unparse(self) -> str:
        return ast.unparse(self.tree)

    def __repr__(self):
        return f"Expression({self.unparse()!r})"


def parse(source: str) -> Expression:
    return Expression(source)
