"""A small, safe expression language for coefficients and loads.

Expressions are ordinary arithmetic over the names ``x``, ``y``, ``s``
(coordinates and boundary arc length), ``z`` (depth in half-space profiles),
``q`` and the constants ``pi`` and ``e``, with the functions ``cos sin tan arctan exp log sqrt abs``.
Evaluation is vectorized through numpy.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ConfigError

FUNCTIONS: dict[str, Callable] = {
    "cos": np.cos,
    "sin": np.sin,
    "tan": np.tan,
    "arctan": np.arctan,
    "atan": np.arctan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("x", "y", "s", "z", "q")

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_UNARY = {ast.UAdd: np.positive, ast.USub: np.negative}


class Expression:
    """A compiled expression; call with keyword arrays ``x, y, s, z`` and scalar ``q``."""

    def __init__(self, source: str, q: float = 0.0):
        self.source = str(source)
        self.q = float(q)
        try:
            tree = ast.parse(self.source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"unsupported literal in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in VARIABLES and node.id not in CONSTANTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ConfigError(f"unsupported operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ConfigError(f"unknown function in {self.source!r}")
            if node.keywords or len(node.args) != 1:
                raise ConfigError(f"functions take exactly one argument: {self.source!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def bind(self, q: float) -> "Expression":
        """Copy with a different default for the variable ``q``."""
        return Expression(self.source, q=q)

    def __call__(self, x=0.0, y=0.0, s=0.0, q=None, z=0.0):
        q = self.q if q is None else q
        env = {"x": np.asarray(x, dtype=float), "y": np.asarray(y, dtype=float),
               "s": np.asarray(s, dtype=float), "z": np.asarray(z, dtype=float), "q": float(q)}
        shape = np.broadcast(env["x"], env["y"], env["s"], env["z"]).shape
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source) -> Expression:
    if isinstance(source, Expression):
        return source
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        return Expression(repr(float(source)))
    if isinstance(source, str):
        return Expression(source)
    raise ConfigError(f"expected an expression string or number, got {type(source).__name__}")
