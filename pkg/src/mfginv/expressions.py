"""
Closed-form expression grammar for cost definitions and test oracles.

The grammar is deliberately small: sums of products of sin/cos/exp and
polynomial atoms in the spatial variables x1..xn and the time variable t,
with numeric constants and pi.  Parsing is delegated to sympy and the
resulting tree is validated against a whitelist, so anything outside the
grammar is rejected with the offending construct named.  Derivatives are
exact (sympy), which is what the counterexample checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .grids import ScalarField, SpatialGrid, ValidationError

__all__ = ["GridExpression", "parse_expression"]

_ALLOWED_FUNCTIONS = (sp.sin, sp.cos, sp.exp)
_MAX_DIM = 3

_X = sp.symbols("x1 x2 x3")
_T = sp.Symbol("t")
_LOCALS = {
    "x1": _X[0],
    "x2": _X[1],
    "x3": _X[2],
    "t": _T,
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "pi": sp.pi,
}


def _validate_tree(expr: sp.Expr, allowed_symbols: set[sp.Symbol], source: str):
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Function):
            if not isinstance(node, _ALLOWED_FUNCTIONS):
                raise ValidationError(
                    f"function {node.func.__name__!r} is outside the grammar "
                    f"(allowed: sin, cos, exp) in {source!r}"
                )
        elif isinstance(node, sp.Symbol):
            if node not in allowed_symbols:
                raise ValidationError(
                    f"symbol {node.name!r} is not available here in {source!r}"
                )
        elif isinstance(node, sp.Pow):
            if not (node.exp.is_Integer or node.exp.is_Rational):
                raise ValidationError(
                    f"exponent {node.exp} is outside the grammar in {source!r}"
                )
        elif not isinstance(node, (sp.Add, sp.Mul, sp.Number)) and node is not sp.pi:
            if not node.is_Atom:
                raise ValidationError(
                    f"construct {type(node).__name__!r} is outside the grammar "
                    f"in {source!r}"
                )


@dataclass(frozen=True)
class GridExpression:
    """A validated grammar expression, evaluable on torus grids."""

    source: str
    expr: sp.Expr
    dim: int
    time_dependent: bool

    def diff(self, var: str) -> "GridExpression":
        symbol = _LOCALS[var]
        d = sp.diff(self.expr, symbol)
        return GridExpression(f"d/d{var}({self.source})", d, self.dim, self.time_dependent)

    def _callable(self):
        args = list(_X[: self.dim]) + [_T]
        return sp.lambdify(args, self.expr, modules="numpy")

    def evaluate(self, grid: SpatialGrid, t: float = 0.0) -> ScalarField:
        """Sample on a torus grid at one time value."""
        if grid.dim != self.dim:
            raise ValidationError(
                f"expression over {self.dim} spatial variables evaluated on a "
                f"{grid.dim}-dimensional grid"
            )
        mesh = grid.meshgrid()
        vals = self._callable()(*mesh, t)
        vals = np.broadcast_to(np.asarray(vals, dtype=np.float64), grid.shape).copy()
        return ScalarField(grid, vals)

    def evaluate_window(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Sample on arbitrary (broadcastable) x/t arrays; 1-d in space only."""
        if self.dim != 1:
            raise ValidationError("window evaluation supports one spatial variable")
        vals = self._callable()(x, t)
        return np.broadcast_to(
            np.asarray(vals, dtype=np.float64), np.broadcast_shapes(np.shape(x), np.shape(t))
        ).copy()


def parse_expression(text: str, dim: int, allow_time: bool = True) -> GridExpression:
    """Parse and validate a grammar string over x1..x`dim` (and optionally t)."""
    if dim < 1 or dim > _MAX_DIM:
        raise ValidationError(f"dimension {dim} outside supported range 1..{_MAX_DIM}")
    try:
        expr = sp.parse_expr(text, local_dict=_LOCALS, evaluate=True)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ValidationError(f"cannot parse expression {text!r}: {exc}") from exc
    allowed = set(_X[:dim])
    if allow_time:
        allowed.add(_T)
    _validate_tree(expr, allowed, text)
    return GridExpression(text, expr, dim, _T in expr.free_symbols)
