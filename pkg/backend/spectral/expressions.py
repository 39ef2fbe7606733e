"""
Small expression grammar for densities, weights and Fourier-side test functions.

Expressions are ordinary arithmetic over one variable (``u`` for frequencies,
``n`` for lattice indices): numbers, ``+ - * /``, ``^`` or ``**`` for powers,
and the functions abs, exp, sqrt, cos, sin, log.  ``pi`` and ``e`` are
predefined and further named parameters may be bound at construction.

Parsing goes through :mod:`ast` and only a whitelist of node types survives
validation, so evaluating the compiled code cannot reach anything but numpy.
"""
import ast
import logging
import math

import numpy as np

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

FUNCTIONS = {
    "abs": np.abs,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "cos": np.cos,
    "sin": np.sin,
    "log": np.log,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_BINARY = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


class Expression:
    """A validated, vectorised real (or complex) function of one variable."""

    def __init__(self, source, variable="u", parameters=None):
        if isinstance(source, (int, float)):
            source = repr(float(source))
        if not isinstance(source, str) or not source.strip():
            raise ConfigError("expression must be a non-empty string", source=source)
        self.source = source.strip()
        self.variable = variable
        self.parameters = {k: float(v) for k, v in (parameters or {}).items()}
        try:
            tree = ast.parse(self.source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}",
                              line=exc.lineno, column=exc.offset, source=self.source) from exc
        self._check(tree.body)
        self._tree = tree
        self._code = compile(tree, "<expression>", "eval")

    def _names(self):
        names = dict(CONSTANTS)
        names.update(self.parameters)
        return names

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
                self._reject(node, "only numeric literals are allowed")
        elif isinstance(node, ast.Name):
            if node.id != self.variable and node.id not in self._names():
                self._reject(node, f"unknown name {node.id!r}")
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                self._reject(node, "unsupported unary operator")
            self._check(node.operand)
        elif isinstance(node, ast.BinOp):
            if not isinstance(node.op, _BINARY):
                self._reject(node, "unsupported operator")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                self._reject(node, "unsupported function")
            if len(node.args) != 1 or node.keywords:
                self._reject(node, f"{node.func.id} takes exactly one argument")
            self._check(node.args[0])
        else:
            self._reject(node, f"unsupported syntax {type(node).__name__}")

    def _reject(self, node, message):
        raise ConfigError(f"{message} in {self.source!r}", line=getattr(node, "lineno", None),
                          column=getattr(node, "col_offset", -1) + 1, source=self.source)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        namespace = self._names()
        namespace.update(FUNCTIONS)
        namespace[self.variable] = x
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            value = eval(self._code, {"__builtins__": {}}, namespace)
        return np.asarray(value) + np.zeros_like(x)

    def __repr__(self):
        return f"Expression({self.source!r}, variable={self.variable!r})"

    def __eq__(self, other):
        return (isinstance(other, Expression) and self.source == other.source
                and self.variable == other.variable and self.parameters == other.parameters)

    def __hash__(self):
        return hash((self.source, self.variable, tuple(sorted(self.parameters.items()))))

    def to_config(self):
        if self.parameters:
            return {"expr": self.source, "parameters": dict(self.parameters)}
        return self.source

    # -- static analysis -------------------------------------------------

    def is_constant(self):
        return not any(isinstance(n, ast.Name) and n.id == self.variable for n in ast.walk(self._tree))

    def constant_value(self):
        if not self.is_constant():
            raise ValueError(f"{self.source!r} depends on {self.variable}")
        return complex(self(0.0)) if np.iscomplexobj(self(0.0)) else float(self(0.0))

    def growth_exponent(self):
        """
        Exponent a with |f(x)| = O(|x|^a) as |x| -> infinity.

        Returns +inf for super-polynomial growth, -inf for super-polynomial
        decay, and None when the grammar analysis cannot decide.
        """
        return self._growth(self._tree.body)

    def _growth(self, node):
        if isinstance(node, ast.Constant):
            return 0.0
        if isinstance(node, ast.Name):
            return 1.0 if node.id == self.variable else 0.0
        if isinstance(node, ast.UnaryOp):
            return self._growth(node.operand)
        if isinstance(node, ast.Call):
            name = node.func.id
            inner = self._growth(node.args[0])
            if inner is None:
                return None
            if name == "abs":
                return inner
            if name == "sqrt":
                return inner / 2
            if name in ("cos", "sin"):
                return 0.0
            if name == "exp":
                if inner <= 0:
                    return 0.0
                leading = self._leading(node.args[0])
                if leading is None:
                    return None
                if leading[1] == -1 and leading[2] == -1:
                    return -math.inf
                if 1 in (leading[1], leading[2]):
                    return math.inf
                return None
            return None
        if isinstance(node, ast.BinOp):
            left, right = self._growth(node.left), self._growth(node.right)
            if left is None or right is None:
                return None
            if isinstance(node.op, (ast.Add, ast.Sub)):
                return max(left, right)
            if isinstance(node.op, ast.Mult):
                if math.inf in (left, right) and -math.inf in (left, right):
                    return None
                return left + right
            if isinstance(node.op, ast.Div):
                if not self._is_monomial(node.right) or math.isinf(right):
                    return None
                return left - right
            if isinstance(node.op, ast.Pow):
                if not isinstance(node.right, (ast.Constant, ast.UnaryOp)) or not self._is_literal(node.right):
                    return None
                exponent = float(eval(compile(ast.Expression(node.right), "<exp>", "eval")))
                if math.isinf(left):
                    return left if exponent > 0 else -left
                return left * exponent
        return None

    def _is_literal(self, node):
        if isinstance(node, ast.UnaryOp):
            return self._is_literal(node.operand)
        return isinstance(node, ast.Constant)

    def _is_monomial(self, node):
        return not any(isinstance(n, ast.BinOp) and isinstance(n.op, (ast.Add, ast.Sub))
                       for n in ast.walk(node))

    def _leading(self, node):
        """
        (exponent, sign as x -> +inf, sign as x -> -inf) of the dominant term,
        or None when it cannot be read off the tree.  Signs are +1, -1 or None.
        """
        if isinstance(node, ast.Constant):
            if isinstance(node.value, complex):
                return None
            return 0.0, _sign(node.value), _sign(node.value)
        if isinstance(node, ast.Name):
            if node.id == self.variable:
                return 1.0, 1, -1
            value = self._names()[node.id]
            return 0.0, _sign(value), _sign(value)
        if isinstance(node, ast.UnaryOp):
            inner = self._leading(node.operand)
            if inner is None or isinstance(node.op, ast.UAdd):
                return inner
            return inner[0], _flip(inner[1]), _flip(inner[2])
        if isinstance(node, ast.Call):
            inner = self._leading(node.args[0])
            if inner is None:
                return None
            if node.func.id == "abs":
                return inner[0], 1, 1
            if node.func.id == "sqrt":
                return inner[0] / 2, 1, 1
            return None
        if isinstance(node, ast.BinOp):
            left, right = self._leading(node.left), self._leading(node.right)
            if left is None or right is None:
                return None
            if isinstance(node.op, (ast.Add, ast.Sub)):
                if isinstance(node.op, ast.Sub):
                    right = right[0], _flip(right[1]), _flip(right[2])
                if left[0] != right[0]:
                    return max(left, right, key=lambda term: term[0])
                return (left[0], left[1] if left[1] == right[1] else None,
                        left[2] if left[2] == right[2] else None)
            if isinstance(node.op, (ast.Mult, ast.Div)):
                if isinstance(node.op, ast.Div) and not self._is_monomial(node.right):
                    return None
                exponent = left[0] + right[0] if isinstance(node.op, ast.Mult) else left[0] - right[0]
                return exponent, _times(left[1], right[1]), _times(left[2], right[2])
            if isinstance(node.op, ast.Pow) and self._is_literal(node.right):
                power = float(eval(compile(ast.Expression(node.right), "<exp>", "eval")))
                return left[0] * power, _power(left[1], power), _power(left[2], power)
        return None


def _sign(value):
    return 1 if value > 0 else (-1 if value < 0 else None)


def _flip(sign):
    return None if sign is None else -sign


def _times(first, second):
    return None if first is None or second is None else first * second


def _power(sign, power):
    if sign is None:
        return None
    if power.is_integer():
        return sign ** int(power)
    return 1 if sign > 0 else None


def parse_expression(source, variable="u"):
    """Build an :class:`Expression` from a config value (string, number or {"expr", "parameters"})."""
    if isinstance(source, Expression):
        return source
    if isinstance(source, dict):
        return Expression(source.get("expr"), variable=variable, parameters=source.get("parameters"))
    return Expression(source, variable=variable)
