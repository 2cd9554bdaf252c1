"""Tiny, safe arithmetic expressions over numpy arrays for JSON job files.

Only names from ``_FUNCS``/``_CONSTS`` and the declared variables are allowed;
anything else (attribute access, calls to unknown names, subscripts, ...) is
rejected at compile time.
"""

import ast
import operator

import numpy as np

_FUNCS = {
    "abs": np.abs,
    "abs2": lambda x: np.abs(x) ** 2,
    "re": np.real,
    "im": np.imag,
    "conj": np.conj,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "cos": np.cos,
    "sin": np.sin,
}
_CONSTS = {"pi": np.pi, "e": np.e, "I": 1j}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class ExpressionError(ValueError):
    pass


def _check(node, variables):
    if isinstance(node, ast.Expression):
        return _check(node.body, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return
    if isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
        return
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, variables)
        _check(node.right, variables)
        return
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        _check(node.operand, variables)
        return
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if node.keywords or len(node.args) != 1:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0], variables)
        return
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    return _FUNCS[node.func.id](_eval(node.args[0], env))


def compile_expression(text: str, variables=("t", "z"), real: bool = True):
    """Return ``fn(**arrays)`` evaluating ``text``; the real part unless ``real=False``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    _check(tree, set(variables))

    def fn(**env):
        with np.errstate(all="ignore"):
            out = _eval(tree, env)
            return np.real(out) if real else out

    fn.source = text
    return fn
