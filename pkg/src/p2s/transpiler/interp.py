"""Reference interpreter for lowered kernels.

Executes the IR with C-compatible semantics so it can serve as the
functional oracle for the emitted HLS C: int32 arithmetic wraps in two's
complement, integer division truncates toward zero (remainder follows the
dividend), float32 operations round to float32 after every step, division
by zero and out-of-range indexing trap as EvaluationError.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .frontend import TranspilerError
from .ir import (
    ArrayType,
    Assign,
    BinOp,
    Expr,
    FloatLit,
    For,
    If,
    Index,
    IntLit,
    KernelIR,
    Return,
    Scalar,
    Stmt,
    UnaryNeg,
    Var,
)


class EvalFailure(Enum):
    DIV_BY_ZERO = "DIV_BY_ZERO"
    OUT_OF_BOUNDS = "OUT_OF_BOUNDS"


class EvaluationError(TranspilerError):
    def __init__(self, failure: EvalFailure, detail: str = ""):
        super().__init__(f"{failure.value}: {detail}".rstrip(": "))
        self.failure = failure


_I32_MASK = 0xFFFFFFFF


def wrap_i32(value: int) -> int:
    value &= _I32_MASK
    return value - 0x100000000 if value >= 0x80000000 else value


def c_div_i32(a: int, b: int) -> int:
    if b == 0:
        raise EvaluationError(EvalFailure.DIV_BY_ZERO, "integer division by zero")
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return wrap_i32(q)


def c_mod_i32(a: int, b: int) -> int:
    if b == 0:
        raise EvaluationError(EvalFailure.DIV_BY_ZERO, "integer modulo by zero")
    return wrap_i32(a - b * c_div_i32(a, b))


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


def _as_float32(value) -> np.float32:
    return np.float32(value)


def _binop_numeric(op: str, left, right):
    if isinstance(left, np.float32) or isinstance(right, np.float32):
        lf, rf = _as_float32(left), _as_float32(right)
        if op == "+":
            return _as_float32(lf + rf)
        if op == "-":
            return _as_float32(lf - rf)
        if op == "*":
            return _as_float32(lf * rf)
        if op == "/":
            if float(rf) == 0.0:
                raise EvaluationError(EvalFailure.DIV_BY_ZERO, "float division by zero")
            return _as_float32(lf / rf)
        raise TranspilerError(f"float operator {op!r}")
    a, b = int(left), int(right)
    if op == "+":
        return wrap_i32(a + b)
    if op == "-":
        return wrap_i32(a - b)
    if op == "*":
        return wrap_i32(a * b)
    if op == "/":
        return c_div_i32(a, b)
    if op == "%":
        return c_mod_i32(a, b)
    raise TranspilerError(f"integer operator {op!r}")


class _Interp:
    def __init__(self, kernel: KernelIR, env: dict):
        self.kernel = kernel
        self.env = env

    def expr(self, e: Expr):
        if isinstance(e, IntLit):
            return wrap_i32(e.value)
        if isinstance(e, FloatLit):
            return _as_float32(e.value)
        if isinstance(e, Var):
            return self.env[e.name]
        if isinstance(e, Index):
            arr = self.env[e.array]
            idx = int(self.expr(e.index))
            if not 0 <= idx < len(arr):
                raise EvaluationError(
                    EvalFailure.OUT_OF_BOUNDS,
                    f"{e.array}[{idx}] with length {len(arr)}",
                )
            return arr[idx]
        if isinstance(e, UnaryNeg):
            v = self.expr(e.operand)
            return _as_float32(-v) if isinstance(v, np.float32) else wrap_i32(-int(v))
        if isinstance(e, BinOp):
            if e.op in ("&&", "||"):
                left = self.expr(e.left)
                if e.op == "&&":
                    return bool(left) and bool(self.expr(e.right))
                return bool(left) or bool(self.expr(e.right))
            left = self.expr(e.left)
            right = self.expr(e.right)
            if e.op in ("<", "<=", ">", ">=", "==", "!="):
                table = {
                    "<": left < right,
                    "<=": left <= right,
                    ">": left > right,
                    ">=": left >= right,
                    "==": left == right,
                    "!=": left != right,
                }
                return bool(table[e.op])
            return _binop_numeric(e.op, left, right)
        raise TranspilerError(f"cannot evaluate {type(e).__name__}")

    def stmts(self, stmts: tuple[Stmt, ...]):
        for s in stmts:
            if isinstance(s, Assign):
                value = self.expr(s.value)
                if isinstance(s.target, Var):
                    self.env[s.target.name] = value
                else:
                    arr = self.env[s.target.array]
                    idx = int(self.expr(s.target.index))
                    if not 0 <= idx < len(arr):
                        raise EvaluationError(
                            EvalFailure.OUT_OF_BOUNDS,
                            f"{s.target.array}[{idx}] with length {len(arr)}",
                        )
                    arr[idx] = value
            elif isinstance(s, For):
                lo = int(self.expr(s.lower))
                hi = int(self.expr(s.upper))
                for i in range(lo, hi):
                    self.env[s.var] = wrap_i32(i)
                    self.stmts(s.body)
                self.env.pop(s.var, None)
            elif isinstance(s, If):
                branch = s.then_body if self.expr(s.cond) else s.else_body
                self.stmts(branch)
            elif isinstance(s, Return):
                raise _ReturnSignal(None if s.value is None else self.expr(s.value))
            else:
                raise TranspilerError(f"cannot execute {type(s).__name__}")


def _coerce_input(value, t) -> object:
    if isinstance(t, ArrayType):
        vals = list(value)
        if len(vals) != t.length:
            raise TranspilerError(
                f"array input of length {len(vals)} for parameter of length {t.length}"
            )
        if t.elem == "float32":
            return [_as_float32(v) for v in vals]
        return [wrap_i32(int(v)) for v in vals]
    if t.kind == "float32":
        return _as_float32(value)
    return wrap_i32(int(value))


def interpret(kernel: KernelIR, inputs: list):
    """Run the kernel on the given inputs.

    Returns the scalar result (int or float) for value-returning kernels.
    Void kernels return a dict of the final contents of every array
    parameter.
    """
    if len(inputs) != len(kernel.params):
        raise TranspilerError(
            f"{kernel.name} takes {len(kernel.params)} inputs, got {len(inputs)}"
        )
    env: dict = {}
    for (name, t), value in zip(kernel.params, inputs):
        env[name] = _coerce_input(value, t)
    for name, t in kernel.locals:
        if isinstance(t, ArrayType):
            zero = _as_float32(0.0) if t.elem == "float32" else 0
            env[name] = [zero] * t.length

    interp = _Interp(kernel, env)
    result = None
    try:
        interp.stmts(kernel.body)
    except _ReturnSignal as sig:
        result = sig.value
    if kernel.return_type is None:
        return {
            name: list(env[name])
            for name, t in kernel.params
            if isinstance(t, ArrayType)
        }
    if result is None:
        raise TranspilerError(f"{kernel.name} finished without returning a value")
    if isinstance(kernel.return_type, Scalar) and kernel.return_type.kind == "float32":
        return float(_as_float32(result))
    return int(result)
