"""Lowering from the sanitized script AST to the kernel IR.

Lowering enforces the hardware-synthesizable subset: a static call graph
(module-local calls are fully inlined; recursion is rejected), counted
loops only, static-control loop bounds, affine array indexing, static array
sizes, and the {int32, float32, static array} type lattice. Violations
raise ``Rejected`` with a typed reason naming exactly which rule fired.
"""

from __future__ import annotations

import re
from enum import Enum

from .frontend import FunctionAst, Param, ScriptAst, TranspilerError
from .ir import (
    ArrayType,
    Assign,
    BinOp,
    BOOL,
    Call,
    Expr,
    FLOAT32,
    FloatLit,
    For,
    If,
    Index,
    INT32,
    IntLit,
    KernelIR,
    ListLit,
    ListMul,
    Return,
    Scalar,
    Stmt,
    Type,
    UnaryNeg,
    Var,
    While,
)


class RejectionReason(Enum):
    RECURSION = "RECURSION"
    WHILE_LOOP = "WHILE_LOOP"
    DYNAMIC_ALLOC = "DYNAMIC_ALLOC"
    NON_STATIC_BOUND = "NON_STATIC_BOUND"
    UNSUPPORTED_TYPE = "UNSUPPORTED_TYPE"
    NON_AFFINE_INDEX = "NON_AFFINE_INDEX"


class Rejected(TranspilerError):
    def __init__(self, reason: RejectionReason, detail: str = ""):
        super().__init__(f"rejected ({reason.value}): {detail}".rstrip(": "))
        self.reason = reason
        self.detail = detail


_ANNOTATION_RE = re.compile(r"^(int32|float32)\[(\d+)\]$")


def _param_type(param: Param) -> Type:
    ann = param.annotation
    if ann is None or ann == "int":
        return INT32
    if ann == "float":
        return FLOAT32
    m = _ANNOTATION_RE.match(ann)
    if m:
        length = int(m.group(2))
        if length < 1:
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"zero-length array parameter {param.name!r}")
        return ArrayType(m.group(1), length)
    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"parameter annotation {ann!r}")


def fold_int(expr: Expr) -> int | None:
    """Fold an expression to an int literal, or None if it is not constant."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, UnaryNeg):
        v = fold_int(expr.operand)
        return None if v is None else -v
    if isinstance(expr, BinOp) and expr.op in ("+", "-", "*", "/", "%"):
        left, right = fold_int(expr.left), fold_int(expr.right)
        if left is None or right is None:
            return None
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0:
            return None
        # C semantics: division truncates toward zero, remainder follows it
        q = abs(left) // abs(right)
        if (left < 0) != (right < 0):
            q = -q
        return q if expr.op == "/" else left - right * q
    return None


def snake_case(name: str) -> str:
    out = re.sub(r"(?<=[a-z0-9])(?=[A-Z])", "_", name)
    return out.lower()


# --- call graph / inlining ---------------------------------------------------

def _calls_in_expr(e: Expr, out: set[str]):
    if isinstance(e, Call):
        out.add(e.func)
        for a in e.args:
            _calls_in_expr(a, out)
    elif isinstance(e, BinOp):
        _calls_in_expr(e.left, out)
        _calls_in_expr(e.right, out)
    elif isinstance(e, UnaryNeg):
        _calls_in_expr(e.operand, out)
    elif isinstance(e, Index):
        _calls_in_expr(e.index, out)
    elif isinstance(e, ListLit):
        for item in e.items:
            _calls_in_expr(item, out)
    elif isinstance(e, ListMul):
        _calls_in_expr(e.item, out)
        _calls_in_expr(e.count, out)


def _calls_in_stmts(stmts: tuple[Stmt, ...], out: set[str]):
    for s in stmts:
        if isinstance(s, Assign):
            if isinstance(s.target, Index):
                _calls_in_expr(s.target.index, out)
            _calls_in_expr(s.value, out)
        elif isinstance(s, For):
            _calls_in_expr(s.lower, out)
            _calls_in_expr(s.upper, out)
            _calls_in_stmts(s.body, out)
        elif isinstance(s, While):
            _calls_in_expr(s.cond, out)
            _calls_in_stmts(s.body, out)
        elif isinstance(s, If):
            _calls_in_expr(s.cond, out)
            _calls_in_stmts(s.then_body, out)
            _calls_in_stmts(s.else_body, out)
        elif isinstance(s, Return) and s.value is not None:
            _calls_in_expr(s.value, out)


def _check_recursion(functions: dict[str, FunctionAst]):
    graph: dict[str, set[str]] = {}
    for name, fn in functions.items():
        called: set[str] = set()
        _calls_in_stmts(fn.body, called)
        graph[name] = {c for c in called if c in functions}

    visiting: set[str] = set()
    done: set[str] = set()

    def visit(node: str, path: list[str]):
        if node in done:
            return
        if node in visiting:
            cycle = " -> ".join(path + [node])
            raise Rejected(RejectionReason.RECURSION, f"call cycle {cycle}")
        visiting.add(node)
        for nxt in sorted(graph[node]):
            visit(nxt, path + [node])
        visiting.discard(node)
        done.add(node)

    for name in functions:
        visit(name, [])
    return graph


class _Inliner:
    """Splices module-local callees into the kernel body.

    A callee is inlinable when its only Return is the final top-level
    statement of its body. Callee locals are renamed with a per-site prefix;
    the call expression is replaced by the renamed return expression, with
    the renamed body emitted just before the enclosing statement.
    """

    def __init__(self, functions: dict[str, FunctionAst]):
        self._functions = functions
        self._counter = 0

    def _rename_expr(self, e: Expr, mapping: dict[str, str]) -> Expr:
        if isinstance(e, Var):
            return Var(mapping.get(e.name, e.name))
        if isinstance(e, Index):
            return Index(mapping.get(e.array, e.array), self._rename_expr(e.index, mapping))
        if isinstance(e, BinOp):
            return BinOp(e.op, self._rename_expr(e.left, mapping), self._rename_expr(e.right, mapping))
        if isinstance(e, UnaryNeg):
            return UnaryNeg(self._rename_expr(e.operand, mapping))
        if isinstance(e, Call):
            return Call(e.func, tuple(self._rename_expr(a, mapping) for a in e.args))
        if isinstance(e, ListLit):
            return ListLit(tuple(self._rename_expr(x, mapping) for x in e.items))
        if isinstance(e, ListMul):
            return ListMul(self._rename_expr(e.item, mapping), self._rename_expr(e.count, mapping))
        return e

    def _rename_stmts(self, stmts: tuple[Stmt, ...], mapping: dict[str, str]) -> tuple[Stmt, ...]:
        out: list[Stmt] = []
        for s in stmts:
            if isinstance(s, Assign):
                target = s.target
                if isinstance(target, Var):
                    target = Var(mapping.get(target.name, target.name))
                else:
                    target = Index(mapping.get(target.array, target.array),
                                   self._rename_expr(target.index, mapping))
                out.append(Assign(target, self._rename_expr(s.value, mapping)))
            elif isinstance(s, For):
                out.append(For(mapping.get(s.var, s.var),
                               self._rename_expr(s.lower, mapping),
                               self._rename_expr(s.upper, mapping),
                               self._rename_stmts(s.body, mapping)))
            elif isinstance(s, While):
                out.append(While(self._rename_expr(s.cond, mapping),
                                 self._rename_stmts(s.body, mapping)))
            elif isinstance(s, If):
                out.append(If(self._rename_expr(s.cond, mapping),
                              self._rename_stmts(s.then_body, mapping),
                              self._rename_stmts(s.else_body, mapping)))
            elif isinstance(s, Return):
                out.append(Return(None if s.value is None else self._rename_expr(s.value, mapping)))
            else:
                out.append(s)
        return tuple(out)

    def _local_names(self, fn: FunctionAst) -> set[str]:
        names = {p.name for p in fn.params}

        def walk(stmts):
            for s in stmts:
                if isinstance(s, Assign) and isinstance(s.target, Var):
                    names.add(s.target.name)
                elif isinstance(s, Assign) and isinstance(s.target, Index):
                    names.add(s.target.array)
                elif isinstance(s, For):
                    names.add(s.var)
                    walk(s.body)
                elif isinstance(s, While):
                    walk(s.body)
                elif isinstance(s, If):
                    walk(s.then_body)
                    walk(s.else_body)

        walk(fn.body)
        return names

    def _expand_call(self, call: Call, prelude: list[Stmt]) -> Expr:
        fn = self._functions[call.func]
        if len(call.args) != len(fn.params):
            raise Rejected(
                RejectionReason.UNSUPPORTED_TYPE,
                f"call to {call.func!r} with {len(call.args)} args, expected {len(fn.params)}",
            )
        body = fn.body
        has_early_return = any(self._contains_return(s) for s in body[:-1])
        if not body or not isinstance(body[-1], Return) or body[-1].value is None or has_early_return:
            raise Rejected(
                RejectionReason.UNSUPPORTED_TYPE,
                f"callee {call.func!r} cannot be inlined (needs a single trailing return)",
            )
        self._counter += 1
        mapping = {name: f"__{call.func}_{self._counter}_{name}" for name in self._local_names(fn)}
        for param, arg in zip(fn.params, call.args):
            prelude.append(Assign(Var(mapping[param.name]), arg))
        renamed = self._rename_stmts(body[:-1], mapping)
        prelude.extend(self.inline_stmts(renamed))
        return self._rename_expr(body[-1].value, mapping)

    @staticmethod
    def _contains_return(s: Stmt) -> bool:
        if isinstance(s, Return):
            return True
        if isinstance(s, For):
            return any(_Inliner._contains_return(x) for x in s.body)
        if isinstance(s, While):
            return any(_Inliner._contains_return(x) for x in s.body)
        if isinstance(s, If):
            return any(_Inliner._contains_return(x) for x in s.then_body + s.else_body)
        return False

    def inline_expr(self, e: Expr, prelude: list[Stmt]) -> Expr:
        if isinstance(e, Call):
            args = tuple(self.inline_expr(a, prelude) for a in e.args)
            call = Call(e.func, args)
            if e.func in self._functions:
                return self._expand_call(call, prelude)
            return call
        if isinstance(e, BinOp):
            return BinOp(e.op, self.inline_expr(e.left, prelude), self.inline_expr(e.right, prelude))
        if isinstance(e, UnaryNeg):
            return UnaryNeg(self.inline_expr(e.operand, prelude))
        if isinstance(e, Index):
            return Index(e.array, self.inline_expr(e.index, prelude))
        if isinstance(e, ListLit):
            return ListLit(tuple(self.inline_expr(x, prelude) for x in e.items))
        if isinstance(e, ListMul):
            return ListMul(self.inline_expr(e.item, prelude), self.inline_expr(e.count, prelude))
        return e

    def inline_stmts(self, stmts: tuple[Stmt, ...]) -> list[Stmt]:
        out: list[Stmt] = []
        for s in stmts:
            prelude: list[Stmt] = []
            if isinstance(s, Assign):
                target = s.target
                if isinstance(target, Index):
                    target = Index(target.array, self.inline_expr(target.index, prelude))
                value = self.inline_expr(s.value, prelude)
                out.extend(prelude)
                out.append(Assign(target, value))
            elif isinstance(s, For):
                lower = self.inline_expr(s.lower, prelude)
                upper = self.inline_expr(s.upper, prelude)
                out.extend(prelude)
                out.append(For(s.var, lower, upper, tuple(self.inline_stmts(s.body))))
            elif isinstance(s, While):
                cond = self.inline_expr(s.cond, prelude)
                out.extend(prelude)
                out.append(While(cond, tuple(self.inline_stmts(s.body))))
            elif isinstance(s, If):
                cond = self.inline_expr(s.cond, prelude)
                out.extend(prelude)
                out.append(If(cond, tuple(self.inline_stmts(s.then_body)),
                              tuple(self.inline_stmts(s.else_body))))
            elif isinstance(s, Return):
                if s.value is None:
                    out.append(s)
                else:
                    value = self.inline_expr(s.value, prelude)
                    out.extend(prelude)
                    out.append(Return(value))
            else:
                out.append(s)
        return out


# --- typed lowering ----------------------------------------------------------

class _LoweringContext:
    def __init__(self, params: dict[str, Type]):
        self.env: dict[str, Type] = dict(params)
        self.params = set(params)
        self.locals: dict[str, Type] = {}
        self.loop_vars: list[str] = []
        self.mutable_locals: set[str] = set()
        self.return_type: Type | None = None
        self.saw_return = False

    def declare_local(self, name: str, t: Type):
        self.env[name] = t
        self.locals[name] = t


def _collect_mutable(stmts: tuple[Stmt, ...], out: set[str]):
    for s in stmts:
        if isinstance(s, Assign) and isinstance(s.target, Var):
            out.add(s.target.name)
        elif isinstance(s, For):
            _collect_mutable(s.body, out)
        elif isinstance(s, While):
            _collect_mutable(s.body, out)
        elif isinstance(s, If):
            _collect_mutable(s.then_body, out)
            _collect_mutable(s.else_body, out)


def _is_affine(e: Expr, loop_vars: set[str]) -> bool:
    if isinstance(e, IntLit):
        return True
    if isinstance(e, Var):
        return True  # loop counter or runtime-constant parameter
    if isinstance(e, UnaryNeg):
        return _is_affine(e.operand, loop_vars)
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            return _is_affine(e.left, loop_vars) and _is_affine(e.right, loop_vars)
        if e.op == "*":
            # one side must be a compile-time literal multiplier
            if fold_int(e.left) is not None:
                return _is_affine(e.right, loop_vars)
            if fold_int(e.right) is not None:
                return _is_affine(e.left, loop_vars)
            return False
        return False
    return False


class _Lowerer:
    def __init__(self, fn: FunctionAst):
        self.fn = fn
        params: dict[str, Type] = {}
        for p in fn.params:
            params[p.name] = _param_type(p)
        self.ctx = _LoweringContext(params)
        _collect_mutable(fn.body, self.ctx.mutable_locals)

    # expression typing; returns (lowered expr, type)
    def expr(self, e: Expr) -> tuple[Expr, Type]:
        ctx = self.ctx
        if isinstance(e, IntLit):
            return e, INT32
        if isinstance(e, FloatLit):
            return e, FLOAT32
        if isinstance(e, Var):
            t = ctx.env.get(e.name)
            if t is None:
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"use of undefined name {e.name!r}")
            if isinstance(t, ArrayType):
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                               f"array {e.name!r} used as a scalar value")
            return e, t
        if isinstance(e, Index):
            arr_t = ctx.env.get(e.array)
            if not isinstance(arr_t, ArrayType):
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"subscript of non-array {e.array!r}")
            idx, idx_t = self.expr(e.index)
            if idx_t is not INT32:
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "array index must be int32")
            if not _is_affine(idx, set(ctx.loop_vars)):
                raise Rejected(RejectionReason.NON_AFFINE_INDEX,
                               f"index into {e.array!r} is not affine in loop counters")
            return Index(e.array, idx), Scalar(arr_t.elem)
        if isinstance(e, BinOp):
            left, lt = self.expr(e.left)
            right, rt = self.expr(e.right)
            if e.op in ("+", "-", "*", "/", "%"):
                if lt is BOOL or rt is BOOL:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "arithmetic on a boolean")
                if lt != rt:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                   f"mixed operand types {lt}/{rt} (convert explicitly)")
                if e.op == "%" and lt == FLOAT32:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "modulo on floats")
                return BinOp(e.op, left, right), lt
            if e.op in ("<", "<=", ">", ">=", "==", "!="):
                if lt != rt or isinstance(lt, ArrayType) or lt is BOOL:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                   f"comparison of {lt} against {rt}")
                return BinOp(e.op, left, right), BOOL
            if e.op in ("&&", "||"):
                if lt is not BOOL or rt is not BOOL:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "logical op on non-boolean")
                return BinOp(e.op, left, right), BOOL
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"operator {e.op!r}")
        if isinstance(e, UnaryNeg):
            operand, t = self.expr(e.operand)
            if t is BOOL or isinstance(t, ArrayType):
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "negation of a non-scalar")
            return UnaryNeg(operand), t
        if isinstance(e, Call):
            return self._call(e)
        if isinstance(e, (ListLit, ListMul)):
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                           "list initializer outside a simple assignment")
        raise Rejected(RejectionReason.UNSUPPORTED_TYPE, type(e).__name__)

    _LIST_METHODS = ("append", "extend", "insert", "pop", "remove")

    def _call(self, e: Call) -> tuple[Expr, Type]:
        if "." in e.func and e.func.split(".", 1)[1] in self._LIST_METHODS:
            raise Rejected(RejectionReason.DYNAMIC_ALLOC, f"growable-list call {e.func!r}")
        if e.func == "len":
            if len(e.args) == 1 and isinstance(e.args[0], Var):
                t = self.ctx.env.get(e.args[0].name)
                if isinstance(t, ArrayType):
                    return IntLit(t.length), INT32
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "len() of a non-static-array")
        if e.func == "int":
            if len(e.args) == 1:
                arg, t = self.expr(e.args[0])
                if t is INT32:
                    return arg, INT32
                if isinstance(arg, FloatLit):
                    return IntLit(int(arg.value)), INT32
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "int() of a non-integer expression")
        if e.func == "float":
            if len(e.args) == 1:
                arg, t = self.expr(e.args[0])
                if t is FLOAT32:
                    return arg, FLOAT32
                if isinstance(arg, IntLit):
                    return FloatLit(float(arg.value)), FLOAT32
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "float() of a non-float expression")
        if e.func in ("list", "dict", "set", "bytearray"):
            raise Rejected(RejectionReason.DYNAMIC_ALLOC, f"dynamic allocation via {e.func}()")
        raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"call to unknown function {e.func!r}")

    def _assign_scalar(self, name: str, value: Expr, t: Type) -> Stmt:
        ctx = self.ctx
        if t is BOOL:
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "cannot store a boolean")
        if name in ctx.loop_vars:
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"assignment to loop counter {name!r}")
        known = ctx.env.get(name)
        if known is None:
            ctx.declare_local(name, t)
        elif isinstance(known, ArrayType):
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"cannot reassign array {name!r}")
        elif known != t:
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                           f"{name!r} changes type from {known} to {t}")
        return Assign(Var(name), value)

    def _array_init(self, name: str, items: list[Expr], out: list[Stmt]):
        ctx = self.ctx
        if name in ctx.env:
            raise Rejected(RejectionReason.UNSUPPORTED_TYPE, f"cannot re-initialize {name!r} as an array")
        typed_items: list[Expr] = []
        elem_t: Type | None = None
        for item in items:
            lowered, t = self.expr(item)
            if t is BOOL or isinstance(t, ArrayType):
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "array elements must be scalars")
            if elem_t is None:
                elem_t = t
            elif t != elem_t:
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "mixed element types in array initializer")
            typed_items.append(lowered)
        assert elem_t is not None
        ctx.declare_local(name, ArrayType(elem_t.kind, len(typed_items)))
        for i, item in enumerate(typed_items):
            out.append(Assign(Index(name, IntLit(i)), item))

    def _check_static_bound(self, e: Expr, what: str):
        ctx = self.ctx
        if isinstance(e, IntLit):
            return
        if isinstance(e, Var):
            if e.name in ctx.loop_vars or e.name in ctx.params:
                if e.name in ctx.mutable_locals:
                    raise Rejected(
                        RejectionReason.NON_STATIC_BOUND,
                        f"{what} depends on {e.name!r}, which is reassigned in the body",
                    )
                return
            raise Rejected(RejectionReason.NON_STATIC_BOUND,
                           f"{what} depends on mutable local {e.name!r}")
        if isinstance(e, UnaryNeg):
            self._check_static_bound(e.operand, what)
            return
        if isinstance(e, BinOp) and e.op in ("+", "-", "*", "/", "%"):
            self._check_static_bound(e.left, what)
            self._check_static_bound(e.right, what)
            return
        raise Rejected(RejectionReason.NON_STATIC_BOUND, f"{what} is not a static expression")

    def stmts(self, stmts) -> list[Stmt]:
        out: list[Stmt] = []
        for s in stmts:
            if isinstance(s, While):
                raise Rejected(RejectionReason.WHILE_LOOP, "while-loops violate static control flow")
            if isinstance(s, Assign):
                if isinstance(s.target, Var) and isinstance(s.value, ListLit):
                    if not s.value.items:
                        raise Rejected(RejectionReason.DYNAMIC_ALLOC, "empty (growable) list literal")
                    self._array_init(s.target.name, list(s.value.items), out)
                elif isinstance(s.target, Var) and isinstance(s.value, ListMul):
                    count = fold_int(s.value.count)
                    if count is None:
                        raise Rejected(RejectionReason.DYNAMIC_ALLOC,
                                       "array length is not a compile-time constant")
                    if count < 1:
                        raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "non-positive array length")
                    self._array_init(s.target.name, [s.value.item] * count, out)
                elif isinstance(s.target, Var):
                    value, t = self.expr(s.value)
                    out.append(self._assign_scalar(s.target.name, value, t))
                else:
                    arr_t = self.ctx.env.get(s.target.array)
                    if not isinstance(arr_t, ArrayType):
                        raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                       f"store into non-array {s.target.array!r}")
                    target_expr, _ = self.expr(Index(s.target.array, s.target.index))
                    value, t = self.expr(s.value)
                    if t != Scalar(arr_t.elem):
                        raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                       f"storing {t} into {arr_t} element")
                    assert isinstance(target_expr, Index)
                    out.append(Assign(target_expr, value))
            elif isinstance(s, For):
                lower, lt = self.expr(s.lower)
                upper, ut = self.expr(s.upper)
                if lt is not INT32 or ut is not INT32:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "loop bounds must be int32")
                self._check_static_bound(lower, f"lower bound of loop over {s.var!r}")
                self._check_static_bound(upper, f"upper bound of loop over {s.var!r}")
                if s.var in self.ctx.env or s.var in self.ctx.loop_vars:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                   f"loop counter {s.var!r} shadows an existing variable")
                self.ctx.loop_vars.append(s.var)
                self.ctx.env[s.var] = INT32
                body = self.stmts(s.body)
                self.ctx.loop_vars.pop()
                del self.ctx.env[s.var]
                out.append(For(s.var, lower, upper, tuple(body)))
            elif isinstance(s, If):
                cond, t = self.expr(s.cond)
                if t is not BOOL:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "if-condition must be boolean")
                then_body = self.stmts(s.then_body)
                else_body = self.stmts(s.else_body)
                out.append(If(cond, tuple(then_body), tuple(else_body)))
            elif isinstance(s, Return):
                if s.value is None:
                    ret_t: Type | None = None
                    out.append(Return(None))
                else:
                    value, ret_t = self.expr(s.value)
                    if ret_t is BOOL or isinstance(ret_t, ArrayType):
                        raise Rejected(RejectionReason.UNSUPPORTED_TYPE,
                                       f"cannot return {ret_t}")
                    out.append(Return(value))
                if self.ctx.saw_return and self.ctx.return_type != ret_t:
                    raise Rejected(RejectionReason.UNSUPPORTED_TYPE, "inconsistent return types")
                self.ctx.saw_return = True
                self.ctx.return_type = ret_t
            else:
                raise Rejected(RejectionReason.UNSUPPORTED_TYPE, type(s).__name__)
        return out


def _assign_loop_ids(stmts: tuple[Stmt, ...], counter: list[int]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, For):
            loop_id = f"L{counter[0]}"
            counter[0] += 1
            out.append(For(s.var, s.lower, s.upper, _assign_loop_ids(s.body, counter), loop_id))
        elif isinstance(s, If):
            out.append(If(s.cond, _assign_loop_ids(s.then_body, counter),
                          _assign_loop_ids(s.else_body, counter)))
        else:
            out.append(s)
    return tuple(out)


def select_kernel_root(script: ScriptAst) -> FunctionAst:
    """The kernel root: the first function (in source order) that no other
    function calls."""
    if not script.functions:
        raise TranspilerError("no functions to lower (did sanitize run?)")
    called: set[str] = set()
    for fn in script.functions:
        names: set[str] = set()
        _calls_in_stmts(fn.body, names)
        called |= names
    for fn in script.functions:
        if fn.name not in called:
            return fn
    return script.functions[0]


def lower(script: ScriptAst) -> KernelIR:
    """Lower a sanitized script AST to a typed, static-control kernel.

    Checks run in a fixed order: recursion over the whole module first, then
    a single statement walk that rejects while-loops, dynamic allocation,
    type violations, non-static bounds and non-affine indices as they are
    encountered.
    """
    if script.classes:
        raise TranspilerError("script still contains classes; run sanitize first")
    functions = {fn.name: fn for fn in script.functions}
    if len(functions) != len(script.functions):
        raise TranspilerError("duplicate function names")
    _check_recursion(functions)
    root = select_kernel_root(script)
    body = tuple(_Inliner(functions).inline_stmts(root.body))

    lowerer = _Lowerer(root)
    lowered = lowerer.stmts(body)
    lowered = _assign_loop_ids(tuple(lowered), [0])

    return KernelIR(
        name=snake_case(root.name),
        params=tuple((p.name, _param_type(p)) for p in root.params),
        return_type=lowerer.ctx.return_type if lowerer.ctx.saw_return else None,
        body=lowered,
        locals=tuple(lowerer.ctx.locals.items()),
    )
