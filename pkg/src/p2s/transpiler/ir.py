"""Kernel intermediate representation.

Expression and statement nodes are shared between the parsed script AST and
the lowered kernel IR. A lowered kernel is the restricted subset: no Call,
While, ListLit or ListMul nodes survive lowering (``validate_lowered``
re-checks this independently), loop bounds are static-control, and every
array index is affine in loop counters.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


# --- types -------------------------------------------------------------------

@dataclass(frozen=True)
class Scalar:
    kind: str  # "int32" | "float32"

    def __str__(self):
        return self.kind


@dataclass(frozen=True)
class ArrayType:
    elem: str  # "int32" | "float32"
    length: int

    def __str__(self):
        return f"{self.elem}[{self.length}]"


INT32 = Scalar("int32")
FLOAT32 = Scalar("float32")
BOOL = Scalar("bool")  # internal only: condition results, never stored

Type = Scalar | ArrayType


# --- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class FloatLit:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / % < <= > >= == != && ||
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnaryNeg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    """Frontend-only: eliminated (inlined or rewritten) before lowering."""

    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class ListLit:
    """Frontend-only: static array initializer ``[e0, e1, ...]``."""

    items: tuple["Expr", ...]


@dataclass(frozen=True)
class ListMul:
    """Frontend-only: ``[item] * count`` array initializer."""

    item: "Expr"
    count: "Expr"


Expr = IntLit | FloatLit | Var | Index | BinOp | UnaryNeg | Call | ListLit | ListMul

ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("&&", "||")


# --- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: Var | Index
    value: Expr


@dataclass(frozen=True)
class For:
    var: str
    lower: Expr
    upper: Expr
    body: tuple["Stmt", ...]
    loop_id: str | None = None  # assigned during lowering ("L0", "L1", ...)


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: tuple["Stmt", ...]
    else_body: tuple["Stmt", ...] = ()


@dataclass(frozen=True)
class Return:
    value: Expr | None = None


@dataclass(frozen=True)
class While:
    """Frontend-only: rejected at lowering (no unbounded loops in hardware)."""

    cond: Expr
    body: tuple["Stmt", ...]


Stmt = Assign | For | If | Return | While


# --- directives --------------------------------------------------------------

class DirectiveKind(Enum):
    PIPELINE = "PIPELINE"
    UNROLL = "UNROLL"
    ARRAY_PARTITION = "ARRAY_PARTITION"


class PartitionStyle(Enum):
    CYCLIC = "cyclic"
    BLOCK = "block"
    COMPLETE = "complete"


@dataclass(frozen=True)
class Directive:
    kind: DirectiveKind
    target: str  # loop id or array name
    ii: int | None = None  # PIPELINE
    factor: int | None = None  # UNROLL / ARRAY_PARTITION
    dim: int | None = None  # ARRAY_PARTITION
    style: PartitionStyle | None = None  # ARRAY_PARTITION

    def __post_init__(self):
        if self.kind is DirectiveKind.PIPELINE and (self.ii is None or self.ii < 1):
            raise ValueError("PIPELINE needs a positive ii")
        if self.kind is DirectiveKind.UNROLL and (self.factor is None or self.factor < 1):
            raise ValueError("UNROLL needs a positive factor")
        if self.kind is DirectiveKind.ARRAY_PARTITION:
            if self.factor is None or self.factor < 1 or self.dim is None or self.dim < 1:
                raise ValueError("ARRAY_PARTITION needs positive factor and dim")
            if self.style is None:
                raise ValueError("ARRAY_PARTITION needs a style")


# --- the kernel --------------------------------------------------------------

@dataclass(frozen=True)
class KernelIR:
    name: str
    params: tuple[tuple[str, Type], ...]
    return_type: Type | None  # None means void (outputs via array params)
    body: tuple[Stmt, ...]
    locals: tuple[tuple[str, Type], ...] = ()
    directives: tuple[Directive, ...] = ()

    def with_directives(self, directives: tuple[Directive, ...]) -> "KernelIR":
        return KernelIR(
            name=self.name,
            params=self.params,
            return_type=self.return_type,
            body=self.body,
            locals=self.locals,
            directives=directives,
        )

    def array_names(self) -> list[str]:
        names = [n for n, t in self.params if isinstance(t, ArrayType)]
        names += [n for n, t in self.locals if isinstance(t, ArrayType)]
        return names

    def loop_ids(self) -> list[str]:
        out: list[str] = []

        def walk(stmts):
            for s in stmts:
                if isinstance(s, For):
                    out.append(s.loop_id)
                    walk(s.body)
                elif isinstance(s, If):
                    walk(s.then_body)
                    walk(s.else_body)

        walk(self.body)
        return out


_LOWERED_EXPRS = (IntLit, FloatLit, Var, Index, BinOp, UnaryNeg)
_LOWERED_STMTS = (Assign, For, If, Return)


def validate_lowered(kernel: KernelIR) -> list[str]:
    """Independent re-check that a kernel respects the lowered subset: only
    lowered statement/expression kinds, no While/Call survivors. Returns a
    list of violation descriptions (empty when clean)."""
    problems: list[str] = []

    def check_expr(e):
        if not isinstance(e, _LOWERED_EXPRS):
            problems.append(f"non-lowered expression {type(e).__name__}")
            return
        if isinstance(e, BinOp):
            check_expr(e.left)
            check_expr(e.right)
        elif isinstance(e, UnaryNeg):
            check_expr(e.operand)
        elif isinstance(e, Index):
            check_expr(e.index)

    def check_stmt(s):
        if not isinstance(s, _LOWERED_STMTS):
            problems.append(f"non-lowered statement {type(s).__name__}")
            return
        if isinstance(s, Assign):
            if isinstance(s.target, Index):
                check_expr(s.target.index)
            check_expr(s.value)
        elif isinstance(s, For):
            check_expr(s.lower)
            check_expr(s.upper)
            for inner in s.body:
                check_stmt(inner)
        elif isinstance(s, If):
            check_expr(s.cond)
            for inner in s.then_body + s.else_body:
                check_stmt(inner)
        elif isinstance(s, Return) and s.value is not None:
            check_expr(s.value)

    for stmt in kernel.body:
        check_stmt(stmt)
    return problems


# --- JSON dump (debugging artifact) ------------------------------------------

def _type_str(t: Type | None) -> str:
    return "void" if t is None else str(t)


def _expr_dict(e: Expr) -> dict:
    if isinstance(e, IntLit):
        return {"kind": "int", "value": e.value}
    if isinstance(e, FloatLit):
        return {"kind": "float", "value": e.value}
    if isinstance(e, Var):
        return {"kind": "var", "name": e.name}
    if isinstance(e, Index):
        return {"kind": "index", "array": e.array, "index": _expr_dict(e.index)}
    if isinstance(e, BinOp):
        return {"kind": "binop", "op": e.op, "left": _expr_dict(e.left), "right": _expr_dict(e.right)}
    if isinstance(e, UnaryNeg):
        return {"kind": "neg", "operand": _expr_dict(e.operand)}
    raise TypeError(f"cannot serialize {type(e).__name__}")


def _stmt_dict(s: Stmt) -> dict:
    if isinstance(s, Assign):
        target = (
            {"kind": "var", "name": s.target.name}
            if isinstance(s.target, Var)
            else {"kind": "index", "array": s.target.array, "index": _expr_dict(s.target.index)}
        )
        return {"kind": "assign", "target": target, "value": _expr_dict(s.value)}
    if isinstance(s, For):
        return {
            "kind": "for",
            "loop_id": s.loop_id,
            "var": s.var,
            "lower": _expr_dict(s.lower),
            "upper": _expr_dict(s.upper),
            "body": [_stmt_dict(x) for x in s.body],
        }
    if isinstance(s, If):
        return {
            "kind": "if",
            "cond": _expr_dict(s.cond),
            "then": [_stmt_dict(x) for x in s.then_body],
            "else": [_stmt_dict(x) for x in s.else_body],
        }
    if isinstance(s, Return):
        return {"kind": "return", "value": None if s.value is None else _expr_dict(s.value)}
    raise TypeError(f"cannot serialize {type(s).__name__}")


def kernel_to_dict(kernel: KernelIR) -> dict:
    return {
        "name": kernel.name,
        "params": [[n, _type_str(t)] for n, t in kernel.params],
        "return_type": _type_str(kernel.return_type),
        "locals": [[n, _type_str(t)] for n, t in kernel.locals],
        "body": [_stmt_dict(s) for s in kernel.body],
        "directives": [
            {
                "kind": d.kind.value,
                "target": d.target,
                "ii": d.ii,
                "factor": d.factor,
                "dim": d.dim,
                "style": d.style.value if d.style else None,
            }
            for d in kernel.directives
        ],
    }
