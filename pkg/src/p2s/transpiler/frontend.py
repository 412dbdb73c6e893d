"""Frontend for the scripting-backend emission of verified programs.

The supported input is a frozen subset of what the Dafny compiler's Python
backend emits for simple numeric kernels:

* module-level imports (recorded, runtime ones dropped by ``sanitize``);
* at most a handful of wrapper classes whose methods are all
  ``@staticmethod`` (plus an empty ``__init__``), hoisted to top level;
* top-level functions over ints/floats/static arrays: assignments,
  ``for … in range(lo, hi)`` loops, ``while`` loops (parsed, rejected at
  lowering), ``if``/``else``, ``return``;
* int/float literals, names, single subscripts, arithmetic, comparisons,
  ``and``/``or``, unary minus, ``[c] * k`` and ``[e0, e1, …]`` initializers,
  and calls (``int``/``float``/``len``/``range``, runtime helpers, or
  module-local functions).

Anything outside the subset raises UnsupportedConstruct with the offending
line; files that do not parse at all raise SourceSyntaxError.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

from .ir import (
    Assign,
    BinOp,
    Call,
    Expr,
    FloatLit,
    For,
    If,
    Index,
    IntLit,
    ListLit,
    ListMul,
    Return,
    Stmt,
    UnaryNeg,
    Var,
    While,
)


class TranspilerError(Exception):
    pass


class SourceSyntaxError(TranspilerError):
    def __init__(self, line: int, detail: str = ""):
        super().__init__(f"syntax error at line {line}: {detail}".rstrip(": "))
        self.line = line


class UnsupportedConstruct(TranspilerError):
    def __init__(self, line: int, construct: str):
        super().__init__(f"unsupported construct at line {line}: {construct}")
        self.line = line
        self.construct = construct


class UnknownRuntimeCall(TranspilerError):
    def __init__(self, name: str):
        super().__init__(f"runtime helper {name!r} has no rewrite-table entry")
        self.name = name


@dataclass(frozen=True)
class Param:
    name: str
    annotation: str | None = None


@dataclass(frozen=True)
class FunctionAst:
    name: str
    params: tuple[Param, ...]
    body: tuple[Stmt, ...]


@dataclass(frozen=True)
class ClassAst:
    name: str
    methods: tuple[FunctionAst, ...]


@dataclass(frozen=True)
class ScriptAst:
    imports: tuple[str, ...]
    classes: tuple[ClassAst, ...]
    functions: tuple[FunctionAst, ...]


_BIN_OPS = {
    ast.Add: "+",
    ast.Sub: "-",
    ast.Mult: "*",
    ast.Div: "/",
    ast.FloorDiv: "/",
    ast.Mod: "%",
}
_CMP_OPS = {
    ast.Lt: "<",
    ast.LtE: "<=",
    ast.Gt: ">",
    ast.GtE: ">=",
    ast.Eq: "==",
    ast.NotEq: "!=",
}


def _call_name(node: ast.expr, line: int) -> str:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute) and isinstance(node.value, ast.Name):
        return f"{node.value.id}.{node.attr}"
    raise UnsupportedConstruct(line, "call target more complex than name or module.attr")


def _expr(node: ast.expr) -> Expr:
    line = getattr(node, "lineno", 0)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool):
            raise UnsupportedConstruct(line, "boolean literal")
        if isinstance(node.value, int):
            return IntLit(node.value)
        if isinstance(node.value, float):
            return FloatLit(node.value)
        raise UnsupportedConstruct(line, f"literal of type {type(node.value).__name__}")
    if isinstance(node, ast.Name):
        return Var(node.id)
    if isinstance(node, ast.Subscript):
        if not isinstance(node.value, ast.Name):
            raise UnsupportedConstruct(line, "subscript of a non-name (multi-dimensional access)")
        return Index(node.value.id, _expr(node.slice))
    if isinstance(node, ast.BinOp):
        if isinstance(node.left, ast.List) or isinstance(node.right, ast.List):
            if not isinstance(node.op, ast.Mult):
                raise UnsupportedConstruct(line, "list used outside an initializer")
            lst, count = (node.left, node.right) if isinstance(node.left, ast.List) else (node.right, node.left)
            if len(lst.elts) != 1:
                raise UnsupportedConstruct(line, "repetition of a multi-element list")
            return ListMul(_expr(lst.elts[0]), _expr(count))
        op = _BIN_OPS.get(type(node.op))
        if op is None:
            raise UnsupportedConstruct(line, f"operator {type(node.op).__name__}")
        return BinOp(op, _expr(node.left), _expr(node.right))
    if isinstance(node, ast.Compare):
        if len(node.ops) != 1 or len(node.comparators) != 1:
            raise UnsupportedConstruct(line, "chained comparison")
        op = _CMP_OPS.get(type(node.ops[0]))
        if op is None:
            raise UnsupportedConstruct(line, f"comparison {type(node.ops[0]).__name__}")
        return BinOp(op, _expr(node.left), _expr(node.comparators[0]))
    if isinstance(node, ast.BoolOp):
        op = "&&" if isinstance(node.op, ast.And) else "||"
        out = _expr(node.values[0])
        for value in node.values[1:]:
            out = BinOp(op, out, _expr(value))
        return out
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return UnaryNeg(_expr(node.operand))
        if isinstance(node.op, ast.UAdd):
            return _expr(node.operand)
        raise UnsupportedConstruct(line, f"unary {type(node.op).__name__}")
    if isinstance(node, ast.Call):
        if node.keywords:
            raise UnsupportedConstruct(line, "keyword arguments")
        name = _call_name(node.func, line)
        return Call(name, tuple(_expr(a) for a in node.args))
    if isinstance(node, ast.List):
        return ListLit(tuple(_expr(e) for e in node.elts))
    if isinstance(node, (ast.GeneratorExp, ast.ListComp, ast.SetComp, ast.DictComp)):
        raise UnsupportedConstruct(line, "comprehension/generator expression")
    raise UnsupportedConstruct(line, type(node).__name__)


def _target(node: ast.expr) -> Var | Index:
    line = getattr(node, "lineno", 0)
    if isinstance(node, ast.Name):
        return Var(node.id)
    if isinstance(node, ast.Subscript) and isinstance(node.value, ast.Name):
        return Index(node.value.id, _expr(node.slice))
    raise UnsupportedConstruct(line, "assignment target")


def _stmts(nodes: list[ast.stmt]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for node in nodes:
        line = node.lineno
        if isinstance(node, ast.Assign):
            if len(node.targets) != 1:
                raise UnsupportedConstruct(line, "multiple assignment targets")
            out.append(Assign(_target(node.targets[0]), _expr(node.value)))
        elif isinstance(node, ast.AnnAssign):
            if node.value is None:
                raise UnsupportedConstruct(line, "annotation without a value")
            out.append(Assign(_target(node.target), _expr(node.value)))
        elif isinstance(node, ast.AugAssign):
            op = _BIN_OPS.get(type(node.op))
            if op is None:
                raise UnsupportedConstruct(line, f"augmented {type(node.op).__name__}")
            target = _target(node.target)
            as_expr = Var(target.name) if isinstance(target, Var) else target
            out.append(Assign(target, BinOp(op, as_expr, _expr(node.value))))
        elif isinstance(node, ast.For):
            if node.orelse:
                raise UnsupportedConstruct(line, "for/else")
            if not isinstance(node.target, ast.Name):
                raise UnsupportedConstruct(line, "loop target unpacking")
            it = node.iter
            if not (isinstance(it, ast.Call) and isinstance(it.func, ast.Name) and it.func.id == "range"):
                raise UnsupportedConstruct(line, "for over something other than range")
            if len(it.args) == 1:
                lower, upper = IntLit(0), _expr(it.args[0])
            elif len(it.args) == 2:
                lower, upper = _expr(it.args[0]), _expr(it.args[1])
            else:
                raise UnsupportedConstruct(line, "range with a step")
            out.append(For(node.target.id, lower, upper, _stmts(node.body)))
        elif isinstance(node, ast.While):
            if node.orelse:
                raise UnsupportedConstruct(line, "while/else")
            out.append(While(_expr(node.test), _stmts(node.body)))
        elif isinstance(node, ast.If):
            out.append(If(_expr(node.test), _stmts(node.body), _stmts(node.orelse)))
        elif isinstance(node, ast.Return):
            out.append(Return(None if node.value is None else _expr(node.value)))
        elif isinstance(node, ast.Pass):
            continue
        elif isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant) and isinstance(node.value.value, str):
            continue  # docstring
        else:
            raise UnsupportedConstruct(line, type(node).__name__)
    return tuple(out)


def _annotation_str(node: ast.expr | None) -> str | None:
    if node is None:
        return None
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return node.value
    raise UnsupportedConstruct(getattr(node, "lineno", 0), "parameter annotation")


def _function(node: ast.FunctionDef) -> FunctionAst:
    args = node.args
    if args.vararg or args.kwarg or args.kwonlyargs or args.posonlyargs or args.defaults:
        raise UnsupportedConstruct(node.lineno, "non-positional or defaulted parameters")
    params = tuple(Param(a.arg, _annotation_str(a.annotation)) for a in args.args)
    return FunctionAst(name=node.name, params=params, body=_stmts(node.body))


def _is_trivial_init(node: ast.FunctionDef) -> bool:
    if node.name != "__init__":
        return False
    body = [s for s in node.body if not isinstance(s, ast.Pass)]
    body = [
        s
        for s in body
        if not (isinstance(s, ast.Expr) and isinstance(s.value, ast.Constant))
    ]
    return not body


def parse_compiled_source(text: str) -> ScriptAst:
    """Parse scripting-backend emission text into a ScriptAst.

    Raises SourceSyntaxError when the text does not parse (or is empty) and
    UnsupportedConstruct for syntax outside the documented subset.
    """
    try:
        module = ast.parse(text)
    except SyntaxError as exc:
        raise SourceSyntaxError(exc.lineno or 1, exc.msg or "") from exc
    if not module.body:
        raise SourceSyntaxError(1, "empty file")

    imports: list[str] = []
    classes: list[ClassAst] = []
    functions: list[FunctionAst] = []
    for node in module.body:
        if isinstance(node, ast.Import):
            imports.extend(alias.name for alias in node.names)
        elif isinstance(node, ast.ImportFrom):
            imports.append(node.module or "")
        elif isinstance(node, ast.ClassDef):
            if node.bases or node.keywords or node.decorator_list:
                raise UnsupportedConstruct(node.lineno, "class with bases or decorators")
            methods: list[FunctionAst] = []
            for item in node.body:
                if isinstance(item, ast.Pass):
                    continue
                if isinstance(item, ast.Expr) and isinstance(item.value, ast.Constant):
                    continue  # docstring
                if not isinstance(item, ast.FunctionDef):
                    raise UnsupportedConstruct(item.lineno, "class-level statement")
                if _is_trivial_init(item):
                    continue
                decorators = [
                    d.id for d in item.decorator_list if isinstance(d, ast.Name)
                ]
                if len(decorators) != len(item.decorator_list) or decorators not in ([], ["staticmethod"]):
                    raise UnsupportedConstruct(item.lineno, "method decorator")
                if not decorators and item.name != "__init__":
                    raise UnsupportedConstruct(item.lineno, "instance method (only @staticmethod supported)")
                methods.append(_function(item))
            classes.append(ClassAst(name=node.name, methods=tuple(methods)))
        elif isinstance(node, ast.FunctionDef):
            if node.decorator_list:
                raise UnsupportedConstruct(node.lineno, "function decorator")
            functions.append(_function(node))
        elif isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
            continue  # module docstring
        else:
            raise UnsupportedConstruct(node.lineno, type(node).__name__)
    return ScriptAst(imports=tuple(imports), classes=tuple(classes), functions=tuple(functions))


# Imports the backend emits that have no meaning after sanitization: the
# Dafny runtime itself plus the stdlib helpers its preamble pulls in.
DAFNY_RUNTIME_MODULES = ("_dafny", "System_", "_System", "module_")
_PREAMBLE_MODULES = ("sys", "typing", "math", "itertools", "functools")
DROPPED_IMPORTS = DAFNY_RUNTIME_MODULES + _PREAMBLE_MODULES

# Rewrite table for runtime helper calls. Dafny integer division/modulus are
# Euclidean; they are narrowed here to the IR's C-style operators, and test
# vectors are chosen within ranges where the two semantics agree.
RUNTIME_CALL_REWRITES: dict[str, str] = {
    "_dafny.euclidian_division": "/",
    "_dafny.euclidian_modulus": "%",
}


def _module_of(call_name: str) -> str | None:
    return call_name.split(".", 1)[0] if "." in call_name else None


def _rewrite_expr(e: Expr, wrapper_names: frozenset[str]) -> Expr:
    if isinstance(e, Call):
        args = tuple(_rewrite_expr(a, wrapper_names) for a in e.args)
        module = _module_of(e.func)
        if e.func in RUNTIME_CALL_REWRITES:
            if len(args) != 2:
                raise UnknownRuntimeCall(e.func)
            return BinOp(RUNTIME_CALL_REWRITES[e.func], args[0], args[1])
        if module in DAFNY_RUNTIME_MODULES:
            raise UnknownRuntimeCall(e.func)
        if module is not None and module in wrapper_names:
            # static-method call through a hoisted wrapper class
            return Call(e.func.split(".", 1)[1], args)
        return Call(e.func, args)
    if isinstance(e, BinOp):
        return BinOp(e.op, _rewrite_expr(e.left, wrapper_names), _rewrite_expr(e.right, wrapper_names))
    if isinstance(e, UnaryNeg):
        return UnaryNeg(_rewrite_expr(e.operand, wrapper_names))
    if isinstance(e, Index):
        return Index(e.array, _rewrite_expr(e.index, wrapper_names))
    if isinstance(e, ListLit):
        return ListLit(tuple(_rewrite_expr(x, wrapper_names) for x in e.items))
    if isinstance(e, ListMul):
        return ListMul(_rewrite_expr(e.item, wrapper_names), _rewrite_expr(e.count, wrapper_names))
    return e


def _rewrite_stmts(stmts: tuple[Stmt, ...], wrapper_names: frozenset[str]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, Assign):
            target = s.target
            if isinstance(target, Index):
                target = Index(target.array, _rewrite_expr(target.index, wrapper_names))
            out.append(Assign(target, _rewrite_expr(s.value, wrapper_names)))
        elif isinstance(s, For):
            out.append(
                For(s.var, _rewrite_expr(s.lower, wrapper_names),
                    _rewrite_expr(s.upper, wrapper_names),
                    _rewrite_stmts(s.body, wrapper_names))
            )
        elif isinstance(s, While):
            out.append(While(_rewrite_expr(s.cond, wrapper_names),
                             _rewrite_stmts(s.body, wrapper_names)))
        elif isinstance(s, If):
            out.append(
                If(_rewrite_expr(s.cond, wrapper_names),
                   _rewrite_stmts(s.then_body, wrapper_names),
                   _rewrite_stmts(s.else_body, wrapper_names))
            )
        elif isinstance(s, Return):
            out.append(Return(None if s.value is None else _rewrite_expr(s.value, wrapper_names)))
        else:
            out.append(s)
    return tuple(out)


def _rewrite_function(fn: FunctionAst, wrapper_names: frozenset[str]) -> FunctionAst:
    return FunctionAst(name=fn.name, params=fn.params, body=_rewrite_stmts(fn.body, wrapper_names))


def sanitize(script: ScriptAst) -> ScriptAst:
    """Strip runtime dependencies from a parsed emission.

    Drops runtime/preamble imports, hoists static methods out of wrapper
    classes to top level (rewriting ``Wrapper.fn(...)`` calls to plain
    ``fn(...)``), and rewrites runtime arithmetic helpers into native
    operators per the fixed rewrite table. Idempotent; raises
    UnknownRuntimeCall for runtime helpers with no table entry.
    """
    wrapper_names = frozenset(cls.name for cls in script.classes)
    imports = tuple(name for name in script.imports if name not in DROPPED_IMPORTS)
    functions: list[FunctionAst] = [_rewrite_function(f, wrapper_names) for f in script.functions]
    seen = {f.name for f in functions}
    for cls in script.classes:
        for fn in cls.methods:
            if fn.name in seen:
                raise TranspilerError(
                    f"hoisting {cls.name}.{fn.name} collides with an existing function"
                )
            functions.append(_rewrite_function(fn, wrapper_names))
            seen.add(fn.name)
    return ScriptAst(imports=imports, classes=(), functions=tuple(functions))
