"""HLS C emission: one kernel function plus a self-checking testbench.

Output is deterministic byte-for-byte for a given kernel. Directives are
emitted as vendor pragmas: loop directives (PIPELINE/UNROLL) as the first
statements of their loop body, array partitioning at the top of the
function body.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .frontend import TranspilerError
from .ir import (
    ArrayType,
    Assign,
    BinOp,
    Directive,
    DirectiveKind,
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
    Type,
    UnaryNeg,
    Var,
)

_C_TYPES = {"int32": "int32_t", "float32": "float"}

_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    "<=": 4,
    ">": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}
_UNARY_PREC = 7


def _float_lit(value: float) -> str:
    text = repr(float(value))
    return f"{text}f"


def _emit_expr(e: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, FloatLit):
        return _float_lit(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.array}[{_emit_expr(e.index)}]"
    if isinstance(e, UnaryNeg):
        inner = _emit_expr(e.operand, _UNARY_PREC)
        return f"-{inner}"
    if isinstance(e, BinOp):
        prec = _PRECEDENCE[e.op]
        left = _emit_expr(e.left, prec, right_side=False)
        right = _emit_expr(e.right, prec, right_side=True)
        text = f"{left} {e.op} {right}"
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({text})"
        return text
    raise TranspilerError(f"cannot emit expression {type(e).__name__}")


def _c_type(t: Type | None) -> str:
    if t is None:
        return "void"
    if isinstance(t, Scalar):
        return _C_TYPES[t.kind]
    return _C_TYPES[t.elem]


def _param_decl(name: str, t: Type) -> str:
    if isinstance(t, ArrayType):
        return f"{_C_TYPES[t.elem]} {name}[{t.length}]"
    return f"{_c_type(t)} {name}"


def _loop_pragmas(loop_id: str, directives: tuple[Directive, ...]) -> list[str]:
    out = []
    for d in directives:
        if d.target != loop_id:
            continue
        if d.kind is DirectiveKind.PIPELINE:
            out.append(f"#pragma HLS PIPELINE II={d.ii}")
        elif d.kind is DirectiveKind.UNROLL:
            out.append(f"#pragma HLS UNROLL factor={d.factor}")
    return out


def _partition_pragmas(kernel: KernelIR) -> list[str]:
    out = []
    for d in kernel.directives:
        if d.kind is DirectiveKind.ARRAY_PARTITION:
            out.append(
                f"#pragma HLS ARRAY_PARTITION variable={d.target} "
                f"{d.style.value} factor={d.factor} dim={d.dim}"
            )
    return out


def _emit_stmt(s: Stmt, indent: int, lines: list[str], kernel: KernelIR):
    pad = "    " * indent
    if isinstance(s, Assign):
        target = s.target.name if isinstance(s.target, Var) else (
            f"{s.target.array}[{_emit_expr(s.target.index)}]"
        )
        lines.append(f"{pad}{target} = {_emit_expr(s.value)};")
    elif isinstance(s, For):
        var = s.var
        lo = _emit_expr(s.lower)
        hi = _emit_expr(s.upper)
        lines.append(f"{pad}for (int32_t {var} = {lo}; {var} < {hi}; {var}++) {{")
        for pragma in _loop_pragmas(s.loop_id or "", kernel.directives):
            lines.append(f"{pad}    {pragma}")
        for inner in s.body:
            _emit_stmt(inner, indent + 1, lines, kernel)
        lines.append(f"{pad}}}")
    elif isinstance(s, If):
        lines.append(f"{pad}if ({_emit_expr(s.cond)}) {{")
        for inner in s.then_body:
            _emit_stmt(inner, indent + 1, lines, kernel)
        if s.else_body:
            lines.append(f"{pad}}} else {{")
            for inner in s.else_body:
                _emit_stmt(inner, indent + 1, lines, kernel)
        lines.append(f"{pad}}}")
    elif isinstance(s, Return):
        if s.value is None:
            lines.append(f"{pad}return;")
        else:
            lines.append(f"{pad}return {_emit_expr(s.value)};")
    else:
        raise TranspilerError(f"cannot emit statement {type(s).__name__}")


def _signature(kernel: KernelIR) -> str:
    params = ", ".join(_param_decl(n, t) for n, t in kernel.params)
    return f"{_c_type(kernel.return_type)} {kernel.name}({params or 'void'})"


def emit_kernel(kernel: KernelIR) -> str:
    lines = ["#include <stdint.h>", "", f"{_signature(kernel)} {{"]
    for pragma in _partition_pragmas(kernel):
        lines.append(f"    {pragma}")
    for name, t in kernel.locals:
        if isinstance(t, ArrayType):
            lines.append(f"    {_C_TYPES[t.elem]} {name}[{t.length}];")
        else:
            lines.append(f"    {_c_type(t)} {name};")
    for s in kernel.body:
        _emit_stmt(s, 1, lines, kernel)
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- test vectors / testbench -------------------------------------------------

@dataclass(frozen=True)
class TestCase:
    inputs: tuple
    expected: object


@dataclass(frozen=True)
class TestVectors:
    cases: tuple[TestCase, ...]

    @staticmethod
    def from_json(text: str) -> "TestVectors":
        data = json.loads(text)
        cases = tuple(
            TestCase(inputs=tuple(c["in"]), expected=c["out"]) for c in data["cases"]
        )
        return TestVectors(cases=cases)

    @staticmethod
    def load(path: str | Path) -> "TestVectors":
        return TestVectors.from_json(Path(path).read_text(encoding="utf-8"))


def _c_value(value, t: Type) -> str:
    if isinstance(t, Scalar) and t.kind == "float32":
        return _float_lit(value)
    return str(int(value))


def _case_block(kernel: KernelIR, idx: int, case: TestCase) -> list[str]:
    lines = [f"    {{  /* case {idx} */"]
    args = []
    out_array: tuple[str, ArrayType] | None = None
    for (name, t), value in zip(kernel.params, case.inputs):
        local = f"c{idx}_{name}"
        if isinstance(t, ArrayType):
            init = ", ".join(_c_value(v, Scalar(t.elem)) for v in value)
            lines.append(f"        {_C_TYPES[t.elem]} {local}[{t.length}] = {{{init}}};")
            args.append(local)
            out_array = (local, t)
        else:
            lines.append(f"        {_c_type(t)} {local} = {_c_value(value, t)};")
            args.append(local)
    call = f"{kernel.name}({', '.join(args)})"
    if kernel.return_type is not None:
        ret_c = _c_type(kernel.return_type)
        lines.append(f"        {ret_c} result = {call};")
        expected = _c_value(case.expected, kernel.return_type)
        fmt, cast = ("%f", "(double)") if ret_c == "float" else ("%ld", "(long)")
        lines.append(f"        if (result != {expected}) {{")
        lines.append(
            f'            printf("case {idx}: expected {expected}, got {fmt}\\n", {cast}result);'
        )
        lines.append("            failures = failures + 1;")
        lines.append("        }")
    else:
        if out_array is None:
            raise TranspilerError("void kernel has no array parameter to check")
        local, t = out_array
        lines.append(f"        {call};")
        expected_vals = list(case.expected)
        for j, v in enumerate(expected_vals):
            ev = _c_value(v, Scalar(t.elem))
            fmt, cast = ("%f", "(double)") if t.elem == "float32" else ("%ld", "(long)")
            lines.append(f"        if ({local}[{j}] != {ev}) {{")
            lines.append(
                f'            printf("case {idx}[{j}]: expected {ev}, got {fmt}\\n", {cast}{local}[{j}]);'
            )
            lines.append("            failures = failures + 1;")
            lines.append("        }")
    lines.append("    }")
    return lines


def emit_testbench(kernel: KernelIR, vectors: TestVectors | None) -> str:
    """A main() that runs the committed test vectors and returns nonzero on
    any mismatch. The last array parameter is treated as the output of a
    void kernel."""
    cases = vectors.cases if vectors else ()
    lines = [
        "#include <stdio.h>",
        "#include <stdint.h>",
        "",
        f"{_signature(kernel)};",
        "",
        "int main(void) {",
        "    int failures = 0;",
    ]
    for idx, case in enumerate(cases):
        lines.extend(_case_block(kernel, idx, case))
    lines.extend(
        [
            "    if (failures != 0) {",
            '        printf("%d case(s) failed\\n", failures);',
            "        return 1;",
            "    }",
            f'    printf("all {len(cases)} case(s) passed\\n");',
            "    return 0;",
            "}",
        ]
    )
    return "\n".join(lines) + "\n"


def emit_hls(kernel: KernelIR, vectors: TestVectors | None = None) -> tuple[str, str]:
    """Emit (kernel source, testbench source) for an annotated kernel."""
    return emit_kernel(kernel), emit_testbench(kernel, vectors)
