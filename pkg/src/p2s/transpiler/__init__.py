"""Lowering pipeline from scripting-backend emissions to synthesizable C.

Stages: parse_compiled_source -> sanitize -> lower -> annotate -> emit_hls,
with ``interpret`` as the functional oracle over the lowered IR.
"""

from .annotate import DEFAULT_POLICY, DirectivePolicy, InvalidDirectiveTarget, annotate
from .emit import TestCase, TestVectors, emit_hls, emit_kernel, emit_testbench
from .frontend import (
    ClassAst,
    FunctionAst,
    Param,
    ScriptAst,
    SourceSyntaxError,
    TranspilerError,
    UnknownRuntimeCall,
    UnsupportedConstruct,
    parse_compiled_source,
    sanitize,
)
from .interp import EvalFailure, EvaluationError, interpret
from .ir import (
    ArrayType,
    Directive,
    DirectiveKind,
    KernelIR,
    PartitionStyle,
    Scalar,
    kernel_to_dict,
    validate_lowered,
)
from .lower import Rejected, RejectionReason, lower, snake_case


def transpile_source(
    text: str,
    policy: DirectivePolicy = DEFAULT_POLICY,
    vectors: TestVectors | None = None,
) -> tuple[KernelIR, str, str]:
    """Full pipeline on emission text: returns (annotated kernel, C, testbench)."""
    kernel = annotate(lower(sanitize(parse_compiled_source(text))), policy)
    kernel_src, tb_src = emit_hls(kernel, vectors)
    return kernel, kernel_src, tb_src


__all__ = [
    "ArrayType",
    "ClassAst",
    "DEFAULT_POLICY",
    "Directive",
    "DirectiveKind",
    "DirectivePolicy",
    "EvalFailure",
    "EvaluationError",
    "FunctionAst",
    "InvalidDirectiveTarget",
    "KernelIR",
    "Param",
    "PartitionStyle",
    "Rejected",
    "RejectionReason",
    "Scalar",
    "ScriptAst",
    "SourceSyntaxError",
    "TestCase",
    "TestVectors",
    "TranspilerError",
    "UnknownRuntimeCall",
    "UnsupportedConstruct",
    "annotate",
    "emit_hls",
    "emit_kernel",
    "emit_testbench",
    "interpret",
    "kernel_to_dict",
    "lower",
    "parse_compiled_source",
    "sanitize",
    "snake_case",
    "transpile_source",
    "validate_lowered",
]
