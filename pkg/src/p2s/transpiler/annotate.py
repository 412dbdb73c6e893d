"""Hardware directive annotation.

Default policy: innermost loops are pipelined at II=1; loops with a constant
trip count of at most ``unroll_limit`` are fully unrolled instead (unroll
supersedes pipeline on fully unrolled loops); arrays indexed inside unrolled
loops get cyclic partitioning with the unroll factor. Any default can be
replaced per target through ``DirectivePolicy.overrides``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frontend import TranspilerError
from .ir import (
    Assign,
    Directive,
    DirectiveKind,
    For,
    If,
    Index,
    KernelIR,
    PartitionStyle,
    Return,
    BinOp,
    UnaryNeg,
    Expr,
    Stmt,
)
from .lower import fold_int


class InvalidDirectiveTarget(TranspilerError):
    def __init__(self, target: str):
        super().__init__(f"directive target {target!r} does not exist in the kernel")
        self.target = target


@dataclass(frozen=True)
class DirectivePolicy:
    pipeline_ii: int = 1
    unroll_limit: int = 8
    partition_style: PartitionStyle = PartitionStyle.CYCLIC
    overrides: tuple[Directive, ...] = ()


DEFAULT_POLICY = DirectivePolicy()


@dataclass
class _LoopInfo:
    loop_id: str
    trip_count: int | None
    innermost: bool
    arrays_indexed: tuple[str, ...]


def _arrays_in_expr(e: Expr, out: set[str]):
    if isinstance(e, Index):
        out.add(e.array)
        _arrays_in_expr(e.index, out)
    elif isinstance(e, BinOp):
        _arrays_in_expr(e.left, out)
        _arrays_in_expr(e.right, out)
    elif isinstance(e, UnaryNeg):
        _arrays_in_expr(e.operand, out)


def _arrays_in_stmts(stmts: tuple[Stmt, ...], out: set[str]):
    for s in stmts:
        if isinstance(s, Assign):
            if isinstance(s.target, Index):
                out.add(s.target.array)
                _arrays_in_expr(s.target.index, out)
            _arrays_in_expr(s.value, out)
        elif isinstance(s, For):
            _arrays_in_expr(s.lower, out)
            _arrays_in_expr(s.upper, out)
            _arrays_in_stmts(s.body, out)
        elif isinstance(s, If):
            _arrays_in_expr(s.cond, out)
            _arrays_in_stmts(s.then_body, out)
            _arrays_in_stmts(s.else_body, out)
        elif isinstance(s, Return) and s.value is not None:
            _arrays_in_expr(s.value, out)


def _has_nested_loop(stmts: tuple[Stmt, ...]) -> bool:
    for s in stmts:
        if isinstance(s, For):
            return True
        if isinstance(s, If) and (_has_nested_loop(s.then_body) or _has_nested_loop(s.else_body)):
            return True
    return False


def _collect_loops(stmts: tuple[Stmt, ...], out: list[_LoopInfo]):
    for s in stmts:
        if isinstance(s, For):
            lo, hi = fold_int(s.lower), fold_int(s.upper)
            trip = max(0, hi - lo) if lo is not None and hi is not None else None
            arrays: set[str] = set()
            _arrays_in_stmts(s.body, arrays)
            out.append(
                _LoopInfo(
                    loop_id=s.loop_id or "?",
                    trip_count=trip,
                    innermost=not _has_nested_loop(s.body),
                    arrays_indexed=tuple(sorted(arrays)),
                )
            )
            _collect_loops(s.body, out)
        elif isinstance(s, If):
            _collect_loops(s.then_body, out)
            _collect_loops(s.else_body, out)


def annotate(kernel: KernelIR, policy: DirectivePolicy = DEFAULT_POLICY) -> KernelIR:
    """Attach directives per the policy; returns a new kernel."""
    loops: list[_LoopInfo] = []
    _collect_loops(kernel.body, loops)
    known_targets = set(kernel.loop_ids()) | set(kernel.array_names())

    directives: list[Directive] = []
    partition_factor: dict[str, int] = {}
    for info in loops:
        unrolled = info.trip_count is not None and 1 <= info.trip_count <= policy.unroll_limit
        if unrolled:
            directives.append(
                Directive(DirectiveKind.UNROLL, info.loop_id, factor=info.trip_count)
            )
            for arr in info.arrays_indexed:
                factor = max(partition_factor.get(arr, 0), info.trip_count)
                partition_factor[arr] = factor
        elif info.innermost:
            directives.append(
                Directive(DirectiveKind.PIPELINE, info.loop_id, ii=policy.pipeline_ii)
            )
    for arr in sorted(partition_factor):
        directives.append(
            Directive(
                DirectiveKind.ARRAY_PARTITION,
                arr,
                factor=partition_factor[arr],
                dim=1,
                style=policy.partition_style,
            )
        )

    for override in policy.overrides:
        if override.target not in known_targets:
            raise InvalidDirectiveTarget(override.target)
        directives = [
            d for d in directives
            if not (d.kind is override.kind and d.target == override.target)
        ]
        directives.append(override)

    # Deterministic order: loop directives in loop order, partitions next,
    # overrides as appended; assert the one-per-(kind, target) invariant.
    seen: set[tuple[DirectiveKind, str]] = set()
    for d in directives:
        key = (d.kind, d.target)
        if key in seen:
            raise TranspilerError(f"duplicate directive {d.kind.value} on {d.target}")
        seen.add(key)
    return kernel.with_directives(tuple(directives))
