"""Parsers that turn raw planner output into executable plan structures.

Four textual plan formats are covered:

* source plans: "Plan: ..." description lines paired with variable
  assignments like ``#So1 = PERSONA[context]`` (the sigil is configurable,
  ``#So`` and ``#E`` are the two in use);
* strategy plans: alternating ``Plan: <name>`` / ``Do: <fragment>`` lines;
* reasoning/acting steps: the newest ``Thought:``/``Action:`` continuation
  of a scratchpad, where the action is a bracketed tool call, a bare
  strategy name, or ``Finish[response]``;
* module lists: ``Modules: ["A", "B"]`` (or ``Strategies: [...]``).

Parsing is line-oriented (lines are "\n"-separated; other Unicode line
breaks are ordinary characters) and case-sensitive on keywords, tolerant of
surrounding whitespace, and ignores prose before and after the structured
region. Parsers are pure and never raise anything but ParseError /
DanglingReference on arbitrary input.

Validation against a toolset is separate from parsing: unknown source names
fail validation with UnknownTool, while unknown strategy names are kept;
models invent combined strategies and the distribution analysis wants them
verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from conductor.core import EvidenceStore, ToolSet
from conductor.errors import (
    DanglingReference,
    ParseError,
    UnboundVariable,
    UnknownTool,
)

CONTEXT_KEYWORD = "context"


# ---------------------------------------------------------------------------
# Query segments


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class ContextRef:
    """The whole dialogue context used as the retrieval query."""


@dataclass(frozen=True)
class VarRef:
    name: str  # e.g. "So1" / "E2" (no leading '#')


Segment = Union[Literal, ContextRef, VarRef]


@dataclass(frozen=True)
class QuerySpec:
    parts: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("query needs at least one segment")

    def var_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parts if isinstance(p, VarRef))


@dataclass(frozen=True)
class SourcePlanStep:
    description: str
    source_name: str
    output_var: str
    query: QuerySpec


@dataclass(frozen=True)
class SourcePlanProgram:
    steps: tuple[SourcePlanStep, ...]

    def validate_sources(self, toolset: ToolSet, aliases: dict[str, str]) -> None:
        """Every step's source must resolve to a tool in the active set."""
        known = {name.lower() for name in toolset.names()}
        for step in self.steps:
            resolved = aliases.get(step.source_name.lower(), step.source_name.lower())
            if resolved not in known:
                raise UnknownTool(step.source_name)


@dataclass(frozen=True)
class StrategyPlanStep:
    strategy_name: str
    fragment: str

    def __post_init__(self) -> None:
        if not self.fragment:
            raise ValueError("strategy fragment must be non-empty")


@dataclass(frozen=True)
class ToolCall:
    name: str
    argument: str


@dataclass(frozen=True)
class StrategyCall:
    name: str


@dataclass(frozen=True)
class Finish:
    response: str


Action = Union[ToolCall, StrategyCall, Finish]


@dataclass(frozen=True)
class ReActStep:
    thought: str
    action: Action


# ---------------------------------------------------------------------------
# Source plans


def _parse_query(content: str, sigil: str) -> QuerySpec:
    stripped = content.strip()
    if stripped == CONTEXT_KEYWORD:
        return QuerySpec((ContextRef(),))
    pattern = re.compile(re.escape(sigil) + r"\d+")
    parts: list[Segment] = []
    pos = 0
    for match in pattern.finditer(stripped):
        literal = stripped[pos : match.start()].strip()
        if literal:
            parts.append(Literal(literal))
        parts.append(VarRef(match.group()[1:]))  # drop the leading '#'
        pos = match.end()
    tail = stripped[pos:].strip()
    if tail:
        parts.append(Literal(tail))
    if not parts:
        parts.append(Literal(""))
    return QuerySpec(tuple(parts))


def parse_source_plan(text: str, sigil: str = "#So") -> SourcePlanProgram:
    """Parse "(Plan line, assignment line)" pairs into a straight-line program.

    A leading Thought block (or any prose before the first structured line)
    is ignored; so is prose after the final assignment. A bare assignment
    without a preceding Plan line gets an empty description. Forward or
    unknown variable references raise DanglingReference.
    """
    if not sigil.startswith("#") or len(sigil) < 2:
        raise ValueError("sigil must be a '#'-prefixed name like '#So' or '#E'")
    assign_re = re.compile(
        r"^\s*" + re.escape(sigil) + r"(\d+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\[(.*)\]\s*$"
    )
    plan_re = re.compile(r"^\s*Plan:\s*(.*)$")

    steps: list[SourcePlanStep] = []
    defined: list[str] = []
    last_index = 0
    pending_desc: str | None = None
    pending_line = 0

    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        plan_match = plan_re.match(line)
        assign_match = assign_re.match(line)
        if plan_match:
            if pending_desc is not None:
                raise ParseError(line_no, "Plan line without a following assignment")
            pending_desc = plan_match.group(1).strip()
            pending_line = line_no
            continue
        if assign_match:
            index = int(assign_match.group(1))
            if index <= last_index:
                raise ParseError(
                    line_no,
                    f"variable index {index} does not increase (last was {last_index})",
                )
            var_name = sigil[1:] + assign_match.group(1)
            query = _parse_query(assign_match.group(3), sigil)
            for ref in query.var_names():
                if ref not in defined:
                    raise DanglingReference(ref)
            steps.append(
                SourcePlanStep(
                    description=pending_desc or "",
                    source_name=assign_match.group(2),
                    output_var=var_name,
                    query=query,
                )
            )
            defined.append(var_name)
            last_index = index
            pending_desc = None
            continue
        # Prose: ignored whether it precedes the plan (thought) or trails it.
        continue

    if pending_desc is not None:
        raise ParseError(pending_line, "Plan line without a following assignment")
    if not steps:
        raise ParseError(1, "empty plan")
    return SourcePlanProgram(tuple(steps))


def render_source_plan(program: SourcePlanProgram, sigil: str = "#So") -> str:
    """Inverse of parse_source_plan, in the textual format the planner emits."""
    lines: list[str] = []
    for step in program.steps:
        if step.description:
            lines.append(f"Plan: {step.description}")
        rendered_parts: list[str] = []
        for part in step.query.parts:
            if isinstance(part, ContextRef):
                rendered_parts.append(CONTEXT_KEYWORD)
            elif isinstance(part, VarRef):
                rendered_parts.append(f"#{part.name}")
            else:
                rendered_parts.append(part.text)
        query_text = " ".join(p for p in rendered_parts if p)
        lines.append(f"#{step.output_var} = {step.source_name}[{query_text}]")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Strategy plans


_PLAN_LINE = re.compile(r"^\s*Plan:\s*(.*?)\s*$")
_DO_LINE = re.compile(r"^\s*Do:\s*(.*?)\s*$")


def parse_strategy_plan(text: str) -> tuple[StrategyPlanStep, ...]:
    """Pair each "Plan: <name>" line with the following "Do: <fragment>" line.

    Order and duplicates are preserved: the same strategy may appear several
    times in one plan and each occurrence keeps its own fragment.
    """
    steps: list[StrategyPlanStep] = []
    pending: str | None = None
    pending_line = 0
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        plan_match = _PLAN_LINE.match(line)
        do_match = _DO_LINE.match(line)
        if plan_match:
            if pending is not None:
                raise ParseError(line_no, "Plan line without a following Do line")
            pending = plan_match.group(1)
            pending_line = line_no
            if not pending:
                raise ParseError(line_no, "Plan line names no strategy")
        elif do_match:
            if pending is None:
                raise ParseError(line_no, "Do line without a preceding Plan line")
            fragment = do_match.group(1)
            if not fragment:
                raise ParseError(line_no, "Do line carries no fragment")
            steps.append(StrategyPlanStep(strategy_name=pending, fragment=fragment))
            pending = None
        # other lines: leading thought or trailing prose, ignored
    if pending is not None:
        raise ParseError(pending_line, "Plan line without a following Do line")
    if not steps:
        raise ParseError(1, "no strategy steps found")
    return tuple(steps)


def render_strategy_plan(steps: tuple[StrategyPlanStep, ...]) -> str:
    lines: list[str] = []
    for step in steps:
        lines.append(f"Plan: {step.strategy_name}")
        lines.append(f"Do: {step.fragment}")
    return "\n".join(lines)


def unknown_strategy_names(
    steps: tuple[StrategyPlanStep, ...], toolset: ToolSet
) -> tuple[str, ...]:
    """Names not present in the toolset; recorded, never fatal."""
    known = set(toolset.names())
    seen: list[str] = []
    for step in steps:
        if step.strategy_name not in known and step.strategy_name not in seen:
            seen.append(step.strategy_name)
    return tuple(seen)


# ---------------------------------------------------------------------------
# ReAct steps


_THOUGHT_LINE = re.compile(r"^\s*Thought:\s*(.*?)\s*$")
_ACTION_LINE = re.compile(r"^\s*Action:\s*(.*?)\s*$")


def parse_react_step(text: str) -> ReActStep:
    """Extract the final Thought and Action from the newest continuation.

    ``Finish[...]`` and ``Name[arg]`` take the bracket content up to the last
    closing bracket on the line, so responses containing brackets survive.
    A bare action name is a strategy call.
    """
    thought = ""
    action_text: str | None = None
    action_line = 0
    for line_no, line in enumerate(text.split("\n"), start=1):
        thought_match = _THOUGHT_LINE.match(line)
        if thought_match:
            thought = thought_match.group(1)
            continue
        action_match = _ACTION_LINE.match(line)
        if action_match:
            action_text = action_match.group(1)
            action_line = line_no
    if action_text is None:
        raise ParseError(1, "no Action line present")
    if not action_text:
        raise ParseError(action_line, "Action line names no action")

    open_idx = action_text.find("[")
    if open_idx > 0:
        close_idx = action_text.rfind("]")
        if close_idx < open_idx:
            raise ParseError(action_line, "unclosed bracket in action")
        name = action_text[:open_idx].strip()
        argument = action_text[open_idx + 1 : close_idx]
        if not name:
            raise ParseError(action_line, "bracketed action has no name")
        if name == "Finish":
            return ReActStep(thought=thought, action=Finish(argument))
        return ReActStep(thought=thought, action=ToolCall(name=name, argument=argument))
    if "[" in action_text or "]" in action_text:
        raise ParseError(action_line, "malformed brackets in action")
    return ReActStep(thought=thought, action=StrategyCall(action_text))


# ---------------------------------------------------------------------------
# Module lists


_MODULE_LIST = re.compile(r"(?:Modules|Strategies)\s*:\s*\[([^\]]*)\]")
_QUOTED_NAME = re.compile(r"""["']([^"']+)["']""")


def parse_module_list(text: str) -> tuple[str, ...]:
    """Module names from a ``Modules: ["A", "B"]`` (or Strategies:) line."""
    match = _MODULE_LIST.search(text)
    if not match:
        raise ParseError(1, "no Modules/Strategies list found")
    names = tuple(m.group(1) for m in _QUOTED_NAME.finditer(match.group(1)))
    if not names:
        raise ParseError(1, "module list is empty")
    return names


# ---------------------------------------------------------------------------
# Variable substitution


def substitute_vars(query: QuerySpec, store: EvidenceStore, context_text: str) -> str:
    """Resolve a query against the evidence store.

    Literal segments are copied verbatim, the context keyword becomes
    `context_text`, and variable references become the bound evidence's
    concatenated passage texts (or the bound fragment). Rendered segments
    are joined with single spaces.
    """
    rendered: list[str] = []
    for part in query.parts:
        if isinstance(part, Literal):
            rendered.append(part.text)
        elif isinstance(part, ContextRef):
            rendered.append(context_text)
        else:
            if part.name not in store:
                raise UnboundVariable(part.name)
            rendered.append(store.text_of(part.name))
    return " ".join(r for r in rendered if r)
