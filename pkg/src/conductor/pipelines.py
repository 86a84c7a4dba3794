"""Execution of the multi-persona pipeline and its five baselines.

Each method maps a sample to a RunRecord through a fixed call pattern:

* tpe (multi-source): thinker -> planner -> execute plan -> executor.
* tpe (multi-strategy): thinker -> one merged planner/executor call whose
  parsed fragments concatenate into the response (no rewriting).
* cot: fixed-order retrieval (multi-source only), then a single call.
* cuecot: status inference call, then a response call conditioned on it.
* react: interleaved thought/action/observation loop with a hard call budget.
* rewoo: one planner call, execute all steps, one solver call.
* chameleon: one module-sequence call, then per-module execution; strategy
  modules run independently (deliberately: that independence is the
  baseline's known weakness and is preserved, not fixed).

Failures never abort a batch: parse and execution errors are captured in
the record's error descriptor, and plan-shaped methods fall back to
treating the raw generation as the response so corpus metrics stay
computable.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from conductor.backend import (
    Backend,
    CompletionRequest,
    DEFAULT_PRICES,
    Generation,
    PriceTable,
    compute_cost,
)
from conductor.core import (
    Demonstration,
    ErrorInfo,
    EvidenceStore,
    Evidence,
    PromptTemplate,
    RunRecord,
    SchemaKind,
    Thought,
    ToolSet,
    load_template,
    render_demo_slot,
    render_demonstration,
    render_dialogue,
    render_extras,
    render_toolset,
)
from conductor.data import Sample, select_demonstrations
from conductor.errors import (
    ConductorError,
    ConfigError,
    EmptyPlan,
    ParseError,
    UnknownTool,
)
from conductor.plangrammar import (
    Finish,
    ReActStep,
    SourcePlanProgram,
    StrategyCall,
    StrategyPlanStep,
    ToolCall,
    parse_module_list,
    parse_react_step,
    parse_source_plan,
    parse_strategy_plan,
    substitute_vars,
)
from conductor.profiles import DatasetProfile, profile_for
from conductor.retrieval import Bm25Retriever, Corpus, Retriever, enrich_query

FEWSHOT_STOP = ("Dialogue:",)
REACT_STOP = ("Observation:", "Dialogue:")
FRAGMENT_STOP = ("Thought:", "Action:", "Dialogue:")

RetrieverFactory = Callable[[Corpus], Retriever]


class Method(Enum):
    TPE = "tpe"
    COT = "cot"
    REACT = "react"
    REWOO = "rewoo"
    CHAMELEON = "chameleon"
    CUECOT = "cuecot"


@dataclass(frozen=True)
class MethodConfig:
    method: Method
    dataset_kind: SchemaKind
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    top_p: float = 0.1
    demo_ids: tuple[int, ...] | None = None  # None = the full committed bank
    k_retrieved: int = 1
    include_thought_in_planner: bool = True
    include_thought_in_executor: bool = True
    include_tool_examples: bool = False
    include_tool_descriptions: bool = True
    enrich_query_with_status: bool = True
    react_max_steps: int = 8
    sigil: str = ""

    def __post_init__(self) -> None:
        if self.k_retrieved < 1:
            raise ValueError("k_retrieved must be >= 1")
        if self.react_max_steps < 1:
            raise ValueError("react_max_steps must be >= 1")
        if not self.sigil:
            default = "#E" if self.method is Method.REWOO else "#So"
            object.__setattr__(self, "sigil", default)


def default_retriever_factory(corpus: Corpus) -> Retriever:
    return Bm25Retriever(corpus)


def build_corpora(sample: Sample) -> dict[str, Corpus]:
    """Per-sample corpora keyed by canonical lowercase source name."""
    corpora: dict[str, Corpus] = {}
    if sample.persona_candidates:
        corpora["persona"] = Corpus(
            "persona",
            tuple(
                (f"persona-{i:02d}", text)
                for i, text in enumerate(sample.persona_candidates)
            ),
        )
    if sample.document_candidates:
        corpora["document"] = Corpus(
            "document",
            tuple(
                (f"document-{i:02d}", text)
                for i, text in enumerate(sample.document_candidates)
            ),
        )
    return corpora


def combine_middle(fragments: Sequence[str]) -> str:
    """Concatenate strategy fragments, in order, with single spaces."""
    if not fragments:
        raise EmptyPlan("no fragments to combine")
    return " ".join(fragments)


def execute_source_plan(
    program: SourcePlanProgram,
    context_text: str,
    corpora: dict[str, Corpus],
    k: int,
    retriever_factory: RetrieverFactory = default_retriever_factory,
    aliases: dict[str, str] | None = None,
) -> EvidenceStore:
    """Run plan steps in order, binding each step's retrieval to its variable.

    Each step only ever consults the corpus of its named source; queries are
    resolved against earlier bindings before retrieval.
    """
    aliases = aliases or {}
    store = EvidenceStore()
    retrievers: dict[str, Retriever] = {}
    for step in program.steps:
        canonical = aliases.get(step.source_name.lower(), step.source_name.lower())
        if canonical not in corpora:
            raise UnknownTool(step.source_name)
        if canonical not in retrievers:
            retrievers[canonical] = retriever_factory(corpora[canonical])
        query = substitute_vars(step.query, store, context_text)
        passages = retrievers[canonical].retrieve(query, k)
        store.bind(
            step.output_var,
            Evidence(
                variable=step.output_var,
                source_name=step.source_name,
                resolved_query=query,
                passages=tuple(passages),
            ),
        )
    return store


def react_observation(
    action: ToolCall,
    context_text: str,
    corpora: dict[str, Corpus],
    k: int,
    retriever_factory: RetrieverFactory = default_retriever_factory,
    aliases: dict[str, str] | None = None,
) -> tuple[str, Evidence]:
    """Observation text for a retrieval action; "context" resolves to the
    dialogue. Strategy calls never reach here; their observation is the
    model's own next generation, produced by the loop."""
    aliases = aliases or {}
    canonical = aliases.get(action.name.lower(), action.name.lower())
    if canonical not in corpora:
        raise UnknownTool(action.name)
    query = action.argument.strip()
    if query == "context" or not query:
        query = context_text
    passages = retriever_factory(corpora[canonical]).retrieve(query, k)
    text = " ".join(p for _, p, _ in passages)
    evidence = Evidence(
        variable="",  # caller assigns the variable name when binding
        source_name=action.name,
        resolved_query=query,
        passages=tuple(passages),
    )
    return text, evidence


_BARE_ASSIGNMENT = re.compile(r"^\s*#\w+\s*=")


def with_cue(cue: str, generation: str) -> str:
    """Re-prefix the prompt's trailing cue label onto a generation so the
    parser sees the same labeled text the committed grammar describes."""
    text = generation.strip()
    if text.startswith(cue):
        return text
    first_line = text.split("\n")[0] if text else ""
    if _BARE_ASSIGNMENT.match(first_line):
        return text
    return f"{cue} {text}" if text else cue


# ---------------------------------------------------------------------------
# Runner


class _Run:
    """Per-sample execution state: backend calls, evidence, trace fields."""

    def __init__(
        self,
        sample: Sample,
        config: MethodConfig,
        backend: Backend,
        retriever_factory: RetrieverFactory,
    ):
        self.sample = sample
        self.config = config
        self.backend = backend
        self.retriever_factory = retriever_factory
        self.profile: DatasetProfile = profile_for(config.dataset_kind)
        self.context_text = render_dialogue(sample.dialogue)
        self.corpora = build_corpora(sample)
        self.generations: list[Generation] = []
        self.thought: Thought | None = None
        self.raw_plan_text = ""
        self.parsed_plan = None
        self.store = EvidenceStore()
        self.response = ""
        self.error: ErrorInfo | None = None

    def complete(self, prompt: str, stop: tuple[str, ...] = FEWSHOT_STOP) -> str:
        request = CompletionRequest.from_prompt(
            prompt,
            self.config.model_id,
            temperature=self.config.temperature,
            top_p=self.config.top_p,
            stop=stop,
        )
        generation = self.backend.complete(request)
        self.generations.append(generation)
        return generation.text

    def demos(self, method: str) -> list[Demonstration]:
        bank = select_demonstrations(self.config.dataset_kind, method)
        if self.config.demo_ids is None:
            return bank
        for i in self.config.demo_ids:
            if not 0 <= i < len(bank):
                raise ConfigError(
                    f"demo id {i} out of range for "
                    f"{self.config.dataset_kind.value}/{method} (bank has {len(bank)})"
                )
        return [bank[i] for i in self.config.demo_ids]

    def demo_slot(self, method: str, view: str, include_thought: bool = True) -> str:
        return render_demo_slot(
            render_demonstration(demo, view, include_thought=include_thought)
            for demo in self.demos(method)
        )

    def template(self, name: str) -> PromptTemplate:
        return load_template(name)

    def toolset_lines(self, toolset: ToolSet) -> str:
        return render_toolset(
            toolset,
            include_examples=self.config.include_tool_examples,
            include_descriptions=self.config.include_tool_descriptions,
        )

    def enriched_context(self) -> str:
        status = None
        if self.config.enrich_query_with_status and self.thought is not None:
            status = self.thought.text
        return enrich_query(self.context_text, status)

    def fail(self, exc: ConductorError, fallback_response: str = "") -> None:
        self.error = ErrorInfo(kind=type(exc).__name__, detail=str(exc))
        if fallback_response and not self.response:
            self.response = fallback_response

    def flag(self, kind: str, detail: str) -> None:
        self.error = ErrorInfo(kind=kind, detail=detail)


def run_method(
    sample: Sample,
    config: MethodConfig,
    backend: Backend,
    retriever_factory: RetrieverFactory = default_retriever_factory,
    prices: PriceTable = DEFAULT_PRICES,
) -> RunRecord:
    """Execute one sample through the configured pipeline.

    Backend and plan failures are captured in the record's error field; a
    batch never aborts on a single sample.
    """
    run = _Run(sample, config, backend, retriever_factory)
    dispatch = {
        Method.TPE: _run_tpe,
        Method.COT: _run_cot,
        Method.REACT: _run_react,
        Method.REWOO: _run_rewoo,
        Method.CHAMELEON: _run_chameleon,
        Method.CUECOT: _run_cuecot,
    }
    try:
        dispatch[config.method](run)
    except ConductorError as exc:
        run.fail(exc)
    if run.error is None and not run.response:
        run.flag("EmptyResponse", "pipeline produced an empty response")
    usages = tuple(g.usage() for g in run.generations)
    return RunRecord(
        sample_id=sample.id,
        method=config.method.value,
        kind=config.dataset_kind,
        thought=run.thought,
        raw_plan_text=run.raw_plan_text,
        parsed_plan=run.parsed_plan,
        evidence=run.store,
        response=run.response,
        usages=usages,
        cost_usd=compute_cost(usages, prices),
        error=run.error,
    )


def run_batch(
    samples: Sequence[Sample],
    config: MethodConfig,
    backend: Backend,
    retriever_factory: RetrieverFactory = default_retriever_factory,
    prices: PriceTable = DEFAULT_PRICES,
    parallelism: int = 1,
) -> list[RunRecord]:
    """Run all samples, optionally in parallel; output keeps input order."""

    def one(sample: Sample) -> RunRecord:
        return run_method(sample, config, backend, retriever_factory, prices)

    if parallelism <= 1:
        return [one(sample) for sample in samples]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, samples))


# ---------------------------------------------------------------------------
# Method flows


def _think(run: _Run) -> str:
    prompt = run.template(f"tpe_thinker_{run.config.dataset_kind.value}").render(
        persona=run.profile.personas["thinker"],
        demos=run.demo_slot("tpe", "thinker"),
        extras="",
        dialogue=run.context_text,
    )
    text = run.complete(prompt).strip()
    run.thought = Thought(text) if text else None
    return text


def _knowledge_text(store: EvidenceStore) -> str:
    return " ".join(store.text_of(variable) for variable in store.variables())


def _run_tpe(run: _Run) -> None:
    if run.profile.is_multi_source:
        _run_tpe_source(run)
    else:
        _run_tpe_strategy(run)


def _run_tpe_source(run: _Run) -> None:
    thought = _think(run)
    extras = []
    if run.config.include_thought_in_planner and thought:
        extras.append(("Thought", thought))
    planner_prompt = run.template("tpe_planner_focus").render(
        persona=run.profile.personas["planner"],
        toolset=run.toolset_lines(run.profile.source_toolset),
        demos=run.demo_slot(
            "tpe", "planner", include_thought=run.config.include_thought_in_planner
        ),
        extras=render_extras(extras),
        dialogue=run.context_text,
    )
    raw = run.complete(planner_prompt)
    run.raw_plan_text = with_cue("Plan:", raw)
    try:
        program = parse_source_plan(run.raw_plan_text, run.config.sigil)
        run.parsed_plan = program
        run.store = execute_source_plan(
            program,
            run.enriched_context(),
            run.corpora,
            run.config.k_retrieved,
            run.retriever_factory,
            run.profile.source_aliases,
        )
    except ConductorError as exc:
        run.fail(exc, fallback_response=raw.strip())
        return

    executor_extras = [("Source Knowledge", _knowledge_text(run.store))]
    if run.config.include_thought_in_executor and thought:
        executor_extras.append(("Thought", thought))
    executor_prompt = run.template("tpe_executor_focus").render(
        persona=run.profile.personas["executor"],
        demos="",
        extras=render_extras(executor_extras),
        dialogue=run.context_text,
    )
    run.response = run.complete(executor_prompt).strip()


def _run_tpe_strategy(run: _Run) -> None:
    thought = _think(run)
    extras = []
    if run.config.include_thought_in_planner and thought:
        extras.append(("Thought", thought))
    prompt = run.template(
        f"tpe_plannerexec_{run.config.dataset_kind.value}"
    ).render(
        persona=run.profile.personas["planner_executor"],
        toolset=run.toolset_lines(run.profile.strategy_toolset),
        demos=run.demo_slot(
            "tpe", "planner", include_thought=run.config.include_thought_in_planner
        ),
        extras=render_extras(extras),
        dialogue=run.context_text,
    )
    raw = run.complete(prompt)
    run.raw_plan_text = with_cue("Plan:", raw)
    try:
        steps = parse_strategy_plan(run.raw_plan_text)
    except ParseError as exc:
        run.fail(exc, fallback_response=raw.strip())
        return
    run.parsed_plan = steps
    for i, step in enumerate(steps, start=1):
        run.store.bind(f"St{i}", step.fragment)
    run.response = combine_middle([step.fragment for step in steps])


def _run_cot(run: _Run) -> None:
    extras = []
    if run.profile.is_multi_source:
        # Fixed source order, dialogue context as the query for both calls.
        for i, source in enumerate(("persona", "document"), start=1):
            passages = run.retriever_factory(run.corpora[source]).retrieve(
                run.context_text, run.config.k_retrieved
            )
            run.store.bind(
                f"K{i}",
                Evidence(
                    variable=f"K{i}",
                    source_name=source,
                    resolved_query=run.context_text,
                    passages=tuple(passages),
                ),
            )
        extras.append(("Source Knowledge", _knowledge_text(run.store)))
    prompt = run.template(f"cot_{run.config.dataset_kind.value}").render(
        persona=run.profile.personas["cot"],
        demos=run.demo_slot("cot", "response"),
        extras=render_extras(extras),
        dialogue=run.context_text,
    )
    run.response = run.complete(prompt).strip()


def _run_cuecot(run: _Run) -> None:
    kind = run.config.dataset_kind.value
    status_prompt = run.template(f"cuecot_status_{kind}").render(
        persona=run.profile.personas["thinker"],
        demos=run.demo_slot("cuecot", "status"),
        extras="",
        dialogue=run.context_text,
    )
    status = run.complete(status_prompt).strip()
    if status:
        run.thought = Thought(status)
    response_prompt = run.template(f"cuecot_response_{kind}").render(
        persona=run.profile.personas["cot"],
        demos=run.demo_slot("cuecot", "status_response"),
        extras=render_extras([("Status", status)] if status else []),
        dialogue=run.context_text,
    )
    run.response = run.complete(response_prompt).strip()


def _run_rewoo(run: _Run) -> None:
    planner_prompt = run.template("rewoo_planner_focus").render(
        demos=run.demo_slot("rewoo", "rewoo"),
        dialogue=run.context_text,
    )
    raw = run.complete(planner_prompt)
    run.raw_plan_text = with_cue("Plan:", raw)
    try:
        program = parse_source_plan(run.raw_plan_text, run.config.sigil)
        run.parsed_plan = program
        run.store = execute_source_plan(
            program,
            run.context_text,
            run.corpora,
            run.config.k_retrieved,
            run.retriever_factory,
            run.profile.source_aliases,
        )
    except ConductorError as exc:
        run.fail(exc, fallback_response=raw.strip())
        return
    solver_prompt = run.template("rewoo_solver_focus").render(
        persona=run.profile.personas["executor"],
        extras=render_extras([("Source Knowledge", _knowledge_text(run.store))]),
        dialogue=run.context_text,
    )
    run.response = run.complete(solver_prompt).strip()


def _run_chameleon(run: _Run) -> None:
    kind = run.config.dataset_kind.value
    if run.profile.is_multi_source:
        toolset = run.profile.module_toolset
        cue, view = "Modules:", "modules"
    else:
        toolset = run.profile.strategy_toolset
        cue, view = "Strategies:", "strategies"
    planner_prompt = run.template(f"chameleon_planner_{kind}").render(
        persona=run.profile.personas["chameleon"],
        toolset=run.toolset_lines(toolset),
        demos=run.demo_slot("chameleon", view),
        dialogue=run.context_text,
    )
    raw = run.complete(planner_prompt)
    run.raw_plan_text = with_cue(cue, raw)
    try:
        names = parse_module_list(run.raw_plan_text)
    except ParseError as exc:
        run.fail(exc, fallback_response=raw.strip())
        return

    if run.profile.is_multi_source:
        _chameleon_sources(run, names)
    else:
        _chameleon_strategies(run, names)


def _chameleon_sources(run: _Run, names: tuple[str, ...]) -> None:
    run.parsed_plan = names
    retrieval_order: list[str] = []
    for name in names:
        if name == "Answer_Generator":
            continue
        try:
            retrieval_order.append(run.profile.resolve_source(name))
        except UnknownTool:
            continue  # unplanned module names are skipped, not fatal
    if not retrieval_order:
        retrieval_order = ["persona", "document"]
    for i, source in enumerate(retrieval_order, start=1):
        passages = run.retriever_factory(run.corpora[source]).retrieve(
            run.context_text, run.config.k_retrieved
        )
        run.store.bind(
            f"K{i}",
            Evidence(
                variable=f"K{i}",
                source_name=source,
                resolved_query=run.context_text,
                passages=tuple(passages),
            ),
        )
    answer_prompt = run.template("chameleon_answer_focus").render(
        persona=run.profile.personas["executor"],
        demos=run.demo_slot("cot", "response"),
        extras=render_extras([("Source Knowledge", _knowledge_text(run.store))]),
        dialogue=run.context_text,
    )
    run.response = run.complete(answer_prompt).strip()


def _chameleon_strategies(run: _Run, names: tuple[str, ...]) -> None:
    kind = run.config.dataset_kind.value
    template = run.template(f"chameleon_strategy_{kind}")
    steps: list[StrategyPlanStep] = []
    for i, name in enumerate(
        (n for n in names if n != "Answer_Generator"), start=1
    ):
        tool = run.profile.strategy_toolset.get(name)
        demo_blocks = (
            [f"Dialogue: {inp}\n{name}: {out}" for inp, out in tool.examples]
            if tool is not None
            else []
        )
        prompt = template.render(
            demos=render_demo_slot(demo_blocks),
            dialogue=run.context_text,
            strategy=name,
        )
        fragment = run.complete(prompt).strip()
        if not fragment:
            continue
        steps.append(StrategyPlanStep(strategy_name=name, fragment=fragment))
        run.store.bind(f"St{i}", fragment)
    if not steps:
        run.flag("EmptyPlan", "no strategy module produced a fragment")
        return
    run.parsed_plan = tuple(steps)
    run.response = combine_middle([step.fragment for step in steps])


def _run_react(run: _Run) -> None:
    kind = run.config.dataset_kind.value
    template = run.template(f"react_{kind}")
    demos = run.demo_slot("react", "react")
    scratchpad = ""
    calls_used = 0
    last_text = ""
    obs_count = 0
    strategy_steps: list[StrategyPlanStep] = []

    def render_prompt() -> str:
        return template.render(demos=demos, dialogue=run.context_text, scratchpad=scratchpad)

    while calls_used < run.config.react_max_steps:
        generation = run.complete(render_prompt(), stop=REACT_STOP)
        calls_used += 1
        last_text = generation.strip()
        try:
            step: ReActStep = parse_react_step(generation)
        except ParseError as exc:
            run.raw_plan_text = scratchpad + last_text
            run.fail(exc, fallback_response=last_text)
            return
        if isinstance(step.action, Finish):
            scratchpad += last_text + "\n"
            run.raw_plan_text = scratchpad.rstrip("\n")
            if strategy_steps:
                run.parsed_plan = tuple(strategy_steps)
            run.response = step.action.response.strip()
            return
        if isinstance(step.action, ToolCall):
            try:
                obs_text, evidence = react_observation(
                    step.action,
                    run.context_text,
                    run.corpora,
                    run.config.k_retrieved,
                    run.retriever_factory,
                    run.profile.source_aliases,
                )
            except UnknownTool as exc:
                run.raw_plan_text = scratchpad + last_text
                run.fail(exc, fallback_response=last_text)
                return
            obs_count += 1
            variable = f"Obs{obs_count}"
            run.store.bind(
                variable,
                Evidence(
                    variable=variable,
                    source_name=evidence.source_name,
                    resolved_query=evidence.resolved_query,
                    passages=evidence.passages,
                ),
            )
            scratchpad += f"{last_text}\nObservation: {obs_text}\n"
            continue
        # Strategy call: either compose the final response or ask the model
        # for the strategy's fragment as the next observation.
        if step.action.name == "Response":
            scratchpad += f"{last_text}\nResponse:"
            run.raw_plan_text = scratchpad[: -len("\nResponse:")]
            if strategy_steps:
                run.parsed_plan = tuple(strategy_steps)
            run.response = run.complete(render_prompt(), stop=FEWSHOT_STOP).strip()
            return
        if calls_used >= run.config.react_max_steps:
            break
        scratchpad += f"{last_text}\nObservation:"
        fragment = run.complete(render_prompt(), stop=FRAGMENT_STOP).strip()
        calls_used += 1
        scratchpad += f" {fragment}\n"
        obs_count += 1
        run.store.bind(f"St{obs_count}", fragment)
        if fragment:
            strategy_steps.append(
                StrategyPlanStep(strategy_name=step.action.name, fragment=fragment)
            )

    run.raw_plan_text = (scratchpad + last_text).rstrip("\n")
    if strategy_steps:
        run.parsed_plan = tuple(strategy_steps)
    run.response = last_text
    run.flag(
        "FallbackExhausted",
        f"no Finish after {run.config.react_max_steps} calls; "
        "last generation used as the response",
    )
