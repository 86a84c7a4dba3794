"""Regenerate the shipped fixture set.

Writes the 6-sample demo datasets (3 multi-source, 3 multi-strategy), a
single-sample file for the chat probe, and the replay completion fixtures
for every method, by driving the real pipelines with scripted generations
and recording each (request, response) pair.

Run from the repository root with the package installed:

    python scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

from conductor.backend import Backend, Generation, make_fixture_record
from conductor.core import SchemaKind
from conductor.data import load_dataset, select_demonstrations
from conductor.errors import ReplayMiss
from conductor.pipelines import Method, MethodConfig, run_method

OUT = Path(__file__).resolve().parent.parent / "src" / "conductor" / "fixtures"
MODEL = "gpt-3.5-turbo"


class ScriptedBackend(Backend):
    """Pops pre-decided generations in call order and records fixture lines."""

    def __init__(self) -> None:
        self.queue: deque[str] = deque()
        self.recorded: dict[str, dict] = {}

    def complete(self, request):
        if not self.queue:
            raise ReplayMiss("<scripted>", request.prompt_text[:80])
        response = self.queue.popleft()
        record = make_fixture_record(request.model_id, request.prompt_text, response)
        previous = self.recorded.get(record["hash"])
        if previous is not None and previous["response"] != response:
            raise RuntimeError(
                "hash collision with diverging responses for prompt: "
                + request.prompt_text[:120]
            )
        self.recorded[record["hash"]] = record
        return Generation(
            text=response,
            prompt_tokens=record["prompt_tokens"],
            completion_tokens=record["completion_tokens"],
            latency_ms=0,
            backend_tag="scripted",
            model_id=request.model_id,
        )


# ---------------------------------------------------------------------------
# Demo datasets. Candidate pools are authored so that BM25 top-1 retrieval
# lands on the gold candidate under the scripted plans.

DISTRACTOR_DOCS = [
    "Lake Baikal in Siberia is the deepest freshwater lake on Earth.",
    "The Sahara is the largest hot desert, spanning much of North Africa.",
    "Mount Fuji is an active stratovolcano and the highest peak in Japan.",
    "The Great Barrier Reef stretches along the coast of Queensland, Australia.",
    "Venice is famous for its canals and gondola traditions in northern Italy.",
    "The Amazon rainforest produces a large share of the planet's oxygen.",
    "The Serengeti hosts one of the largest terrestrial mammal migrations.",
    "Machu Picchu is a fifteenth-century Inca citadel in the Andes of Peru.",
    "The Dead Sea lies at the lowest land elevation on Earth.",
]


def focus_samples() -> list[dict]:
    demos = select_demonstrations(SchemaKind.FOCUS, "tpe")
    cot = select_demonstrations(SchemaKind.FOCUS, "cot")
    dialogues = []
    for demo in demos:
        turns = []
        for segment in demo.dialogue_text.split("\t"):
            speaker, _, text = segment.partition(": ")
            turns.append({"speaker": speaker, "text": text})
        dialogues.append(turns)
    return [
        {
            "id": "f1",
            "dialogue": dialogues[0],
            "gold_response": cot[0].response_text,
            "persona_candidates": [
                "I am interested in geography.",
                "I have a dog named Rex.",
                "I prefer quiet beaches.",
                "I collect vintage stamps.",
                "I often cook Italian food.",
            ],
            "document_candidates": [
                "The Arctic Cordillera is mainly located in Nunavut but expands "
                "southeast into the northernmost tip of Labrador and northeastern "
                "Quebec. The system is split into a series of ranges, with "
                "mountains reaching heights of over 2,000 m (6,562 ft) while the "
                "highest is Barbeau Peak on Ellesmere Island at 2,616 m "
                "(8,583 ft), which is the highest point in eastern North America.",
                *DISTRACTOR_DOCS,
            ],
            "gold_persona_indices": [0],
            "gold_document_index": 0,
        },
        {
            "id": "f2",
            "dialogue": dialogues[1],
            "gold_response": cot[1].response_text,
            "persona_candidates": [
                "I like living in a city. I don't hope to ever visit New Zealand.",
                "I enjoy hiking in the mountains every summer.",
                "I have two cats at home.",
                "I prefer tea over coffee in the morning.",
                "I studied history at university.",
            ],
            "document_candidates": [
                "Newton is a small suburb of Auckland City, New Zealand, under "
                "the local governance of the Auckland Council.",
                *DISTRACTOR_DOCS,
            ],
            "gold_persona_indices": [0],
            "gold_document_index": 0,
        },
        {
            "id": "f3",
            "dialogue": dialogues[2],
            "gold_response": cot[2].response_text,
            "persona_candidates": [
                "I am interested in ecozone.",
                "I usually travel with my family.",
                "I love trying local street food.",
                "I am afraid of heights.",
                "I enjoy painting landscapes.",
            ],
            "document_candidates": [
                "The Arctic Cordillera is a terrestrial ecozone in northern "
                "Canada characterized by a vast, deeply dissected chain of "
                "mountain ranges extending along the northeastern flank of the "
                "Canadian Arctic Archipelago from Ellesmere Island to the "
                "northeasternmost part of the Labrador Peninsula in northern "
                "Labrador and northern Quebec, Canada.",
                *DISTRACTOR_DOCS,
            ],
            "gold_persona_indices": [0],
            "gold_document_index": 0,
        },
    ]


def cima_samples() -> list[dict]:
    demos = select_demonstrations(SchemaKind.CIMA, "tpe")
    gold_strategies = [["Hint", "Question"], ["Hint"], ["Question"]]
    samples = []
    for i, (demo, strategies) in enumerate(zip(demos, gold_strategies), start=1):
        turns = []
        for segment in demo.dialogue_text.split("\t"):
            speaker, _, text = segment.partition(": ")
            turns.append({"speaker": speaker, "text": text})
        samples.append(
            {
                "id": f"c{i}",
                "dialogue": turns,
                "gold_response": demo.response_text,
                "gold_strategies": strategies,
            }
        )
    return samples


def strip_label(text: str, label: str) -> str:
    assert text.startswith(label + " "), text[:40]
    return text[len(label) + 1 :]


def scripted_generations() -> dict[tuple[str, str], list[str]]:
    """(method, sample_id) -> generations, in the order the pipeline calls."""
    tpe_f = select_demonstrations(SchemaKind.FOCUS, "tpe")
    rewoo_f = select_demonstrations(SchemaKind.FOCUS, "rewoo")
    react_f = select_demonstrations(SchemaKind.FOCUS, "react")
    cham_f = select_demonstrations(SchemaKind.FOCUS, "chameleon")
    tpe_c = select_demonstrations(SchemaKind.CIMA, "tpe")
    cham_c = select_demonstrations(SchemaKind.CIMA, "chameleon")
    cue_c = select_demonstrations(SchemaKind.CIMA, "cuecot")

    script: dict[tuple[str, str], list[str]] = {}
    for i, demo in enumerate(tpe_f, start=1):
        script[("tpe", f"f{i}")] = [
            demo.thought_text,
            strip_label(demo.plan_text, "Plan:"),
            demo.response_text,
        ]
        script[("cot", f"f{i}")] = [demo.response_text]
        script[("rewoo", f"f{i}")] = [
            strip_label(rewoo_f[i - 1].plan_text, "Plan:"),
            demo.response_text,
        ]
        script[("chameleon", f"f{i}")] = [
            cham_f[i - 1].plan_text,
            demo.response_text,
        ]

    # ReAct traces: thought/action continuations, re-split from the committed
    # demonstration traces (observations come from live retrieval).
    for i, demo in enumerate(react_f, start=1):
        chunks: list[str] = []
        current: list[str] = []
        for line in demo.plan_text.splitlines():
            if line.startswith("Observation:"):
                chunks.append("\n".join(current))
                current = []
            else:
                current.append(line)
        chunks.append("\n".join(current))
        script[("react", f"f{i}")] = chunks

    for i, demo in enumerate(tpe_c, start=1):
        sample_id = f"c{i}"
        script[("tpe", sample_id)] = [
            demo.thought_text,
            strip_label(demo.plan_text, "Plan:"),
        ]
        script[("cot", sample_id)] = [demo.response_text]
        script[("cuecot", sample_id)] = [
            cue_c[i - 1].thought_text,
            demo.response_text,
        ]
        fragments = [
            line[len("Do: ") :]
            for line in demo.plan_text.splitlines()
            if line.startswith("Do: ")
        ]
        script[("chameleon", sample_id)] = [cham_c[i - 1].plan_text, *fragments]

    script[("react", "c1")] = [
        "Thought: I need to provide a hint\nAction: Hint",
        "box is scatola.",
        "Thought: Then I need to ask a question to determine a student’s understanding\nAction: Question",
        "Do you remember how to say the plant?",
        "Thought: Now I combine them all into the final response\nAction: Response",
        "box is scatola. Do you remember how to say the plant?",
    ]
    script[("react", "c2")] = [
        "Thought: I need to provide a hint\nAction: Hint",
        "la pianta e dentro la scatola verdeverde",
        "Thought: Now I combine them all into the final response\nAction: Response",
        "la pianta e dentro la scatola verdeverde",
    ]
    script[("react", "c3")] = [
        "Thought: I need to ask a question to determine a student’s understanding\nAction: Question",
        "great but what color is the cat?  and who is behind the cat, how do you say bunny?",
        "Thought: Now I combine them all into the final response\nAction: Response",
        "great but what color is the cat?  and who is behind the cat, how do you say bunny?",
    ]
    return script


FOCUS_METHODS = (Method.TPE, Method.COT, Method.REACT, Method.REWOO, Method.CHAMELEON)
CIMA_METHODS = (Method.TPE, Method.COT, Method.REACT, Method.CHAMELEON, Method.CUECOT)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with (OUT / "focus_samples.jsonl").open("w", encoding="utf-8") as handle:
        for obj in focus_samples():
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
    with (OUT / "cima_samples.jsonl").open("w", encoding="utf-8") as handle:
        for obj in cima_samples():
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
    with (OUT / "chat_sample.json").open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(focus_samples()[1], ensure_ascii=False) + "\n")

    script = scripted_generations()
    backend = ScriptedBackend()
    plan = [
        (SchemaKind.FOCUS, str(OUT / "focus_samples.jsonl"), FOCUS_METHODS),
        (SchemaKind.CIMA, str(OUT / "cima_samples.jsonl"), CIMA_METHODS),
    ]
    for kind, path, methods in plan:
        samples = load_dataset(path, kind)
        for method in methods:
            config = MethodConfig(method=method, dataset_kind=kind, model_id=MODEL)
            for sample in samples:
                backend.queue.clear()
                backend.queue.extend(script[(method.value, sample.id)])
                record = run_method(sample, config, backend)
                if record.error is not None:
                    raise RuntimeError(
                        f"{method.value}/{sample.id}: {record.error.kind}: "
                        f"{record.error.detail}"
                    )
                if backend.queue:
                    raise RuntimeError(
                        f"{method.value}/{sample.id}: "
                        f"{len(backend.queue)} scripted generations unused"
                    )

    with (OUT / "replay.jsonl").open("w", encoding="utf-8") as handle:
        for record in backend.recorded.values():
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(backend.recorded)} replay fixtures to {OUT / 'replay.jsonl'}")


if __name__ == "__main__":
    main()
