from __future__ import annotations

import json
from decimal import Decimal

import pytest

from conductor.core import (
    CallUsage,
    ErrorInfo,
    Evidence,
    EvidenceStore,
    RunRecord,
    SchemaKind,
    Thought,
)
from conductor.data import (
    export_records,
    load_dataset,
    load_records,
    sample_from_obj,
    select_demonstrations,
)
from conductor.errors import (
    ConfigError,
    DatasetValidationError,
    MissingDemoBank,
    SchemaViolation,
)
from conductor.plangrammar import StrategyPlanStep, parse_source_plan


def _cima_obj(sample_id="c1", strategies=("Hint",)):
    return {
        "id": sample_id,
        "dialogue": [
            {"speaker": "Teacher", "text": "Green is verde."},
            {"speaker": "Student", "text": "what is the word for green?"},
        ],
        "gold_response": "la pianta e dentro la scatola verdeverde",
        "gold_strategies": list(strategies),
    }


def _focus_obj(sample_id="f1", n_personas=5, n_documents=10):
    return {
        "id": sample_id,
        "dialogue": [{"speaker": "USER", "text": "Hi there"}],
        "gold_response": "hello",
        "persona_candidates": [f"persona {i}" for i in range(n_personas)],
        "document_candidates": [f"document {i}" for i in range(n_documents)],
        "gold_persona_indices": [0],
        "gold_document_index": 0,
    }


class TestSampleValidation:
    def test_minimal_cima_line(self):
        sample = sample_from_obj(_cima_obj(), SchemaKind.CIMA)
        assert sample.id == "c1"
        assert sample.gold_strategies == ("Hint",)

    def test_focus_needs_exactly_five_personas(self):
        with pytest.raises(SchemaViolation, match="exactly 5"):
            sample_from_obj(_focus_obj(n_personas=4), SchemaKind.FOCUS)

    def test_focus_needs_exactly_ten_documents(self):
        with pytest.raises(SchemaViolation, match="exactly 10"):
            sample_from_obj(_focus_obj(n_documents=9), SchemaKind.FOCUS)

    def test_unknown_gold_strategy(self):
        with pytest.raises(SchemaViolation, match="unknown gold strategy"):
            sample_from_obj(_cima_obj(strategies=("Nudge",)), SchemaKind.CIMA)

    def test_others_label_allowed(self):
        sample = sample_from_obj(_cima_obj(strategies=("Others",)), SchemaKind.CIMA)
        assert sample.gold_strategies == ("Others",)

    def test_dialogue_must_end_user_side(self):
        obj = _cima_obj()
        obj["dialogue"] = obj["dialogue"][:1]  # ends on Teacher
        with pytest.raises(SchemaViolation):
            sample_from_obj(obj, SchemaKind.CIMA)

    def test_gold_indices_range_checked(self):
        obj = _focus_obj()
        obj["gold_document_index"] = 10
        with pytest.raises(SchemaViolation, match="out of range"):
            sample_from_obj(obj, SchemaKind.FOCUS)

    def test_non_string_fields_rejected_not_crashed(self):
        obj = _cima_obj()
        obj["dialogue"][0]["text"] = 42
        with pytest.raises(SchemaViolation, match="must be strings"):
            sample_from_obj(obj, SchemaKind.CIMA)
        obj = _focus_obj()
        obj["persona_candidates"][0] = None
        with pytest.raises(SchemaViolation, match="must be strings"):
            sample_from_obj(obj, SchemaKind.FOCUS)
        obj = _focus_obj()
        obj["gold_persona_indices"] = ["zero"]
        with pytest.raises(SchemaViolation, match="out of range"):
            sample_from_obj(obj, SchemaKind.FOCUS)
        obj = _cima_obj()
        obj["gold_strategies"] = [None]
        with pytest.raises(SchemaViolation, match="unknown gold strategy"):
            sample_from_obj(obj, SchemaKind.CIMA)


class TestLoadDataset:
    def test_order_preserved(self, tmp_path):
        path = tmp_path / "data.jsonl"
        with path.open("w", encoding="utf-8") as handle:
            for i in range(200):
                handle.write(json.dumps(_cima_obj(sample_id=f"c{i}")) + "\n")
        samples = load_dataset(str(path), SchemaKind.CIMA)
        assert len(samples) == 200
        assert [s.id for s in samples] == [f"c{i}" for i in range(200)]

    def test_every_invalid_line_reported(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        lines = [
            json.dumps(_cima_obj()),
            "not json at all",
            json.dumps({"id": "x"}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DatasetValidationError) as exc_info:
            load_dataset(str(path), SchemaKind.CIMA)
        assert len(exc_info.value.violations) == 2
        assert {v.line_no for v in exc_info.value.violations} == {2, 3}


class TestDemonstrations:
    def test_focus_tpe_bank_matches_committed_plans(self):
        demos = select_demonstrations(SchemaKind.FOCUS, "tpe")
        assert len(demos) == 3
        assert "Search for personal memories about" in demos[1].plan_text
        # every committed plan parses under the shared grammar
        for demo in demos:
            program = parse_source_plan(demo.plan_text, "#So")
            assert program.steps

    def test_cima_tpe_transitions(self):
        demos = select_demonstrations(SchemaKind.CIMA, "tpe")
        sequences = []
        for demo in demos:
            names = [
                line[len("Plan: ") :]
                for line in demo.plan_text.split("\n")
                if line.startswith("Plan: ")
            ]
            sequences.append(names)
        assert sequences == [["Hint", "Question"], ["Hint"], ["Question"]]

    def test_psyqa_first_demo_has_the_long_transition(self):
        demos = select_demonstrations(SchemaKind.PSYQA, "tpe")
        assert len(demos) == 2
        names = [
            line[len("Plan: ") :]
            for line in demos[0].plan_text.split("\n")
            if line.startswith("Plan: ")
        ]
        assert names == [
            "Approval and Reassurance",
            "Interpretation",
            "Direct Guidance",
            "Interpretation",
            "Direct Guidance",
        ]

    def test_zero_shot_override(self):
        assert select_demonstrations(SchemaKind.PSYQA, "cot", count=0) == []

    def test_count_out_of_range(self):
        with pytest.raises(ConfigError):
            select_demonstrations(SchemaKind.CIMA, "tpe", count=7)

    def test_missing_bank(self):
        with pytest.raises(MissingDemoBank):
            select_demonstrations(SchemaKind.FOCUS, "cuecot")

    def test_selection_is_constant(self):
        first = select_demonstrations(SchemaKind.CIMA, "react")
        second = select_demonstrations(SchemaKind.CIMA, "react")
        assert first == second


def _full_record(sample_id="s1", with_error=False) -> RunRecord:
    store = EvidenceStore()
    store.bind(
        "So1",
        Evidence("So1", "PERSONA", "query text", (("persona-00", "我很难过 today", 1.5),)),
    )
    store.bind("St1", "一个片段 fragment")
    plan = parse_source_plan("Plan: a\n#So1 = PERSONA[context]", "#So")
    return RunRecord(
        sample_id=sample_id,
        method="tpe",
        kind=SchemaKind.PSYQA,
        thought=Thought("内部状态 the status"),
        raw_plan_text="Plan: a\n#So1 = PERSONA[context]",
        parsed_plan=plan,
        evidence=store,
        response="回应 response text" if not with_error else "",
        usages=(CallUsage("gpt-3.5-turbo", "replay", 120, 30, 0),),
        cost_usd=Decimal("0.000300"),
        error=ErrorInfo("PlanParseFailure", "boom") if with_error else None,
    )


class TestRecordRoundTrip:
    def test_load_export_identity(self, tmp_path):
        records = [_full_record("s1"), _full_record("s2", with_error=True)]
        path = tmp_path / "records.jsonl"
        export_records(records, str(path))
        loaded = load_records(str(path))
        assert loaded == records

    def test_cjk_survives_byte_exact(self, tmp_path):
        path = tmp_path / "records.jsonl"
        export_records([_full_record()], str(path))
        raw = path.read_text(encoding="utf-8")
        assert "我很难过" in raw  # not escaped to \\u sequences
        export_records(load_records(str(path)), str(path) + ".again")
        assert raw == (tmp_path / "records.jsonl.again").read_text(encoding="utf-8")

    def test_strategy_plan_round_trip(self, tmp_path):
        record = RunRecord(
            sample_id="c1",
            method="tpe",
            kind=SchemaKind.CIMA,
            parsed_plan=(StrategyPlanStep("Hint", "box is scatola."),),
            response="box is scatola.",
        )
        path = tmp_path / "r.jsonl"
        export_records([record], str(path))
        assert load_records(str(path))[0].parsed_plan == record.parsed_plan

    def test_empty_list_gives_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        export_records([], str(path))
        assert path.read_text(encoding="utf-8") == ""
        assert load_records(str(path)) == []
