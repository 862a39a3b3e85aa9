"""Corpus generator determinism and report shape."""

from __future__ import annotations

import json

from bloclaw.bench.corpus import (
    NoiseKind,
    baseline_parse_succeeds,
    bloclaw_parse_succeeds,
    generate_noisy_corpus,
)
from bloclaw.bench.runner import format_report, run_bench
from bloclaw.bench.sandbox_corpus import BEHAVIOR_ROWS, generate_behavior_scripts


class TestCorpusGenerator:
    def test_deterministic(self):
        a = generate_noisy_corpus(100, (NoiseKind.CONVERSATIONAL_TEXT,), seed=7)
        b = generate_noisy_corpus(100, (NoiseKind.CONVERSATIONAL_TEXT,), seed=7)
        assert a == b

    def test_seed_changes_corpus(self):
        a = generate_noisy_corpus(50, (NoiseKind.CONVERSATIONAL_TEXT,), seed=7)
        b = generate_noisy_corpus(50, (NoiseKind.CONVERSATIONAL_TEXT,), seed=8)
        assert a != b

    def test_empty_corpus(self):
        assert generate_noisy_corpus(0, tuple(NoiseKind), seed=1) == []

    def test_quote_mutation_present_in_both_renderings(self):
        corpus = generate_noisy_corpus(50, (NoiseKind.UNESCAPED_QUOTES,), seed=3)
        for sample in corpus:
            payload = sample.slots["target"]
            assert f'"{payload}"' in sample.tagged_text
            assert f'"{payload}"' in sample.json_text

    def test_missing_end_tags_deletes_closers(self):
        corpus = generate_noisy_corpus(50, (NoiseKind.MISSING_END_TAGS,), seed=3)
        for sample in corpus:
            opens = sample.tagged_text.count("<") - sample.tagged_text.count("</")
            closes = sample.tagged_text.count("</")
            assert closes < opens
            assert not sample.json_text.rstrip().endswith("}")

    def test_multiline_mutation_has_literal_newlines(self):
        corpus = generate_noisy_corpus(30, (NoiseKind.MULTILINE_CODE_STRINGS,), seed=3)
        for sample in corpus:
            assert "\n" in sample.slots["target"]
            assert "\n" in sample.json_text

    def test_every_action_kind_covered(self):
        corpus = generate_noisy_corpus(400, (NoiseKind.CONVERSATIONAL_TEXT,), seed=5)
        kinds = {s.kind for s in corpus}
        from bloclaw.routing import ActionKind

        assert kinds == set(ActionKind)

    def test_ground_truth_checking_requires_payload_equality(self):
        corpus = generate_noisy_corpus(20, (NoiseKind.CONVERSATIONAL_TEXT,), seed=5)
        sample = next(s for s in corpus if s.slots)
        wrong = sample.__class__(
            kind=sample.kind,
            noise=sample.noise,
            thought=sample.thought,
            slots={k: v + "XX_NOT_THERE" for k, v in sample.slots.items()},
            tagged_text=sample.tagged_text,
            json_text=sample.json_text,
        )
        assert bloclaw_parse_succeeds(sample)
        assert not bloclaw_parse_succeeds(wrong)


class TestBaselineHonesty:
    def test_clean_json_passes_baseline(self):
        # Without mutation the baseline parser succeeds; failures measure
        # noise fragility, not a broken parser.
        import json as json_mod

        from bloclaw.bench.corpus import Sample, baseline_parse_succeeds
        from bloclaw.routing import ActionKind

        clean = Sample(
            kind=ActionKind.TWO_D_MOLECULE,
            noise=NoiseKind.CONVERSATIONAL_TEXT,
            thought="plain",
            slots={"target": "CCO"},
            tagged_text="",
            json_text=json_mod.dumps(
                {"thought": "plain", "action": "2D_MOLECULE", "target": "CCO"}
            ),
        )
        assert baseline_parse_succeeds(clean)


class TestRunBench:
    def test_routing_report_shape(self):
        report = run_bench("routing", n=50, seed=7)
        categories = [row.category for row in report.rows]
        assert categories == [k.value for k in NoiseKind] + ["average"]
        for row in report.rows:
            assert 0.0 <= row.baseline_failure_rate <= 1.0
            assert 0.0 <= row.bloclaw_failure_rate <= 1.0
            assert row.bloclaw_failure_rate < row.baseline_failure_rate

    def test_routing_reproducible_rates(self):
        a = run_bench("routing", n=40, seed=11)
        b = run_bench("routing", n=40, seed=11)
        assert [(r.category, r.bloclaw_failure_rate, r.baseline_failure_rate) for r in a.rows] == [
            (r.category, r.bloclaw_failure_rate, r.baseline_failure_rate) for r in b.rows
        ]

    def test_report_json_round_trip(self):
        report = run_bench("routing", n=10, seed=2)
        parsed = json.loads(report.to_json())
        assert parsed["suite"] == "routing"
        assert len(parsed["rows"]) == 5

    def test_format_report_renders(self):
        report = run_bench("routing", n=10, seed=2)
        text = format_report(report)
        assert "conversational_text" in text
        assert "baseline_fail" in text

    def test_behavior_scripts_deterministic_and_compile(self):
        for row in BEHAVIOR_ROWS:
            a = generate_behavior_scripts(row, 5, seed=7)
            b = generate_behavior_scripts(row, 5, seed=7)
            assert a == b
            for script in a:
                compile(script, "<bench>", "exec")
