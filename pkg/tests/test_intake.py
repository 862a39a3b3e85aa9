"""File classification, digest probes, and context composition."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bloclaw.budget import estimate_tokens
from bloclaw.intake import (
    DIGEST_TOKEN_CAP,
    IntakeDigest,
    IntakeEngine,
    IntakeError,
    classify_file,
    compose_context,
)


def write_csv(path, rows=50):
    lines = ["name,count,ratio,when"]
    for i in range(rows):
        lines.append(f"sample{i},{i},{i / 7:.3f},2024-03-{i % 28 + 1:02d}")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def write_pdb(path, residues=30):
    lines = ["HEADER    TEST STRUCTURE"]
    serial = 1
    for res in range(1, residues + 1):
        for atom in ("N", "CA", "C", "O"):
            lines.append(
                f"ATOM  {serial:5d} {atom:<4s} ALA A{res:4d}    "
                f"{res * 1.5:8.3f}{0.0:8.3f}{0.0:8.3f}{1.00:6.2f}{50.0:6.2f}"
                f"          {atom[0]:>2s}"
            )
            serial += 1
    lines.append("END")
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


class TestClassify:
    def test_extensions(self, tmp_path):
        assert classify_file(write_csv(tmp_path / "a.csv")) == "tabular"
        assert classify_file(write_pdb(tmp_path / "b.pdb")) == "structure_pdb"
        txt = tmp_path / "c.txt"
        txt.write_text("notes about the assay")
        assert classify_file(txt) == "plain_text"

    def test_magic_overrides_wrong_extension(self, tmp_path):
        disguised = tmp_path / "really_a_pdf.csv"
        disguised.write_bytes(b"%PDF-1.4 fake body")
        assert classify_file(disguised) == "pdf_document"

    def test_zero_byte_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_bytes(b"")
        with pytest.raises(IntakeError, match="empty"):
            classify_file(empty)

    def test_unrecognized_binary_rejected(self, tmp_path):
        blob = tmp_path / "mystery.bin"
        blob.write_bytes(bytes(range(256)))
        with pytest.raises(IntakeError):
            classify_file(blob)


class TestProbes:
    def test_csv_digest_shape(self, tmp_path):
        engine = IntakeEngine()
        path = write_csv(tmp_path / "data.csv", rows=10_000)
        mounted = engine.mount(path, file_id="f1")
        digest = engine.classify_and_probe(mounted)
        assert "name:text" in digest.digest_text
        assert "count:integer" in digest.digest_text
        assert "ratio:real" in digest.digest_text
        assert "when:date" in digest.digest_text
        assert digest.digest_text.count("sample") <= 21
        assert digest.probe_latency_ms < 500
        assert digest.token_estimate <= DIGEST_TOKEN_CAP

    def test_preview_cells_verbatim(self, tmp_path):
        engine = IntakeEngine()
        path = write_csv(tmp_path / "data.csv", rows=30)
        source = path.read_text()
        digest = engine.classify_and_probe(engine.mount(path, file_id="f1"))
        for line in digest.digest_text.splitlines()[3:8]:
            for cell in line.split(","):
                assert cell in source

    def test_pdb_summary(self, tmp_path):
        engine = IntakeEngine()
        path = write_pdb(tmp_path / "model.pdb", residues=40)
        digest = engine.classify_and_probe(engine.mount(path, file_id="f9"))
        assert "ATOM records: 160" in digest.digest_text
        assert "chains: A" in digest.digest_text
        assert "residue span: 1-40" in digest.digest_text
        assert "artifact://f9" in digest.digest_text

    def test_plain_text_head(self, tmp_path):
        engine = IntakeEngine()
        path = tmp_path / "notes.txt"
        path.write_text("x" * 50_000)
        digest = engine.classify_and_probe(engine.mount(path, file_id="f2"))
        assert digest.token_estimate <= DIGEST_TOKEN_CAP

    def test_pdf_delegates_to_worker_probe(self, tmp_path):
        calls = []

        class FakeArtifact:
            kind = "stdout"
            payload = "Abstract: proteins fold."

        def fake_runner(name, args):
            calls.append((name, args))
            return [FakeArtifact()]

        engine = IntakeEngine(probe_runner=fake_runner)
        pdf = tmp_path / "paper.pdf"
        pdf.write_bytes(b"%PDF-1.4 minimal")
        digest = engine.classify_and_probe(engine.mount(pdf, file_id="f3"))
        assert calls and calls[0][0] == "pdf_probe"
        assert "proteins fold" in digest.digest_text

    def test_digest_determinism(self, tmp_path):
        engine = IntakeEngine()
        path = write_csv(tmp_path / "data.csv")
        mounted = engine.mount(path, file_id="f1")
        a = engine.classify_and_probe(mounted)
        b = engine.classify_and_probe(mounted)
        assert a.digest_text == b.digest_text


def make_digest(i: int, chars: int) -> IntakeDigest:
    text = f"digest-{i}:" + "y" * max(0, chars - 10)
    return IntakeDigest(
        file_id=f"f{i}",
        token_estimate=estimate_tokens(text),
        digest_text=text,
        probe_latency_ms=1.0,
    )


class TestComposeContext:
    def test_empty(self):
        assert compose_context([], budget=100) == ""

    def test_single_under_budget_verbatim(self):
        digest = make_digest(0, 100)
        assert compose_context([digest], budget=1000) == digest.digest_text

    def test_eviction_keeps_newer(self):
        older, newer = make_digest(0, 2000), make_digest(1, 2000)
        text = compose_context([older, newer], budget=600)
        assert "digest-1" in text and "digest-0" not in text

    def test_newest_first_order(self):
        a, b = make_digest(0, 40), make_digest(1, 40)
        text = compose_context([a, b], budget=1000)
        assert text.index("digest-1") < text.index("digest-0")

    @given(
        sizes=st.lists(st.integers(min_value=1, max_value=3000), max_size=12),
        budget=st.integers(min_value=0, max_value=2000),
    )
    @settings(max_examples=200, deadline=None)
    def test_budget_never_exceeded(self, sizes, budget):
        digests = [make_digest(i, size) for i, size in enumerate(sizes)]
        text = compose_context(digests, budget)
        assert estimate_tokens(text) <= budget or text == ""
