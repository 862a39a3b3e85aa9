"""Record framing, ledger dedupe, and the worker entrypoint wire contract."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

SENTINEL = "@@BLOCLAW_ARTIFACT@@ "


def run_worker(tmp_path, source: str, env_extra: dict | None = None):
    import os

    script = tmp_path / "script.py"
    script.write_text(source, encoding="utf-8")
    env = dict(os.environ)
    env["BLOCLAW_WORKSPACE"] = str(tmp_path)
    env.update(env_extra or {})
    return subprocess.run(
        [sys.executable, "-m", "bloclaw_worker", str(script)],
        capture_output=True,
        env=env,
        timeout=60,
    )


def records_of(stdout: bytes) -> list[dict]:
    out = []
    for line in stdout.decode("utf-8", errors="replace").splitlines():
        if line.startswith(SENTINEL):
            out.append(json.loads(line[len(SENTINEL) :]))
    return out


HEADER = (
    "import bloclaw_worker.shims as s\n"
    "s.apply_display_overrides()\n"
)
FOOTER = "\ns.sweep_and_emit(globals())\n"


class TestEntrypoint:
    def test_print_only_script_emits_no_records(self, tmp_path):
        proc = run_worker(tmp_path, HEADER + "print('plain')" + FOOTER)
        assert proc.returncode == 0
        assert records_of(proc.stdout) == []
        assert b"plain\n" in proc.stdout

    def test_seq_strictly_increasing(self, tmp_path):
        source = HEADER + (
            "import matplotlib.pyplot as plt\n"
            "plt.figure(); plt.plot([1])\n"
            "plt.figure(); plt.plot([2])\n"
            "plt.show()\n"
        ) + FOOTER
        proc = run_worker(tmp_path, source)
        seqs = [r["seq"] for r in records_of(proc.stdout)]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        assert len(seqs) == 2

    def test_double_injection_still_one_record_per_show(self, tmp_path):
        source = HEADER + HEADER + (
            "import matplotlib.pyplot as plt\n"
            "plt.plot([1,2])\n"
            "plt.show()\n"
        ) + FOOTER + FOOTER
        proc = run_worker(tmp_path, source)
        recs = records_of(proc.stdout)
        assert len([r for r in recs if r["kind"] == "raster_image_b64"]) == 1

    def test_sweep_runs_when_user_code_raises(self, tmp_path):
        source = HEADER + (
            "import matplotlib.pyplot as plt\n"
            "plt.plot([5,6])\n"
            "raise RuntimeError('mid-script crash')\n"
        ) + FOOTER
        proc = run_worker(tmp_path, source)
        assert proc.returncode != 0
        recs = records_of(proc.stdout)
        assert any(r["kind"] == "raster_image_b64" for r in recs)
        assert b"mid-script crash" in proc.stderr

    def test_record_after_partial_line_still_parses(self, tmp_path):
        source = HEADER + (
            "import sys\n"
            "sys.stdout.write('no newline')\n"
            "import matplotlib.pyplot as plt\n"
            "plt.plot([1]); plt.show()\n"
        ) + FOOTER
        proc = run_worker(tmp_path, source)
        recs = records_of(proc.stdout)
        assert len(recs) == 1

    def test_interactive_record_from_plotly_show(self, tmp_path):
        source = HEADER + (
            "import plotly.graph_objects as go\n"
            "fig = go.Figure(data=go.Bar(x=['a'], y=[1]))\n"
            "fig.show()\n"
        ) + FOOTER
        proc = run_worker(tmp_path, source)
        recs = records_of(proc.stdout)
        assert [r["kind"] for r in recs] == ["interactive_html"]
        assert recs[0]["origin"] == "intercepted_show"


class TestProbeLane:
    def test_probe_emits_parseable_records(self, tmp_path):
        source = (
            "from bloclaw_worker.probes import run_builtin_probe\n"
            "run_builtin_probe('depict_2d', {'smiles': 'c1ccccc1O'})\n"
        )
        proc = run_worker(tmp_path, source)
        assert proc.returncode == 0
        recs = records_of(proc.stdout)
        assert [r["kind"] for r in recs] == ["raster_image_b64"]

    def test_probe_error_keeps_exit_zero(self, tmp_path):
        source = (
            "from bloclaw_worker.probes import run_builtin_probe\n"
            "run_builtin_probe('depict_2d', {'smiles': 'C(('})\n"
        )
        proc = run_worker(tmp_path, source)
        assert proc.returncode == 0
        recs = records_of(proc.stdout)
        assert recs[0]["kind"] == "error_record"
        assert "parse" in recs[0]["payload"]

    def test_table_probe_preview(self, tmp_path):
        csv = tmp_path / "data.csv"
        rows = ["name,count,score"] + [f"row{i},{i},{i * 0.5}" for i in range(100)]
        csv.write_text("\n".join(rows), encoding="utf-8")
        source = (
            "from bloclaw_worker.probes import run_builtin_probe\n"
            f"run_builtin_probe('table_probe', {{'path': {str(csv)!r}}})\n"
        )
        proc = run_worker(tmp_path, source)
        recs = records_of(proc.stdout)
        assert recs and recs[0]["kind"] == "stdout"
        payload = recs[0]["payload"]
        assert "name" in payload and "count" in payload
        assert payload.count("row") <= 21

    def test_pdf_probe(self, tmp_path):
        pytest.importorskip("reportlab")
        from reportlab.lib.pagesizes import letter
        from reportlab.pdfgen import canvas

        pdf_path = tmp_path / "doc.pdf"
        c = canvas.Canvas(str(pdf_path), pagesize=letter)
        t = c.beginText(72, 720)
        t.textLine("Abstract: enzymes accelerate reactions.")
        c.drawText(t)
        c.showPage()
        c.save()
        source = (
            "from bloclaw_worker.probes import run_builtin_probe\n"
            f"run_builtin_probe('pdf_probe', {{'path': {str(pdf_path)!r}}})\n"
        )
        proc = run_worker(tmp_path, source)
        recs = records_of(proc.stdout)
        assert recs and recs[0]["kind"] == "stdout"
        assert "enzymes accelerate" in recs[0]["payload"]
