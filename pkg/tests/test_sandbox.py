"""Supervisor behavior: instrumentation, execution caps, harvest framing."""

from __future__ import annotations

import base64
import subprocess
import sys

import pytest

from bloclaw.sandbox import (
    ExecutionRequest,
    SandboxSupervisor,
    build_instrumented_script,
    harvest_artifacts,
)

SENTINEL = b"@@BLOCLAW_ARTIFACT@@ "


@pytest.fixture(scope="module")
def supervisor():
    return SandboxSupervisor()


class TestBuildInstrumentedScript:
    def test_header_precedes_user_bytes(self):
        user = "import matplotlib.pyplot as plt\nplt.show()"
        script = build_instrumented_script(user)
        start, end = script.user_span
        assert script.full_text[start:end] == user
        assert start > 0 and end < len(script.full_text)

    def test_triple_quoted_strings_embed_byte_exact(self):
        user = 'text = """line one\nline "two"\n"""\nprint(text)'
        script = build_instrumented_script(user)
        start, end = script.user_span
        assert script.full_text[start:end] == user
        compile(script.full_text, "<instrumented>", "exec")

    def test_empty_user_code(self, supervisor, tmp_path):
        report = supervisor.execute(
            ExecutionRequest(user_code="", workspace_dir=tmp_path)
        )
        assert report.status == "ok"
        assert not [a for a in report.artifacts if a.kind == "raster_image_b64"]


class TestHarvestArtifacts:
    def test_interleaving_preserved(self):
        stream = (
            b"first\n"
            + SENTINEL
            + b'{"seq":1,"kind":"stdout","origin":"stream","payload":"rec1"}\n'
            + b"second\n"
            + SENTINEL
            + b'{"seq":2,"kind":"stdout","origin":"stream","payload":"rec2"}\n'
        )
        kinds = [(a.kind, a.payload) for a in harvest_artifacts(stream)]
        assert kinds == [
            ("stdout", "first\n"),
            ("stdout", "rec1"),
            ("stdout", "second\n"),
            ("stdout", "rec2"),
        ]

    def test_truncated_record_becomes_error_record(self):
        stream = SENTINEL + b'{"seq":1,"kind":"stdo\n' + b"still here\n"
        artifacts = harvest_artifacts(stream)
        assert artifacts[0].kind == "error_record"
        assert artifacts[1].payload == "still here\n"

    def test_empty_stream(self):
        assert harvest_artifacts(b"") == []

    def test_invalid_raster_downgraded(self):
        bad = SENTINEL + b'{"seq":1,"kind":"raster_image_b64","origin":"stream","payload":"bm90YXBuZw=="}\n'
        artifacts = harvest_artifacts(bad)
        assert artifacts[0].kind == "error_record"


class TestExecute:
    def test_show_call_captured(self, supervisor, tmp_path):
        code = "import matplotlib.pyplot as plt\nplt.plot([1,2,3])\nplt.show()\n"
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        assert report.status == "ok"
        rasters = [a for a in report.artifacts if a.kind == "raster_image_b64"]
        assert rasters and rasters[0].origin == "intercepted_show"
        decoded = base64.b64decode(rasters[0].payload)
        assert decoded.startswith(b"\x89PNG")

    def test_forgotten_figure_swept(self, supervisor, tmp_path):
        code = "import matplotlib.pyplot as plt\nfig, ax = plt.subplots()\nax.plot([3,1,4])\n"
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        rasters = [a for a in report.artifacts if a.kind == "raster_image_b64"]
        assert rasters and rasters[0].origin == "namespace_sweep"

    def test_show_then_sweep_no_duplicate(self, supervisor, tmp_path):
        code = "import matplotlib.pyplot as plt\nplt.plot([1,2])\nplt.show()\n"
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        rasters = [a for a in report.artifacts if a.kind == "raster_image_b64"]
        assert len(rasters) == 1

    def test_plotly_figure_in_variable(self, supervisor, tmp_path):
        code = (
            "import plotly.graph_objects as go\n"
            "fig = go.Figure(data=go.Scatter(x=[1,2], y=[2,1]))\n"
        )
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        html = [a for a in report.artifacts if a.kind == "interactive_html"]
        assert html and html[0].origin == "namespace_sweep"
        assert "<script" in html[0].payload
        assert '<script src="http' not in html[0].payload

    def test_timeout(self, supervisor, tmp_path):
        report = supervisor.execute(
            ExecutionRequest(user_code="while True: pass", workspace_dir=tmp_path, timeout=2)
        )
        assert report.status == "timeout"
        assert 2000 <= report.duration_ms <= 4000

    def test_error_captures_traceback(self, supervisor, tmp_path):
        report = supervisor.execute(
            ExecutionRequest(user_code="raise ValueError('boom')", workspace_dir=tmp_path)
        )
        assert report.status == "error"
        stderr = [a for a in report.artifacts if a.kind == "stderr"]
        assert stderr and "boom" in stderr[0].payload

    def test_error_keeps_partial_artifacts(self, supervisor, tmp_path):
        code = (
            "import matplotlib.pyplot as plt\n"
            "plt.plot([1,2,3])\n"
            "plt.show()\n"
            "raise RuntimeError('after figure')\n"
        )
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        assert report.status == "error"
        assert any(a.kind == "raster_image_b64" for a in report.artifacts)

    def test_parent_directory_write_denied(self, supervisor, tmp_path):
        session = tmp_path / "session"
        report = supervisor.execute(
            ExecutionRequest(
                user_code="open('../stolen.txt', 'w').write('x')",
                workspace_dir=session,
            )
        )
        assert report.status == "error"
        assert not (tmp_path / "stolen.txt").exists()

    def test_network_denied_by_default(self, supervisor, tmp_path):
        code = "import socket\nsocket.socket()\n"
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        assert report.status == "error"

    def test_stdout_transparency(self, supervisor, tmp_path):
        script = "for i in range(3): print('row', i)\nimport sys\nsys.stdout.write('tail')"
        plain = subprocess.run(
            [sys.executable, "-c", script], capture_output=True, check=True
        )
        report = supervisor.execute(ExecutionRequest(user_code=script, workspace_dir=tmp_path))
        recon = "".join(a.payload for a in report.artifacts if a.kind == "stdout")
        assert recon == plain.stdout.decode()

    def test_artifact_order_matches_emission(self, supervisor, tmp_path):
        code = (
            "print('before')\n"
            "import matplotlib.pyplot as plt\n"
            "plt.plot([1])\n"
            "plt.show()\n"
            "print('after')\n"
        )
        report = supervisor.execute(ExecutionRequest(user_code=code, workspace_dir=tmp_path))
        kinds = [a.kind for a in report.artifacts]
        assert kinds.index("raster_image_b64") > kinds.index("stdout")
        stdouts = [a.payload for a in report.artifacts if a.kind == "stdout"]
        assert stdouts == ["before\n", "after\n"]


class TestProbes:
    def test_depict_probe_returns_png(self, supervisor, tmp_path):
        report = supervisor.run_probe(
            "depict_2d", {"smiles": "CC(=O)Oc1ccccc1C(=O)O"}, tmp_path
        )
        assert report.status == "ok"
        rasters = [a for a in report.artifacts if a.kind == "raster_image_b64"]
        assert rasters
        assert base64.b64decode(rasters[0].payload).startswith(b"\x89PNG")

    def test_depict_probe_malformed_smiles(self, supervisor, tmp_path):
        report = supervisor.run_probe("depict_2d", {"smiles": "C(("}, tmp_path)
        assert report.status == "ok"
        errors = [a for a in report.artifacts if a.kind == "error_record"]
        assert errors and "parse" in errors[0].payload

    def test_embed_probe_deterministic(self, supervisor, tmp_path):
        first = supervisor.run_probe("embed_3d_ligand", {"smiles": "c1ccccc1O"}, tmp_path)
        second = supervisor.run_probe("embed_3d_ligand", {"smiles": "c1ccccc1O"}, tmp_path)
        block_a = next(a.payload for a in first.artifacts if a.kind == "stdout")
        block_b = next(a.payload for a in second.artifacts if a.kind == "stdout")
        assert block_a == block_b
        assert "HETATM" in block_a

    def test_unknown_probe_is_error_record(self, supervisor, tmp_path):
        report = supervisor.run_probe("warp_core", {}, tmp_path)
        assert report.status == "ok"
        assert any(a.kind == "error_record" for a in report.artifacts)
