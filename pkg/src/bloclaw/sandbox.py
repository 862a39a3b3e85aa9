"""Sandbox supervision: script instrumentation, worker execution, harvest.

The supervisor composes instrumented scripts (interception header, the
user's code byte-exact, sweep footer), runs each one in its own worker
process with wall-clock and memory caps, and harvests artifact records
from the sentinel-framed stdout stream.

Wire protocol (bit-exact): worker -> supervisor records are single lines
``@@BLOCLAW_ARTIFACT@@ {"seq":<int>,"kind":"<kind>","origin":"<origin>",
"payload":"<text-or-base64>"}`` terminated by ``\\n``. Supervisor ->
worker: the instrumented script path as the sole argument, with
``BLOCLAW_WORKSPACE`` set to the session workspace.
"""

from __future__ import annotations

import base64
import importlib.util
import json
import logging
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

SENTINEL = b"@@BLOCLAW_ARTIFACT@@ "

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_MEMORY_CAP = 1 << 30  # 1 GiB

_HEADER = (
    "import bloclaw_worker.shims as __bloclaw_shims__\n"
    "__bloclaw_shims__.apply_display_overrides()\n"
)
_FOOTER = "\n__bloclaw_shims__.sweep_and_emit(globals())\n"

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_IMAGE_MAGICS = (_PNG_MAGIC, b"\xff\xd8\xff", b"GIF8")


class WorkerUnavailableError(RuntimeError):
    """The worker runtime cannot be spawned on this host."""


@dataclass(frozen=True)
class ExecutionRequest:
    user_code: str
    workspace_dir: Path
    timeout: float = DEFAULT_TIMEOUT_S
    memory_cap: int = DEFAULT_MEMORY_CAP
    mounted_files: tuple[str, ...] = ()
    artifact_prefix: str = "art"


@dataclass(frozen=True)
class InstrumentedScript:
    full_text: str
    user_span: tuple[int, int]


@dataclass(frozen=True)
class CapturedArtifact:
    id: str
    kind: str
    payload: str
    origin: str
    byte_size: int


@dataclass(frozen=True)
class ExecutionReport:
    status: str  # ok | error | timeout | killed
    artifacts: tuple[CapturedArtifact, ...]
    duration_ms: int
    worker_exit_code: int | None


def build_instrumented_script(user_code: str) -> InstrumentedScript:
    """Compose header + user code + footer; the user bytes are untouched.

    The header installs the display overrides before any user byte runs;
    the footer sweeps the namespace afterwards. Shim bodies live in the
    worker package; these stubs only invoke them.
    """
    full_text = _HEADER + user_code + _FOOTER
    return InstrumentedScript(
        full_text=full_text,
        user_span=(len(_HEADER), len(_HEADER) + len(user_code)),
    )


def harvest_artifacts(stream: bytes, id_prefix: str = "art") -> list[CapturedArtifact]:
    """Split a worker stdout stream into ordered artifacts.

    Sentinel lines parse to one artifact each; all other bytes coalesce
    into stdout artifacts preserving interleaving order. Malformed record
    lines become error_record artifacts; harvesting never aborts.
    """
    artifacts: list[CapturedArtifact] = []
    plain: list[bytes] = []
    counter = 0

    def next_id() -> str:
        nonlocal counter
        counter += 1
        return f"{id_prefix}-{counter}"

    def flush_plain() -> None:
        if not plain:
            return
        text = b"".join(plain).decode("utf-8", errors="replace")
        artifacts.append(
            CapturedArtifact(
                id=next_id(),
                kind="stdout",
                payload=text,
                origin="stream",
                byte_size=len(text.encode("utf-8")),
            )
        )
        plain.clear()

    for line in stream.splitlines(keepends=True):
        if not line.startswith(SENTINEL):
            plain.append(line)
            continue
        flush_plain()
        body = line[len(SENTINEL) :].strip()
        artifacts.append(_parse_record(body, next_id))
    flush_plain()
    return artifacts


def _parse_record(body: bytes, next_id) -> CapturedArtifact:
    try:
        record = json.loads(body)
        kind = record["kind"]
        origin = record["origin"]
        payload = record["payload"]
        if not isinstance(payload, str):
            raise TypeError("payload must be text")
    except Exception as exc:
        excerpt = body[:120].decode("utf-8", errors="replace")
        return CapturedArtifact(
            id=next_id(),
            kind="error_record",
            payload=f"malformed artifact record ({exc}): {excerpt}",
            origin="stream",
            byte_size=len(body),
        )
    byte_size = len(payload.encode("utf-8"))
    if kind == "raster_image_b64":
        try:
            decoded = base64.b64decode(payload, validate=True)
        except Exception:
            decoded = b""
        if not decoded.startswith(_IMAGE_MAGICS):
            return CapturedArtifact(
                id=next_id(),
                kind="error_record",
                payload="raster record did not decode to an image",
                origin=origin,
                byte_size=byte_size,
            )
        byte_size = len(decoded)
    return CapturedArtifact(
        id=next_id(), kind=kind, payload=payload, origin=origin, byte_size=byte_size
    )


class SandboxSupervisor:
    """Runs instrumented scripts in isolated worker processes.

    One process per request; reports are immutable and safe to share.
    Network access and out-of-workspace writes are denied by default via
    worker-side guards (defense in depth, not container-grade hardening).
    """

    def __init__(
        self,
        worker_command: tuple[str, ...] | None = None,
        allow_network: bool = False,
        workspace_only_writes: bool = True,
    ):
        self.worker_command = worker_command or (sys.executable, "-m", "bloclaw_worker")
        self.allow_network = allow_network
        self.workspace_only_writes = workspace_only_writes
        if worker_command is None and importlib.util.find_spec("bloclaw_worker") is None:
            raise WorkerUnavailableError(
                "bloclaw_worker is not importable; install the worker package"
            )

    def execute(self, req: ExecutionRequest) -> ExecutionReport:
        workspace = Path(req.workspace_dir)
        workspace.mkdir(parents=True, exist_ok=True)
        script = build_instrumented_script(req.user_code)
        script_path = workspace / f".bloclaw_script_{int(time.time() * 1000)}.py"
        script_path.write_text(script.full_text, encoding="utf-8")

        scratch = workspace / ".scratch"
        scratch.mkdir(exist_ok=True)
        env = dict(**_inherited_env())
        env["BLOCLAW_WORKSPACE"] = str(workspace)
        env["TMPDIR"] = str(scratch)
        env["MPLCONFIGDIR"] = str(scratch)
        if not self.allow_network:
            env["BLOCLAW_NO_NETWORK"] = "1"
        if self.workspace_only_writes:
            env["BLOCLAW_WORKSPACE_ONLY"] = "1"

        started = time.monotonic()
        try:
            proc = subprocess.Popen(
                [*self.worker_command, str(script_path)],
                cwd=str(workspace),
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise WorkerUnavailableError(f"cannot spawn worker: {exc}") from exc

        stdout_buf, stderr_buf = bytearray(), bytearray()
        readers = [
            threading.Thread(target=_drain, args=(proc.stdout, stdout_buf), daemon=True),
            threading.Thread(target=_drain, args=(proc.stderr, stderr_buf), daemon=True),
        ]
        for reader in readers:
            reader.start()

        status = _watch(proc, req, started)
        for reader in readers:
            reader.join(timeout=5)
        duration_ms = int((time.monotonic() - started) * 1000)
        exit_code = proc.returncode

        artifacts = harvest_artifacts(bytes(stdout_buf), id_prefix=req.artifact_prefix)
        if stderr_buf:
            text = stderr_buf.decode("utf-8", errors="replace")
            artifacts.append(
                CapturedArtifact(
                    id=f"{req.artifact_prefix}-{len(artifacts) + 1}",
                    kind="stderr",
                    payload=text,
                    origin="stream",
                    byte_size=len(stderr_buf),
                )
            )
        if status == "running":
            status = "ok" if exit_code == 0 else "error"
        try:
            script_path.unlink()
        except OSError:
            pass
        return ExecutionReport(
            status=status,
            artifacts=tuple(artifacts),
            duration_ms=duration_ms,
            worker_exit_code=exit_code,
        )

    def run_probe(self, name: str, args: dict, workspace_dir: Path, **kw) -> ExecutionReport:
        """Invoke a builtin worker probe through the normal execution path.

        The probe request is encoded as literals in the instrumented
        script, so probes inherit every cap and capture guarantee.
        """
        code = (
            "from bloclaw_worker.probes import run_builtin_probe\n"
            f"run_builtin_probe({name!r}, {json.dumps(args)})\n"
        )
        return self.execute(
            ExecutionRequest(user_code=code, workspace_dir=workspace_dir, **kw)
        )


def _inherited_env() -> dict:
    import os

    return dict(os.environ)


def _drain(pipe, buf: bytearray) -> None:
    try:
        while True:
            chunk = pipe.read(65536)
            if not chunk:
                break
            buf.extend(chunk)
    except Exception:
        pass
    finally:
        try:
            pipe.close()
        except Exception:
            pass


def _watch(proc: subprocess.Popen, req: ExecutionRequest, started: float) -> str:
    """Poll for exit, wall-clock breach, or memory breach."""
    try:
        import psutil

        handle = psutil.Process(proc.pid)
    except Exception:
        handle = None
    while True:
        if proc.poll() is not None:
            return "running"
        if time.monotonic() - started >= req.timeout:
            _terminate(proc)
            return "timeout"
        if handle is not None:
            try:
                rss = handle.memory_info().rss
                for child in handle.children(recursive=True):
                    rss += child.memory_info().rss
                if rss > req.memory_cap:
                    _terminate(proc)
                    return "killed"
            except Exception:
                pass
        time.sleep(0.025)


def _terminate(proc: subprocess.Popen) -> None:
    try:
        proc.kill()
    except Exception:
        pass
    try:
        proc.wait(timeout=5)
    except Exception:
        pass
