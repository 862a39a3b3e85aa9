"""The agent loop: prompt composition, directive dispatch, event streams.

One turn: append the user message, compose the system prompt (directive
grammar + capability catalog + intake context), call the provider, parse
the directive, dispatch it to the owning module, feed the observation
back, and stream events throughout. Turns are strictly serialized per
session; event payloads are deterministic so replays produce byte-equal
logs.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import events as ev
from .config import AppConfig
from .gateway import (
    GatewayError,
    NotFoundError,
    ScienceGateway,
    TransportError,
    ValidationError,
)
from .intake import IntakeDigest, IntakeEngine, MountedFile, compose_context
from .providers import ModelProvider, ProviderError
from .registry import CapabilityRegistry, SkillError, compose_capability_prompt
from .routing import ActionKind, DirectiveEnvelope, ParseFailure, parse_directive
from .sandbox import CapturedArtifact, ExecutionRequest, SandboxSupervisor

logger = logging.getLogger(__name__)

MAX_CODE_ATTEMPTS = 3  # initial run plus up to two traceback-guided retries
TOKEN_CHUNK_CHARS = 60


@dataclass
class Session:
    id: str
    workspace_dir: Path
    history: list[dict] = field(default_factory=list)
    mounted_files: list[MountedFile] = field(default_factory=list)
    digests: list[IntakeDigest] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    event_log: list[ev.ServerEvent] = field(default_factory=list)
    turn_lock: threading.Lock = field(default_factory=threading.Lock)
    artifact_counter: int = 0
    file_counter: int = 0
    subscribers: list[queue.Queue] = field(default_factory=list)


class SessionService:
    """Owns sessions, the artifact store, and the dispatch table."""

    def __init__(
        self,
        config: AppConfig,
        provider: ModelProvider,
        supervisor: SandboxSupervisor,
        gateway: ScienceGateway,
        registry: CapabilityRegistry,
    ):
        self.config = config
        self.provider = provider
        self.supervisor = supervisor
        self.gateway = gateway
        self.registry = registry
        self.intake = IntakeEngine(probe_runner=self._intake_probe)
        self.sessions: dict[str, Session] = {}
        self.artifacts: dict[str, CapturedArtifact] = {}
        self._lock = threading.Lock()
        self._session_counter = 0

    # -- session lifecycle ------------------------------------------------

    def create_session(self) -> Session:
        with self._lock:
            self._session_counter += 1
            sid = f"s{self._session_counter}"
        workspace = Path(self.config.workspace_root) / sid
        workspace.mkdir(parents=True, exist_ok=True)
        session = Session(id=sid, workspace_dir=workspace)
        self.sessions[sid] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(f"no session {session_id!r}")
        return session

    def mount_file(self, session_id: str, filename: str, data: bytes) -> MountedFile:
        """Save an upload into the session workspace and digest it."""
        session = self.get_session(session_id)
        files_dir = session.workspace_dir / "files"
        files_dir.mkdir(exist_ok=True)
        safe_name = Path(filename).name
        path = files_dir / safe_name
        path.write_bytes(data)
        session.file_counter += 1
        mounted = self.intake.mount(path, file_id=f"{session.id}-f{session.file_counter}")
        digest = self.intake.classify_and_probe(mounted)
        session.mounted_files.append(mounted)
        session.digests.append(digest)
        if mounted.media_class == "structure_pdb":
            # Raw stream is referenced from the digest and served by id;
            # only the summary enters the prompt.
            self.artifacts[mounted.id] = CapturedArtifact(
                id=mounted.id,
                kind="file_ref",
                payload=path.read_text(encoding="utf-8", errors="replace"),
                origin="explicit_save",
                byte_size=mounted.byte_size,
            )
        return mounted

    # -- the turn loop ----------------------------------------------------

    def handle_user_message(self, session_id: str, text: str, on_event=None) -> list[ev.ServerEvent]:
        session = self.get_session(session_id)
        with session.turn_lock:
            turn_events: list[ev.ServerEvent] = []

            def emit(event: ev.ServerEvent) -> None:
                turn_events.append(event)
                session.event_log.append(event)
                for q in list(session.subscribers):
                    q.put(event)
                if on_event is not None:
                    on_event(event)

            try:
                self._run_turn(session, text, emit)
            except Exception:
                logger.exception("turn failed unexpectedly")
                emit(ev.turn_error("internal", "unexpected turn failure"))
                emit(ev.turn_done())
            return turn_events

    def _run_turn(self, session: Session, text: str, emit) -> None:
        session.history.append({"role": "user", "text": text})
        system_prompt = self._system_prompt(session)
        try:
            raw = self.provider.complete(system_prompt, session.history)
        except ProviderError as exc:
            emit(ev.turn_error("provider_unreachable", str(exc)))
            emit(ev.turn_done())
            return

        for chunk in _chunks(raw):
            emit(ev.token_delta(chunk))
        session.history.append({"role": "assistant", "text": raw})

        result = parse_directive(raw)
        if isinstance(result, ParseFailure):
            emit(ev.turn_error(result.category.value, result.diagnostic))
            emit(ev.turn_done(reply=raw))
            return

        envelope = result
        if envelope.action in (ActionKind.CHAT, ActionKind.RAG_ANSWER):
            reply = envelope.thought or raw
            emit(ev.turn_done(reply=reply))
            return

        emit(
            ev.directive_parsed(
                envelope.action.value,
                sorted(envelope.params),
                envelope.parse_track,
            )
        )
        observation, error = self._dispatch_with_retries(session, envelope, emit)
        session.history.append({"role": "observation", "text": observation})

        reply = observation
        if error is None and self.config.follow_up_reply:
            try:
                reply = self.provider.complete(self._system_prompt(session), session.history)
                session.history.append({"role": "assistant", "text": reply})
            except ProviderError:
                reply = observation
        if error is not None:
            emit(ev.turn_error(*error))
        emit(ev.turn_done(reply=reply))

    def _dispatch_with_retries(self, session, envelope, emit):
        """Dispatch once; RUN_CODE feeds tracebacks back for up to two retries."""
        observation, error = self.dispatch_directive(session, envelope, emit)
        attempts = 1
        while (
            envelope.action is ActionKind.RUN_CODE
            and error is not None
            and error[0] == "code_execution_failed"
            and attempts < MAX_CODE_ATTEMPTS
        ):
            session.history.append({"role": "observation", "text": observation})
            try:
                raw = self.provider.complete(self._system_prompt(session), session.history)
            except ProviderError as exc:
                return observation, ("provider_unreachable", str(exc))
            session.history.append({"role": "assistant", "text": raw})
            retry = parse_directive(raw)
            if not isinstance(retry, DirectiveEnvelope) or retry.action is not ActionKind.RUN_CODE:
                return observation, error
            envelope = retry
            observation, error = self.dispatch_directive(session, envelope, emit)
            attempts += 1
        return observation, error

    # -- dispatch ----------------------------------------------------------

    def dispatch_directive(self, session: Session, envelope: DirectiveEnvelope, emit):
        """Route one directive to its owning module.

        Returns (observation_text, error) where error is None or a
        (category, message) pair for terminal failures.
        """
        action = envelope.action
        try:
            if action is ActionKind.TWO_D_MOLECULE:
                return self._do_depict(session, envelope, emit)
            if action is ActionKind.FOLD_PROTEIN:
                return self._do_fold(session, envelope, emit)
            if action is ActionKind.FETCH_STRUCTURE:
                return self._do_fetch(session, envelope, emit)
            if action is ActionKind.DOCKING:
                return self._do_docking(session, envelope, emit)
            if action is ActionKind.RUN_CODE:
                return self._do_run_code(session, envelope, emit)
            if action is ActionKind.CREATE_TOOL:
                return self._do_create_tool(session, envelope, emit)
            return "no tool invoked", None
        except ValidationError as exc:
            return f"input rejected: {exc}", ("validation_error", str(exc))
        except NotFoundError as exc:
            return f"not found: {exc}", ("not_found", str(exc))
        except TransportError as exc:
            return f"service unreachable: {exc}", ("service_unreachable", str(exc))
        except GatewayError as exc:
            return f"service error: {exc}", ("service_error", str(exc))
        except SkillError as exc:
            return f"skill rejected: {exc}", ("skill_rejected", str(exc))

    def _do_depict(self, session, envelope, emit):
        smiles = envelope.params["target"].value
        report = self.supervisor.run_probe(
            "depict_2d",
            {"smiles": smiles},
            session.workspace_dir,
            artifact_prefix=self._artifact_prefix(session),
        )
        stored = self._store_artifacts(session, report.artifacts)
        rasters = [a for a in stored if a.kind == "raster_image_b64"]
        errors = [a for a in stored if a.kind == "error_record"]
        if not rasters:
            message = errors[0].payload if errors else "depiction produced no image"
            return f"depiction failed: {message}", ("depiction_failed", message)
        emit(ev.artifact_ready(rasters[0].id, rasters[0].kind))
        emit(ev.viewport_update({"artifact_id": rasters[0].id, "kind": rasters[0].kind}))
        return f"rendered 2D depiction of {smiles} (artifact {rasters[0].id})", None

    def _do_fold(self, session, envelope, emit):
        sequence = envelope.params["target"].value
        payload = self.gateway.fold_sequence(sequence)
        artifact_id = self._store_structure(session, payload.pdb_text)
        emit(ev.viewport_update(_scene_event(
            [(artifact_id, "cartoon", "spectrum", payload.source)], (0.0, 0.0, 0.0)
        )))
        confidence = (
            f", mean confidence {payload.mean_confidence}"
            if payload.mean_confidence is not None
            else ""
        )
        return (
            f"predicted structure: {payload.atom_count} atoms, "
            f"chains {','.join(payload.chain_ids)}{confidence} (artifact {artifact_id})",
            None,
        )

    def _do_fetch(self, session, envelope, emit):
        pdb_id = envelope.params["target"].value
        payload = self.gateway.fetch_structure(pdb_id)
        artifact_id = self._store_structure(session, payload.pdb_text)
        emit(ev.viewport_update(_scene_event(
            [(artifact_id, "cartoon", "spectrum", payload.source)], (0.0, 0.0, 0.0)
        )))
        return (
            f"fetched {pdb_id.upper()}: {payload.atom_count} atoms (artifact {artifact_id})",
            None,
        )

    def _do_docking(self, session, envelope, emit):
        pdb_id = envelope.params["target"].value
        ligand = envelope.params["ligand"].value
        receptor = self.gateway.fetch_structure(pdb_id)
        scene = self.gateway.compose_docking_scene(
            receptor, ligand, workspace_dir=session.workspace_dir
        )
        layer_specs = []
        for layer in scene.layers:
            artifact_id = self._store_structure(session, layer.payload.pdb_text)
            layer_specs.append(
                (artifact_id, layer.representation, layer.color_scheme, layer.payload.source)
            )
        emit(ev.viewport_update(_scene_event(layer_specs, scene.camera_hint)))
        note = f" ({scene.warnings[0]})" if scene.warnings else ""
        return (
            f"docking scene for {pdb_id.upper()} with ligand {ligand}: "
            f"{len(scene.layers)} layer(s){note}",
            None,
        )

    def _do_run_code(self, session, envelope, emit):
        code = envelope.params["target"].value
        report = self.supervisor.execute(
            ExecutionRequest(
                user_code=code,
                workspace_dir=session.workspace_dir,
                timeout=self.config.sandbox.timeout_s,
                memory_cap=self.config.sandbox.memory_cap_bytes,
                artifact_prefix=self._artifact_prefix(session),
            )
        )
        stored = self._store_artifacts(session, report.artifacts)
        visuals = [a for a in stored if a.kind in ("raster_image_b64", "interactive_html")]
        for artifact in visuals:
            emit(ev.artifact_ready(artifact.id, artifact.kind))
        if visuals:
            emit(ev.viewport_update({"artifact_id": visuals[-1].id, "kind": visuals[-1].kind}))
        stdout_text = "".join(a.payload for a in stored if a.kind == "stdout")
        stderr_text = "".join(a.payload for a in stored if a.kind == "stderr")
        if report.status != "ok":
            message = stderr_text or f"worker status {report.status}"
            observation = f"execution {report.status}:\n{message[-2000:]}"
            return observation, ("code_execution_failed", report.status)
        observation = f"execution ok in {report.duration_ms} ms"
        if stdout_text:
            observation += f"\nstdout:\n{stdout_text[-2000:]}"
        if visuals:
            observation += f"\n{len(visuals)} figure artifact(s) captured"
        return observation, None

    def _do_create_tool(self, session, envelope, emit):
        name = envelope.params["name"].value
        body = envelope.params["target"].value
        description = envelope.thought or f"model-authored skill {name}"
        path = self.registry.persist_skill(name, description, None, body)
        return f"skill {name!r} persisted to {path.name}; advertised next turn", None

    # -- helpers -----------------------------------------------------------

    def _system_prompt(self, session: Session) -> str:
        capability = compose_capability_prompt(
            self.registry.catalog(), self.config.capability_budget_tokens
        )
        context = compose_context(session.digests, self.config.context_budget_tokens)
        if context:
            return f"{capability}\nMounted file context:\n{context}"
        return capability

    def _intake_probe(self, name: str, args: dict):
        workspace = Path(self.config.workspace_root) / "intake"
        report = self.supervisor.run_probe(name, args, workspace)
        return report.artifacts

    def _artifact_prefix(self, session: Session) -> str:
        session.artifact_counter += 1
        return f"{session.id}-t{session.artifact_counter}"

    def _store_artifacts(self, session, artifacts):
        for artifact in artifacts:
            self.artifacts[artifact.id] = artifact
        return list(artifacts)

    def _store_structure(self, session: Session, pdb_text: str) -> str:
        session.artifact_counter += 1
        artifact_id = f"{session.id}-st{session.artifact_counter}"
        self.artifacts[artifact_id] = CapturedArtifact(
            id=artifact_id,
            kind="file_ref",
            payload=pdb_text,
            origin="explicit_save",
            byte_size=len(pdb_text.encode("utf-8")),
        )
        return artifact_id

    def subscribe(self, session_id: str) -> queue.Queue:
        session = self.get_session(session_id)
        q: queue.Queue = queue.Queue()
        for event in session.event_log:
            q.put(event)
        session.subscribers.append(q)
        return q

    def unsubscribe(self, session_id: str, q: queue.Queue) -> None:
        session = self.sessions.get(session_id)
        if session and q in session.subscribers:
            session.subscribers.remove(q)


def _scene_event(layer_specs, camera) -> dict:
    return {
        "scene": {
            "layers": [
                {
                    "artifact_id": artifact_id,
                    "representation": representation,
                    "color_scheme": color_scheme,
                    "source": source,
                }
                for artifact_id, representation, color_scheme, source in layer_specs
            ],
            "camera": list(camera),
        }
    }


def _chunks(text: str) -> list[str]:
    """Greedy whitespace-aligned chunks; deterministic for replay."""
    import re

    words = re.findall(r"\S+\s*|\s+", text)
    chunks: list[str] = []
    current = ""
    for word in words:
        current += word
        if len(current) >= TOKEN_CHUNK_CHARS:
            chunks.append(current)
            current = ""
    if current:
        chunks.append(current)
    return chunks
