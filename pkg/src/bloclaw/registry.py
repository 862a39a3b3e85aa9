"""The capability catalog: builtin actions plus model-authored skills.

Skill scripts persist to disk self-described: a manifest front-matter
block at the file head (between ``#-- bloclaw-manifest`` and
``#-- end-manifest`` lines, one ``# key: value`` pair per line) followed
by the worker-runtime script body. A skill runs through the sandbox like
any other worker script, inheriting every interception guarantee.
"""

from __future__ import annotations

import datetime
import logging
import os
import re
import tempfile
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .budget import estimate_tokens
from .routing import REQUIRED_SLOTS, TOKEN_CLASSES, ActionKind

logger = logging.getLogger(__name__)

NAME_RE = re.compile(r"^[a-z0-9_]{1,64}$")

MANIFEST_OPEN = "#-- bloclaw-manifest"
MANIFEST_CLOSE = "#-- end-manifest"

EXEC_BUILTIN = "builtin_gateway"
EXEC_WORKER = "worker_script"


class SkillError(ValueError):
    """Rejection of a skill persist request (bad name, collision, ...)."""


@dataclass(frozen=True)
class ToolManifest:
    name: str
    description: str
    action_keyword: str
    slots: dict[str, str]  # slot name -> token class name
    execution_kind: str
    script_path: str | None = None
    version: int = 1
    created_at: str = ""


def _builtin_manifests() -> tuple[ToolManifest, ...]:
    descriptions = {
        ActionKind.CHAT: "reply conversationally; no tool is invoked",
        ActionKind.TWO_D_MOLECULE: "render a 2D depiction of a molecule from its line notation",
        ActionKind.FOLD_PROTEIN: "predict the 3D structure of an amino-acid sequence",
        ActionKind.FETCH_STRUCTURE: "fetch a structure entry from the archive by 4-character id",
        ActionKind.DOCKING: "co-render a receptor structure with an embedded ligand",
        ActionKind.RUN_CODE: "execute a Python script in the instrumented sandbox",
        ActionKind.CREATE_TOOL: "persist a new skill script and advertise it next turn",
        ActionKind.RAG_ANSWER: "answer from the mounted-file context; no tool is invoked",
    }
    out = []
    for kind in ActionKind:
        out.append(
            ToolManifest(
                name=kind.value.lower(),
                description=descriptions[kind],
                action_keyword=kind.value,
                slots={slot: cls.name for slot, cls in REQUIRED_SLOTS[kind].items()},
                execution_kind=EXEC_BUILTIN,
            )
        )
    return tuple(out)


BUILTIN_MANIFESTS = _builtin_manifests()
_BUILTIN_NAMES = {m.name for m in BUILTIN_MANIFESTS}
_BUILTIN_KEYWORDS = {m.action_keyword for m in BUILTIN_MANIFESTS}


def render_front_matter(manifest: ToolManifest) -> str:
    slots = ",".join(f"{k}={v}" for k, v in sorted(manifest.slots.items()))
    lines = [
        MANIFEST_OPEN,
        f"# name: {manifest.name}",
        f"# description: {manifest.description}",
        f"# action_keyword: {manifest.action_keyword}",
        f"# slots: {slots}",
        f"# execution_kind: {manifest.execution_kind}",
        f"# version: {manifest.version}",
        f"# created_at: {manifest.created_at}",
        MANIFEST_CLOSE,
    ]
    return "\n".join(lines) + "\n"


def parse_front_matter(text: str, script_path: str) -> ToolManifest:
    """Parse a skill file's manifest block; raises SkillError on damage."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != MANIFEST_OPEN:
        raise SkillError(f"{script_path}: missing manifest opener")
    fields: dict[str, str] = {}
    for idx, line in enumerate(lines[1:], start=1):
        if line.strip() == MANIFEST_CLOSE:
            break
        m = re.match(r"#\s*([a-z_]+):\s?(.*)$", line)
        if m is None:
            raise SkillError(f"{script_path}: bad manifest line {idx + 1}")
        fields[m.group(1)] = m.group(2)
    else:
        raise SkillError(f"{script_path}: manifest never closed")
    try:
        slots = {}
        if fields.get("slots"):
            for pair in fields["slots"].split(","):
                slot, cls = pair.split("=", 1)
                if cls not in TOKEN_CLASSES:
                    raise SkillError(f"{script_path}: unknown token class {cls}")
                slots[slot] = cls
        return ToolManifest(
            name=fields["name"],
            description=fields["description"],
            action_keyword=fields["action_keyword"],
            slots=slots,
            execution_kind=fields["execution_kind"],
            script_path=script_path,
            version=int(fields["version"]),
            created_at=fields["created_at"],
        )
    except (KeyError, ValueError) as exc:
        raise SkillError(f"{script_path}: incomplete manifest ({exc})") from exc


def skill_body(text: str) -> str:
    """The script body beneath the front-matter block."""
    marker = MANIFEST_CLOSE + "\n"
    idx = text.find(marker)
    return text[idx + len(marker) :] if idx >= 0 else text


class CapabilityRegistry:
    """Owns the tool catalog and the on-disk skills directory.

    Reads serve an immutable snapshot; persist/load swap the snapshot
    under an exclusive lock.
    """

    def __init__(self, skills_dir: Path | str):
        self.skills_dir = Path(skills_dir)
        self._lock = threading.RLock()
        self._catalog: tuple[ToolManifest, ...] = BUILTIN_MANIFESTS
        self.load_catalog()

    # -- reads ---------------------------------------------------------

    def catalog(self) -> tuple[ToolManifest, ...]:
        return self._catalog

    def get(self, name: str) -> ToolManifest | None:
        for manifest in self._catalog:
            if manifest.name == name:
                return manifest
        return None

    def find_by_keyword(self, keyword: str) -> ToolManifest | None:
        keyword = keyword.upper()
        for manifest in self._catalog:
            if manifest.action_keyword == keyword:
                return manifest
        return None

    # -- writes --------------------------------------------------------

    def persist_skill(
        self,
        name: str,
        description: str,
        slots: dict[str, str] | None,
        body: str,
        overwrite: bool = False,
    ) -> Path:
        """Atomically write a skill file and refresh the catalog.

        Rejects bad identifiers, traversal attempts, and collisions with
        builtins or existing skills (unless ``overwrite``, which bumps the
        version).
        """
        if not body or not body.strip():
            raise SkillError("skill body is empty")
        if os.sep in name or (os.altsep and os.altsep in name) or ".." in name:
            raise SkillError(f"skill name {name!r} contains path components")
        if not NAME_RE.fullmatch(name):
            raise SkillError(f"skill name {name!r} must match [a-z0-9_]{{1,64}}")
        if name in _BUILTIN_NAMES or any(
            name.startswith(builtin + "_") for builtin in _BUILTIN_NAMES
        ):
            raise SkillError(f"skill name {name!r} collides with a builtin keyword")
        slots = dict(slots or {"target": "FREE_TEXT"})
        for slot, cls in slots.items():
            if cls not in TOKEN_CLASSES:
                raise SkillError(f"unknown token class {cls!r} for slot {slot!r}")

        with self._lock:
            existing = self.get(name)
            if existing is not None and not overwrite:
                raise SkillError(f"skill {name!r} already exists (pass overwrite to replace)")
            version = existing.version + 1 if existing is not None else 1
            self.skills_dir.mkdir(parents=True, exist_ok=True)
            path = self.skills_dir / name
            manifest = ToolManifest(
                name=name,
                description=description,
                action_keyword=name.upper(),
                slots=slots,
                execution_kind=EXEC_WORKER,
                script_path=str(path),
                version=version,
                created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(
                    timespec="seconds"
                ),
            )
            content = render_front_matter(manifest) + body
            fd, tmp_name = tempfile.mkstemp(dir=self.skills_dir, prefix=f".{name}.")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(content)
                os.replace(tmp_name, path)
            except BaseException:
                try:
                    os.unlink(tmp_name)
                except OSError:
                    pass
                raise
            self.load_catalog()
            return path

    def load_catalog(self) -> tuple[ToolManifest, ...]:
        """Builtins first, then valid skills by name; damage is skipped.

        Loading never fails wholesale: a file with malformed front-matter
        logs a warning and is left out.
        """
        with self._lock:
            skills: list[ToolManifest] = []
            if self.skills_dir.is_dir():
                for path in sorted(self.skills_dir.iterdir()):
                    if path.name.startswith(".") or not path.is_file():
                        continue
                    try:
                        text = path.read_text(encoding="utf-8")
                        skills.append(parse_front_matter(text, str(path)))
                    except (OSError, UnicodeDecodeError, SkillError) as exc:
                        logger.warning("skipping skill file %s: %s", path, exc)
            skills.sort(key=lambda m: m.name)
            self._catalog = BUILTIN_MANIFESTS + tuple(skills)
            return self._catalog


GRAMMAR_PREAMBLE = """\
Respond with exactly one directive per turn, using these tags:
  <thought>your private reasoning</thought>
  <action>ONE_ACTION_KEYWORD</action>
  <target>the primary parameter</target>
Additional parameter tags when the action requires them: <ligand> for
DOCKING, <name> for CREATE_TOOL. Put nothing but the payload inside a
parameter tag. Available actions:
"""


def compose_capability_prompt(
    catalog: tuple[ToolManifest, ...], budget: int
) -> str:
    """Render the directive grammar plus one line per tool.

    Over budget, descriptions shrink (eventually to nothing) before any
    keyword or slot spec is dropped.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")

    def render(description_cap: int | None) -> str:
        lines = [GRAMMAR_PREAMBLE]
        for manifest in catalog:
            slots = " ".join(
                f"<{slot}>:{cls}" for slot, cls in sorted(manifest.slots.items())
            )
            desc = manifest.description
            if description_cap is not None:
                desc = desc[:description_cap]
            entry = f"- {manifest.action_keyword}"
            if slots:
                entry += f" [{slots}]"
            if desc:
                entry += f" -- {desc}"
            lines.append(entry)
        return "\n".join(lines) + "\n"

    text = render(None)
    if estimate_tokens(text) <= budget:
        return text
    cap = max(len(m.description) for m in catalog) if catalog else 0
    while cap > 0:
        cap = cap // 2
        text = render(cap)
        if estimate_tokens(text) <= budget:
            return text
    return render(0)
