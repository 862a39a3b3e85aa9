"""Mounted-file intake: classification, token-budgeted digests, context.

Each mounted file yields one digest capped at 2,500 estimated tokens. The
context fragment for prompting concatenates digests newest-first; over
budget, whole digests drop oldest-first so a tabular header is never cut
mid-row. Structure files stream raw to the viewport; only their summary
enters the prompt.
"""

from __future__ import annotations

import csv
import re
import time
from dataclasses import dataclass
from pathlib import Path

from .budget import estimate_tokens

MEDIA_PDF = "pdf_document"
MEDIA_TABULAR = "tabular"
MEDIA_PDB = "structure_pdb"
MEDIA_TEXT = "plain_text"

EXTENSION_CLASSES = {
    ".pdf": MEDIA_PDF,
    ".csv": MEDIA_TABULAR,
    ".tsv": MEDIA_TABULAR,
    ".xlsx": MEDIA_TABULAR,
    ".pdb": MEDIA_PDB,
    ".txt": MEDIA_TEXT,
}

PREVIEW_ROWS = 20
TYPE_SNIFF_ROWS = 100
DIGEST_TOKEN_CAP = 2_500
DIGEST_CHAR_CAP = DIGEST_TOKEN_CAP * 4

_PDB_RECORD_NAMES = (
    "HEADER", "TITLE", "COMPND", "SOURCE", "KEYWDS", "EXPDTA", "AUTHOR",
    "REMARK", "SEQRES", "ATOM", "HETATM", "TER", "MODEL", "ENDMDL", "CONECT",
    "MASTER", "END", "CRYST1", "SCALE", "ORIGX", "HELIX", "SHEET", "SSBOND",
)


class IntakeError(ValueError):
    """File rejected at mount time; the message is user-visible."""


@dataclass(frozen=True)
class MountedFile:
    id: str
    logical_name: str
    media_class: str
    byte_size: int
    path: str


@dataclass(frozen=True)
class IntakeDigest:
    file_id: str
    token_estimate: int
    digest_text: str
    probe_latency_ms: float


def classify_file(path: Path) -> str:
    """Extension-led classification with a content check on mismatch.

    Content that clearly identifies another supported class wins over the
    extension; unrecognized binary is rejected outright.
    """
    path = Path(path)
    if not path.is_file():
        raise IntakeError(f"{path.name}: not a readable file")
    size = path.stat().st_size
    if size == 0:
        raise IntakeError(f"{path.name}: file is empty, nothing to mount")
    tentative = EXTENSION_CLASSES.get(path.suffix.lower())
    head = path.read_bytes()[:4096]
    sniffed = _sniff(head)
    if sniffed is None:
        raise IntakeError(f"{path.name}: unrecognized binary content")
    if tentative is None and sniffed == MEDIA_TEXT:
        raise IntakeError(
            f"{path.name}: unsupported type (expected one of {' '.join(EXTENSION_CLASSES)})"
        )
    # MEDIA_TEXT is the weak "some text" answer: any text-based extension
    # class is consistent with it. Strong magic (PDF, zip, PDB records)
    # overrides a mismatched extension.
    if sniffed != MEDIA_TEXT and tentative != sniffed:
        return sniffed
    return tentative or sniffed


def _sniff(head: bytes) -> str | None:
    if head.startswith(b"%PDF"):
        return MEDIA_PDF
    if head.startswith(b"PK\x03\x04"):
        return MEDIA_TABULAR  # zip container: spreadsheet
    if b"\x00" in head:
        return None
    try:
        text = head.decode("utf-8")
    except UnicodeDecodeError:
        return None
    first_words = {line.split(" ")[0] for line in text.splitlines()[:50] if line}
    if any(word in _PDB_RECORD_NAMES for word in first_words):
        return MEDIA_PDB
    return MEDIA_TEXT


class IntakeEngine:
    """Produces digests for mounted files.

    Document and spreadsheet probing is delegated to the worker runtime
    through ``probe_runner(name, args) -> artifacts``; CSV, PDB and plain
    text are summarized in-process.
    """

    def __init__(self, probe_runner=None):
        self._probe_runner = probe_runner

    def mount(self, path: Path | str, file_id: str, logical_name: str | None = None) -> MountedFile:
        path = Path(path)
        media_class = classify_file(path)
        return MountedFile(
            id=file_id,
            logical_name=logical_name or path.name,
            media_class=media_class,
            byte_size=path.stat().st_size,
            path=str(path),
        )

    def classify_and_probe(self, file: MountedFile) -> IntakeDigest:
        started = time.perf_counter()
        path = Path(file.path)
        if file.media_class == MEDIA_TABULAR:
            if path.suffix.lower() in (".csv", ".tsv"):
                text = _probe_delimited(path)
            else:
                text = self._delegate("table_probe", {"path": file.path})
        elif file.media_class == MEDIA_PDB:
            text = _probe_pdb(path, file.id)
        elif file.media_class == MEDIA_PDF:
            text = self._delegate("pdf_probe", {"path": file.path})
        elif file.media_class == MEDIA_TEXT:
            text = path.read_text(encoding="utf-8", errors="replace")[:DIGEST_CHAR_CAP]
        else:
            raise IntakeError(f"{file.logical_name}: unknown media class {file.media_class}")
        if not text.strip():
            raise IntakeError(f"{file.logical_name}: probe produced no digest")
        text = f"[file {file.logical_name} ({file.media_class})]\n" + text
        text = text[:DIGEST_CHAR_CAP]
        latency_ms = (time.perf_counter() - started) * 1000
        return IntakeDigest(
            file_id=file.id,
            token_estimate=estimate_tokens(text),
            digest_text=text,
            probe_latency_ms=latency_ms,
        )

    def _delegate(self, probe: str, args: dict) -> str:
        if self._probe_runner is None:
            raise IntakeError(f"no worker available for {probe}")
        artifacts = self._probe_runner(probe, args)
        texts = [a.payload for a in artifacts if a.kind == "stdout" and a.payload.strip()]
        errors = [a.payload for a in artifacts if a.kind == "error_record"]
        if not texts:
            detail = errors[0] if errors else "no output"
            raise IntakeError(f"{probe} failed: {detail}")
        return "\n".join(texts)


def _probe_delimited(path: Path) -> str:
    """Header + typed preview for CSV/TSV, single streaming pass."""
    delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    preview: list[list[str]] = []
    sample: list[list[str]] = []
    header: list[str] | None = None
    with path.open("r", encoding="utf-8", errors="replace", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for i, row in enumerate(reader):
            if i == 0:
                header = row
                continue
            if len(preview) < PREVIEW_ROWS:
                preview.append(row)
            if len(sample) < TYPE_SNIFF_ROWS:
                sample.append(row)
            else:
                break
    if header is None:
        raise IntakeError(f"{path.name}: no header row")
    types = _sniff_column_types(header, sample)
    lines = [
        "columns: " + ", ".join(f"{name}:{kind}" for name, kind in zip(header, types)),
        delimiter.join(header),
    ]
    lines += [delimiter.join(row) for row in preview]
    return "\n".join(lines)


_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}([T ].*)?$|^\d{1,2}/\d{1,2}/\d{2,4}$")


def _sniff_column_types(header: list[str], sample: list[list[str]]) -> list[str]:
    types = []
    for col in range(len(header)):
        values = [row[col].strip() for row in sample if col < len(row) and row[col].strip()]
        if not values:
            types.append("text")
            continue
        if all(re.fullmatch(r"[-+]?\d+", v) for v in values):
            types.append("integer")
        elif all(re.fullmatch(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?", v) for v in values):
            types.append("real")
        elif all(_DATE_RE.match(v) for v in values):
            types.append("date")
        else:
            types.append("text")
    return types


def _probe_pdb(path: Path, file_id: str) -> str:
    """Atom/chain/residue summary; the raw stream is referenced, not inlined."""
    atom_records = 0
    het_records = 0
    chains: set[str] = set()
    res_min = res_max = None
    with path.open("r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            if line.startswith("ATOM"):
                atom_records += 1
            elif line.startswith("HETATM"):
                het_records += 1
            else:
                continue
            if len(line) > 26:
                chain = line[21].strip()
                if chain:
                    chains.add(chain)
                try:
                    seq = int(line[22:26])
                except ValueError:
                    continue
                res_min = seq if res_min is None else min(res_min, seq)
                res_max = seq if res_max is None else max(res_max, seq)
    if atom_records + het_records == 0:
        raise IntakeError(f"{path.name}: no ATOM/HETATM records")
    span = f"{res_min}-{res_max}" if res_min is not None else "n/a"
    return (
        f"ATOM records: {atom_records}\n"
        f"HETATM records: {het_records}\n"
        f"chains: {', '.join(sorted(chains)) or 'n/a'}\n"
        f"residue span: {span}\n"
        f"raw stream: artifact://{file_id}"
    )


def compose_context(digests: list[IntakeDigest], budget: int) -> str:
    """Concatenate digests newest-first; evict whole digests oldest-first."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    kept: list[IntakeDigest] = []
    total = 0
    for digest in reversed(digests):
        candidate = total + digest.token_estimate + 1  # separator allowance
        if candidate > budget:
            break
        kept.append(digest)
        total = candidate
    return "\n\n".join(d.digest_text for d in kept)
