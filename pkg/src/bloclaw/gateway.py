"""Clients for remote science services and renderable scene composition.

All remote calls go through a swappable transport so tests run entirely on
recorded response bodies. Inputs are validated before any network attempt;
transport failures retry with exponential backoff while service-level
failures are terminal. Docking here is visualization only: the ligand is
embedded independently and co-rendered with the receptor — no poses or
energies are computed.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .routing import AMINO_ACID_SEQ, PDB_ID, SMILES

logger = logging.getLogger(__name__)

SOURCE_PREDICTED = "predicted"
SOURCE_ARCHIVE = "archive"
SOURCE_LIGAND = "ligand_embedded"

MIN_FOLD_LENGTH = 10
MAX_FOLD_LENGTH = 400


class GatewayError(Exception):
    """Base for gateway failures."""


class ValidationError(GatewayError):
    """Input rejected before any network call."""


class TransportError(GatewayError):
    """Retriable: the service could not be reached."""


class NotFoundError(GatewayError):
    """Terminal: the archive has no such entry."""


class ServiceError(GatewayError):
    """Terminal: the service answered with a non-success response."""


@dataclass(frozen=True)
class TransportResponse:
    status: int
    body: bytes


class HttpxTransport:
    """Real HTTP transport; constructed lazily so tests never import it."""

    def send(self, method: str, url: str, body: bytes | None, timeout: float) -> TransportResponse:
        import httpx

        try:
            response = httpx.request(method, url, content=body, timeout=timeout)
        except httpx.HTTPError as exc:
            raise TransportError(f"{method} {url}: {exc}") from exc
        return TransportResponse(status=response.status_code, body=response.content)


class FixtureTransport:
    """Replays recorded response bodies from a fixtures directory.

    The manifest is a JSON list of ``{method, url, file}`` entries; an
    unmatched request raises TransportError, so tests cannot silently hit
    the network path.
    """

    def __init__(self, fixtures_dir: Path | str):
        self.fixtures_dir = Path(fixtures_dir)
        manifest = json.loads((self.fixtures_dir / "manifest.json").read_text())
        self._entries = manifest
        self.calls: list[tuple[str, str]] = []

    def send(self, method: str, url: str, body: bytes | None, timeout: float) -> TransportResponse:
        self.calls.append((method, url))
        for entry in self._entries:
            if entry["method"] == method and entry["url"] == url:
                data = (self.fixtures_dir / entry["file"]).read_bytes()
                return TransportResponse(status=entry.get("status", 200), body=data)
        return TransportResponse(status=404, body=b"no fixture for this request")


@dataclass(frozen=True)
class StructurePayload:
    pdb_text: str
    source: str
    atom_count: int
    chain_ids: tuple[str, ...]
    mean_confidence: float | None = None


@dataclass(frozen=True)
class SceneLayer:
    payload: StructurePayload
    representation: str  # cartoon | stick
    color_scheme: str


@dataclass(frozen=True)
class ViewportScene:
    layers: tuple[SceneLayer, ...]
    camera_hint: tuple[float, float, float]
    warnings: tuple[str, ...] = field(default=())


def payload_from_pdb(pdb_text: str, source: str) -> StructurePayload:
    """Build a payload whose atom_count always matches its text."""
    atom_count = 0
    chains: set[str] = set()
    confidence_sum = 0.0
    confidence_n = 0
    for line in pdb_text.splitlines():
        if not line.startswith(("ATOM", "HETATM")):
            continue
        atom_count += 1
        if len(line) > 21 and line[21].strip():
            chains.add(line[21])
        if source == SOURCE_PREDICTED and len(line) >= 66:
            try:
                confidence_sum += float(line[60:66])
                confidence_n += 1
            except ValueError:
                pass
    mean_confidence = None
    if source == SOURCE_PREDICTED and confidence_n:
        mean_confidence = round(confidence_sum / confidence_n, 3)
    return StructurePayload(
        pdb_text=pdb_text,
        source=source,
        atom_count=atom_count,
        chain_ids=tuple(sorted(chains)),
        mean_confidence=mean_confidence,
    )


@dataclass(frozen=True)
class GatewayConfig:
    fold_endpoint: str = "https://api.esmatlas.com/foldSequence/v1/pdb/"
    archive_url_template: str = "https://files.rcsb.org/download/{pdb_id}.pdb"
    timeout_s: float = 30.0
    retry_attempts: int = 3
    backoff_s: float = 0.5


class ScienceGateway:
    """Stateless clients for fold prediction and the structure archive."""

    def __init__(self, config: GatewayConfig | None = None, transport=None, probe_runner=None):
        self.config = config or GatewayConfig()
        self.transport = transport or HttpxTransport()
        self._probe_runner = probe_runner

    # -- remote calls ----------------------------------------------------

    def fold_sequence(self, sequence: str) -> StructurePayload:
        """Predict a structure for an amino-acid sequence.

        Confidence is surfaced as the mean of the per-atom temperature
        factor column, the predicted-confidence convention.
        """
        sequence = sequence.strip()
        if not sequence:
            raise ValidationError("empty sequence")
        if not AMINO_ACID_SEQ.admits(sequence):
            bad = sorted({c for c in sequence if c not in AMINO_ACID_SEQ.alphabet})
            raise ValidationError(f"sequence contains non-residue characters: {bad}")
        if not MIN_FOLD_LENGTH <= len(sequence) <= MAX_FOLD_LENGTH:
            raise ValidationError(
                f"sequence length {len(sequence)} outside {MIN_FOLD_LENGTH}-{MAX_FOLD_LENGTH}"
            )
        body = self._request("POST", self.config.fold_endpoint, sequence.encode("ascii"))
        return payload_from_pdb(body.decode("utf-8", errors="replace"), SOURCE_PREDICTED)

    def fetch_structure(self, pdb_id: str) -> StructurePayload:
        pdb_id = pdb_id.strip().upper()
        if not PDB_ID.admits(pdb_id):
            raise ValidationError(f"malformed structure id {pdb_id!r} (want 4 chars, digit first)")
        url = self.config.archive_url_template.format(pdb_id=pdb_id)
        body = self._request("GET", url)
        return payload_from_pdb(body.decode("utf-8", errors="replace"), SOURCE_ARCHIVE)

    def _request(self, method: str, url: str, body: bytes | None = None) -> bytes:
        attempts = max(1, self.config.retry_attempts)
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff_s * (2 ** (attempt - 1)))
            try:
                response = self.transport.send(method, url, body, self.config.timeout_s)
            except TransportError as exc:
                last_error = exc
                logger.warning("transport attempt %d/%d failed: %s", attempt + 1, attempts, exc)
                continue
            if response.status == 404:
                raise NotFoundError(f"{url}: entry not found")
            if not 200 <= response.status < 300:
                excerpt = response.body[:200].decode("utf-8", errors="replace")
                raise ServiceError(f"{url}: status {response.status}: {excerpt}")
            return response.body
        raise TransportError(f"{method} {url}: all {attempts} attempts failed: {last_error}")

    # -- scene composition ------------------------------------------------

    def compose_docking_scene(
        self, receptor: StructurePayload, ligand_smiles: str, workspace_dir: Path | None = None
    ) -> ViewportScene:
        """Two-layer receptor+ligand scene; degrades to one layer with a
        warning when ligand embedding fails."""
        ligand_smiles = ligand_smiles.strip()
        if not SMILES.admits(ligand_smiles):
            raise ValidationError(f"ligand is not valid line notation: {ligand_smiles!r}")
        center = _mean_coordinates(receptor.pdb_text)
        receptor_layer = SceneLayer(receptor, representation="cartoon", color_scheme="spectrum")
        ligand_block = self._embed_ligand(ligand_smiles, workspace_dir)
        if ligand_block is None:
            return ViewportScene(
                layers=(receptor_layer,),
                camera_hint=center,
                warnings=("ligand embedding failed; rendering receptor only",),
            )
        ligand_payload = payload_from_pdb(ligand_block, SOURCE_LIGAND)
        ligand_layer = SceneLayer(ligand_payload, representation="stick", color_scheme="element")
        return ViewportScene(layers=(receptor_layer, ligand_layer), camera_hint=center)

    def _embed_ligand(self, smiles: str, workspace_dir: Path | None) -> str | None:
        if self._probe_runner is None:
            return None
        try:
            artifacts = self._probe_runner("embed_3d_ligand", {"smiles": smiles})
        except Exception as exc:
            logger.warning("ligand embedding probe failed: %s", exc)
            return None
        for artifact in artifacts:
            if artifact.kind == "stdout" and "HETATM" in artifact.payload:
                return artifact.payload
        return None


def _mean_coordinates(pdb_text: str) -> tuple[float, float, float]:
    xs = ys = zs = 0.0
    count = 0
    for line in pdb_text.splitlines():
        if not line.startswith(("ATOM", "HETATM")) or len(line) < 54:
            continue
        try:
            xs += float(line[30:38])
            ys += float(line[38:46])
            zs += float(line[46:54])
        except ValueError:
            continue
        count += 1
    if not count:
        return (0.0, 0.0, 0.0)
    return (round(xs / count, 3), round(ys / count, 3), round(zs / count, 3))
