"""Builtin worker probes: 2D depiction, ligand embedding, document peeks.

Probes never raise into the caller: any failure becomes an error_record
and the worker still exits cleanly, so the supervisor reports ok with the
error attached as an artifact.
"""

from __future__ import annotations

import base64
import traceback

from .records import (
    EMITTER,
    KIND_RASTER,
    KIND_STDOUT,
    ORIGIN_STREAM,
)

PROBE_NAMES = ("depict_2d", "embed_3d_ligand", "pdf_probe", "table_probe")

PREVIEW_ROWS = 20
PDF_DIGEST_CHARS = 10_000


def run_builtin_probe(name: str, args: dict) -> None:
    """Execute one probe, emitting its results as artifact records."""
    EMITTER.install()
    handler = _HANDLERS.get(name)
    if handler is None:
        EMITTER.emit_error(f"unknown probe {name!r}; expected one of {PROBE_NAMES}")
        return
    try:
        handler(args)
    except Exception:
        EMITTER.emit_error(f"probe {name} failed:\n{traceback.format_exc(limit=3)}")


def _depict_2d(args: dict) -> None:
    from . import chem

    smiles = args.get("smiles", "")
    try:
        png = chem.depict_png(smiles)
    except chem.SmilesParseError as exc:
        EMITTER.emit_error(f"depict_2d: {exc}")
        return
    EMITTER.emit(KIND_RASTER, ORIGIN_STREAM, base64.b64encode(png).decode("ascii"))


def _embed_3d_ligand(args: dict) -> None:
    from . import chem

    smiles = args.get("smiles", "")
    seed = int(args.get("seed", 11))
    try:
        block = chem.embed_pdb_block(smiles, seed=seed)
    except chem.SmilesParseError as exc:
        EMITTER.emit_error(f"embed_3d_ligand: {exc}")
        return
    EMITTER.emit(KIND_STDOUT, ORIGIN_STREAM, block)


def _pdf_probe(args: dict) -> None:
    from . import pdftext

    path = args.get("path", "")
    try:
        with open(path, "rb") as fh:
            data = fh.read()
        text = pdftext.extract_text(data, max_pages=int(args.get("max_pages", 8)))
    except (OSError, pdftext.PdfTextError) as exc:
        EMITTER.emit_error(f"pdf_probe: {exc}")
        return
    if not text.strip():
        EMITTER.emit_error("pdf_probe: no extractable text (image-only document?)")
        return
    EMITTER.emit(KIND_STDOUT, ORIGIN_STREAM, text[:PDF_DIGEST_CHARS])


def _table_probe(args: dict) -> None:
    import pandas as pd

    path = args.get("path", "")
    limit = int(args.get("rows", PREVIEW_ROWS))
    try:
        if str(path).endswith((".xlsx", ".xls")):
            frame = pd.read_excel(path, nrows=limit)
        elif str(path).endswith(".tsv"):
            frame = pd.read_csv(path, sep="\t", nrows=limit)
        else:
            frame = pd.read_csv(path, nrows=limit)
    except Exception as exc:
        EMITTER.emit_error(f"table_probe: cannot read {path}: {exc}")
        return
    dtypes = ", ".join(f"{col}:{dtype}" for col, dtype in frame.dtypes.items())
    preview = frame.head(limit).to_string(index=False)
    EMITTER.emit(
        KIND_STDOUT,
        ORIGIN_STREAM,
        f"columns [{dtypes}]\n{preview}",
    )


_HANDLERS = {
    "depict_2d": _depict_2d,
    "embed_3d_ligand": _embed_3d_ligand,
    "pdf_probe": _pdf_probe,
    "table_probe": _table_probe,
}
