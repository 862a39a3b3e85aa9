"""Artifact record emission over the sentinel-framed stdout wire.

One record per line: ``@@BLOCLAW_ARTIFACT@@ {json}\n``. Records interleave
with ordinary user prints on the same stream; the emitter tracks column
position so a record never starts mid-line, which would hide it from the
harvester.
"""

from __future__ import annotations

import json
import sys

SENTINEL = "@@BLOCLAW_ARTIFACT@@"

KIND_RASTER = "raster_image_b64"
KIND_HTML = "interactive_html"
KIND_STDOUT = "stdout"
KIND_STDERR = "stderr"
KIND_FILE_REF = "file_ref"
KIND_ERROR = "error_record"

ORIGIN_SHOW = "intercepted_show"
ORIGIN_SWEEP = "namespace_sweep"
ORIGIN_SAVE = "explicit_save"
ORIGIN_STREAM = "stream"


class _LineTrackingWriter:
    """Wraps a text stream and remembers whether it sits at column zero."""

    def __init__(self, stream):
        self._stream = stream
        self.at_line_start = True

    def write(self, text):
        if text:
            self.at_line_start = text.endswith("\n")
        return self._stream.write(text)

    def flush(self):
        return self._stream.flush()

    def __getattr__(self, name):
        return getattr(self._stream, name)


class RecordEmitter:
    """Serializes artifact records with monotonically increasing seq."""

    def __init__(self):
        self._seq = 0
        self._writer: _LineTrackingWriter | None = None

    def install(self) -> None:
        """Route stdout through the column tracker. Idempotent."""
        if isinstance(sys.stdout, _LineTrackingWriter):
            self._writer = sys.stdout
            return
        self._writer = _LineTrackingWriter(sys.stdout)
        sys.stdout = self._writer

    def emit(self, kind: str, origin: str, payload: str) -> None:
        self._seq += 1
        record = json.dumps(
            {"seq": self._seq, "kind": kind, "origin": origin, "payload": payload},
            ensure_ascii=True,
        )
        out = sys.stdout
        if isinstance(out, _LineTrackingWriter) and not out.at_line_start:
            out.write("\n")
        out.write(f"{SENTINEL} {record}\n")
        out.flush()

    def emit_error(self, message: str, origin: str = ORIGIN_STREAM) -> None:
        self.emit(KIND_ERROR, origin, message)


EMITTER = RecordEmitter()
