"""Text extraction from PDF content streams.

Handles the common machine-generated shape: FlateDecode (or raw) content
streams with Tj/TJ/quote text-showing operators, literal and hex strings.
Layout operators that move the text cursor to a new line become newlines.
Scanned/image-only PDFs yield no text, which callers treat as a failed
probe.
"""

from __future__ import annotations

import base64
import re
import zlib

_STREAM_RE = re.compile(rb"stream\r?\n(.*?)endstream", re.DOTALL)


def _decode_stream(raw: bytes) -> bytes:
    """Undo the usual filter chains: Flate, ASCII85, ASCII85+Flate, none."""
    raw = raw.rstrip(b"\r\n")
    try:
        return zlib.decompress(raw)
    except zlib.error:
        pass
    if raw.endswith(b"~>"):
        body = raw if raw.startswith(b"<~") else b"<~" + raw
        try:
            decoded = base64.a85decode(body, adobe=True)
        except ValueError:
            return raw
        try:
            return zlib.decompress(decoded)
        except zlib.error:
            return decoded
    return raw


class PdfTextError(ValueError):
    """Raised when a file is not parseable as a PDF."""


def extract_text(data: bytes, max_pages: int | None = None) -> str:
    """Extract text from raw PDF bytes, page streams in document order.

    ``max_pages`` bounds how many content streams are decoded; a digest
    only needs the first few.
    """
    if not data.startswith(b"%PDF"):
        raise PdfTextError("not a PDF: missing %PDF header")
    chunks: list[str] = []
    decoded = 0
    for match in _STREAM_RE.finditer(data):
        content = _decode_stream(match.group(1))
        if b"Tj" not in content and b"TJ" not in content:
            continue
        text = _text_from_content_stream(content)
        if text.strip():
            chunks.append(text)
            decoded += 1
            if max_pages is not None and decoded >= max_pages:
                break
    return "\n".join(chunks)


_TOKEN_RE = re.compile(
    rb"""
    \((?P<lit>(?:\\.|[^\\()])*)\)   # literal string
    | <(?P<hex>[0-9A-Fa-f\s]*)>    # hex string
    | (?P<op>T[jJdD*]|'|"|ET|BT|TL)
    | (?P<num>[-+]?\d*\.?\d+)
    | \[|\]
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {
    b"n": "\n",
    b"r": "\r",
    b"t": "\t",
    b"b": "\b",
    b"f": "\f",
    b"(": "(",
    b")": ")",
    b"\\": "\\",
}


def _decode_literal(body: bytes) -> str:
    out: list[str] = []
    i = 0
    n = len(body)
    while i < n:
        ch = body[i : i + 1]
        if ch == b"\\" and i + 1 < n:
            nxt = body[i + 1 : i + 2]
            if nxt.isdigit():
                digits = body[i + 1 : i + 4]
                j = 1
                while j <= 3 and body[i + j : i + j + 1].isdigit():
                    j += 1
                digits = body[i + 1 : i + j]
                out.append(chr(int(digits, 8) & 0xFF))
                i += j
                continue
            out.append(_ESCAPES.get(nxt, nxt.decode("latin-1")))
            i += 2
            continue
        out.append(ch.decode("latin-1"))
        i += 1
    return "".join(out)


def _decode_hex(body: bytes) -> str:
    compact = b"".join(body.split())
    if len(compact) % 2:
        compact += b"0"
    try:
        return bytes.fromhex(compact.decode("ascii")).decode("latin-1")
    except ValueError:
        return ""


def _text_from_content_stream(content: bytes) -> str:
    """Walk text operators, joining shown strings with layout-aware breaks."""
    parts: list[str] = []
    pending: list[str] = []
    queue: list[str] = []  # string operands seen since the last operator

    def flush(newline: bool) -> None:
        if pending:
            parts.append("".join(pending))
            pending.clear()
        if newline and parts and not parts[-1].endswith("\n"):
            parts.append("\n")

    for m in _TOKEN_RE.finditer(content):
        if m.group("lit") is not None:
            queue.append(_decode_literal(m.group("lit")))
        elif m.group("hex") is not None:
            queue.append(_decode_hex(m.group("hex")))
        elif m.group("op") is not None:
            op = m.group("op")
            if op == b"Tj":
                if queue:
                    pending.append(queue[-1])
            elif op in (b"'", b'"'):
                flush(newline=True)
                if queue:
                    pending.append(queue[-1])
            elif op == b"TJ":
                pending.extend(queue)
            elif op in (b"Td", b"TD", b"T*", b"ET"):
                flush(newline=True)
            queue.clear()
    flush(newline=False)
    text = "".join(parts)
    return re.sub(r"\n{3,}", "\n\n", text).strip()
