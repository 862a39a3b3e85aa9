"""PDF text extraction against generated documents."""

from __future__ import annotations

import io

import pytest

from bloclaw_worker.pdftext import PdfTextError, extract_text


def make_pdf(lines_per_page: list[list[str]]) -> bytes:
    reportlab = pytest.importorskip("reportlab")  # noqa: F841
    from reportlab.lib.pagesizes import letter
    from reportlab.pdfgen import canvas

    buf = io.BytesIO()
    c = canvas.Canvas(buf, pagesize=letter)
    for lines in lines_per_page:
        text = c.beginText(72, 720)
        for line in lines:
            text.textLine(line)
        c.drawText(text)
        c.showPage()
    c.save()
    return buf.getvalue()


def test_multiline_multipage_extraction():
    data = make_pdf(
        [
            [f"Paragraph {i} about ribosomes." for i in range(30)],
            ["Closing remarks on chaperones."],
        ]
    )
    text = extract_text(data)
    assert "Paragraph 0 about ribosomes." in text
    assert "Paragraph 29" in text
    assert "chaperones" in text


def test_max_pages_bound():
    data = make_pdf([["page one text here"], ["page two text here"]])
    text = extract_text(data, max_pages=1)
    assert "page one" in text
    assert "page two" not in text


def test_escapes_in_literal_strings():
    data = make_pdf([[r"parens (nested) and backslash \ survive"]])
    text = extract_text(data)
    assert "parens (nested)" in text


def test_non_pdf_rejected():
    with pytest.raises(PdfTextError):
        extract_text(b"not a pdf at all")
