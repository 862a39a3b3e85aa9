"""Deterministic sample files for the intake suite."""

from __future__ import annotations

import math
import random
from pathlib import Path

FIRST = ["ala", "gly", "ser", "thr", "leu", "val", "pro", "lys", "arg", "asp"]


def make_csv(path: Path, rows: int = 10_000, seed: int = 7) -> Path:
    rng = random.Random(seed)
    lines = ["sample_id,compound,concentration_um,response,measured_on"]
    for i in range(rows):
        compound = f"{rng.choice(FIRST)}-{rng.randint(100, 999)}"
        lines.append(
            f"S{i:05d},{compound},{rng.uniform(0.01, 50):.3f},"
            f"{rng.uniform(-1, 1):.4f},2024-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_pdb(path: Path, target_lines: int = 100_000) -> Path:
    """A large multi-chain helix: ~target_lines ATOM records plus framing."""
    residues = max(1, (target_lines - 10) // 4)
    offsets = {"N": (-0.8, 0.6, -0.4), "CA": (0.0, 0.0, 0.0), "C": (0.9, 0.5, 0.4), "O": (1.1, 1.5, 0.3)}
    lines = ["HEADER    SYNTHETIC LARGE STRUCTURE"]
    serial = 1
    chains = "ABCD"
    per_chain = residues // len(chains)
    for ci, chain in enumerate(chains):
        for i in range(1, per_chain + 1):
            theta = math.radians(100.0 * i)
            cx = 2.3 * math.cos(theta) + 30.0 * ci
            cy = 2.3 * math.sin(theta)
            cz = 1.5 * i
            for atom, (dx, dy, dz) in offsets.items():
                lines.append(
                    f"ATOM  {serial % 100000:5d} {atom:<4s} ALA {chain}{i % 10000:4d}    "
                    f"{cx + dx:8.3f}{cy + dy:8.3f}{cz + dz:8.3f}{1.00:6.2f}{20.0:6.2f}"
                    f"          {atom[0]:>2s}"
                )
                serial += 1
        lines.append(f"TER   {serial % 100000:5d}      ALA {chain}{per_chain % 10000:4d}")
    lines.append("END")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


_SENTENCES = [
    "Enzyme kinetics follow saturation behavior under substrate excess.",
    "Buffer exchange preserved activity across all tested conditions.",
    "Thermal stability improved after the surface mutations were applied.",
    "Expression yields varied with induction temperature and duration.",
    "Purification used affinity capture followed by size exclusion.",
    "Ligand binding shifted the melting midpoint by several degrees.",
]


def make_pdf(path: Path, target_tokens: int = 2_400) -> Path:
    """Text-heavy PDF whose extractable text is near the token target."""
    from reportlab.lib.pagesizes import letter
    from reportlab.pdfgen import canvas

    target_chars = target_tokens * 4
    c = canvas.Canvas(str(path), pagesize=letter)
    written = 0
    line_index = 0
    while written < target_chars:
        text = c.beginText(72, 740)
        for _ in range(44):
            sentence = f"{line_index + 1:03d}. {_SENTENCES[line_index % len(_SENTENCES)]}"
            text.textLine(sentence)
            written += len(sentence) + 1
            line_index += 1
            if written >= target_chars:
                break
        c.drawText(text)
        c.showPage()
    c.save()
    return path
