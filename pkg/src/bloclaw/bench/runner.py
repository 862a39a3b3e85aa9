"""Suite runners and the report model.

Three suites: ``routing`` parses every corpus sample with both parsers
and scores recovered payloads against ground truth; ``sandbox`` runs the
behavior corpus through the supervisor and checks figure capture;
``intake`` probes generated sample files and records latency. Rate rows
are reproducible for a fixed seed; latency columns are not.
"""

from __future__ import annotations

import json
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import (
    NoiseKind,
    baseline_parse_succeeds,
    bloclaw_parse_succeeds,
    generate_noisy_corpus,
)
from .sandbox_corpus import BEHAVIOR_ROWS, capture_succeeded, generate_behavior_scripts

SUITE_NOTES = {
    "routing": (
        "Baseline is a strict standard-grammar JSON parser with no repair "
        "heuristics; rows measure format fragility under this generator's "
        "noise model and are not comparable across noise generators."
    ),
    "sandbox": (
        "Success means at least one figure artifact of the right kind was "
        "captured; interactive-figure failures are logged, not guessed at."
    ),
    "intake": (
        "Latency is wall-clock on this machine and excluded from "
        "reproducibility guarantees; rates and token columns are seeded."
    ),
}


@dataclass(frozen=True)
class BenchRow:
    category: str
    n: int
    baseline_failure_rate: float | None = None
    bloclaw_failure_rate: float | None = None
    success_rate: float | None = None
    latency_ms: float | None = None
    token_estimate: int | None = None


@dataclass(frozen=True)
class BenchReport:
    suite: str
    rows: tuple[BenchRow, ...]
    seed: int
    runtime_ms: int
    notes: str = ""
    skipped: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "suite": self.suite,
                "seed": self.seed,
                "runtime_ms": self.runtime_ms,
                "notes": self.notes,
                "skipped": self.skipped,
                "rows": [asdict(row) for row in self.rows],
            },
            indent=2,
        )


def run_bench(suite: str, n: int = 1000, seed: int = 7, supervisor=None) -> BenchReport:
    started = time.monotonic()
    notes = SUITE_NOTES.get(suite, "")
    if suite == "routing":
        rows = _run_routing(n, seed)
    elif suite == "sandbox":
        rows, skipped = _run_sandbox(n, seed, supervisor)
        if skipped:
            return BenchReport(
                suite=suite, rows=(), seed=seed, notes=notes,
                runtime_ms=int((time.monotonic() - started) * 1000), skipped=skipped,
            )
    elif suite == "intake":
        rows, skipped = _run_intake(seed, supervisor)
        if skipped:
            return BenchReport(
                suite=suite, rows=(), seed=seed, notes=notes,
                runtime_ms=int((time.monotonic() - started) * 1000), skipped=skipped,
            )
    else:
        raise ValueError(f"unknown suite {suite!r} (want routing|sandbox|intake)")
    return BenchReport(
        suite=suite,
        rows=tuple(rows),
        seed=seed,
        notes=notes,
        runtime_ms=int((time.monotonic() - started) * 1000),
    )


def _run_routing(n: int, seed: int) -> list[BenchRow]:
    corpus = generate_noisy_corpus(n, tuple(NoiseKind), seed)
    rows = []
    for noise in NoiseKind:
        samples = [s for s in corpus if s.noise is noise]
        bloclaw_failures = sum(1 for s in samples if not _safe(bloclaw_parse_succeeds, s))
        baseline_failures = sum(1 for s in samples if not _safe(baseline_parse_succeeds, s))
        rows.append(
            BenchRow(
                category=noise.value,
                n=len(samples),
                baseline_failure_rate=baseline_failures / max(1, len(samples)),
                bloclaw_failure_rate=bloclaw_failures / max(1, len(samples)),
            )
        )
    rows.append(
        BenchRow(
            category="average",
            n=len(corpus),
            baseline_failure_rate=sum(r.baseline_failure_rate for r in rows) / len(rows),
            bloclaw_failure_rate=sum(r.bloclaw_failure_rate for r in rows) / len(rows),
        )
    )
    return rows


def _safe(check, sample) -> bool:
    # A crash counts as a failure for the crashing parser, never the runner.
    try:
        return check(sample)
    except Exception:
        return False


def _make_supervisor():
    from ..sandbox import SandboxSupervisor, WorkerUnavailableError

    try:
        return SandboxSupervisor(), None
    except WorkerUnavailableError as exc:
        return None, str(exc)


def _run_sandbox(n: int, seed: int, supervisor) -> tuple[list[BenchRow], str | None]:
    from ..sandbox import ExecutionRequest

    if supervisor is None:
        supervisor, why = _make_supervisor()
        if supervisor is None:
            return [], f"sandbox suite skipped: {why}"
    per_row = max(20, n) if n != 1000 else 20  # default CLI n targets routing
    rows = []
    with tempfile.TemporaryDirectory(prefix="bloclaw-bench-") as tmp:
        workspace = Path(tmp)
        for row_name in BEHAVIOR_ROWS:
            scripts = generate_behavior_scripts(row_name, per_row, seed)
            successes = 0
            for script in scripts:
                report = supervisor.execute(
                    ExecutionRequest(user_code=script, workspace_dir=workspace, timeout=60)
                )
                if report.status == "ok" and capture_succeeded(row_name, report):
                    successes += 1
            rows.append(
                BenchRow(
                    category=row_name,
                    n=len(scripts),
                    success_rate=successes / len(scripts),
                )
            )
    return rows, None


def _run_intake(seed: int, supervisor) -> tuple[list[BenchRow], str | None]:
    from ..intake import IntakeEngine
    from .samples import make_csv, make_pdb, make_pdf

    if supervisor is None:
        supervisor, why = _make_supervisor()
        if supervisor is None:
            return [], f"intake suite skipped: {why}"
    rows = []
    with tempfile.TemporaryDirectory(prefix="bloclaw-intake-") as tmp:
        workspace = Path(tmp)
        engine = IntakeEngine(
            probe_runner=lambda name, args: supervisor.run_probe(
                name, args, workspace / "probe"
            ).artifacts
        )
        specs = [
            ("csv_10k_rows", make_csv(workspace / "sample.csv", rows=10_000, seed=seed)),
            ("pdb_100k_lines", make_pdb(workspace / "sample.pdb", target_lines=100_000)),
            ("pdf_text_heavy", make_pdf(workspace / "sample.pdf")),
        ]
        for category, path in specs:
            try:
                mounted = engine.mount(path, file_id=category)
                digest = engine.classify_and_probe(mounted)
                rows.append(
                    BenchRow(
                        category=category,
                        n=1,
                        success_rate=1.0,
                        latency_ms=round(digest.probe_latency_ms, 2),
                        token_estimate=digest.token_estimate,
                    )
                )
            except Exception:
                rows.append(BenchRow(category=category, n=1, success_rate=0.0))
    return rows, None


def format_report(report: BenchReport) -> str:
    lines = [
        f"suite: {report.suite}   seed: {report.seed}   runtime: {report.runtime_ms} ms",
        f"note: {report.notes}",
    ]
    if report.skipped:
        lines.append(f"SKIPPED: {report.skipped}")
        return "\n".join(lines)
    header = f"{'category':<26}{'n':>6}{'baseline_fail':>15}{'bloclaw_fail':>14}{'success':>10}{'latency_ms':>12}{'tokens':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        lines.append(
            f"{row.category:<26}{row.n:>6}"
            f"{_pct(row.baseline_failure_rate):>15}{_pct(row.bloclaw_failure_rate):>14}"
            f"{_pct(row.success_rate):>10}"
            f"{row.latency_ms if row.latency_ms is not None else '-':>12}"
            f"{row.token_estimate if row.token_estimate is not None else '-':>8}"
        )
    return "\n".join(lines)


def _pct(value: float | None) -> str:
    return "-" if value is None else f"{value:.1%}"
