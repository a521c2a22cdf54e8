"""Parsers and judges for captured run output.

Three kinds of evidence come back from a batch run: the MPI identity
banner printed by the check program, the telltale duplicated-output
signature of ranks that never joined a world communicator, and OSU
benchmark tables. This module parses all three and compares benchmark
tables against a reference within a relative tolerance.

Benchmark values are kept as decimals exactly as printed, never
re-rounded through binary floats, so fixture assertions are bit-stable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal

from .abi import MpiFlavor, classify_version_banner

__all__ = [
    "MalformedOutputError",
    "MpitestBlock",
    "MpitestReport",
    "Healthy",
    "DuplicateInstances",
    "RunHealth",
    "OsuResult",
    "SizeComparison",
    "ComparisonReport",
    "DEFAULT_REL_TOL",
    "parse_mpitest_output",
    "detect_duplicate_instances",
    "parse_osu_output",
    "render_table",
    "compare_results",
]

# Cross-container spread observed between the reference bandwidth tables
# peaks just under 2.4%, so 2.5% separates agreement from regression.
DEFAULT_REL_TOL = Decimal("0.025")


class MalformedOutputError(ValueError):
    """Raised when captured output has no usable content at all."""


@dataclass(frozen=True)
class MpitestBlock:
    nranks: int
    rank_id: int
    flavor: MpiFlavor


@dataclass
class MpitestReport:
    blocks: list[MpitestBlock]
    raw: str


@dataclass(frozen=True)
class Healthy:
    pass


@dataclass(frozen=True)
class DuplicateInstances:
    found_blocks: int
    expected: int


RunHealth = Healthy | DuplicateInstances


_RANKS_RE = re.compile(r"^# ranks = (\d+) \(rank id = (\d+)\)\s*$")


def parse_mpitest_output(text: str) -> MpitestReport:
    """Parse check-program output into per-instance banner blocks.

    Every ``# ranks = N (rank id = R)`` line opens a block; the non-empty
    lines that follow, up to the next block or end of input, form the
    version banner and are classified into an MPI flavor. Text with no
    block lines yields an empty report.
    """
    blocks: list[MpitestBlock] = []
    current: tuple[int, int] | None = None
    banner: list[str] = []

    def flush() -> None:
        nonlocal current, banner
        if current is not None:
            nranks, rank_id = current
            blocks.append(
                MpitestBlock(
                    nranks=nranks,
                    rank_id=rank_id,
                    flavor=classify_version_banner("\n".join(banner)),
                )
            )
        current = None
        banner = []

    for line in text.splitlines():
        m = _RANKS_RE.match(line)
        if m and int(m.group(1)) >= 1:
            flush()
            current = (int(m.group(1)), int(m.group(2)))
        elif current is not None and line.strip():
            banner.append(line)
    flush()
    return MpitestReport(blocks=blocks, raw=text)


def detect_duplicate_instances(report: MpitestReport, expected_ntasks: int) -> RunHealth:
    """Flag runs that degenerated into duplicated sequential instances.

    Healthy means exactly one instance reported, with the world size the
    scheduler asked for. More than one block, or any block with a
    different rank count, is the duplicate-instance failure.
    """
    if expected_ntasks < 1:
        raise ValueError("expected_ntasks must be >= 1")
    if len(report.blocks) > 1 or any(
        b.nranks != expected_ntasks for b in report.blocks
    ):
        return DuplicateInstances(found_blocks=len(report.blocks), expected=expected_ntasks)
    return Healthy()


@dataclass
class OsuResult:
    """One parsed benchmark table: per-message-size metric values."""

    benchmark_name: str
    datatype: str
    rows: list[tuple[int, Decimal]]
    unit: str = ""
    skipped_lines: int = 0

    @property
    def kind(self) -> str | None:
        lowered = self.unit.lower()
        if "bandwidth" in lowered:
            return "bandwidth"
        if "latency" in lowered:
            return "latency"
        return None


_ROW_RE = re.compile(r"^\s*(\d+)\s+(-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*$")
_DATATYPE_RE = re.compile(r"^# Datatype:\s*(.+?)\.?\s*$")
_HEADER_RE = re.compile(r"^# Size\s+(.*\S)\s*$")


def parse_osu_output(text: str) -> OsuResult:
    """Parse an OSU micro-benchmark table from captured stdout.

    ``#`` lines supply the benchmark name, datatype, and column header;
    data rows are size/value pairs. Non-conforming lines are skipped and
    counted. Raises MalformedOutputError when no data rows survive, when
    sizes fail to increase strictly, or when a value is negative.
    """
    name = ""
    datatype = ""
    unit = ""
    rows: list[tuple[int, Decimal]] = []
    skipped = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            m = _DATATYPE_RE.match(line)
            if m:
                datatype = m.group(1)
                continue
            m = _HEADER_RE.match(line)
            if m:
                unit = m.group(1)
                continue
            body = line.lstrip("#").strip()
            if body and not name:
                name = body
            continue
        m = _ROW_RE.match(line)
        if m is None:
            skipped += 1
            continue
        size = int(m.group(1))
        value = Decimal(m.group(2))
        if rows and size <= rows[-1][0]:
            raise MalformedOutputError(
                f"message sizes must increase strictly: {size} after {rows[-1][0]}"
            )
        if value < 0:
            raise MalformedOutputError(f"negative metric value {value} at size {size}")
        rows.append((size, value))
    if not rows:
        raise MalformedOutputError("no benchmark data rows found")
    return OsuResult(
        benchmark_name=name,
        datatype=datatype,
        rows=rows,
        unit=unit,
        skipped_lines=skipped,
    )


def render_table(result: OsuResult) -> str:
    """Render a result back into table text that reparses identically."""
    lines = []
    if result.benchmark_name:
        lines.append(f"# {result.benchmark_name}")
    if result.datatype:
        lines.append(f"# Datatype: {result.datatype}.")
    if result.unit:
        lines.append(f"# Size      {result.unit}")
    for size, value in result.rows:
        lines.append(f"{size:<20}{value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SizeComparison:
    size: int
    reference: Decimal
    candidate: Decimal
    rel_diff: Decimal


@dataclass
class ComparisonReport:
    """Per-size relative differences of a candidate table vs a reference."""

    benchmark_name: str
    tolerance: Decimal
    per_size: list[SizeComparison] = field(default_factory=list)
    missing_sizes: list[int] = field(default_factory=list)
    max_rel_diff: Decimal = Decimal(0)

    @property
    def passed(self) -> bool:
        return not self.missing_sizes and self.max_rel_diff <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark_name,
            "tolerance": str(self.tolerance),
            "verdict": "pass" if self.passed else "fail",
            "max_rel_diff": str(self.max_rel_diff),
            "missing_sizes": list(self.missing_sizes),
            "per_size": [
                {
                    "size": c.size,
                    "reference": str(c.reference),
                    "candidate": str(c.candidate),
                    "rel_diff": str(c.rel_diff),
                }
                for c in self.per_size
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(
            benchmark_name=data["benchmark"],
            tolerance=Decimal(data["tolerance"]),
            per_size=[
                SizeComparison(
                    size=int(c["size"]),
                    reference=Decimal(c["reference"]),
                    candidate=Decimal(c["candidate"]),
                    rel_diff=Decimal(c["rel_diff"]),
                )
                for c in data["per_size"]
            ],
            missing_sizes=[int(s) for s in data["missing_sizes"]],
            max_rel_diff=Decimal(data["max_rel_diff"]),
        )


def _as_decimal(value: Decimal | int | float | str) -> Decimal:
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def compare_results(
    reference: OsuResult,
    candidate: OsuResult,
    rel_tol: Decimal | float | str = DEFAULT_REL_TOL,
) -> ComparisonReport:
    """Judge a candidate benchmark table against a reference.

    Rows are paired by message size; the relative difference is
    |candidate - reference| / reference. A zero reference with a nonzero
    candidate fails that size outright. Sizes present in the reference
    but absent from the candidate fail the comparison as missing.
    """
    tol = _as_decimal(rel_tol)
    if tol <= 0:
        raise ValueError("rel_tol must be > 0")
    if reference.benchmark_name != candidate.benchmark_name:
        raise ValueError(
            "cannot compare different benchmarks: "
            f"{reference.benchmark_name!r} vs {candidate.benchmark_name!r}"
        )
    cand = dict(candidate.rows)
    report = ComparisonReport(benchmark_name=reference.benchmark_name, tolerance=tol)
    for size, ref_value in reference.rows:
        if size not in cand:
            report.missing_sizes.append(size)
            continue
        cand_value = cand[size]
        if ref_value == 0:
            rel = Decimal(0) if cand_value == 0 else Decimal("Infinity")
        else:
            rel = abs(cand_value - ref_value) / ref_value
        report.per_size.append(
            SizeComparison(
                size=size, reference=ref_value, candidate=cand_value, rel_diff=rel
            )
        )
        if rel > report.max_rel_diff:
            report.max_rel_diff = rel
    return report
