"""
genome_io.py - Parsers and writers for FASTA, bedGraph, BED and MEME files

All coordinates are 0-based half-open. Parsers accept either a string or any
iterable of lines (an open file handle) and raise ParseError with the 1-based
line number of the offending input.
"""

import logging
import math
import re
from collections import defaultdict
from typing import Dict, Iterable, Iterator, List, Tuple, Union

from evolen.core.errors import ParseError, ValidationError
from evolen.core.models import (
    REGION_KINDS,
    SEQUENCE_ALPHABET,
    ConservationTrack,
    PwmMotif,
    RegionAnnotation,
    SequenceRecord,
)

# Set up logger for this module
logger = logging.getLogger(__name__)

TextSource = Union[str, Iterable[str]]

FASTA_LINE_WIDTH = 60

# Row renormalization tolerance for MEME matrices
MEME_ROW_TOLERANCE = 1e-3

_WIDTH_RE = re.compile(r"\bw=\s*(\d+)")
_ALENGTH_RE = re.compile(r"\balength=\s*(\d+)")


def _numbered_lines(source: TextSource) -> Iterator[Tuple[int, str]]:
    """Yield (line number, line without trailing newline) pairs"""
    lines = source.splitlines() if isinstance(source, str) else source
    for number, line in enumerate(lines, start=1):
        yield number, line.rstrip("\r\n")


def _is_track_header(line: str) -> bool:
    return not line.strip() or line.startswith(("#", "track", "browser"))


# ---------------------------------------------------------------------------
# FASTA
# ---------------------------------------------------------------------------

def parse_fasta(source: TextSource) -> List[SequenceRecord]:
    """
    Parse FASTA text into sequence records

    Bases are uppercased (soft-masked input is kept) and line breaks removed.
    Each record is placed on a contig named after its id, at offset 0.

    Raises:
        ParseError: empty input, data before the first header, an empty or
            duplicate id, or a character outside {A,C,G,T,N}
    """
    records: List[SequenceRecord] = []
    seen = set()
    current_id = None
    chunks: List[str] = []

    def flush():
        if current_id is not None:
            records.append(SequenceRecord(current_id, "".join(chunks)))

    for number, line in _numbered_lines(source):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith(">"):
            flush()
            fields = stripped[1:].split()
            if not fields:
                raise ParseError("FASTA header without an id", line=number)
            current_id = fields[0]
            if current_id in seen:
                raise ParseError(f"duplicate sequence id '{current_id}'", line=number)
            seen.add(current_id)
            chunks = []
            continue
        if current_id is None:
            raise ParseError("sequence data before the first '>' header", line=number)
        bases = stripped.upper()
        for char in bases:
            if char not in SEQUENCE_ALPHABET:
                raise ParseError(f"illegal character '{char}'", line=number, char=char)
        chunks.append(bases)
    flush()

    if not records:
        raise ParseError("FASTA input contains no records")
    logger.debug(f"Parsed {len(records)} FASTA records")
    return records


def format_fasta(records: Iterable[SequenceRecord], width: int = FASTA_LINE_WIDTH) -> str:
    """
    Serialize records as FASTA text, wrapping sequence lines at `width`
    """
    out = []
    for record in records:
        out.append(f">{record.id}\n")
        for i in range(0, len(record.bases), width):
            out.append(record.bases[i:i + width] + "\n")
    return "".join(out)


def read_fasta(path: str) -> List[SequenceRecord]:
    with open(path, "r") as f:
        return parse_fasta(f)


# ---------------------------------------------------------------------------
# bedGraph
# ---------------------------------------------------------------------------

def parse_bedgraph(source: TextSource) -> ConservationTrack:
    """
    Parse a 4-column bedGraph (contig, start, end, score) into a track

    Raises:
        ParseError: wrong column count, non-numeric fields, start >= end,
            or overlapping intervals (both line numbers are reported)
    """
    per_contig: Dict[str, List[Tuple[int, int, float, int]]] = defaultdict(list)

    for number, line in _numbered_lines(source):
        if _is_track_header(line):
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 columns, found {len(fields)}", line=number)
        contig = fields[0]
        try:
            start, end = int(fields[1]), int(fields[2])
        except ValueError:
            raise ParseError("non-integer coordinates", line=number)
        try:
            score = float(fields[3])
        except ValueError:
            raise ParseError(f"non-numeric score '{fields[3]}'", line=number)
        if not math.isfinite(score):
            raise ParseError(f"non-finite score '{fields[3]}'", line=number)
        if start < 0 or start >= end:
            raise ParseError(f"interval requires 0 <= start < end, got {start}-{end}", line=number)
        per_contig[contig].append((start, end, score, number))

    intervals: Dict[str, List[Tuple[int, int, float]]] = {}
    for contig, items in per_contig.items():
        items.sort(key=lambda item: (item[0], item[1]))
        for prev, cur in zip(items, items[1:]):
            if cur[0] < prev[1]:
                raise ParseError(
                    f"interval {contig}:{cur[0]}-{cur[1]} overlaps "
                    f"{contig}:{prev[0]}-{prev[1]} (line {prev[3]})",
                    line=cur[3],
                )
        intervals[contig] = [(s, e, v) for s, e, v, _ in items]

    track = ConservationTrack(intervals)
    logger.debug(f"Parsed bedGraph with {len(intervals)} contigs")
    return track


def format_bedgraph(track: ConservationTrack) -> str:
    return "".join(
        f"{contig}\t{start}\t{end}\t{score!r}\n"
        for contig in track.contigs
        for start, end, score in track.intervals(contig)
    )


def read_bedgraph(path: str) -> ConservationTrack:
    with open(path, "r") as f:
        return parse_bedgraph(f)


# ---------------------------------------------------------------------------
# BED regions
# ---------------------------------------------------------------------------

def parse_bed_regions(source: TextSource) -> List[RegionAnnotation]:
    """
    Parse a BED file whose 4th column names the region kind

    Extra columns are ignored; the kind is matched case-insensitively.

    Raises:
        ParseError: fewer than 4 columns, malformed coordinates, or an
            unknown region kind
    """
    regions = []
    for number, line in _numbered_lines(source):
        if _is_track_header(line):
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) < 4:
            raise ParseError(f"expected at least 4 columns, found {len(fields)}", line=number)
        try:
            start, end = int(fields[1]), int(fields[2])
        except ValueError:
            raise ParseError("malformed coordinates", line=number)
        if start < 0 or start >= end:
            raise ParseError(f"region requires 0 <= start < end, got {start}-{end}", line=number)
        kind = fields[3].strip().lower()
        if kind not in REGION_KINDS:
            raise ParseError(f"unknown region kind '{fields[3]}'", line=number)
        regions.append(RegionAnnotation(fields[0], start, end, kind))
    logger.debug(f"Parsed {len(regions)} region annotations")
    return regions


def format_bed_regions(regions: Iterable[RegionAnnotation]) -> str:
    return "".join(f"{r.contig}\t{r.start}\t{r.end}\t{r.region_kind}\n" for r in regions)


def read_bed_regions(path: str) -> List[RegionAnnotation]:
    with open(path, "r") as f:
        return parse_bed_regions(f)


# ---------------------------------------------------------------------------
# MEME minimal motif format
# ---------------------------------------------------------------------------

def _parse_meme_row(text: str, number: int) -> Tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split())
    except ValueError:
        raise ParseError(f"non-numeric matrix row '{text.strip()}'", line=number)
    if len(values) != 4:
        raise ParseError(f"matrix row has {len(values)} columns, expected 4", line=number)
    if any(v < 0.0 or v > 1.0 for v in values):
        raise ParseError("probability outside [0, 1]", line=number)
    total = sum(values)
    if abs(total - 1.0) > MEME_ROW_TOLERANCE:
        raise ParseError(f"row sum {total:g} deviates from 1", line=number)
    if abs(total - 1.0) > 1e-6:
        values = tuple(v / total for v in values)
    return values


def _looks_like_row(text: str) -> bool:
    fields = text.split()
    if not fields:
        return False
    try:
        [float(v) for v in fields]
    except ValueError:
        return False
    return True


def parse_meme(source: TextSource) -> List[PwmMotif]:
    """
    Parse MEME minimal motif format into PWMs (columns A, C, G, T)

    Rows whose sum is within 1e-3 of 1 are renormalized; `nsites=` and `E=`
    on the matrix line are ignored.

    Raises:
        ParseError: missing width, row count different from the declared
            width, probabilities outside [0, 1], or a row sum off by > 1e-3
    """
    motifs: List[PwmMotif] = []
    name = None
    name_line = 0
    width = None
    width_line = 0
    rows: List[Tuple[float, ...]] = []

    def finish(at_line: int):
        nonlocal name, width, rows
        if name is None:
            return
        if width is None:
            raise ParseError(f"motif '{name}' has no letter-probability matrix", line=name_line)
        if len(rows) != width:
            raise ParseError(
                f"motif '{name}' declares w={width} but has {len(rows)} rows", line=at_line
            )
        try:
            motifs.append(PwmMotif(name, tuple(rows)))
        except ValidationError as e:
            raise ParseError(str(e), line=width_line)
        name, width, rows = None, None, []

    last_line = 0
    for number, line in _numbered_lines(source):
        last_line = number
        stripped = line.strip()
        if stripped.startswith("MOTIF"):
            finish(number)
            fields = stripped.split()
            if len(fields) < 2:
                raise ParseError("MOTIF line without a name", line=number)
            name, name_line = fields[1], number
            continue
        if name is None:
            continue
        if stripped.startswith("letter-probability matrix"):
            alength = _ALENGTH_RE.search(stripped)
            if alength and int(alength.group(1)) != 4:
                raise ParseError("only nucleotide matrices (alength= 4) are supported", line=number)
            match = _WIDTH_RE.search(stripped)
            if not match:
                raise ParseError("matrix line lacks 'w='", line=number)
            width, width_line = int(match.group(1)), number
            rows = []
            continue
        if width is not None and _looks_like_row(stripped):
            if len(rows) >= width:
                raise ParseError(
                    f"motif '{name}' declares w={width} but has more rows", line=number
                )
            rows.append(_parse_meme_row(stripped, number))
    finish(last_line)

    logger.debug(f"Parsed {len(motifs)} MEME motifs")
    return motifs


def format_meme(motifs: Iterable[PwmMotif]) -> str:
    out = [
        "MEME version 4\n\n",
        "ALPHABET= ACGT\n\n",
        "strands: + -\n\n",
        "Background letter frequencies\n",
        "A 0.25 C 0.25 G 0.25 T 0.25\n\n",
    ]
    for motif in motifs:
        out.append(f"MOTIF {motif.name}\n")
        out.append(f"letter-probability matrix: alength= 4 w= {motif.width}\n")
        for row in motif.matrix:
            out.append(" ".join(repr(float(v)) for v in row) + "\n")
        out.append("\n")
    return "".join(out)


def read_meme(path: str) -> List[PwmMotif]:
    with open(path, "r") as f:
        return parse_meme(f)


def write_text(path: str, text: str) -> None:
    """Write text to a file with Unix newlines"""
    with open(path, "w", newline="\n") as f:
        f.write(text)
