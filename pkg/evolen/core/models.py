"""
models.py - Data models for genomes, conservation tracks and sequence pools
"""

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from evolen.core.errors import ValidationError

# Nucleotide alphabets
NUCLEOTIDES = "ACGT"
SEQUENCE_ALPHABET = frozenset("ACGTN")
BASE_TOKENS = ("A", "C", "G", "T")

# Conservation categories, in reporting order
CATEGORIES = ("conserved", "neutral", "accelerated")

# Short labels used on the command line and in file names
CATEGORY_LABELS = {
    "con": "conserved",
    "neu": "neutral",
    "acc": "accelerated",
}

# Version of the vocabulary and tokenizer JSON files
FORMAT_VERSION = 1

# Functional region classes
REGION_KINDS = ("promoter", "enhancer", "exon", "intron")


@dataclass(frozen=True)
class SequenceRecord:
    """
    A named nucleotide sequence placed on a contig
    """

    id: str
    bases: str
    source_contig: str = ""
    source_offset: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValidationError("sequence id must be non-empty")
        illegal = set(self.bases) - SEQUENCE_ALPHABET
        if illegal:
            raise ValidationError(
                f"sequence {self.id} contains illegal characters: {''.join(sorted(illegal))}"
            )
        if not self.source_contig:
            object.__setattr__(self, "source_contig", self.id)
        if self.source_offset < 0:
            raise ValidationError(f"sequence {self.id} has a negative offset")

    def __len__(self) -> int:
        return len(self.bases)

    @property
    def end(self) -> int:
        """Contig position one past the last base"""
        return self.source_offset + len(self.bases)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "bases": self.bases,
            "source_contig": self.source_contig,
            "source_offset": self.source_offset,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SequenceRecord":
        return cls(
            data["id"],
            data["bases"],
            data.get("source_contig", ""),
            data.get("source_offset", 0),
        )


@dataclass(frozen=True)
class RegionAnnotation:
    """
    A functional region interval, 0-based half-open
    """

    contig: str
    start: int
    end: int
    region_kind: str

    def __post_init__(self):
        if self.start < 0 or self.start >= self.end:
            raise ValidationError(
                f"region {self.contig}:{self.start}-{self.end} requires 0 <= start < end"
            )
        if self.region_kind not in REGION_KINDS:
            raise ValidationError(f"unknown region kind: {self.region_kind}")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PwmMotif:
    """
    A position weight matrix, one row per position, columns ordered A, C, G, T
    """

    name: str
    matrix: Tuple[Tuple[float, float, float, float], ...]

    def __post_init__(self):
        if not self.matrix:
            raise ValidationError(f"motif {self.name} has an empty matrix")
        array = np.asarray(self.matrix, dtype=float)
        if array.ndim != 2 or array.shape[1] != 4:
            raise ValidationError(f"motif {self.name} matrix must have 4 columns")
        if np.any(array < 0.0) or np.any(array > 1.0):
            raise ValidationError(f"motif {self.name} has probabilities outside [0, 1]")
        if np.any(np.abs(array.sum(axis=1) - 1.0) > 1e-6):
            raise ValidationError(f"motif {self.name} has rows that do not sum to 1")

    @property
    def width(self) -> int:
        return len(self.matrix)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)


class ConservationTrack:
    """
    Per-base conservation scores stored as sorted, disjoint intervals per contig

    Positions not covered by any interval score 0.0 (phyloP neutrality).
    """

    def __init__(self, intervals: Optional[Dict[str, List[Tuple[int, int, float]]]] = None):
        self._starts: Dict[str, np.ndarray] = {}
        self._ends: Dict[str, np.ndarray] = {}
        self._scores: Dict[str, np.ndarray] = {}
        for contig, items in (intervals or {}).items():
            items = sorted(items)
            for start, end, _ in items:
                if start >= end:
                    raise ValidationError(f"interval {contig}:{start}-{end} requires start < end")
            for (_, prev_end, _), (start, end, _) in zip(items, items[1:]):
                if start < prev_end:
                    raise ValidationError(f"overlapping intervals on {contig} at {start}")
            self._starts[contig] = np.array([i[0] for i in items], dtype=np.int64)
            self._ends[contig] = np.array([i[1] for i in items], dtype=np.int64)
            self._scores[contig] = np.array([i[2] for i in items], dtype=float)

    @property
    def contigs(self) -> List[str]:
        return sorted(self._starts)

    def has_contig(self, contig: str) -> bool:
        return contig in self._starts

    def intervals(self, contig: str) -> Iterator[Tuple[int, int, float]]:
        """
        Iterate the (start, end, score) intervals of a contig in order
        """
        if contig not in self._starts:
            return iter(())
        return zip(
            self._starts[contig].tolist(),
            self._ends[contig].tolist(),
            self._scores[contig].tolist(),
        )

    def score_at(self, contig: str, position: int) -> float:
        """
        Score of a single base; 0.0 when uncovered
        """
        starts = self._starts.get(contig)
        if starts is None or len(starts) == 0:
            return 0.0
        idx = bisect_right(starts, position) - 1
        if idx >= 0 and position < self._ends[contig][idx]:
            return float(self._scores[contig][idx])
        return 0.0

    def scores(self, contig: str, start: int, end: int) -> np.ndarray:
        """
        Dense per-base scores for [start, end); uncovered bases are 0.0
        """
        out = np.zeros(max(end - start, 0), dtype=float)
        starts = self._starts.get(contig)
        if starts is None or end <= start:
            return out
        ends = self._ends[contig]
        values = self._scores[contig]
        first = max(int(np.searchsorted(ends, start, side="right")), 0)
        last = int(np.searchsorted(starts, end, side="left"))
        for i in range(first, last):
            lo = max(int(starts[i]), start)
            hi = min(int(ends[i]), end)
            if lo < hi:
                out[lo - start:hi - start] = values[i]
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConservationTrack):
            return NotImplemented
        return self.contigs == other.contigs and all(
            list(self.intervals(c)) == list(other.intervals(c)) for c in self.contigs
        )

    def __repr__(self) -> str:
        total = sum(len(s) for s in self._starts.values())
        return f"ConservationTrack(contigs={len(self._starts)}, intervals={total})"


@dataclass(frozen=True)
class GenomeBin:
    """
    One fixed-width bin of a genome record with its mean conservation score
    """

    contig: str
    index: int
    start: int
    end: int
    mean: float
    record_id: str

    @property
    def name(self) -> str:
        return f"{self.contig}:{self.start}-{self.end}"


@dataclass(frozen=True)
class BinnedTrack:
    """
    Full-width bins per contig; trailing partial bins are never present
    """

    bin_size: int
    bins: Dict[str, Tuple[GenomeBin, ...]] = field(default_factory=dict)

    def all_bins(self) -> List[GenomeBin]:
        """
        Bins in canonical order: contig name, then position
        """
        return [b for contig in sorted(self.bins) for b in self.bins[contig]]

    def __len__(self) -> int:
        return sum(len(v) for v in self.bins.values())


@dataclass(frozen=True)
class StratificationParams:
    """
    Two-tailed z-score rule parameters
    """

    z: float = 1.645
    bin_size: int = 100

    def __post_init__(self):
        if not self.z > 0:
            raise ValidationError(f"z must be positive, got {self.z}")
        if self.bin_size < 1:
            raise ValidationError(f"bin_size must be >= 1, got {self.bin_size}")


@dataclass(frozen=True)
class Stratification:
    """
    Category assignment for every bin plus the global statistics used
    """

    bins: Tuple[GenomeBin, ...]
    categories: Tuple[str, ...]
    mu: float
    sigma: float
    params: StratificationParams

    def counts(self) -> Dict[str, int]:
        return {c: self.categories.count(c) for c in CATEGORIES}

    def assignments(self) -> Iterator[Tuple[GenomeBin, str]]:
        return zip(self.bins, self.categories)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "z": self.params.z,
            "bin_size": self.params.bin_size,
            "bin_counts": self.counts(),
        }


@dataclass(frozen=True)
class SequencePool:
    """
    Sequences of one conservation category, one record per bin
    """

    category: str
    sequences: Tuple[SequenceRecord, ...] = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category: {self.category}")

    def __len__(self) -> int:
        return len(self.sequences)


def normalize_category(label: str) -> str:
    """
    Map a short (con/neu/acc) or full category label to its full name
    """
    label = label.strip().lower()
    if label in CATEGORIES:
        return label
    if label in CATEGORY_LABELS:
        return CATEGORY_LABELS[label]
    raise ValidationError(f"unknown category label: {label}")
