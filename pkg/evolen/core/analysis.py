"""
analysis.py - Token quality metrics

Motif preservation, region token-length signatures with Jensen-Shannon
measures, per-token phyloP alignment by conservation category, and smoothed
log2 fold-change enrichment over region x conservation bins.
"""

import itertools
import logging
import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from evolen.core.encoder import ScoredVocabulary, encode_dp
from evolen.core.errors import ValidationError
from evolen.core.models import (
    CATEGORIES,
    NUCLEOTIDES,
    REGION_KINDS,
    ConservationTrack,
    PwmMotif,
    RegionAnnotation,
    SequenceRecord,
    Stratification,
)
from evolen.core.stratify import iter_bin_sequences

# Set up logger for this module
logger = logging.getLogger(__name__)

# Motif conversion defaults
DETERMINATE_THRESHOLD = 0.5
WILDCARD_THRESHOLD = 0.25
MAX_VARIANTS = 256
MAX_MOTIF_LENGTH = 12

# Token length bins: (label, lowest length, highest length or None)
LENGTH_BINS = (
    ("Pct1-2", 1, 2),
    ("Pct3-5", 3, 5),
    ("Pct6-8", 6, 8),
    ("Pct9+", 9, None),
)

DEFAULT_ALPHA = 0.5
BACKGROUND_BIN = ("intron", "neutral")

BinKey = Tuple[str, str]


# ---------------------------------------------------------------------------
# Motif preservation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotifRecord:
    """
    Consensus string of a PWM plus its wildcard-expanded variants
    """

    name: str
    consensus: str
    variants: Tuple[str, ...]

    def __post_init__(self):
        if not 1 <= len(self.consensus) <= MAX_MOTIF_LENGTH:
            raise ValidationError(f"motif {self.name} consensus length must be 1..{MAX_MOTIF_LENGTH}")
        if set(self.consensus) - set(NUCLEOTIDES):
            raise ValidationError(f"motif {self.name} consensus is not over A, C, G, T")
        if not self.variants:
            raise ValidationError(f"motif {self.name} has no variants")
        if any(len(v) != len(self.consensus) for v in self.variants):
            raise ValidationError(f"motif {self.name} has variants of the wrong length")


def pwm_to_consensus(motif: PwmMotif, wildcard_threshold: float = WILDCARD_THRESHOLD,
                     max_variants: int = MAX_VARIANTS,
                     max_length: int = MAX_MOTIF_LENGTH) -> Optional[MotifRecord]:
    """
    Convert a PWM into a consensus motif

    A position is determinate when some nucleotide has probability >= 0.5,
    otherwise it is a wildcard. Wildcards are trimmed at both ends, each
    remaining position keeps its most probable nucleotide, and motifs longer
    than max_length (or empty) are rejected with None. Internal wildcards
    expand over every nucleotide with probability >= wildcard_threshold; when
    that yields more than max_variants strings only the consensus is kept.
    """
    matrix = motif.as_array()
    determinate = matrix.max(axis=1) >= DETERMINATE_THRESHOLD
    positions = np.flatnonzero(determinate)
    if len(positions) == 0:
        return None
    trimmed = matrix[positions[0]:positions[-1] + 1]
    kept = determinate[positions[0]:positions[-1] + 1]
    if len(trimmed) > max_length:
        return None

    consensus = "".join(NUCLEOTIDES[int(np.argmax(row))] for row in trimmed)
    choices = []
    for row, fixed, base in zip(trimmed, kept, consensus):
        if fixed:
            choices.append(base)
        else:
            choices.append("".join(n for n, p in zip(NUCLEOTIDES, row) if p >= wildcard_threshold - 1e-12))

    n_variants = math.prod(len(c) for c in choices)
    if n_variants > max_variants:
        variants = (consensus,)
    else:
        variants = tuple("".join(v) for v in itertools.product(*choices))
    return MotifRecord(motif.name, consensus, variants)


def motifs_from_pwms(pwms: Iterable[PwmMotif], wildcard_threshold: float = WILDCARD_THRESHOLD,
                     max_variants: int = MAX_VARIANTS,
                     max_length: int = MAX_MOTIF_LENGTH) -> List[MotifRecord]:
    """Convert a motif library, dropping rejected motifs"""
    pwms = list(pwms)
    records = [
        record for record in (
            pwm_to_consensus(p, wildcard_threshold, max_variants, max_length) for p in pwms
        ) if record is not None
    ]
    logger.info(f"Kept {len(records)} of {len(pwms)} motifs after consensus conversion")
    return records


@dataclass(frozen=True)
class MotifOutcome:
    """Per-motif tokenization result"""

    name: str
    consensus: str
    n_tokens: int
    in_vocab: bool
    token_fraction: float
    variant_std: float

    @property
    def perfect_match(self) -> bool:
        return self.n_tokens == 1


@dataclass(frozen=True)
class MotifMetrics:
    """Motif preservation summary; rates are percentages"""

    avg_tokens_per_motif: float
    perfect_match_rate: float
    exact_vocab_rate: float
    avg_token_fraction: float
    consistency: float
    n_motifs: int

    def to_row(self) -> Dict[str, object]:
        return {
            "AvgTok/Motif": round(self.avg_tokens_per_motif, 6),
            "PerfectMatch%": round(self.perfect_match_rate, 6),
            "ExactVocab%": round(self.exact_vocab_rate, 6),
            "AvgTokenFrac": round(self.avg_token_fraction, 6),
            "Consistency": round(self.consistency, 6),
            "Motifs": self.n_motifs,
        }


def motif_outcomes(vocab: ScoredVocabulary, motifs: Sequence[MotifRecord]) -> List[MotifOutcome]:
    outcomes = []
    for motif in motifs:
        tokens = [s.token for s in encode_dp(vocab, motif.consensus)]
        fraction = float(np.mean([len(t) / len(motif.consensus) for t in tokens]))
        variant_counts = [len(encode_dp(vocab, v)) for v in motif.variants]
        outcomes.append(MotifOutcome(
            motif.name,
            motif.consensus,
            len(tokens),
            motif.consensus in vocab,
            fraction,
            float(np.std(variant_counts)),
        ))
    return outcomes


def motif_metrics(vocab: ScoredVocabulary, motifs: Sequence[MotifRecord]) -> MotifMetrics:
    """
    Tokenize every motif consensus and summarize how intact motifs stay

    Raises:
        ValidationError: empty motif list
    """
    if not motifs:
        raise ValidationError("motif_metrics requires at least one motif")
    outcomes = motif_outcomes(vocab, motifs)
    n = len(outcomes)
    return MotifMetrics(
        avg_tokens_per_motif=float(np.mean([o.n_tokens for o in outcomes])),
        perfect_match_rate=100.0 * sum(o.perfect_match for o in outcomes) / n,
        exact_vocab_rate=100.0 * sum(o.in_vocab for o in outcomes) / n,
        avg_token_fraction=float(np.mean([o.token_fraction for o in outcomes])),
        consistency=float(np.mean([o.variant_std for o in outcomes])),
        n_motifs=n,
    )


# Motif metrics compared against a baseline tokenizer: table column -> MotifMetrics field
GAIN_COLUMNS = {
    "PerfectMatch%": "perfect_match_rate",
    "ExactVocab%": "exact_vocab_rate",
    "AvgTokenFrac": "avg_token_fraction",
}


def relative_gain(value: float, baseline: float) -> Optional[float]:
    """Percentage change of value over baseline; None when baseline is 0"""
    if baseline == 0:
        return None
    return 100.0 * (value - baseline) / abs(baseline)


# ---------------------------------------------------------------------------
# Token-length signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LengthSignature:
    """Token-length distribution over the four length bins"""

    probabilities: Tuple[float, float, float, float]
    token_count: int

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)

    def to_row(self) -> Dict[str, object]:
        row = {label: round(100.0 * p, 4) for (label, _, _), p in zip(LENGTH_BINS, self.probabilities)}
        row["Tokens"] = self.token_count
        return row


def length_bin(length: int) -> int:
    for index, (_, low, high) in enumerate(LENGTH_BINS):
        if length >= low and (high is None or length <= high):
            return index
    raise ValidationError(f"token length must be positive, got {length}")


def signature_from_lengths(lengths: Iterable[int]) -> LengthSignature:
    """
    Normalize token lengths into a signature

    Raises:
        ValidationError: no tokens
    """
    counts = np.zeros(len(LENGTH_BINS), dtype=np.int64)
    for length in lengths:
        counts[length_bin(length)] += 1
    total = int(counts.sum())
    if total == 0:
        raise ValidationError("no tokens to build a length signature from")
    return LengthSignature(tuple(float(c) / total for c in counts), total)


def length_signature(vocab: ScoredVocabulary,
                     sequences: Iterable[Union[SequenceRecord, str]]) -> LengthSignature:
    """
    Length signature of the non-N tokens produced over a set of sequences
    """
    lengths = []
    for item in sequences:
        bases = item.bases if isinstance(item, SequenceRecord) else item
        lengths.extend(s.end - s.start for s in encode_dp(vocab, bases) if s.token != "N")
    return signature_from_lengths(lengths)


def js_divergence(p: Union[LengthSignature, Sequence[float]], q: Union[LengthSignature, Sequence[float]],
                  base: float = 2.0) -> float:
    """
    Jensen-Shannon divergence, 0*log(0) taken as 0

    With base 2 the result lies in [0, 1].

    Raises:
        ValidationError: vectors of different dimension
    """
    p = p.as_array() if isinstance(p, LengthSignature) else np.asarray(p, dtype=float)
    q = q.as_array() if isinstance(q, LengthSignature) else np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.shape} vs {q.shape}")
    m = (p + q) / 2.0
    divergence = (float(np.sum(rel_entr(p, m))) + float(np.sum(rel_entr(q, m)))) / 2.0
    divergence /= math.log(base)
    return min(max(divergence, 0.0), math.log(2.0) / math.log(base))


def js_distance(p: Union[LengthSignature, Sequence[float]], q: Union[LengthSignature, Sequence[float]],
                base: float = 2.0) -> float:
    """Jensen-Shannon distance: the square root of the divergence"""
    return math.sqrt(js_divergence(p, q, base))


def pairwise_js(signatures: Mapping[str, LengthSignature],
                base: float = 2.0) -> List[Tuple[str, str, float, float]]:
    """
    (region a, region b, divergence, distance) for every pair of regions
    """
    names = [k for k in REGION_KINDS if k in signatures] + sorted(set(signatures) - set(REGION_KINDS))
    rows = []
    for a, b in itertools.combinations(names, 2):
        divergence = js_divergence(signatures[a], signatures[b], base)
        rows.append((a, b, divergence, math.sqrt(divergence)))
    return rows


# ---------------------------------------------------------------------------
# Region extraction
# ---------------------------------------------------------------------------

def extract_region_sequences(genome: Sequence[SequenceRecord],
                             regions: Iterable[RegionAnnotation]) -> List[Tuple[RegionAnnotation, str]]:
    """
    Intersect region intervals with the genome records

    Regions are clipped to the record that holds them; regions on no record
    are skipped.
    """
    by_contig: Dict[str, List[SequenceRecord]] = defaultdict(list)
    for record in genome:
        by_contig[record.source_contig].append(record)

    out = []
    skipped = 0
    for region in regions:
        for record in by_contig.get(region.contig, ()):
            lo = max(region.start, record.source_offset)
            hi = min(region.end, record.end)
            if lo < hi:
                out.append((region, record.bases[lo - record.source_offset:hi - record.source_offset]))
                break
        else:
            skipped += 1
    if skipped:
        logger.warning(f"{skipped} regions do not overlap any genome record")
    return out


def region_signatures(vocab: ScoredVocabulary, genome: Sequence[SequenceRecord],
                      regions: Iterable[RegionAnnotation]) -> Dict[str, LengthSignature]:
    """Length signature per region kind; kinds without tokens are left out"""
    grouped: Dict[str, List[str]] = defaultdict(list)
    for region, bases in extract_region_sequences(genome, regions):
        grouped[region.region_kind].append(bases)
    signatures = {}
    for kind in REGION_KINDS:
        try:
            signatures[kind] = length_signature(vocab, grouped.get(kind, ()))
        except ValidationError:
            logger.warning(f"No tokens for region kind {kind}; signature omitted")
    return signatures


def assign_region_categories(regions: Iterable[RegionAnnotation],
                             stratification: Stratification) -> List[Tuple[RegionAnnotation, Optional[str]]]:
    """
    Give each region the category of the bin it overlaps most

    Ties go to the lower-indexed bin; regions overlapping no classified bin
    get None.
    """
    per_contig: Dict[str, List[Tuple[int, int, str]]] = defaultdict(list)
    for genome_bin, category in stratification.assignments():
        per_contig[genome_bin.contig].append((genome_bin.start, genome_bin.end, category))
    for items in per_contig.values():
        items.sort()
    ends = {contig: [item[1] for item in items] for contig, items in per_contig.items()}

    out = []
    for region in regions:
        items = per_contig.get(region.contig, [])
        best_overlap, best_category = 0, None
        i = bisect_left(ends.get(region.contig, []), region.start + 1)
        while i < len(items) and items[i][0] < region.end:
            start, end, category = items[i]
            overlap = min(end, region.end) - max(start, region.start)
            if overlap > best_overlap:
                best_overlap, best_category = overlap, category
            i += 1
        out.append((region, best_category))
    return out


def enrichment_bins(genome: Sequence[SequenceRecord], regions: Sequence[RegionAnnotation],
                    stratification: Stratification) -> Dict[BinKey, List[str]]:
    """
    Region sequences grouped into the 12 region x conservation bins
    """
    categories = dict((id(r), c) for r, c in assign_region_categories(regions, stratification))
    bins: Dict[BinKey, List[str]] = {(k, c): [] for k in REGION_KINDS for c in CATEGORIES}
    for region, bases in extract_region_sequences(genome, regions):
        category = categories.get(id(region))
        if category is not None:
            bins[(region.region_kind, category)].append(bases)
    return bins


# ---------------------------------------------------------------------------
# Per-token phyloP statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryPhylopStats:
    mean_phylop: float
    pct_positive: float
    mean_intra_variance: float
    distinct_tokens: int

    def to_row(self) -> Dict[str, object]:
        return {
            "MeanPhyloP": round(self.mean_phylop, 6),
            "%>0": round(self.pct_positive, 4),
            "MeanVar": round(self.mean_intra_variance, 6),
            "Tokens": self.distinct_tokens,
        }


@dataclass(frozen=True)
class PhylopTokenStats:
    """Per-category statistics; None for a category without token occurrences"""

    categories: Dict[str, Optional[CategoryPhylopStats]]

    def __getitem__(self, category: str) -> Optional[CategoryPhylopStats]:
        return self.categories[category]


def phylop_token_stats(vocab: ScoredVocabulary, genome: Sequence[SequenceRecord],
                       track: ConservationTrack, stratification: Stratification) -> PhylopTokenStats:
    """
    Conservation profile of the tokens decoded from each category's bins

    Each bin is encoded on its own and its token occurrences inherit the
    bin's category. Per distinct token the per-base scores of all its
    occurrences are pooled into a mean and a population variance; the
    category reports the unweighted mean of token means, the percentage of
    tokens with a positive mean, and the mean of token variances.
    """
    pooled: Dict[str, Dict[str, List[np.ndarray]]] = {c: defaultdict(list) for c in CATEGORIES}
    for genome_bin, category, bases in iter_bin_sequences(genome, stratification):
        scores = track.scores(genome_bin.contig, genome_bin.start, genome_bin.end)
        for span in encode_dp(vocab, bases):
            if span.token != "N":
                pooled[category][span.token].append(scores[span.start:span.end])

    result: Dict[str, Optional[CategoryPhylopStats]] = {}
    for category in CATEGORIES:
        tokens = sorted(pooled[category])
        if not tokens:
            logger.warning(f"No token occurrences in {category} bins; statistics omitted")
            result[category] = None
            continue
        means = []
        variances = []
        for token in tokens:
            values = np.concatenate(pooled[category][token])
            means.append(float(np.mean(values)))
            variances.append(float(np.var(values)))
        result[category] = CategoryPhylopStats(
            mean_phylop=float(np.mean(means)),
            pct_positive=100.0 * sum(m > 0 for m in means) / len(means),
            mean_intra_variance=float(np.mean(variances)),
            distinct_tokens=len(tokens),
        )
    return PhylopTokenStats(result)


# ---------------------------------------------------------------------------
# Enrichment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnrichmentBin:
    """Token counts and fold-changes of one region x conservation bin"""

    key: BinKey
    counts: np.ndarray
    total: int
    log2fc: np.ndarray
    mean_log2fc: float
    mean_token_length: Optional[float]
    mean_gc: Optional[float]
    top_token: str


class EnrichmentTable:
    """
    Smoothed log2 fold-changes of every bin against the background bin

    f_t(b) = (c_t(b) + alpha) / (N(b) + alpha * |V|)
    """

    def __init__(self, tokens: Sequence[str], bins: Dict[BinKey, EnrichmentBin],
                 alpha: float, background: BinKey):
        self.tokens = tuple(tokens)
        self.bins = bins
        self.alpha = alpha
        self.background = background

    def __getitem__(self, key: BinKey) -> EnrichmentBin:
        if key not in self.bins:
            raise ValidationError(f"no enrichment bin {key}")
        return self.bins[key]

    def mean_log2fc(self, region: str, category: str) -> float:
        return self[(region, category)].mean_log2fc

    def frequencies(self, key: BinKey) -> np.ndarray:
        b = self[key]
        return (b.counts + self.alpha) / (b.total + self.alpha * len(self.tokens))


def enrichment_from_counts(tokens: Sequence[str], counts: Mapping[BinKey, Sequence[int]],
                           alpha: float = DEFAULT_ALPHA,
                           background: BinKey = BACKGROUND_BIN) -> EnrichmentTable:
    """
    Build the enrichment table from raw per-bin token counts

    Raises:
        ValidationError: missing or empty background bin, non-positive
            alpha, or count vectors not aligned with tokens
    """
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    if background not in counts or sum(counts[background]) == 0:
        raise ValidationError(f"background bin {background} is empty")
    size = len(tokens)
    lengths = np.array([len(t) for t in tokens], dtype=float)
    gc = np.array([(t.count("G") + t.count("C")) / len(t) for t in tokens], dtype=float)

    def smoothed(vector: np.ndarray) -> np.ndarray:
        return (vector + alpha) / (vector.sum() + alpha * size)

    arrays = {}
    for key, vector in counts.items():
        array = np.asarray(vector, dtype=np.int64)
        if array.shape != (size,):
            raise ValidationError(f"counts of bin {key} do not align with the vocabulary")
        arrays[key] = array

    log_background = np.log2(smoothed(arrays[background]))
    bins = {}
    for key, array in arrays.items():
        log2fc = np.log2(smoothed(array)) - log_background
        total = int(array.sum())
        order = sorted(range(size), key=lambda i: (-log2fc[i], -len(tokens[i]), tokens[i]))
        bins[key] = EnrichmentBin(
            key=key,
            counts=array,
            total=total,
            log2fc=log2fc,
            mean_log2fc=float(np.mean(log2fc)),
            mean_token_length=float(array @ lengths / total) if total else None,
            mean_gc=float(array @ gc / total) if total else None,
            top_token=tokens[order[0]],
        )
    return EnrichmentTable(tokens, bins, alpha, background)


def enrichment(vocab: ScoredVocabulary, bin_sequences: Mapping[BinKey, Iterable[str]],
               alpha: float = DEFAULT_ALPHA, background: BinKey = BACKGROUND_BIN) -> EnrichmentTable:
    """
    Encode each bin's sequences and compare token frequencies to the background

    Bins absent from the mapping are counted as empty; N spans are ignored.
    """
    index = {t: i for i, t in enumerate(vocab.tokens)}
    keys = [(k, c) for k in REGION_KINDS for c in CATEGORIES]
    keys += sorted(set(bin_sequences) - set(keys))
    counts = {}
    for key in keys:
        vector = np.zeros(len(vocab), dtype=np.int64)
        for bases in bin_sequences.get(key, ()):
            for span in encode_dp(vocab, bases):
                if span.token != "N":
                    vector[index[span.token]] += 1
        counts[key] = vector
    table = enrichment_from_counts(vocab.tokens, counts, alpha, background)
    logger.info("Enrichment computed for " + ", ".join(
        f"{k[0]}x{k[1]}={table.bins[k].mean_log2fc:.4f}" for k in keys))
    return table


def separation(table: EnrichmentTable, region: str) -> float:
    """
    |mean log2FC(conserved) - mean log2FC(accelerated)| for one region

    Raises:
        ValidationError: either bin missing
    """
    return abs(table.mean_log2fc(region, "conserved") - table.mean_log2fc(region, "accelerated"))
