"""
synthetic.py - Seeded synthetic genomes for demos and end-to-end tests

A generated dataset has random background sequence, a small share of
high-phyloP bins carrying planted copies of known motifs, a share of
low-phyloP (accelerated) bins, a tiled region annotation and the motif
library as PWMs.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from evolen.core.errors import ValidationError
from evolen.core.genome_io import format_bed_regions, format_bedgraph, format_fasta, format_meme, write_text
from evolen.core.models import (
    NUCLEOTIDES,
    REGION_KINDS,
    ConservationTrack,
    PwmMotif,
    RegionAnnotation,
    SequenceRecord,
)
from evolen.core.pipeline import PipelineConfig

# Set up logger for this module
logger = logging.getLogger(__name__)

_LETTERS = np.frombuffer(NUCLEOTIDES.encode("ascii"), dtype=np.uint8)

# Region length ranges and tiling weights
REGION_LENGTHS = {
    "promoter": (500, 1000),
    "enhancer": (200, 600),
    "exon": (100, 300),
    "intron": (1000, 3000),
}
REGION_WEIGHTS = (0.2, 0.2, 0.3, 0.3)

# Mean per-base score of each bin kind
CONSERVED_SCORE = 3.0
ACCELERATED_SCORE = -3.0

DATA_FILES = {
    "fasta": "genome.fa",
    "phylop": "phylop.bedgraph",
    "regions": "regions.bed",
    "motifs": "motifs.meme",
}


@dataclass(frozen=True)
class SyntheticParams:
    seed: int = 0
    genome_length: int = 2_000_000
    contigs: int = 2
    n_motifs: int = 20
    min_motif_length: int = 6
    max_motif_length: int = 12
    bin_size: int = 100
    conserved_fraction: float = 0.05
    accelerated_fraction: float = 0.03
    track_step: int = 10
    copies_per_bin: int = 1
    motif_purity: float = 0.85
    n_run_length: int = 50

    def __post_init__(self):
        if self.contigs < 1 or self.genome_length < self.contigs * self.bin_size:
            raise ValidationError("genome must hold at least one bin per contig")
        if self.bin_size % self.track_step:
            raise ValidationError("bin_size must be a multiple of track_step")
        if self.copies_per_bin < 1:
            raise ValidationError("copies_per_bin must be >= 1")
        if not 1 <= self.min_motif_length <= self.max_motif_length <= self.bin_size // self.copies_per_bin:
            raise ValidationError("motif lengths must satisfy 1 <= min <= max <= bin_size / copies_per_bin")
        if self.conserved_fraction + self.accelerated_fraction >= 1.0:
            raise ValidationError("conserved and accelerated fractions must leave neutral bins")
        if not 0.5 < self.motif_purity <= 1.0:
            raise ValidationError("motif_purity must lie in (0.5, 1]")


@dataclass
class SyntheticDataset:
    params: SyntheticParams
    genome: List[SequenceRecord]
    track: ConservationTrack
    regions: List[RegionAnnotation]
    motifs: List[PwmMotif]
    consensuses: List[str]
    bin_kinds: Dict[str, List[str]] = field(default_factory=dict)


def _random_motifs(rng: np.random.Generator, params: SyntheticParams) -> List[str]:
    motifs: List[str] = []
    while len(motifs) < params.n_motifs:
        length = int(rng.integers(params.min_motif_length, params.max_motif_length + 1))
        motif = _LETTERS[rng.integers(0, 4, length)].tobytes().decode("ascii")
        if motif not in motifs:
            motifs.append(motif)
    return motifs


def motif_pwm(name: str, consensus: str, purity: float) -> PwmMotif:
    """PWM whose argmax is the consensus; the remaining mass is spread evenly"""
    other = (1.0 - purity) / 3.0
    rows = tuple(
        tuple(purity if n == base else other for n in NUCLEOTIDES)
        for base in consensus
    )
    return PwmMotif(name, rows)


def _plant(sequence: np.ndarray, start: int, motifs: List[bytes], params: SyntheticParams,
           rng: np.random.Generator) -> None:
    """Place copies_per_bin motif copies, one per equal slot of the bin, at random offsets"""
    slot = params.bin_size // params.copies_per_bin
    for k in range(params.copies_per_bin):
        motif = motifs[int(rng.integers(len(motifs)))]
        pos = start + k * slot + int(rng.integers(0, slot - len(motif) + 1))
        sequence[pos:pos + len(motif)] = np.frombuffer(motif, dtype=np.uint8)


def _contig(name: str, length: int, motifs: List[bytes], params: SyntheticParams,
            rng: np.random.Generator) -> Tuple[SequenceRecord, List[Tuple[int, int, float]], List[str]]:
    sequence = _LETTERS[rng.integers(0, 4, length)]
    n_bins = length // params.bin_size
    draws = rng.random(n_bins)
    kinds = np.where(draws < params.conserved_fraction, "conserved",
                     np.where(draws < params.conserved_fraction + params.accelerated_fraction,
                              "accelerated", "neutral")).tolist()

    intervals = []
    for index, kind in enumerate(kinds):
        start = index * params.bin_size
        end = start + params.bin_size
        if kind == "conserved":
            _plant(sequence, start, motifs, params, rng)
            scores = rng.normal(CONSERVED_SCORE, 0.5, params.bin_size // params.track_step)
        elif kind == "accelerated":
            scores = rng.normal(ACCELERATED_SCORE, 0.5, params.bin_size // params.track_step)
        else:
            scores = rng.normal(0.0, 1.0, params.bin_size // params.track_step)
        for k, score in enumerate(scores):
            step_start = start + k * params.track_step
            intervals.append((step_start, step_start + params.track_step, round(float(score), 3)))

    neutral = [i for i, kind in enumerate(kinds) if kind == "neutral"]
    if params.n_run_length and neutral:
        start = int(rng.choice(neutral)) * params.bin_size
        sequence[start:start + min(params.n_run_length, length - start)] = ord("N")

    record = SequenceRecord(name, sequence.tobytes().decode("ascii"))
    return record, intervals, kinds


def _regions(name: str, length: int, rng: np.random.Generator) -> List[RegionAnnotation]:
    regions = []
    pos = int(rng.integers(0, 500))
    while pos < length:
        kind = REGION_KINDS[int(rng.choice(len(REGION_KINDS), p=REGION_WEIGHTS))]
        low, high = REGION_LENGTHS[kind]
        end = min(pos + int(rng.integers(low, high + 1)), length)
        if end - pos >= 50:
            regions.append(RegionAnnotation(name, pos, end, kind))
        pos = end + int(rng.integers(0, 500))
    return regions


def generate(params: SyntheticParams = SyntheticParams()) -> SyntheticDataset:
    """
    Build a dataset; equal params always give an equal dataset
    """
    rng = np.random.default_rng(params.seed)
    consensuses = _random_motifs(rng, params)
    planted = [m.encode("ascii") for m in consensuses]

    genome = []
    intervals = {}
    regions = []
    bin_kinds = {}
    base_length = params.genome_length // params.contigs
    for index in range(params.contigs):
        name = f"chr{index + 1}"
        length = base_length + (params.genome_length % params.contigs if index == 0 else 0)
        record, contig_intervals, kinds = _contig(name, length, planted, params, rng)
        genome.append(record)
        intervals[name] = contig_intervals
        bin_kinds[name] = kinds
        regions.extend(_regions(name, length, rng))

    motifs = [motif_pwm(f"MOTIF{i + 1:02d}", c, params.motif_purity) for i, c in enumerate(consensuses)]
    dataset = SyntheticDataset(params, genome, ConservationTrack(intervals), regions, motifs,
                               consensuses, bin_kinds)
    counts = {k: sum(kinds.count(k) for kinds in bin_kinds.values())
              for k in ("conserved", "neutral", "accelerated")}
    logger.info(f"Generated synthetic genome: {params.genome_length} bp on {params.contigs} contigs, "
                f"{len(consensuses)} motifs, {len(regions)} regions, bins {counts}")
    return dataset


def write_dataset(dataset: SyntheticDataset, out_dir: str, vocab_size: int = 5120,
                  variant: str = "full", output_dir: str = "evolen_out") -> str:
    """
    Write the data files plus a pipeline.json pointing at them

    Returns:
        Path of the written pipeline config
    """
    os.makedirs(out_dir, exist_ok=True)
    write_text(os.path.join(out_dir, DATA_FILES["fasta"]), format_fasta(dataset.genome))
    write_text(os.path.join(out_dir, DATA_FILES["phylop"]), format_bedgraph(dataset.track))
    write_text(os.path.join(out_dir, DATA_FILES["regions"]), format_bed_regions(dataset.regions))
    write_text(os.path.join(out_dir, DATA_FILES["motifs"]), format_meme(dataset.motifs))

    config = PipelineConfig(
        output_dir=output_dir,
        variant=variant,
        bin_size=dataset.params.bin_size,
        vocab_size=vocab_size,
        **DATA_FILES,
    )
    path = os.path.join(out_dir, "pipeline.json")
    config.save(path)
    logger.info(f"Wrote synthetic dataset and config to {out_dir}")
    return path
