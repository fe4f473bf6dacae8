"""
stratify.py - Evolutionary stratification of a genome into sequence pools

Bins the genome into fixed-width windows, averages the per-base phyloP
scores, and assigns each bin to conserved / neutral / accelerated with the
two-tailed z-score rule around the global bin mean.
"""

import logging
import math
from collections import defaultdict
from multiprocessing.pool import ThreadPool
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from evolen.core.errors import ValidationError
from evolen.core.models import (
    CATEGORIES,
    BinnedTrack,
    ConservationTrack,
    GenomeBin,
    SequencePool,
    SequenceRecord,
    Stratification,
    StratificationParams,
)

# Set up logger for this module
logger = logging.getLogger(__name__)


def _bin_record(record: SequenceRecord, track: ConservationTrack, bin_size: int) -> List[GenomeBin]:
    n_bins = len(record) // bin_size
    if n_bins == 0:
        return []
    scores = track.scores(record.source_contig, record.source_offset,
                          record.source_offset + n_bins * bin_size)
    means = scores.reshape(n_bins, bin_size).mean(axis=1)
    return [
        GenomeBin(
            contig=record.source_contig,
            index=i,
            start=record.source_offset + i * bin_size,
            end=record.source_offset + (i + 1) * bin_size,
            mean=float(means[i]),
            record_id=record.id,
        )
        for i in range(n_bins)
    ]


def bin_track(genome: Sequence[SequenceRecord], track: ConservationTrack,
              bin_size: int = 100, threads: int = 1) -> BinnedTrack:
    """
    Average per-base scores over non-overlapping bins of every genome record

    Uncovered bases contribute 0.0 and the trailing partial bin is dropped.
    Records on a contig the track does not know are binned as uncovered with
    a warning.
    """
    if bin_size < 1:
        raise ValidationError(f"bin_size must be >= 1, got {bin_size}")

    for contig in sorted({r.source_contig for r in genome}):
        if not track.has_contig(contig):
            logger.warning(f"Contig {contig} is absent from the conservation track; "
                           f"its bases are treated as uncovered (0.0)")

    if threads > 1 and len(genome) > 1:
        with ThreadPool(threads) as pool:
            per_record = pool.map(lambda r: _bin_record(r, track, bin_size), genome)
    else:
        per_record = [_bin_record(r, track, bin_size) for r in genome]

    bins: Dict[str, List[GenomeBin]] = defaultdict(list)
    for record_bins in per_record:
        for genome_bin in record_bins:
            bins[genome_bin.contig].append(genome_bin)

    binned = BinnedTrack(
        bin_size,
        {contig: tuple(sorted(items, key=lambda b: b.start)) for contig, items in bins.items()},
    )
    logger.info(f"Binned {len(genome)} records into {len(binned)} bins of {bin_size} bp")
    return binned


def classify_bins(binned: BinnedTrack, params: StratificationParams = StratificationParams()) -> Stratification:
    """
    Assign each bin to a conservation category

    conserved iff x_b > mu + z*sigma, accelerated iff x_b < mu - z*sigma,
    neutral otherwise. mu and sigma are the mean and population standard
    deviation over all bins of all contigs. sigma == 0 makes every bin neutral.
    """
    bins = binned.all_bins()
    if not bins:
        raise ValidationError("classify_bins requires at least one bin")

    values = [b.mean for b in bins]
    n = len(values)
    mu = math.fsum(values) / n
    sigma = math.sqrt(math.fsum((v - mu) ** 2 for v in values) / n)

    if sigma == 0.0:
        categories = ("neutral",) * n
    else:
        upper = mu + params.z * sigma
        lower = mu - params.z * sigma
        categories = tuple(
            "conserved" if v > upper else "accelerated" if v < lower else "neutral"
            for v in values
        )

    result = Stratification(tuple(bins), categories, mu, sigma, params)
    logger.info(f"Classified {n} bins (mu={mu:.4f}, sigma={sigma:.4f}, z={params.z}): "
                f"{result.counts()}")
    return result


def iter_bin_sequences(genome: Sequence[SequenceRecord],
                       stratification: Stratification) -> Iterator[Tuple[GenomeBin, str, str]]:
    """
    Yield (bin, category, bases) for every classified bin
    """
    records = {r.id: r for r in genome}
    for genome_bin, category in stratification.assignments():
        record = records.get(genome_bin.record_id)
        if record is None:
            raise ValidationError(f"bin {genome_bin.name} refers to unknown record {genome_bin.record_id}")
        lo = genome_bin.start - record.source_offset
        yield genome_bin, category, record.bases[lo:lo + (genome_bin.end - genome_bin.start)]


def extract_pools(genome: Sequence[SequenceRecord], stratification: Stratification) -> Dict[str, SequencePool]:
    """
    Collect every classified bin's bases into its category's pool

    Bins consisting only of N are left out of every pool.
    """
    pooled: Dict[str, List[SequenceRecord]] = {c: [] for c in CATEGORIES}
    skipped = 0
    for genome_bin, category, bases in iter_bin_sequences(genome, stratification):
        if not bases.strip("N"):
            skipped += 1
            continue
        pooled[category].append(
            SequenceRecord(genome_bin.name, bases, genome_bin.contig, genome_bin.start)
        )
    if skipped:
        logger.info(f"Excluded {skipped} all-N bins from the pools")
    pools = {c: SequencePool(c, tuple(pooled[c])) for c in CATEGORIES}
    logger.info("Pool sizes: " + ", ".join(f"{c}={len(p)}" for c, p in pools.items()))
    return pools


def stratify(genome: Sequence[SequenceRecord], track: ConservationTrack,
             params: StratificationParams = StratificationParams(),
             threads: int = 1) -> Stratification:
    """Bin the genome and classify the bins in one call"""
    return classify_bins(bin_track(genome, track, params.bin_size, threads), params)


def stratification_stats(stratification: Stratification,
                         pools: Optional[Dict[str, SequencePool]] = None) -> Dict[str, object]:
    """
    Summary written to stratify_stats.json

    bin_counts cover every classified bin, all-N bins included. With pools
    given, pool_sizes and the number of all-N bins kept out of them are added.
    """
    stats = stratification.to_dict()
    if pools is not None:
        sizes = {c: len(pools[c]) for c in CATEGORIES}
        stats["pool_sizes"] = sizes
        stats["all_n_bins"] = len(stratification.bins) - sum(sizes.values())
    return stats
