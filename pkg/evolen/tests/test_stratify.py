"""
test_stratify.py - Binning, z-score classification and pool extraction
"""

import math
import random

import numpy as np
import pytest

from evolen.core.errors import ValidationError
from evolen.core.models import ConservationTrack, SequenceRecord, StratificationParams
from evolen.core.stratify import bin_track, classify_bins, extract_pools, stratification_stats, stratify


def per_base_track(contig, scores):
    return ConservationTrack({contig: [(i, i + 1, float(s)) for i, s in enumerate(scores)]})


def constant_bins_track(contig, means, bin_size):
    return ConservationTrack({
        contig: [(i * bin_size, (i + 1) * bin_size, float(m)) for i, m in enumerate(means)]
    })


def test_bin_means_and_trailing_partial_bin():
    genome = [SequenceRecord("chr1", "A" * 25)]
    track = per_base_track("chr1", range(25))
    binned = bin_track(genome, track, bin_size=10)
    bins = binned.all_bins()
    assert [(b.start, b.end) for b in bins] == [(0, 10), (10, 20)]
    assert [b.mean for b in bins] == [4.5, 14.5]


def test_uncovered_bases_count_as_zero():
    genome = [SequenceRecord("chr1", "A" * 10)]
    track = ConservationTrack({"chr1": [(0, 5, 2.0)]})
    assert bin_track(genome, track, bin_size=10).all_bins()[0].mean == 1.0


def test_contig_missing_from_track_is_uncovered(caplog):
    genome = [SequenceRecord("chrX", "ACGT" * 5)]
    binned = bin_track(genome, ConservationTrack({"chr1": [(0, 1, 1.0)]}), bin_size=10)
    assert [b.mean for b in binned.all_bins()] == [0.0, 0.0]
    assert "chrX" in caplog.text


def test_hand_computed_classification():
    # ten zero bins plus +5 and -5: mu = 0, sigma = sqrt(50 / 12) ~ 2.0412
    means = [0] * 10 + [5, -5]
    genome = [SequenceRecord("chr1", "ACGT" * 30)]
    result = stratify(genome, constant_bins_track("chr1", means, 10), StratificationParams(bin_size=10))
    assert result.mu == 0.0
    assert result.sigma == pytest.approx(2.0412, abs=1e-4)
    assert result.mu + 1.645 * result.sigma == pytest.approx(3.358, abs=1e-3)
    assert result.categories == ("neutral",) * 10 + ("conserved", "accelerated")
    assert result.counts() == {"conserved": 1, "neutral": 10, "accelerated": 1}


def test_constant_track_is_all_neutral():
    genome = [SequenceRecord("chr1", "A" * 50)]
    result = stratify(genome, constant_bins_track("chr1", [1.5] * 5, 10), StratificationParams(bin_size=10))
    assert result.sigma == 0.0
    assert set(result.categories) == {"neutral"}


def test_threshold_is_strict():
    # with z = 1 a bin sitting exactly at mu + sigma stays neutral
    genome = [SequenceRecord("chr1", "A" * 20)]
    result = stratify(genome, constant_bins_track("chr1", [1.0, -1.0], 10),
                      StratificationParams(z=1.0, bin_size=10))
    assert result.mu == 0.0 and result.sigma == 1.0
    assert result.categories == ("neutral", "neutral")


def test_classification_matches_direct_recomputation():
    rng = random.Random(7)
    for _ in range(200):
        n_bins = rng.randint(2, 40)
        means = [round(rng.gauss(0, 2), 3) for _ in range(n_bins)]
        genome = [SequenceRecord("chr1", "A" * (n_bins * 5))]
        result = classify_bins(bin_track(genome, constant_bins_track("chr1", means, 5), 5),
                               StratificationParams(bin_size=5))
        values = [b.mean for b in result.bins]
        mu = float(np.mean(values))
        sigma = float(np.std(values))
        assert result.mu == pytest.approx(mu, abs=1e-9)
        assert result.sigma == pytest.approx(sigma, abs=1e-9)
        for value, category in zip(values, result.categories):
            if value > result.mu + 1.645 * result.sigma:
                assert category == "conserved"
            elif value < result.mu - 1.645 * result.sigma:
                assert category == "accelerated"
            else:
                assert category == "neutral"


def test_affine_transform_keeps_assignments():
    rng = random.Random(11)
    means = [rng.choice([-4, -1, 0, 0, 0, 1, 5]) for _ in range(30)]
    genome = [SequenceRecord("chr1", "A" * 300)]
    params = StratificationParams(bin_size=10)
    base = stratify(genome, constant_bins_track("chr1", means, 10), params)
    shifted = stratify(genome, constant_bins_track("chr1", [2 * m + 3 for m in means], 10), params)
    assert base.categories == shifted.categories


def test_bins_follow_contig_order_across_records():
    genome = [SequenceRecord("chr2", "A" * 20), SequenceRecord("chr1", "C" * 20)]
    track = ConservationTrack({"chr1": [(0, 20, 1.0)], "chr2": [(0, 20, 2.0)]})
    result = stratify(genome, track, StratificationParams(bin_size=10))
    assert [b.contig for b in result.bins] == ["chr1", "chr1", "chr2", "chr2"]


def test_threaded_binning_matches_serial():
    rng = np.random.default_rng(3)
    genome = [SequenceRecord(f"chr{i}", "ACGT" * 250) for i in range(4)]
    track = ConservationTrack({
        f"chr{i}": [(j, j + 1, float(v)) for j, v in enumerate(rng.normal(size=1000))] for i in range(4)
    })
    assert bin_track(genome, track, 100, threads=1) == bin_track(genome, track, 100, threads=3)


def test_pools_hold_every_bin_except_all_n():
    genome = [SequenceRecord("chr1", "ACGTACGTAC" + "N" * 10 + "GGGGGCCCCC" + "TTTTTAAAAA")]
    track = constant_bins_track("chr1", [9, 0, 0, -9], 10)
    result = stratify(genome, track, StratificationParams(z=1.0, bin_size=10))
    pools = extract_pools(genome, result)
    assert [r.bases for r in pools["conserved"].sequences] == ["ACGTACGTAC"]
    assert [r.bases for r in pools["accelerated"].sequences] == ["TTTTTAAAAA"]
    assert [r.id for r in pools["neutral"].sequences] == ["chr1:20-30"]
    assert sum(len(p) for p in pools.values()) == 3


def test_all_n_bins_are_classified_and_count_toward_mean():
    genome = [SequenceRecord("chr1", "ACGTACGTAC" * 3 + "N" * 10)]
    track = constant_bins_track("chr1", [0, 0, 0, 8], 10)
    result = stratify(genome, track, StratificationParams(bin_size=10))
    # the all-N bin is in the statistics: mu is 2, not 0
    assert result.mu == 2.0
    assert result.sigma == pytest.approx(math.sqrt(12))
    assert len(result.categories) == 4
    pools = extract_pools(genome, result)
    assert sum(len(p) for p in pools.values()) == 3
    assert all(r.id != "chr1:30-40" for p in pools.values() for r in p.sequences)
    stats = stratification_stats(result, pools)
    assert sum(stats["bin_counts"].values()) == 4
    assert sum(stats["pool_sizes"].values()) == 3
    assert stats["all_n_bins"] == 1


def test_neutral_set_grows_with_z():
    rng = random.Random(5)
    means = [round(rng.gauss(0, 2), 3) for _ in range(60)]
    genome = [SequenceRecord("chr1", "A" * 600)]
    binned = bin_track(genome, constant_bins_track("chr1", means, 10), 10)
    previous = None
    for z in (0.0, 0.5, 1.0, 1.645, 2.0, 3.0, 10.0):
        result = classify_bins(binned, StratificationParams(z=z, bin_size=10))
        neutral = {i for i, c in enumerate(result.categories) if c == "neutral"}
        if previous is not None:
            assert previous <= neutral
        previous = neutral
    assert len(previous) == 60


def test_empty_genome_is_rejected():
    with pytest.raises(ValidationError):
        stratify([SequenceRecord("chr1", "ACG")], ConservationTrack(), StratificationParams(bin_size=10))


def test_stats_document():
    genome = [SequenceRecord("chr1", "A" * 60)]
    result = stratify(genome, constant_bins_track("chr1", [5, -5, 0, 0, 0, 0], 10),
                      StratificationParams(bin_size=10))
    stats = stratification_stats(result)
    assert stats["bin_counts"] == {"conserved": 1, "neutral": 4, "accelerated": 1}
    assert stats["z"] == 1.645
    assert math.isclose(stats["sigma"], math.sqrt(50 / 6))
    assert "pool_sizes" not in stats
    pooled = stratification_stats(result, extract_pools(genome, result))
    assert pooled["pool_sizes"] == {"conserved": 1, "neutral": 4, "accelerated": 1}
    assert pooled["all_n_bins"] == 0
