"""
compare.py - Vocabulary-size sweeps and variant ablations

Runs the pipeline once per (variant, vocabulary size) below a common root
directory, then gathers the evaluation summaries of all runs into a single
TSV table. Motif columns of every run are also given as a relative gain over
the whole-genome baseline (no_partition) at the same vocabulary size.
"""

import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from evolen.core import reports
from evolen.core.analysis import GAIN_COLUMNS, relative_gain
from evolen.core.errors import ValidationError
from evolen.core.models import CATEGORIES
from evolen.core.pipeline import VARIANTS, PipelineConfig, run_pipeline

# Set up logger for this module
logger = logging.getLogger(__name__)

SWEEP_SIZES = (2048, 3072, 4096, 5120)
BASELINE_VARIANT = "no_partition"
MOTIF_COLUMNS = ("AvgTok/Motif", "PerfectMatch%", "ExactVocab%", "AvgTokenFrac", "Consistency")
SUMMARY_NAME = os.path.join("eval", "summary.json")


@dataclass(frozen=True)
class ComparisonRun:
    """One finished pipeline run and its evaluation summary"""

    variant: str
    vocab_size: int
    output_dir: str
    summary: Dict[str, Any]


def run_name(variant: str, vocab_size: int) -> str:
    return f"{variant}_{vocab_size}"


def load_summary(out_dir: str) -> Dict[str, Any]:
    path = os.path.join(out_dir, SUMMARY_NAME)
    try:
        with open(path, "r") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read evaluation summary {path}: {e}")


def run_comparison(config: PipelineConfig, variants: Sequence[str] = VARIANTS,
                   vocab_sizes: Optional[Sequence[int]] = None, threads: int = 1,
                   force: bool = False, show_progress: bool = False) -> List[ComparisonRun]:
    """
    Run every variant at every vocabulary size

    Each run goes to <config.output_dir>/<variant>_<size> with evaluation
    switched on; runs whose artifacts are current are not recomputed.
    vocab_sizes defaults to the configured vocab_size alone.

    Raises:
        ValidationError: unknown variant or empty sweep
        StageError: a run failed
    """
    sizes = tuple(vocab_sizes or (config.vocab_size,))
    if not variants or not sizes:
        raise ValidationError("a comparison needs at least one variant and one vocabulary size")
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValidationError(f"unknown variants {unknown}, expected some of {VARIANTS}")

    runs = []
    for size in sizes:
        for variant in variants:
            run_config = dataclasses.replace(
                config, variant=variant, vocab_size=size, evaluate=True,
                output_dir=os.path.join(config.output_dir, run_name(variant, size)),
            )
            logger.info(f"Comparison run {len(runs) + 1}/{len(sizes) * len(variants)}: "
                        f"{variant} at {size} tokens")
            out_dir = run_pipeline(run_config, threads, force, show_progress)
            runs.append(ComparisonRun(variant, size, out_dir, load_summary(out_dir)))
    return runs


def comparison_rows(runs: Sequence[ComparisonRun],
                    baseline: str = BASELINE_VARIANT) -> List[Dict[str, object]]:
    """
    Table rows in run order

    RelGain columns are empty when no baseline run has the same vocabulary
    size, when a run has no motif metrics, or when the baseline value is 0.
    """
    baselines = {run.vocab_size: run.summary.get("motifs") or {}
                 for run in runs if run.variant == baseline}
    rows = []
    for run in runs:
        motifs = run.summary.get("motifs") or {}
        phylop = run.summary.get("phylop") or {}
        row: Dict[str, object] = {
            "Variant": run.variant,
            "VocabSize": run.vocab_size,
            "Tokens": run.summary.get("vocab_size"),
        }
        for column in MOTIF_COLUMNS:
            row[column] = motifs.get(column)
        for category in CATEGORIES:
            stats = phylop.get(category)
            row[f"MeanPhyloP({category[:3]})"] = stats["MeanPhyloP"] if stats else None
        reference = baselines.get(run.vocab_size, {})
        for column in GAIN_COLUMNS:
            gain = None
            if motifs.get(column) is not None and reference.get(column) is not None:
                gain = relative_gain(motifs[column], reference[column])
            row[f"RelGain({column})"] = None if gain is None else round(gain, 4)
        rows.append(row)
    return rows


def write_comparison(path: str, runs: Sequence[ComparisonRun],
                     baseline: str = BASELINE_VARIANT) -> List[Dict[str, object]]:
    rows = comparison_rows(runs, baseline)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    reports.write_comparison_table(path, rows)
    logger.info(f"Wrote {len(rows)} comparison rows to {path}")
    return rows
