"""
reports.py - TSV and JSON writers for analysis results
"""

import csv
import json
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from evolen.core.analysis import (
    LENGTH_BINS,
    EnrichmentTable,
    LengthSignature,
    MotifMetrics,
    MotifOutcome,
    PhylopTokenStats,
    separation,
)
from evolen.core.models import CATEGORIES, REGION_KINDS


def _write_rows(path: str, fieldnames: Sequence[str], rows: Iterable[Dict[str, object]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, delimiter="\t", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_json(path: str, data: object) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def write_motif_table(path: str, rows: Sequence[Tuple[str, MotifMetrics]],
                      gains: Optional[Mapping[str, Optional[float]]] = None) -> None:
    """
    Motif preservation summary, one row per tokenizer

    gains, when given, is appended as a final RelGain% row keyed by metric column.
    """
    table = []
    for label, metrics in rows:
        row = {"Tokenizer": label}
        row.update(metrics.to_row())
        table.append(row)
    fieldnames = list(table[0])
    if gains:
        row = {"Tokenizer": "RelGain%"}
        row.update({k: _round(v, 4) for k, v in gains.items()})
        table.append(row)
    _write_rows(path, fieldnames, table)


def write_motif_details(path: str, outcomes: Iterable[MotifOutcome]) -> None:
    fieldnames = ["Motif", "Consensus", "Tokens", "PerfectMatch", "InVocab", "TokenFrac", "VariantStd"]
    _write_rows(path, fieldnames, (
        {
            "Motif": o.name,
            "Consensus": o.consensus,
            "Tokens": o.n_tokens,
            "PerfectMatch": int(o.perfect_match),
            "InVocab": int(o.in_vocab),
            "TokenFrac": round(o.token_fraction, 6),
            "VariantStd": round(o.variant_std, 6),
        }
        for o in outcomes
    ))


def write_phylop_table(path: str, label: str, stats: PhylopTokenStats) -> None:
    """Per-category phyloP summary; categories without tokens are left out"""
    fieldnames = ["Tokenizer", "Region", "MeanPhyloP", "%>0", "MeanVar", "Tokens"]
    rows = []
    for category in CATEGORIES:
        entry = stats[category]
        if entry is None:
            continue
        row = {"Tokenizer": label, "Region": category}
        row.update(entry.to_row())
        rows.append(row)
    _write_rows(path, fieldnames, rows)


def write_signature_table(path: str, label: str, signatures: Mapping[str, LengthSignature]) -> None:
    """Token length-bin composition per region"""
    fieldnames = ["Tokenizer", "Region"] + [name for name, _, _ in LENGTH_BINS] + ["Tokens"]
    rows = []
    for region in REGION_KINDS:
        if region in signatures:
            row = {"Tokenizer": label, "Region": region}
            row.update(signatures[region].to_row())
            rows.append(row)
    _write_rows(path, fieldnames, rows)


def write_js_table(path: str, label: str, pairs: Iterable[Tuple[str, str, float, float]]) -> None:
    """Pairwise Jensen-Shannon divergence and distance between regions"""
    fieldnames = ["Tokenizer", "RegionA", "RegionB", "JSDivergence", "JSDistance"]
    _write_rows(path, fieldnames, (
        {"Tokenizer": label, "RegionA": a, "RegionB": b,
         "JSDivergence": round(d, 8), "JSDistance": round(s, 8)}
        for a, b, d, s in pairs
    ))


def _round(value: Optional[float], digits: int = 6) -> object:
    return "" if value is None or math.isnan(value) else round(value, digits)


def write_enrichment_table(path: str, label: str, table: EnrichmentTable) -> None:
    """Mean log2 fold-change per region x conservation bin"""
    fieldnames = ["Tokenizer", "Region", "Category", "Tokens", "MeanLog2FC",
                  "MeanLen", "MeanGC", "TopToken"]
    rows = []
    for key in sorted(table.bins, key=_bin_order):
        b = table.bins[key]
        rows.append({
            "Tokenizer": label,
            "Region": key[0],
            "Category": key[1],
            "Tokens": b.total,
            "MeanLog2FC": _round(b.mean_log2fc),
            "MeanLen": _round(b.mean_token_length, 4),
            "MeanGC": _round(b.mean_gc, 4),
            "TopToken": b.top_token,
        })
    _write_rows(path, fieldnames, rows)


def separations(table: EnrichmentTable) -> Dict[str, float]:
    """Conserved vs accelerated separation for every region present"""
    return {
        region: separation(table, region)
        for region in REGION_KINDS
        if (region, "conserved") in table.bins and (region, "accelerated") in table.bins
    }


def _bin_order(key: Tuple[str, str]) -> Tuple[int, int, str]:
    region = REGION_KINDS.index(key[0]) if key[0] in REGION_KINDS else len(REGION_KINDS)
    category = CATEGORIES.index(key[1]) if key[1] in CATEGORIES else len(CATEGORIES)
    return region, category, "/".join(key)


def enrichment_summary(table: EnrichmentTable) -> Dict[str, object]:
    return {
        "alpha": table.alpha,
        "background": "x".join(table.background),
        "mean_log2fc": {
            "x".join(key): table.bins[key].mean_log2fc for key in sorted(table.bins, key=_bin_order)
        },
        "separation": separations(table),
    }


def signature_summary(signatures: Mapping[str, LengthSignature],
                      pairs: List[Tuple[str, str, float, float]]) -> Dict[str, object]:
    return {
        "signatures": {k: list(v.probabilities) for k, v in signatures.items()},
        "js_divergence": {f"{a}-{b}": d for a, b, d, _ in pairs},
        "js_distance": {f"{a}-{b}": s for a, b, _, s in pairs},
    }


def write_comparison_table(path: str, rows: Sequence[Dict[str, object]]) -> None:
    """One row per (variant, vocabulary size) run; missing values are left empty"""
    if not rows:
        raise ValueError("comparison table needs at least one row")
    fieldnames = list(rows[0])
    _write_rows(path, fieldnames, (
        {k: ("" if v is None else v) for k, v in row.items()} for row in rows
    ))
