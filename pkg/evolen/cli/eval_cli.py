#!/usr/bin/env python
"""
eval_cli.py - `evolen eval motifs|regions|phylop|enrichment`

Each analysis writes a TSV table and a JSON summary into --out-dir.
"""

import argparse
import logging
import os
import sys

from evolen.cli import add_loglevel_argument, configure_logging
from evolen.cli.evolen_cli import run_command
from evolen.core import analysis, reports
from evolen.core.encoder import read_tokenizer
from evolen.core.errors import ValidationError
from evolen.core.genome_io import read_bed_regions, read_bedgraph, read_fasta, read_meme
from evolen.core.models import StratificationParams
from evolen.core.pipeline import verify_artifact
from evolen.core.stratify import stratify

logger = logging.getLogger(__name__)

def load_checked_tokenizer(args):
    """Load --tokenizer, verifying it against --manifest when given"""
    vocab = read_tokenizer(args.tokenizer)
    if args.manifest:
        run_hash = verify_artifact(args.manifest, args.tokenizer)
        if vocab.config_hash and vocab.config_hash != run_hash:
            raise ValidationError(f"{args.tokenizer} was built by another run than {args.manifest}")
        logger.info(f"Tokenizer matches manifest {args.manifest} (config hash {run_hash[:12]})")
    return vocab


def tokenizer_label(args, path=None):
    return args.label or os.path.splitext(os.path.basename(path or args.tokenizer))[0]


def output_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def stratify_inputs(args, genome):
    track = read_bedgraph(args.phylop)
    return track, stratify(genome, track, StratificationParams(args.z, args.bin_size), args.threads)


def eval_motifs(args):
    """Motif preservation, optionally compared with a baseline tokenizer"""
    vocab = load_checked_tokenizer(args)
    motifs = analysis.motifs_from_pwms(read_meme(args.motifs), args.wildcard_threshold,
                                       args.max_variants, args.max_motif_length)
    label = tokenizer_label(args)
    metrics = analysis.motif_metrics(vocab, motifs)
    rows = [(label, metrics)]
    summary = {"tokenizer": label, "motifs": metrics.to_row()}
    gains = None

    if args.baseline:
        baseline = analysis.motif_metrics(read_tokenizer(args.baseline), motifs)
        baseline_label = os.path.splitext(os.path.basename(args.baseline))[0]
        if baseline_label == label:
            baseline_label = "baseline"
        rows.append((baseline_label, baseline))
        gains = {
            column: analysis.relative_gain(getattr(metrics, field), getattr(baseline, field))
            for column, field in analysis.GAIN_COLUMNS.items()
        }
        summary["baseline"] = {"tokenizer": baseline_label, "motifs": baseline.to_row()}
        summary["relative_gain"] = gains
        logger.info(f"PerfectMatch% {metrics.perfect_match_rate:.2f} vs baseline "
                    f"{baseline.perfect_match_rate:.2f}")

    reports.write_motif_table(output_path(args, "motifs.tsv"), rows, gains)
    reports.write_motif_details(output_path(args, "motif_details.tsv"),
                                analysis.motif_outcomes(vocab, motifs))
    reports.write_json(output_path(args, "motifs.json"), summary)
    print(f"\nMotifs: {metrics.n_motifs}  PerfectMatch%: {metrics.perfect_match_rate:.2f}  "
          f"ExactVocab%: {metrics.exact_vocab_rate:.2f}  AvgTok/Motif: {metrics.avg_tokens_per_motif:.3f}")
    return True


def eval_regions(args):
    """Token-length signatures per region kind and their pairwise JS measures"""
    vocab = load_checked_tokenizer(args)
    genome = read_fasta(args.fasta)
    signatures = analysis.region_signatures(vocab, genome, read_bed_regions(args.regions))
    pairs = analysis.pairwise_js(signatures, args.log_base)
    label = tokenizer_label(args)
    reports.write_signature_table(output_path(args, "length_signatures.tsv"), label, signatures)
    reports.write_js_table(output_path(args, "js.tsv"), label, pairs)
    summary = reports.signature_summary(signatures, pairs)
    summary["tokenizer"] = label
    reports.write_json(output_path(args, "regions.json"), summary)
    for a, b, divergence, distance in pairs:
        print(f"{a:>9} - {b:<9} JSD {divergence:.6f}  distance {distance:.6f}")
    return True


def eval_phylop(args):
    """Per-category phyloP profile of decoded tokens"""
    vocab = load_checked_tokenizer(args)
    genome = read_fasta(args.fasta)
    track, stratification = stratify_inputs(args, genome)
    stats = analysis.phylop_token_stats(vocab, genome, track, stratification)
    label = tokenizer_label(args)
    reports.write_phylop_table(output_path(args, "phylop.tsv"), label, stats)
    reports.write_json(output_path(args, "phylop.json"), {
        "tokenizer": label,
        "phylop": {c: (s.to_row() if s else None) for c, s in stats.categories.items()},
    })
    for category, entry in stats.categories.items():
        if entry:
            print(f"{category:>12}: mean {entry.mean_phylop:.4f}  >0 {entry.pct_positive:.2f}%  "
                  f"var {entry.mean_intra_variance:.4f}  tokens {entry.distinct_tokens}")
    return True


def eval_enrichment(args):
    """Region x conservation enrichment against the intron x neutral background"""
    vocab = load_checked_tokenizer(args)
    genome = read_fasta(args.fasta)
    _, stratification = stratify_inputs(args, genome)
    bins = analysis.enrichment_bins(genome, read_bed_regions(args.regions), stratification)
    table = analysis.enrichment(vocab, bins, args.alpha)
    label = tokenizer_label(args)
    reports.write_enrichment_table(output_path(args, "enrichment.tsv"), label, table)
    summary = reports.enrichment_summary(table)
    summary["tokenizer"] = label
    reports.write_json(output_path(args, "enrichment.json"), summary)
    for region, value in summary["separation"].items():
        print(f"{region:>9}: separation {value:.4f}")
    return True


def parse_args(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(prog='evolen eval', description='EvoLen token analysis metrics')
    subparsers = parser.add_subparsers(dest='analysis', required=True)

    common = argparse.ArgumentParser(add_help=False)
    add_loglevel_argument(common)
    common.add_argument('--tokenizer', required=True, help='Tokenizer JSON to evaluate')
    common.add_argument('--manifest', help='Pipeline manifest the tokenizer must match')
    common.add_argument('--label', help='Tokenizer name in the output tables (default: file name)')
    common.add_argument('--out-dir', default='.', help='Directory for TSV and JSON outputs (default: .)')
    common.add_argument('--threads', type=int, default=1,
                        help='Worker processes for binning (default: 1)')

    binning = argparse.ArgumentParser(add_help=False)
    binning.add_argument('--fasta', required=True, help='Genome FASTA file')
    binning.add_argument('--phylop', required=True, help='phyloP bedGraph file')
    binning.add_argument('--bin-size', type=int, default=100, help='Bin width in bp (default: 100)')
    binning.add_argument('--z', type=float, default=1.645, help='z-score threshold (default: 1.645)')

    p = subparsers.add_parser('motifs', parents=[common], help='Motif preservation metrics')
    p.add_argument('--motifs', required=True, help='MEME motif library')
    p.add_argument('--wildcard-threshold', type=float, default=analysis.WILDCARD_THRESHOLD,
                   help='Minimum probability of a wildcard alternative (default: 0.25)')
    p.add_argument('--max-variants', type=int, default=analysis.MAX_VARIANTS,
                   help='Variant cap per motif before falling back to the consensus (default: 256)')
    p.add_argument('--max-motif-length', type=int, default=analysis.MAX_MOTIF_LENGTH,
                   help='Longest consensus kept (default: 12)')
    p.add_argument('--baseline', help='Second tokenizer to report a relative gain against')
    p.set_defaults(func=eval_motifs)

    p = subparsers.add_parser('regions', parents=[common], help='Region length signatures and JS measures')
    p.add_argument('--fasta', required=True, help='Genome FASTA file')
    p.add_argument('--regions', required=True, help='Region BED file')
    p.add_argument('--log-base', type=float, default=2.0, help='Logarithm base for JSD (default: 2)')
    p.set_defaults(func=eval_regions)

    p = subparsers.add_parser('phylop', parents=[common, binning], help='Per-category token phyloP')
    p.set_defaults(func=eval_phylop)

    p = subparsers.add_parser('enrichment', parents=[common, binning], help='Region x conservation enrichment')
    p.add_argument('--regions', required=True, help='Region BED file')
    p.add_argument('--alpha', type=float, default=analysis.DEFAULT_ALPHA,
                   help='Pseudocount for smoothed frequencies (default: 0.5)')
    p.set_defaults(func=eval_enrichment)

    return parser.parse_args(argv)


def main(argv=None):
    """Main entry point"""
    args = parse_args(argv)
    configure_logging(args.loglevel)
    success = run_command(args.func, args)
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
