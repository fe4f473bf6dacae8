#!/usr/bin/env python
"""
evolen_cli.py - The `evolen` command

Subcommands:
    stratify   split a genome into conserved / neutral / accelerated pools
    train      train a BPE vocabulary on one pool
    merge      merge three category vocabularies into a scored tokenizer
    build      score a merge report or BPE vocabulary into a tokenizer
    encode     segment FASTA records with a tokenizer
    eval       token analysis metrics (see eval_cli.py)
    pipeline   run a whole configuration end to end
    compare    run several variants and vocabulary sizes into one table
    synth      generate synthetic test data (see create_synthetic_data.py)
"""

import argparse
import logging
import os
import sys

from evolen import __version__
from evolen.cli import add_loglevel_argument, configure_logging
from evolen.core import reports
from evolen.core.bpe import load_bpe, save_bpe, train_bpe
from evolen.core.encoder import build_scored_vocab, encode_corpus, read_tokenizer, save_tokenizer, write_spans_tsv
from evolen.core.errors import EvolenError, StageError, ValidationError
from evolen.core.genome_io import format_fasta, read_bedgraph, read_fasta, write_text
from evolen.core.merge import load_report, merge_no_priority, merge_vocabularies, save_report
from evolen.core.models import CATEGORIES, StratificationParams, normalize_category
from evolen.core.compare import SWEEP_SIZES, run_comparison, write_comparison
from evolen.core.pipeline import VARIANTS, PipelineConfig, run_pipeline
from evolen.core.stratify import extract_pools, stratification_stats, stratify

logger = logging.getLogger(__name__)


def cmd_stratify(args):
    """Write one FASTA pool per category plus stratify_stats.json"""
    genome = read_fasta(args.fasta)
    track = read_bedgraph(args.phylop)
    result = stratify(genome, track, StratificationParams(args.z, args.bin_size), args.threads)
    os.makedirs(args.out_dir, exist_ok=True)
    pools = extract_pools(genome, result)
    for category, pool in pools.items():
        path = os.path.join(args.out_dir, f"{category}.fa")
        write_text(path, format_fasta(pool.sequences))
        logger.info(f"Wrote {len(pool)} {category} bins to {path}")
    reports.write_json(os.path.join(args.out_dir, "stratify_stats.json"),
                       stratification_stats(result, pools))
    return True


def cmd_train(args):
    """Train a BPE vocabulary on one FASTA pool"""
    # without --label the pool file name (conserved.fa, ...) names the category
    label = normalize_category(args.label or os.path.splitext(os.path.basename(args.pool))[0])
    pool = read_fasta(args.pool)
    vocab = train_bpe(pool, args.vocab_size, args.min_frequency, label, args.threads, args.progress)
    save_bpe(vocab, args.out)
    logger.info(f"Wrote {len(vocab)} {label} tokens to {args.out}")
    return True


def load_category_vocab(path, category):
    """Load a BPE vocabulary and check it was trained on the given category"""
    vocab = load_bpe(path)
    if vocab.category_label and normalize_category(vocab.category_label) != category:
        raise ValidationError(f"{path} holds a {vocab.category_label} vocabulary, "
                              f"expected {category}")
    return vocab


def default_report_path(out):
    return os.path.join(os.path.dirname(out) or ".", "merge_report.json")


def cmd_merge(args):
    """Merge three category vocabularies and write the merge report and tokenizer"""
    v_con, v_neu, v_acc = (load_category_vocab(path, category)
                           for path, category in zip((args.con, args.neu, args.acc), CATEGORIES))
    merge_func = merge_no_priority if args.no_priority else merge_vocabularies
    report = merge_func(v_con, v_neu, v_acc, args.target)
    report_path = args.report or default_report_path(args.out)
    save_report(report, report_path)
    logger.info(f"Wrote merge report to {report_path}")
    save_tokenizer(build_scored_vocab(report, args.length_exponent), args.out)
    logger.info(f"Wrote tokenizer to {args.out}")
    return True


def cmd_build(args):
    """Score a merge report or a BPE vocabulary into a tokenizer"""
    try:
        source = load_report(args.source)
    except (KeyError, TypeError):
        source = load_bpe(args.source).tokens
    save_tokenizer(build_scored_vocab(source, args.length_exponent), args.out)
    logger.info(f"Wrote tokenizer to {args.out}")
    return True


def cmd_encode(args):
    """Encode every FASTA record and write the spans as TSV"""
    vocab = read_tokenizer(args.tokenizer)
    records = read_fasta(args.fasta)
    results = encode_corpus(vocab, records, args.threads, args.progress)
    write_spans_tsv(results, args.out)
    logger.info(f"Wrote token spans to {args.out}")
    return True


def cmd_pipeline(args):
    """Run a pipeline configuration"""
    config = PipelineConfig.load(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    out_dir = run_pipeline(config, args.threads, args.force, args.progress)
    print(f"\nArtifacts written to {out_dir}")
    return True


def cmd_compare(args):
    """Run variants over vocabulary sizes and write one comparison TSV"""
    config = PipelineConfig.load(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    sizes = SWEEP_SIZES if args.sweep else args.vocab_sizes
    runs = run_comparison(config, args.variants, sizes, args.threads, args.force, args.progress)
    out = args.out or os.path.join(config.output_dir, "comparison.tsv")
    write_comparison(out, runs, args.baseline)
    print(f"\nCompared {len(runs)} runs; table written to {out}")
    return True


def parse_args(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(description='EvoLen conservation-aware genomic tokenizer')
    parser.add_argument('--version', action='version', version=f'evolen {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    add_loglevel_argument(common)
    common.add_argument('--threads', type=int, default=1,
                        help='Worker processes for parallel stages (default: 1)')
    common.add_argument('--progress', action='store_true',
                        help='Show progress bars for long loops')

    p = subparsers.add_parser('stratify', parents=[common], help='Stratify a genome by conservation')
    p.add_argument('--fasta', required=True, help='Genome FASTA file')
    p.add_argument('--phylop', required=True, help='phyloP bedGraph file')
    p.add_argument('--bin-size', type=int, default=100, help='Bin width in bp (default: 100)')
    p.add_argument('--z', type=float, default=1.645, help='z-score threshold (default: 1.645)')
    p.add_argument('--out-dir', default='.', help='Directory for the pool FASTA files (default: .)')
    p.set_defaults(func=cmd_stratify)

    p = subparsers.add_parser('train', parents=[common], help='Train BPE on one pool')
    p.add_argument('--pool', required=True, help='Pool FASTA file')
    p.add_argument('--vocab-size', type=int, default=5120, help='Target vocabulary size (default: 5120)')
    p.add_argument('--min-frequency', type=int, default=2,
                   help='Stop when the best pair occurs less often (default: 2)')
    p.add_argument('--label', help='Pool category: con, neu or acc (default: taken from the pool file name)')
    p.add_argument('--out', required=True, help='Output vocabulary JSON')
    p.set_defaults(func=cmd_train)

    p = subparsers.add_parser('merge', parents=[common], help='Merge category vocabularies')
    p.add_argument('--con', required=True, help='Conserved vocabulary JSON')
    p.add_argument('--neu', required=True, help='Neutral vocabulary JSON')
    p.add_argument('--acc', required=True, help='Accelerated vocabulary JSON')
    p.add_argument('--target', type=int, default=5120, help='Final vocabulary size (default: 5120)')
    p.add_argument('--no-priority', action='store_true',
                   help='Order the union by summed frequency instead of by tier')
    p.add_argument('--length-exponent', type=int, choices=[1, 2], default=2,
                   help='Token score exponent p (default: 2)')
    p.add_argument('--report', help='Merge report JSON (default: merge_report.json next to --out)')
    p.add_argument('--out', required=True, help='Output tokenizer JSON')
    p.set_defaults(func=cmd_merge)

    p = subparsers.add_parser('build', parents=[common], help='Build a tokenizer from a report or vocabulary')
    p.add_argument('--source', required=True, help='Merge report or BPE vocabulary JSON')
    p.add_argument('--length-exponent', type=int, choices=[1, 2], default=2,
                   help='Token score exponent p (default: 2)')
    p.add_argument('--out', required=True, help='Output tokenizer JSON')
    p.set_defaults(func=cmd_build)

    p = subparsers.add_parser('encode', parents=[common], help='Encode FASTA records')
    p.add_argument('--tokenizer', required=True, help='Tokenizer JSON')
    p.add_argument('--fasta', required=True, help='FASTA file to encode')
    p.add_argument('--out', required=True, help='Output TSV (seq_id, start, end, token)')
    p.set_defaults(func=cmd_encode)

    p = subparsers.add_parser('pipeline', parents=[common], help='Run a pipeline configuration')
    p.add_argument('--config', required=True, help='Pipeline JSON configuration')
    p.add_argument('--output-dir', help='Override the configured output directory')
    p.add_argument('--force', action='store_true', help='Rerun even when artifacts are up to date')
    p.set_defaults(func=cmd_pipeline)

    p = subparsers.add_parser('compare', parents=[common],
                              help='Run several variants and vocabulary sizes and tabulate them')
    p.add_argument('--config', required=True, help='Pipeline JSON configuration shared by all runs')
    p.add_argument('--output-dir', help='Root directory for the runs (default: configured output_dir)')
    p.add_argument('--variants', nargs='+', choices=VARIANTS, default=list(VARIANTS),
                   help='Variants to run (default: all four)')
    p.add_argument('--vocab-sizes', nargs='+', type=int,
                   help='Vocabulary sizes to run (default: the configured vocab_size)')
    p.add_argument('--sweep', action='store_true',
                   help=f"Run the sizes {', '.join(map(str, SWEEP_SIZES))}")
    p.add_argument('--baseline', default='no_partition', choices=VARIANTS,
                   help='Variant the relative gains refer to (default: no_partition)')
    p.add_argument('--force', action='store_true', help='Rerun even when artifacts are up to date')
    p.add_argument('--out', help='Output TSV (default: comparison.tsv in the output directory)')
    p.set_defaults(func=cmd_compare)

    p = subparsers.add_parser('eval', add_help=False, help='Token analysis metrics')
    p.add_argument('args', nargs=argparse.REMAINDER)

    p = subparsers.add_parser('synth', add_help=False, help='Generate synthetic data')
    p.add_argument('args', nargs=argparse.REMAINDER)

    return parser.parse_args(argv)


def run_command(func, args):
    """Run a command function, turning errors into a failed status"""
    try:
        return func(args)
    except StageError as e:
        logger.error(f"Pipeline failed: {e}")
    except EvolenError as e:
        logger.error(f"Error: {e}")
    except KeyboardInterrupt:
        logger.info("Stopped by user")
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
    return False


def main(argv=None):
    """Main entry point"""
    argv = sys.argv[1:] if argv is None else list(argv)

    # eval and synth own their argument parsers
    if argv and argv[0] == 'eval':
        from evolen.cli import eval_cli
        eval_cli.main(argv[1:])
    if argv and argv[0] == 'synth':
        from evolen.cli import create_synthetic_data
        create_synthetic_data.main(argv[1:])

    args = parse_args(argv)
    configure_logging(args.loglevel)
    success = run_command(args.func, args)
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
