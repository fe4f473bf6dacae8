#!/usr/bin/env python
"""
create_synthetic_data.py - Create a synthetic genome, track, regions and motif library
"""

import argparse
import sys

from evolen.cli import add_loglevel_argument, configure_logging
from evolen.cli.evolen_cli import run_command
from evolen.core.pipeline import VARIANTS
from evolen.core.synthetic import SyntheticParams, generate, write_dataset


def create_synthetic_data(args):
    """Generate the dataset and write it with a ready-to-run pipeline.json"""
    params = SyntheticParams(
        seed=args.seed,
        genome_length=args.length,
        contigs=args.contigs,
        n_motifs=args.motifs,
        bin_size=args.bin_size,
        conserved_fraction=args.conserved_fraction,
        accelerated_fraction=args.accelerated_fraction,
        copies_per_bin=args.copies_per_bin,
    )
    dataset = generate(params)
    config_path = write_dataset(dataset, args.out_dir, args.vocab_size, args.variant)

    print(f"Created synthetic data in {args.out_dir}")
    print("Planted motifs: " + ", ".join(dataset.consensuses))
    print("You can now run the pipeline with:")
    print(f"evolen pipeline --config {config_path}")
    print("\nAnd then evaluate motif preservation with:")
    print(f"evolen eval motifs --tokenizer <output_dir>/tokenizer.json --motifs {args.out_dir}/motifs.meme")
    return True


def parse_args(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(prog='evolen synth', description='Create synthetic EvoLen test data')
    parser.add_argument('--out-dir', type=str, default='synthetic',
                        help='Directory for the generated files (default: synthetic)')
    parser.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    parser.add_argument('--length', type=int, default=2_000_000,
                        help='Total genome length in bp (default: 2000000)')
    parser.add_argument('--contigs', type=int, default=2, help='Number of contigs (default: 2)')
    parser.add_argument('--motifs', type=int, default=20, help='Number of planted motifs (default: 20)')
    parser.add_argument('--bin-size', type=int, default=100, help='Bin width in bp (default: 100)')
    parser.add_argument('--conserved-fraction', type=float, default=0.05,
                        help='Share of bins made conserved (default: 0.05)')
    parser.add_argument('--accelerated-fraction', type=float, default=0.03,
                        help='Share of bins made accelerated (default: 0.03)')
    parser.add_argument('--copies-per-bin', type=int, default=1,
                        help='Motif copies planted in each conserved bin (default: 1)')
    parser.add_argument('--vocab-size', type=int, default=5120,
                        help='vocab_size written into pipeline.json (default: 5120)')
    parser.add_argument('--variant', choices=VARIANTS, default='full',
                        help='Variant written into pipeline.json (default: full)')
    add_loglevel_argument(parser)
    return parser.parse_args(argv)


def main(argv=None):
    """Main entry point"""
    args = parse_args(argv)
    configure_logging(args.loglevel)
    success = run_command(create_synthetic_data, args)
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
