"""
Command Line Interface for EvoLen.

This module provides the `evolen` command and its subcommands.
"""

import logging

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def add_loglevel_argument(parser):
    """Add the --loglevel flag shared by every command"""
    parser.add_argument('--loglevel', type=str, choices=LOG_LEVELS, default='INFO',
                        help='Set logging level (default: INFO)')


def configure_logging(level='INFO'):
    """Configure the root logger once for a command line run"""
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, force=True)
