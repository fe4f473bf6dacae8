#!/usr/bin/env python
"""
Main entry point for EvoLen.

This module launches the command line interface when the package is run directly.
"""

from evolen.cli.evolen_cli import main

if __name__ == "__main__":
    main()
