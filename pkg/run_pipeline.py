#!/usr/bin/env python
"""
Script to launch the EvoLen command line.
"""

from evolen.cli.evolen_cli import main

if __name__ == "__main__":
    main()
