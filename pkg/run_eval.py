#!/usr/bin/env python
"""
Script to launch the EvoLen evaluation CLI.
"""

from evolen.cli.eval_cli import main

if __name__ == "__main__":
    main()
