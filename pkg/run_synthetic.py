#!/usr/bin/env python
"""
Script to create a synthetic genome with a ready-to-run pipeline.json.
"""

from evolen.cli.create_synthetic_data import main

if __name__ == "__main__":
    main()
