#!/usr/bin/env python
"""
Setup script for the EvoLen package.
"""

from setuptools import setup, find_packages
from evolen import __version__

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="evolen",
    version=__version__,
    author="EvoLen developers",
    maintainer="EvoLen developers",
    description="Conservation-aware BPE tokenizers for genomic sequence",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords=["genomics", "tokenizer", "byte-pair encoding", "phyloP", "conservation"],
    packages=find_packages(exclude=["examples", "examples.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "tqdm>=4.66",
    ],
    extras_require={
        "test": ["pytest>=7.4"],
    },
    entry_points={
        "console_scripts": [
            "evolen=evolen.cli.evolen_cli:main",
            "evolen-eval=evolen.cli.eval_cli:main",
            "evolen-synth=evolen.cli.create_synthetic_data:main",
            "evolen-test=evolen.tests.test_pipeline:main",
        ],
    },
)
