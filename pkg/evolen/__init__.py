"""
EvoLen package.

A conservation-aware genomic tokenizer toolkit: evolutionary stratification,
per-pool BPE training, priority vocabulary merging, length-aware dynamic
programming segmentation and token analysis metrics.
"""

__version__ = '1.0.0'
