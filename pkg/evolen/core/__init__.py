"""
Core functionality for EvoLen.

This module contains the domain types, parsers and tokenizer algorithms.
"""
