"""
Tests for EvoLen.

This module contains the pytest suites and the end-to-end test driver.
"""
