"""
errors.py - Exception hierarchy for EvoLen
"""

from typing import Optional


class EvolenError(Exception):
    """
    Base class for every error raised by the evolen package
    """


class ParseError(EvolenError):
    """
    Raised when an input file cannot be parsed

    Args:
        message: Description of the problem
        line: 1-based line number where the problem was found
        char: Offending character, if any
    """

    def __init__(self, message: str, line: Optional[int] = None, char: Optional[str] = None):
        self.line = line
        self.char = char
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(EvolenError):
    """
    Raised when a value violates a domain invariant or a precondition
    """


class TokenizerFormatError(EvolenError):
    """
    Raised when a tokenizer or vocabulary file is rejected on load
    """


class StageError(EvolenError):
    """
    Raised by the pipeline when one of its stages fails

    The original exception is chained as __cause__.
    """

    def __init__(self, stage: str, error: Exception):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {error}")
