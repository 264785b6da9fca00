"""
Exceptions
"""

from typing import Optional


class StructureError(ValueError):
    """Shapes or structures that do not fit together."""


class DomainError(ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class AlignmentError(ValueError):
    """Segment durations are not integer multiples of the time step."""


class FormatError(ValueError):
    """A document or data file cannot be parsed."""


class VersionError(FormatError):
    """A document declares an unsupported format version."""


class DivergenceError(ArithmeticError):
    """
    Non-finite values encountered during a computation.

    Args:
        stage (str): Where it happened: 'segment', 'layer' or 'iteration'.
        index (int): Index of the segment, layer or iteration.
        message (Optional[str], optional): Extra detail. Defaults to None.
    """

    def __init__(self, stage: str, index: int, message: Optional[str] = None):
        self.stage = stage
        self.index = index
        text = "Non-finite values in %s %d" % (stage, index)
        if message:
            text += ": %s" % message
        super().__init__(text)
