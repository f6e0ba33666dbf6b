"""Exception types shared across the package.

Three failure categories are distinguished so callers (and the CLI) can map
them to exit codes: programming/contract errors, bad input data, and
failures arising during training.
"""


class ContractError(ValueError):
    """A documented precondition or invariant was violated by the caller."""


class DataError(RuntimeError):
    """An input file or dataset is missing, malformed, or unsupported."""


class TrainingError(RuntimeError):
    """Training produced an invalid state (e.g. NaN activations/gradients)."""
