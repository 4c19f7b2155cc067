"""Exception types shared across the package."""

from __future__ import annotations


class DimensionError(ValueError):
    """A shape or length does not match what a network/config implies."""

    def __init__(self, what: str, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class NonFiniteError(FloatingPointError):
    """A log-density evaluation produced a non-finite intermediate.

    ``term`` names the first offending piece (e.g. ``"logits"``,
    ``"prediction_prior"``) so callers can report where the blow-up happened.
    """

    def __init__(self, term: str, detail: str = ""):
        self.term = term
        msg = f"non-finite value in term '{term}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConfigurationError(ValueError):
    """An invalid configuration value (bad family, field, or combination)."""
