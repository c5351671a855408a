from __future__ import annotations


class ConfigError(ValueError):
    """Invalid experiment configuration; carries every offending field path."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class EmptyBasisError(ValueError):
    """A QBER denominator is zero."""


class MissingTransitionError(ValueError):
    """A pulse-to-pulse transition never occurs in the record stream."""


class InsufficientDataError(ValueError):
    """Decoy bounds cannot be formed from the supplied counts."""


class InfeasibleProgramError(RuntimeError):
    """The linear program has no feasible point."""


class DegenerateBoundError(ValueError):
    """Phase-error estimate is undefined (no single-photon events in X)."""
