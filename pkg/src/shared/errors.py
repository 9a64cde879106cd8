from __future__ import annotations


class ConfigurationError(ValueError):
    """Configuration, error model or scenario does not fit together."""


class RepresentationError(RuntimeError):
    """A state left the sparse representation (occupation overflow, empty state)."""


class MeasurementError(RuntimeError):
    """A measurement outcome with zero probability was requested."""


class InvalidTargetError(ValueError):
    """A fidelity target that cannot be compared against (e.g. it holds loss modes)."""
