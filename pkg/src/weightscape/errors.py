"""Exception hierarchy shared across the package."""

from __future__ import annotations


class WeightscapeError(Exception):
    """Base class for all package errors."""


class ShapeError(WeightscapeError):
    """An operand has an incompatible shape; the message names the offending dimension."""


class ConfigError(WeightscapeError):
    """A generator configuration violates its invariants."""


class CheckpointError(WeightscapeError):
    """Base class for checkpoint file and manifest problems."""


class FormatError(CheckpointError):
    """The file does not start with the expected magic bytes."""


class VersionError(CheckpointError):
    """The file carries an unsupported format version."""


class TruncatedError(CheckpointError):
    """The file ends before the payload declared by the manifest."""


class ChecksumError(CheckpointError):
    """The payload checksum does not match the trailing digest."""


class DuplicateNameError(CheckpointError):
    """Two manifest entries share one name."""


class ManifestMismatchError(CheckpointError):
    """A checkpoint does not match a graph manifest (missing/extra/mis-shaped entries)."""


class PlanError(WeightscapeError):
    """A perturbation plan is malformed or cannot be applied."""
