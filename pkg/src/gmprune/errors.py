"""Typed errors raised by the toolkit.

Every domain failure maps to one of these classes so callers (and the CLI,
which turns them into exit code 1) can dispatch on the type name.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all domain errors."""


# --- model container ---------------------------------------------------


class MagicMismatch(ToolkitError):
    """File does not start with the expected container magic."""


class ManifestParse(ToolkitError):
    """Container manifest is malformed or violates a manifest invariant."""


class TruncatedBlob(ToolkitError):
    """Weight blob is shorter than the manifest claims, or a declared
    blob length is inconsistent with the layer shape."""


class NonFiniteValue(ToolkitError):
    """A tensor contains NaN/Inf; reports the layer and flat index."""

    def __init__(self, layer: str, flat_index: int):
        self.layer = layer
        self.flat_index = flat_index
        super().__init__(f"non-finite value in layer {layer!r} at flat index {flat_index}")


class IoFailure(ToolkitError):
    """Underlying I/O error while writing a container."""


# --- selection criteria -------------------------------------------------


class ZeroVectorCosine(ToolkitError):
    """Cosine distance requested with an all-zero vector present."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"cosine distance undefined for zero vector (row {row})")


class CountOutOfRange(ToolkitError):
    """Requested selection count outside [0, rows]."""


class DimensionMismatch(ToolkitError):
    """Query vector length does not match the filter dimensionality."""


class NoConvergence(ToolkitError):
    """Iteration budget exhausted; `best` holds the best iterate found."""

    def __init__(self, message: str, best):
        self.best = best
        super().__init__(message)


# --- analysis -----------------------------------------------------------


class EmptyInput(ToolkitError):
    """Operation requires at least one observation."""


# --- flops --------------------------------------------------------------


class GraphValidation(ToolkitError):
    """Network graph description violates a structural invariant."""


# --- pruner -------------------------------------------------------------


class NonSequentialGraph(ToolkitError):
    """Compact extraction requires a pure sequential chain."""


class MaskShapeMismatch(ToolkitError):
    """Mask indices inconsistent with the bundle shapes."""


class TrainerFailure(ToolkitError):
    """Trainer callback raised; carries the failing epoch."""

    def __init__(self, epoch: int, cause: BaseException):
        self.epoch = epoch
        super().__init__(f"trainer failed at epoch {epoch}: {cause!r}")


# --- toy network ---------------------------------------------------------


class ShapeMismatch(ToolkitError):
    """Input tensor shape incompatible with the network."""


class CacheMismatch(ToolkitError):
    """Backward called with a cache not produced by a matching forward."""


# --- cli ------------------------------------------------------------------


class UnknownLayer(ToolkitError):
    """Named layer not present in the bundle."""
