"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class ThmaError(Exception):
    """Base class for all errors raised by this package."""


# point cloud ingest / coordinate handling

class MalformedRecord(ThmaError):
    """A file record could not be parsed; carries the line number or byte offset."""

    def __init__(self, message: str, *, where: int | None = None):
        super().__init__(message if where is None else f"{message} (at {where})")
        self.where = where


class HeaderMismatch(ThmaError):
    """Declared record count disagrees with the file contents."""


class EmptyCloud(ThmaError):
    """A point-cloud file with zero points is not a valid pipeline input."""


class OutOfMercatorBand(ThmaError):
    """Latitude outside the Web-Mercator validity band (|lat| >= 85.06 deg)."""


class FrameMismatch(ThmaError):
    """Operation requires inputs in a specific (shared) coordinate frame."""


# BEV rasterization

class DegenerateTrajectory(ThmaError):
    """Trajectory carries no poses."""


class MalformedTileFile(ThmaError):
    """Tile raster, occupancy or sidecar file is missing, truncated or inconsistent."""


# descriptor geometry

class InvalidDescriptor(ThmaError):
    """Descriptor values violate the class schema (length, finiteness, extents)."""


class InvalidAxes(ThmaError):
    """Traffic-sign in-plane axes are not unit-norm and orthogonal."""


class DegenerateOrientation(ThmaError):
    """Pole endpoints have no horizontal displacement; yaw is undefined."""


class DegenerateCone(ThmaError):
    """Cone vertex coincides with the base center; axis is undefined."""


class ClassMismatch(ThmaError):
    """Descriptor distance is only defined between vectors of the same class."""


# attention / FFN reference kernels

class IndivisibleSequence(ThmaError):
    """Token count is not divisible by the reduction ratio."""


class ShapeMismatch(ThmaError):
    """Token/parameter shapes are inconsistent."""


# synthetic scenes

class InvalidConfig(ThmaError):
    """Scene or pipeline configuration parameter out of range."""


# review loop

class NotFound(ThmaError):
    """No review item with the given id."""


class AlreadyDecided(ThmaError):
    """Review decisions are immutable; the item already left Pending."""


class MalformedDecision(ThmaError):
    """Decision payload is invalid (e.g. relabel without a replacement)."""
