"""Exception hierarchy shared across the toolkit.

Every error carries a stable ``code`` string so callers (and foreign
bindings) can dispatch without string-matching messages.
"""

from __future__ import annotations


class CcsError(Exception):
    """Base class for all toolkit errors."""

    code = "Error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class CcsSyntaxError(CcsError):
    """Malformed CCS text. Carries the offending line/column (1-based)."""

    code = "SyntaxError"

    def __init__(self, message: str, line: int, column: int, expected: str):
        super().__init__(f"line {line}, column {column}: {message} (expected {expected})")
        self.line = line
        self.column = column
        self.expected = expected


class CcsRangeError(CcsError):
    """A numeric field lies outside its declared range."""

    code = "RangeError"


class DegenerateArc(CcsError):
    """Arc with (near-)zero sweep or coincident endpoints."""

    code = "DegenerateArc"


class OpenLoop(CcsError):
    """A profile loop failed to close within tolerance."""

    code = "OpenLoop"


class GeometryError(CcsError):
    """Invalid geometric construction (non-orthonormal frame, zero scale...)."""

    code = "GeometryError"


class EmptySolid(CcsError):
    """Operation requires a non-empty voxel solid."""

    code = "EmptySolid"


class EmptyMesh(CcsError):
    """Operation requires a mesh with at least one positive-area triangle."""

    code = "EmptyMesh"


class EmptyCloud(CcsError):
    """Operation requires a non-empty point cloud."""

    code = "EmptyCloud"


class EmptySet(CcsError):
    """Operation requires a non-empty collection of point clouds."""

    code = "EmptySet"


class EmptyInput(CcsError):
    """Operation requires at least one record."""

    code = "EmptyInput"


class EmptyGroundTruth(CcsError):
    """LCS ratio is undefined for an empty ground-truth token list."""

    code = "EmptyGroundTruth"


class AlignmentError(CcsError):
    """Confidence track does not align 1:1 with the command sequence."""

    code = "AlignmentError"


class ClientError(CcsError):
    """Generator client transport failure (timeout, HTTP error, replay miss).

    ``partial`` may hold a partially-complete result for callers that want
    to salvage work done before the failure.
    """

    code = "ClientError"

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
