"""Exception types shared across the package.

Every error carries a stable ``code`` string (the class name) so the
service layer can put it on the wire without mapping tables.
"""


class FoldLabError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- configuration / input validation ---------------------------------------

class InvalidSpec(FoldLabError):
    """A cloth or grid parameter is out of its legal range."""


class InvalidConfig(FoldLabError):
    """A session configuration is inconsistent or out of range."""


class InvalidAction(FoldLabError):
    """A fold action is degenerate (pick too close to place) or out of bounds."""


# --- fold engine -------------------------------------------------------------

class NothingGrasped(FoldLabError):
    """No particle lies within the pinch radius at the pick point."""


# --- session state machine ---------------------------------------------------

class NoSuchSlot(FoldLabError):
    """Marker slot does not exist yet (wrong pair index, kind, or order)."""


class SessionFinished(FoldLabError):
    """The session already executed its folds; only Reset is allowed."""


class PairLocked(FoldLabError):
    """The marker pair was already consumed by a simulation step."""


class CommandDisabled(FoldLabError):
    """The command is not available in this session mode."""


class NothingToSimulate(FoldLabError):
    """No fully placed, un-simulated marker pair remains."""


class NothingToUndo(FoldLabError):
    """The undo stack is empty."""


class MarkersIncomplete(FoldLabError):
    """Fold requires every marker pair of the session to be placed."""


# --- scoring -----------------------------------------------------------------

class DimensionMismatch(FoldLabError):
    """Two masks (or a mask and an image) differ in size."""


class EmptyImage(FoldLabError):
    """An input image has zero pixels."""


class NoFoldCompleted(FoldLabError):
    """A demonstration log contains no completed fold."""


# --- analysis ----------------------------------------------------------------

class EmptyRecords(FoldLabError):
    """No trial records to summarize."""


class IncompleteDesign(FoldLabError):
    """A subject is missing one or more of the four condition cells."""


class TooFewSubjects(FoldLabError):
    """The repeated-measures test needs at least two complete subjects."""


# --- log replay --------------------------------------------------------------

class SchemaError(FoldLabError):
    """A demonstration log line does not parse or lacks required fields."""


class DivergentLog(FoldLabError):
    """Replaying a log reached a state that rejects the next logged event."""
