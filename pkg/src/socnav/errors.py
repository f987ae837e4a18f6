"""Exception hierarchy for the socnav toolkit."""


class SocnavError(Exception):
    """Base class for all toolkit errors."""


class MalformedDocument(SocnavError):
    """Input bytes are not a well-formed document (bad UTF-8 or JSON)."""


class SchemaError(SocnavError):
    """Document is well-formed but a field is missing or has the wrong type.

    Carries a JSON-pointer style ``path`` to the offending location.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class InvariantError(SocnavError):
    """A structurally valid document violates a data-model invariant."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class MalformedRow(SocnavError):
    """A TSV row could not be parsed; carries the 0-based row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row
        self.message = message


class NoRobot(SocnavError):
    """A requested robot agent id is absent from the imported data."""


class SingleStateAgent(SocnavError):
    """Velocity derivation needs at least two states."""


class OutOfRange(SocnavError):
    """Query time lies outside an agent's recorded time span."""


class MissingGoal(SocnavError):
    """A goal-dependent metric was requested for an agent without a goal."""


class TooFewStates(SocnavError):
    """Not enough samples for the requested derivative stencil."""


class UnknownCard(SocnavError):
    """A scenario card requests classification but no detector exists for it."""


class UnknownScenario(SocnavError):
    """Scenario generator name is not one of the built-in layouts."""


class EmptyCorpus(SocnavError):
    """Summary statistics need at least one metric report."""
