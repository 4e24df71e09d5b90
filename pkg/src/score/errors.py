"""Exception hierarchy shared by every layer of the engine."""

from __future__ import annotations


class ScoreError(Exception):
    """Base class. ``code`` is a short stable identifier, e.g. ``cycle-detected``."""

    code = "error"

    def __init__(self, code: str | None = None, message: str = ""):
        if code is not None:
            self.code = code
        self.message = message or self.code
        super().__init__(f"{self.code}: {self.message}" if message else self.code)


class KBError(ScoreError):
    """Structural violation in the element network."""


class MarkerError(ScoreError):
    pass


class PoolExhausted(MarkerError):
    code = "pool-exhausted"


class RuleError(ScoreError):
    """A rule failed validation or could not be installed."""


class ActionError(ScoreError):
    code = "action-error"


class ChainDepthExceeded(ScoreError):
    code = "chain-depth-exceeded"


class SourceError(ScoreError):
    """An error tied to a location in .kdef source text."""

    def __init__(self, code: str, message: str, loc=None):
        self.loc = loc
        super().__init__(code, message)

    def __str__(self) -> str:
        where = f"{self.loc}: " if self.loc is not None else ""
        return f"{where}{self.code}: {self.message}"


class ParseError(SourceError):
    pass


class EvalError(SourceError):
    pass
