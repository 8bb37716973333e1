"""Exception types raised across the package."""


class KGAlignError(Exception):
    """Base class for all library errors."""


class DatasetFormatError(KGAlignError):
    """A required dataset file is missing or unreadable."""


class ParseError(KGAlignError):
    """A text file line does not follow the expected layout."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ReferentialError(KGAlignError):
    """An alignment references an entity that no graph contains."""


class TrainingError(KGAlignError):
    """Training diverged (non-finite loss or parameters)."""
