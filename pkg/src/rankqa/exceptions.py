class RankQAError(Exception):
    """Base class for all errors raised by rankqa."""


class ContractError(RankQAError, ValueError):
    """An operation was called outside its precondition."""


class IntegrityError(RankQAError, ValueError):
    """Inputs are individually well-formed but inconsistent with each other."""


class ParseError(RankQAError, ValueError):
    """A file could not be parsed.

    ``line`` is 1-based when the failure can be pinned to a line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
