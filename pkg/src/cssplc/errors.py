"""Exception hierarchy shared by all cssplc modules.

Every category subclasses ValueError so callers that only know stdlib
semantics still catch the right thing; the CLI maps categories to exit codes.
"""


class CssplcError(Exception):
    """Base class for all cssplc errors."""


class ParameterError(CssplcError, ValueError):
    """A value is outside its mathematical domain (bad sf, symbol, SNR...)."""


class FramingError(CssplcError, ValueError):
    """A sample buffer does not frame into whole symbols of 2**sf samples."""


class ConfigurationError(CssplcError, ValueError):
    """A structurally valid value combination that cannot be simulated."""


class ParseError(CssplcError, ValueError):
    """A file could not be parsed; carries the offending line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)
