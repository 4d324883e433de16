"""Exception types shared across the package."""


class SparseMCTSError(Exception):
    """Base class for all errors raised by this package."""


class DisconnectedGraph(SparseMCTSError):
    pass


class DisconnectedTerminals(SparseMCTSError):
    pass


class GenerationFailed(SparseMCTSError):
    pass


class ParseError(SparseMCTSError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class VersionMismatch(SparseMCTSError):
    pass


class CorruptFile(SparseMCTSError):
    pass


class ShapeMismatch(SparseMCTSError):
    pass


class TerminalLimitExceeded(SparseMCTSError):
    pass


class EdgeLimitExceeded(SparseMCTSError):
    pass


class Timeout(SparseMCTSError):
    pass


class AllNodesSelected(SparseMCTSError):
    pass


class MissingColumn(SparseMCTSError):
    pass
