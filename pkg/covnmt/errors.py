"""
Exception hierarchy for the coverage NMT engine.
Every error carries the process exit code the CLI reports for it.
"""


class CovNMTError(Exception):
    """Base class for all engine errors"""
    exit_code = 1


class ConfigError(CovNMTError):
    """Invalid configuration or command usage"""
    exit_code = 1

    def __init__(self, message, field=None):
        self.field = field
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class DataError(CovNMTError):
    """Bad corpus, vocabulary, alignment or model file"""
    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class EmptyInputError(DataError):
    """Empty corpus or empty sentence"""


class VocabIndexError(DataError, IndexError):
    """Token id outside the table"""

    def __init__(self, token_id, size):
        self.token_id = token_id
        self.size = size
        super().__init__(f"id {token_id} out of range for table with {size} rows")


class CheckpointError(DataError):
    """Unreadable checkpoint or checkpoint/config mismatch"""


class DimensionError(CovNMTError, ValueError):
    """Operand shapes do not agree"""
    exit_code = 3

    def __init__(self, message, *shapes):
        self.shapes = shapes
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)


class InvalidMaskError(DimensionError):
    """Softmax over a fully masked vector"""


class NumericFailureError(CovNMTError):
    """Non-finite values where finite ones are required"""
    exit_code = 3

    def __init__(self, message, name=None):
        self.name = name
        if name is not None:
            message = f"{message} (in {name})"
        super().__init__(message)
