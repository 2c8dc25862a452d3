# Every failure the toolkit raises on purpose derives from SpreaderGnnError,
# and also from the closest builtin so plain `except ValueError` still works.


class SpreaderGnnError(Exception):
    pass


class ShapeError(SpreaderGnnError, ValueError):
    pass


class NumericError(SpreaderGnnError, ArithmeticError):
    pass


class ConfigError(SpreaderGnnError, ValueError):
    pass


class DataError(SpreaderGnnError, ValueError):
    pass


class UsageError(SpreaderGnnError, RuntimeError):
    pass


class ReferentialError(DataError):
    pass


class IncompatibleError(SpreaderGnnError, ValueError):
    pass


class DatasetParseError(DataError):
    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = int(line_no)
        super().__init__(f"{self.path}:{self.line_no}: {message}")
