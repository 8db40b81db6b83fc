"""Exception hierarchy shared by all modules."""


class CateKitError(Exception):
    """Base class for every error raised by catekit."""


class ConfigurationError(CateKitError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DataError(CateKitError, ValueError):
    """Input arrays violate a shape or content invariant."""


class CsvParseError(DataError):
    """A CSV file could not be turned into a dataset.

    ``row`` is the 1-based data row (header excluded) and ``column`` the column
    name, when the problem can be pinned to a cell.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class MissingFileError(CsvParseError, FileNotFoundError):
    pass


class MissingColumnError(CsvParseError):
    pass


class NonBinaryTreatmentError(CsvParseError):
    pass


class NonNumericCellError(CsvParseError):
    pass


class EmptyDatasetError(CsvParseError):
    pass


class FoldError(CateKitError, ValueError):
    """A cross-fitting fold complement lacks one of the treatment groups."""

    def __init__(self, message, fold=None):
        self.fold = fold
        super().__init__(message)


class DiagnosticError(CateKitError, RuntimeError):
    """A diagnostic could not produce a meaningful value."""
