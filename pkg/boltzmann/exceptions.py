"""
boltzmann/exceptions.py
───────────────────────
Error hierarchy shared by the library and the management commands.

Every error carries the process exit code the CLI maps it to:
  2  validation (bad shapes, bad configs, caps exceeded)
  3  numerical abort (non-finite parameters, solver failure)
  4  I/O (unreadable / malformed files)
"""


class BoltzmannError(Exception):
    exit_code = 1


class ValidationError(BoltzmannError):
    exit_code = 2


class EnumerationCapExceeded(ValidationError):
    def __init__(self, what: str, size: int, cap: int):
        self.what = what
        self.size = size
        self.cap  = cap
        super().__init__(f'{what}: {size} exceeds the enumeration cap {cap}')


class NumericalAbort(BoltzmannError):
    exit_code = 3

    def __init__(self, message: str, update_index: int | None = None):
        self.update_index = update_index
        if update_index is not None:
            message = f'{message} (update {update_index})'
        super().__init__(message)


class SolverFailure(BoltzmannError):
    exit_code = 3

    def __init__(self, message: str, instance: dict | None = None):
        self.instance = instance or {}
        super().__init__(message)


class DataFormatError(BoltzmannError):
    exit_code = 4


class ArtifactIOError(BoltzmannError):
    exit_code = 4
