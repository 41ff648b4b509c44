from typing import Any


class LabException(Exception):
    """Base error raised by the services; main.py turns it into an exit code"""

    status_code: int = 1

    def __init__(self, detail: str, status_code: int | None = None, details: Any = None):
        super().__init__(detail)
        self.detail = detail
        self.details = details
        if status_code is not None:
            self.status_code = status_code


class InvalidInputError(LabException):
    status_code = 2


class ShapeMismatchError(LabException):
    status_code = 3


class UncertifiableWindowError(LabException):
    status_code = 4


class IrrationalSymbolError(LabException):
    """Exact path requested for data without rational coefficients"""

    status_code = 5
