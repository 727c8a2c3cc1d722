"""
Exception to exit-code mapping for the command line.
"""

import json
import logging
import sys
import traceback
from typing import Any, Dict, Optional, TextIO

from pydantic import ValidationError

from app.core.config import get_settings
from app.core.logging import run_id_var
from app.exceptions.custom_exceptions import (
    BaseAppException,
    ConfigurationException,
    ContractViolationException,
    FactorizationException,
    PersistenceException,
    ResourceException,
    ValidationException,
)

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNEXPECTED = 70

# Ordered: the first matching type wins
status_map = {
    ValidationException: 2,
    ResourceException: 3,
    ContractViolationException: 4,
    FactorizationException: 5,
    PersistenceException: 6,
    ConfigurationException: 78,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, BaseAppException):
        for exc_type, code in status_map.items():
            if isinstance(exc, exc_type):
                return code
        return EXIT_FAILURE
    if isinstance(exc, ValidationError):
        return status_map[ValidationException]
    return EXIT_UNEXPECTED


def handle_exception(exc: BaseException, stream: Optional[TextIO] = None) -> int:
    """Report an exception as a JSON error payload on stderr and return the exit code."""
    code = exit_code_for(exc)
    if isinstance(exc, BaseAppException):
        _logger.warning(
            "Command failed",
            extra={
                "event": "command_failed",
                "error_code": exc.error_code,
                "exit_code": code,
                "details": exc.details,
            },
        )
        payload: Dict[str, Any] = exc.to_dict()
    elif isinstance(exc, ValidationError):
        _logger.warning("Invalid arguments", extra={"event": "command_failed", "exit_code": code})
        payload = {
            "error": "VALIDATION_ERROR",
            "message": "Invalid arguments",
            "details": {"errors": json.loads(exc.json())},
        }
    else:
        _logger.exception(
            "Unexpected exception occurred",
            extra={"event": "unexpected_error", "exception_type": type(exc).__name__},
        )
        details: Dict[str, Any] = {}
        if get_settings().ENVIRONMENT != "production":
            details = {
                "type": type(exc).__name__,
                "traceback": traceback.format_exc().split("\n"),
            }
        payload = {"error": "INTERNAL_ERROR", "message": f"Unexpected error: {exc}", "details": details}

    payload["run_id"] = run_id_var.get()
    (stream or sys.stderr).write(json.dumps(payload, default=str) + "\n")
    return code
