"""
Custom exception classes for comprehensive error handling.
"""

from typing import Any, Dict, Optional


class BaseAppException(Exception):
    """Base exception class for application-specific exceptions."""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for error reports."""
        return {
            "error": self.error_code,
            "message": self.message,
            "details": self.details
        }


class ValidationException(BaseAppException):
    """Exception for input validation errors."""
    pass


class ParseException(ValidationException):
    """Exception for malformed term lists."""
    pass


class DomainException(ValidationException):
    """Exception for arguments outside a function's mathematical domain."""
    pass


class PreconditionException(ValidationException):
    """Exception when an operation's precondition does not hold."""
    pass


class ContractViolationException(BaseAppException):
    """Exception when an operation is called on an input it is not defined for."""
    pass


class ResourceException(BaseAppException):
    """Exception for resource-related errors."""
    pass


class ResourceLimitException(ResourceException):
    """Exception when an enumeration or table exceeds its budget."""
    pass


class PrecisionLimitException(ResourceException):
    """Exception when adaptive precision escalation exceeds its ceiling."""
    pass


class FactorizationException(BaseAppException):
    """Exception for radicands outside the supported factorization range."""
    pass


class ConfigurationException(BaseAppException):
    """Exception for configuration errors."""
    pass


class PersistenceException(BaseAppException):
    """Exception for unreadable or incompatible record and progress files."""
    pass


def raise_resource_limit_error(
    what: str,
    estimate: int,
    limit: int,
    details: Optional[Dict[str, Any]] = None
) -> None:
    """Raise a resource limit error that reports the size estimate."""
    payload = {"estimate": estimate, "limit": limit}
    payload.update(details or {})
    raise ResourceLimitException(
        f"{what} needs {estimate} entries, above the limit of {limit}",
        error_code="RESOURCE_LIMIT",
        details=payload,
    )
