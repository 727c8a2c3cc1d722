"""
Custom exceptions package for the application.
"""

from app.exceptions.custom_exceptions import (
    BaseAppException,
    ValidationException,
    ParseException,
    DomainException,
    PreconditionException,
    ContractViolationException,
    ResourceException,
    ResourceLimitException,
    PrecisionLimitException,
    FactorizationException,
    ConfigurationException,
    PersistenceException,
    raise_resource_limit_error,
)

__all__ = [
    "BaseAppException",
    "ValidationException",
    "ParseException",
    "DomainException",
    "PreconditionException",
    "ContractViolationException",
    "ResourceException",
    "ResourceLimitException",
    "PrecisionLimitException",
    "FactorizationException",
    "ConfigurationException",
    "PersistenceException",
    "raise_resource_limit_error",
]
