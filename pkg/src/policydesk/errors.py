"""Domain error types.

Every error carries a machine-readable ``code`` (the class name) and a
``details`` mapping; the HTTP layer maps ``http_status`` directly.
"""

from __future__ import annotations

from typing import Any


class DomainError(Exception):
    """Base class for all service errors."""

    http_status = 400

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


# -- access / auth ----------------------------------------------------------

class PermissionDenied(DomainError):
    http_status = 403


class BadCredentials(DomainError):
    http_status = 401


class AuthenticationRequired(DomainError):
    http_status = 401


class NotCustomerRole(DomainError):
    http_status = 403


# -- lookups ----------------------------------------------------------------

class UnknownProduct(DomainError):
    http_status = 404


class UnknownTemplate(DomainError):
    http_status = 404


class UnknownPackage(DomainError):
    http_status = 404


class UnknownEntity(DomainError):
    http_status = 404


class UnknownRequest(DomainError):
    http_status = 404


class UnknownRecipient(DomainError):
    http_status = 404


class VerificationNotSet(DomainError):
    http_status = 404


# -- uniqueness / conflicts -------------------------------------------------

class DuplicateProductName(DomainError):
    http_status = 409


class DuplicateItemName(DomainError):
    http_status = 409


class DuplicateTemplateId(DomainError):
    http_status = 409


class DuplicateCustomerName(DomainError):
    http_status = 409


class DuplicatePEPId(DomainError):
    http_status = 409


class DuplicateEmail(DomainError):
    http_status = 409


class AlreadySubscribed(DomainError):
    http_status = 409


class TemplateInUse(DomainError):
    http_status = 409


class HasChildRecords(DomainError):
    http_status = 409


class InvalidTransition(DomainError):
    http_status = 409


class InvalidState(DomainError):
    http_status = 409


# -- validation -------------------------------------------------------------

class InvalidComponent(DomainError):
    pass


class DescriptionEmpty(DomainError):
    pass


class UnknownDataType(DomainError):
    pass


class UnknownParent(DomainError):
    pass


class ParentCycle(DomainError):
    pass


class MultipleParents(DomainError):
    pass


class TypeMismatch(DomainError):
    pass


class RequiredMissing(DomainError):
    pass


class ParentDisabled(DomainError):
    pass


class ValidationFailed(DomainError):
    pass


class InvalidEmail(DomainError):
    pass


class NotACustomerUser(DomainError):
    pass


class NotAnOpsUser(DomainError):
    pass


class NotSubscribed(DomainError):
    pass


class AnswerEmpty(DomainError):
    pass


class NameEmpty(DomainError):
    pass


class NoPEPProvided(DomainError):
    pass


class UnknownSortKey(DomainError):
    pass


class UnknownRecordKind(DomainError):
    pass


# -- infrastructure ---------------------------------------------------------

class StorageUnavailable(DomainError):
    http_status = 503


class ConfigInvalid(DomainError):
    pass


class AddressInUse(DomainError):
    pass
