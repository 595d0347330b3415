"""Outbox-based email notifications.

Every customer-facing event is addressed to the customer's contact user and
appended to a FIFO outbox.  The default transport writes nothing anywhere
else, so test runs and demos stay hermetic; a real transport can be plugged
in as a callable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import UnknownRecipient
from .storage import KIND_CUSTOMER, KIND_NOTIFICATION, KIND_USER, MemoryStore


class EventKind(str, Enum):
    REQUEST_SUBMITTED = "request submitted"
    STATUS_CHANGED = "status changed"
    PEP_ADDED = "PEP added"


@dataclass(frozen=True)
class Notification:
    seq: int
    recipient_email: str
    subject: str
    body: str
    related_request_id: int | None = None

    def to_payload(self) -> dict:
        return {
            "seq": self.seq,
            "recipient_email": self.recipient_email,
            "subject": self.subject,
            "body": self.body,
            "related_request_id": self.related_request_id,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Notification":
        return cls(
            seq=payload["seq"],
            recipient_email=payload["recipient_email"],
            subject=payload["subject"],
            body=payload["body"],
            related_request_id=payload.get("related_request_id"),
        )


class Outbox:
    def __init__(self, store: MemoryStore, transport: Callable[[Notification], None] | None = None):
        self.store = store
        self.transport = transport

    def dispatch(
        self,
        kind: EventKind,
        customer_id: str,
        request_id: int | None = None,
        detail: str = "",
    ) -> Notification:
        kind = EventKind(kind)
        with self.store.transaction() as txn:
            customer = txn.get(KIND_CUSTOMER, customer_id)
            if customer is None:
                raise UnknownRecipient(f"no customer {customer_id!r}", customer_id=customer_id)
            contact = customer.payload.get("contact_user_id") or ""
            if not contact or not txn.exists(KIND_USER, contact):
                raise UnknownRecipient(
                    f"customer {customer_id!r} has no contact user", customer_id=customer_id
                )
            subject = self._subject(kind, customer.payload["name"], request_id, detail)
            notification = Notification(
                seq=txn.next_value("notification"),
                recipient_email=contact,
                subject=subject,
                body=detail or subject,
                related_request_id=request_id,
            )
            txn.put(KIND_NOTIFICATION, str(notification.seq), notification.to_payload())
        if self.transport is not None:
            self.transport(notification)
        return notification

    def entries(self) -> list[Notification]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_NOTIFICATION)
        out = [Notification.from_payload(r.payload) for r in records]
        out.sort(key=lambda n: n.seq)
        return out

    @staticmethod
    def _subject(kind: EventKind, customer_name: str, request_id: int | None, detail: str) -> str:
        if kind is EventKind.REQUEST_SUBMITTED:
            return f"Change request {request_id} submitted for {customer_name}"
        if kind is EventKind.STATUS_CHANGED:
            return f"Change request {request_id} update for {customer_name}: {detail}"
        return f"New PEP registered for {customer_name}: {detail}"
