"""Change-request lifecycle: submission, assignment, transitions, queue, reports.

The transition graph is deliberately small.  Requests are born Saved (drafts)
or Submitted; assignment pulls a Submitted request into Under Review; from
there the assignee approves, rejects, or parks it Pending; an Approved request
is completed by applying its proposed values to the target protocol objects.
Rejected, Cancelled, and Completed are terminal.  Suspension is an orthogonal
flag — a suspended request keeps its status but refuses to move until resumed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Callable

from .customers import CustomerMaster
from .errors import (
    InvalidState,
    InvalidTransition,
    NotAnOpsUser,
    PermissionDenied,
    UnknownPackage,
    UnknownRecordKind,
    UnknownRequest,
    UnknownSortKey,
    ValidationFailed,
)
from .notifications import EventKind, Outbox
from .storage import (
    KIND_CUSTOMER,
    KIND_CUSTOMER_POLICY,
    KIND_OBJECT,
    KIND_PACKAGE,
    KIND_PEP,
    KIND_POLICY,
    KIND_PRODUCT,
    KIND_REQUEST,
    KIND_USER,
    MemoryStore,
    Transaction,
)
from .templates import ObjectSchema, TemplateEngine
from .users import OPS_ROLES, Privilege, Session, UserMaster, require_ops, require_unrestricted
from .values import TypedValue


class RequestStatus(str, Enum):
    SAVED = "Saved"
    SUBMITTED = "Submitted"
    CANCELLED = "Cancelled"
    UNDER_REVIEW = "Under Review"
    REJECTED = "Rejected"
    PENDING = "Pending"
    APPROVED = "Approved"
    COMPLETED = "Completed"

    @classmethod
    def parse(cls, raw: "str | RequestStatus") -> "RequestStatus":
        if isinstance(raw, RequestStatus):
            return raw
        squashed = str(raw).replace(" ", "").replace("_", "").lower()
        for status in cls:
            if status.value.replace(" ", "").lower() == squashed:
                return status
        raise ValidationFailed(f"not a request status: {raw!r}", value=str(raw))


TERMINAL_STATUSES = frozenset(
    {RequestStatus.CANCELLED, RequestStatus.REJECTED, RequestStatus.COMPLETED}
)

# The only statuses during which a request may carry an assignee.
ASSIGNED_STATUSES = frozenset(
    {RequestStatus.UNDER_REVIEW, RequestStatus.PENDING, RequestStatus.APPROVED}
)

# Lifecycle order, used when the queue is sorted on the Status column.
_STATUS_RANK = {status: index for index, status in enumerate(RequestStatus)}


class ClassOfService(str, Enum):
    EMERGENCY = "Emergency"
    EXPEDITED = "Expedited"
    STANDARD = "Standard"

    @property
    def rank(self) -> int:
        return _COS_RANK[self]

    @classmethod
    def parse(cls, raw: "str | ClassOfService") -> "ClassOfService":
        if isinstance(raw, ClassOfService):
            return raw
        for value in cls:
            if value.value.lower() == str(raw).lower():
                return value
        raise ValidationFailed(f"not a class of service: {raw!r}", value=str(raw))


_COS_RANK = {
    ClassOfService.EMERGENCY: 0,
    ClassOfService.EXPEDITED: 1,
    ClassOfService.STANDARD: 2,
}


class RequestKind(str, Enum):
    PEP_REQUEST = "PEPRequest"
    PACKAGE_REQUEST = "PackageRequest"
    POLICY_CHANGE = "PolicyChange"


class RecordKind(str, Enum):
    NEW = "New"
    ASSIGNED = "Assigned"
    SUSPENDED = "Suspended"

    @classmethod
    def parse(cls, raw: "str | RecordKind") -> "RecordKind":
        if isinstance(raw, RecordKind):
            return raw
        for value in cls:
            if value.value.lower() == str(raw).lower():
                return value
        raise UnknownRecordKind(f"not a record kind: {raw!r}", value=str(raw))


class Rule(str, Enum):
    """Who may take a given action on a request in a given status."""

    CREATOR = "creator"
    ADMIN = "admin"
    ASSIGNEE = "assignee"
    ASSIGNEE_OR_ADMIN = "assignee or admin"


# (current status, action) -> (next status, permission rule).  The Submitted →
# Under Review edge is absent on purpose: that move happens through
# assign_request, never through the generic transition call.
TRANSITIONS: dict[tuple[RequestStatus, str], tuple[RequestStatus, Rule]] = {
    (RequestStatus.SAVED, "submit"): (RequestStatus.SUBMITTED, Rule.CREATOR),
    (RequestStatus.SAVED, "cancel"): (RequestStatus.CANCELLED, Rule.CREATOR),
    (RequestStatus.SUBMITTED, "cancel"): (RequestStatus.CANCELLED, Rule.CREATOR),
    (RequestStatus.SUBMITTED, "reject"): (RequestStatus.REJECTED, Rule.ADMIN),
    (RequestStatus.UNDER_REVIEW, "pend"): (RequestStatus.PENDING, Rule.ASSIGNEE_OR_ADMIN),
    (RequestStatus.UNDER_REVIEW, "approve"): (RequestStatus.APPROVED, Rule.ASSIGNEE_OR_ADMIN),
    (RequestStatus.UNDER_REVIEW, "reject"): (RequestStatus.REJECTED, Rule.ASSIGNEE_OR_ADMIN),
    (RequestStatus.PENDING, "review"): (RequestStatus.UNDER_REVIEW, Rule.ASSIGNEE),
    (RequestStatus.APPROVED, "complete"): (RequestStatus.COMPLETED, Rule.ASSIGNEE_OR_ADMIN),
}

# Edges the state machine can traverse but that are driven by assign_request.
ASSIGNMENT_EDGE = (RequestStatus.SUBMITTED, RequestStatus.UNDER_REVIEW)


def transition_graph() -> dict[RequestStatus, set[RequestStatus]]:
    """Full reachability graph, assignment edge included."""
    graph: dict[RequestStatus, set[RequestStatus]] = {status: set() for status in RequestStatus}
    for (source, _action), (target, _rule) in TRANSITIONS.items():
        graph[source].add(target)
    graph[ASSIGNMENT_EDGE[0]].add(ASSIGNMENT_EDGE[1])
    return graph


@dataclass(frozen=True)
class WorkItem:
    work_item_id: str
    target_kind: str  # "customer_policy" | "pep"
    target_id: str
    object_id: str
    # column -> encoded TypedValue, or None to clear the column.
    proposed_values: dict[str, dict | None]
    item_status: RequestStatus

    def to_payload(self) -> dict:
        return {
            "work_item_id": self.work_item_id,
            "target_kind": self.target_kind,
            "target_id": self.target_id,
            "object_id": self.object_id,
            "proposed_values": self.proposed_values,
            "item_status": self.item_status.value,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "WorkItem":
        return cls(
            work_item_id=payload["work_item_id"],
            target_kind=payload["target_kind"],
            target_id=payload["target_id"],
            object_id=payload["object_id"],
            proposed_values=dict(payload["proposed_values"]),
            item_status=RequestStatus(payload["item_status"]),
        )


@dataclass(frozen=True)
class ChangeRequest:
    request_id: int
    class_of_service: ClassOfService
    request_time: str
    customer_id: str
    product_id: str
    package_id: str
    kind: RequestKind
    status: RequestStatus
    created_by: str
    assigned_to: str = ""
    last_assignee: str = ""
    suspended: bool = False
    start_date: str = ""
    end_date: str = ""
    work_items: tuple[WorkItem, ...] = ()

    def to_payload(self) -> dict:
        return {
            "request_id": self.request_id,
            "class_of_service": self.class_of_service.value,
            "request_time": self.request_time,
            "customer_id": self.customer_id,
            "product_id": self.product_id,
            "package_id": self.package_id,
            "kind": self.kind.value,
            "status": self.status.value,
            "created_by": self.created_by,
            "assigned_to": self.assigned_to,
            "last_assignee": self.last_assignee,
            "suspended": self.suspended,
            "start_date": self.start_date,
            "end_date": self.end_date,
            "work_items": [item.to_payload() for item in self.work_items],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ChangeRequest":
        return cls(
            request_id=payload["request_id"],
            class_of_service=ClassOfService(payload["class_of_service"]),
            request_time=payload["request_time"],
            customer_id=payload["customer_id"],
            product_id=payload["product_id"],
            package_id=payload["package_id"],
            kind=RequestKind(payload["kind"]),
            status=RequestStatus(payload["status"]),
            created_by=payload["created_by"],
            assigned_to=payload.get("assigned_to", ""),
            last_assignee=payload.get("last_assignee", ""),
            suspended=payload.get("suspended", False),
            start_date=payload.get("start_date", ""),
            end_date=payload.get("end_date", ""),
            work_items=tuple(WorkItem.from_payload(p) for p in payload.get("work_items", ())),
        )


# The seven queue columns, exactly as the ops landing view shows them.
QUEUE_COLUMNS: tuple[tuple[str, str], ...] = (
    ("request_id", "Request Id"),
    ("class_of_service", "Class Of Service"),
    ("request_time", "Request Time"),
    ("customer", "Customer ID-Name"),
    ("product", "Product"),
    ("status", "Status"),
    ("assigned_to", "Assigned to"),
)

_LABEL_TO_KEY = {label.lower(): key for key, label in QUEUE_COLUMNS}


@dataclass(frozen=True)
class QueueRow:
    request_id: int
    class_of_service: str
    request_time: str
    customer: str  # "CUS-1-Acme Corp"
    product: str
    status: str
    assigned_to: str

    def to_payload(self) -> dict:
        return {key: getattr(self, key) for key, _label in QUEUE_COLUMNS}


@dataclass(frozen=True)
class QueuePage:
    rows: tuple[QueueRow, ...]
    page: int
    page_size: int
    total_rows: int

    @property
    def total_pages(self) -> int:
        if self.total_rows == 0:
            return 1
        return -(-self.total_rows // self.page_size)


@dataclass(frozen=True)
class ReportSection:
    user_id: str
    status_counts: dict[str, int]
    request_ids: tuple[int, ...]
    rows: tuple[QueueRow, ...]


@dataclass(frozen=True)
class AssignmentReport:
    generated_at: str
    since: str
    until: str
    sections: tuple[ReportSection, ...]


@dataclass
class EditSpec:
    """One proposed edit: a target within the package plus column values."""

    target_kind: str  # "customer_policy" | "pep"
    target_id: str
    values: dict[str, object] = field(default_factory=dict)

    @classmethod
    def coerce(cls, raw: "EditSpec | dict") -> "EditSpec":
        if isinstance(raw, EditSpec):
            return raw
        return cls(
            target_kind=str(raw.get("target_kind", "customer_policy")),
            target_id=str(raw.get("target_id", "")),
            values=dict(raw.get("values", {})),
        )


class WorkQueue:
    def __init__(
        self,
        store: MemoryStore,
        engine: TemplateEngine,
        customers: CustomerMaster,
        users: UserMaster,
        outbox: Outbox,
        clock: Callable[[], datetime],
        page_size: int = 50,
    ):
        self.store = store
        self.engine = engine
        self.customers = customers
        self.users = users
        self.outbox = outbox
        self.clock = clock
        self.page_size = page_size

    # -- creation ----------------------------------------------------------

    def submit_change_request(
        self,
        session: Session,
        package_id: str,
        class_of_service: str | ClassOfService,
        edits: list[EditSpec | dict],
        draft: bool = False,
    ) -> ChangeRequest:
        """File a change request against a package.

        Customer callers need a ReadWrite grant on the package's product.
        Every edit is validated against the target object's schema before
        anything persists; failures come back in one ValidationFailed carrying
        per-item diagnostics.
        """
        require_unrestricted(session)
        cos = ClassOfService.parse(class_of_service)
        specs = [EditSpec.coerce(e) for e in edits]

        with self.store.transaction() as txn:
            package = txn.get(KIND_PACKAGE, package_id)
            if package is None:
                raise UnknownPackage(f"no package {package_id!r}", package_id=package_id)
            customer_id = package.payload["customer_id"]
            product_id = package.payload["product_id"]
            if not session.is_ops:
                privilege = self.users.effective_privilege(
                    session.user_id, customer_id, product_id
                )
                if privilege is not Privilege.READ_WRITE:
                    raise PermissionDenied(
                        "change requests need a ReadWrite grant on the product",
                        user_id=session.user_id,
                        privilege=privilege.value,
                    )

            items = self._validate_edits(txn, package, specs)

            now = self.clock().isoformat(timespec="seconds")
            request_id = txn.next_value("request")
            status = RequestStatus.SAVED if draft else RequestStatus.SUBMITTED
            request = ChangeRequest(
                request_id=request_id,
                class_of_service=cos,
                request_time=now,
                customer_id=customer_id,
                product_id=product_id,
                package_id=package_id,
                kind=RequestKind.POLICY_CHANGE,
                status=status,
                created_by=session.user_id,
                start_date=now,
                work_items=tuple(
                    replace(item, item_status=status) for item in items
                ),
            )
            self._put_request(txn, request)
            if status is RequestStatus.SUBMITTED:
                self.outbox.dispatch(
                    EventKind.REQUEST_SUBMITTED, customer_id, request_id=request_id
                )
            return request

    def _validate_edits(
        self, txn: Transaction, package, specs: list[EditSpec]
    ) -> list[WorkItem]:
        package_id = package.payload["package_id"]
        member_objects = set(package.payload["member_object_ids"])
        diagnostics: list[dict] = []
        items: list[WorkItem] = []
        schemas: dict[str, ObjectSchema] = {}

        for index, spec in enumerate(specs, start=1):
            object_id = ""
            if spec.target_kind == "customer_policy":
                record = txn.get(KIND_CUSTOMER_POLICY, spec.target_id)
                if record is None or record.payload["object_id"] not in member_objects:
                    diagnostics.append({
                        "target": spec.target_id,
                        "error": "not a customer policy of this package",
                    })
                    continue
                object_id = record.payload["object_id"]
            elif spec.target_kind == "pep":
                record = txn.get(KIND_PEP, spec.target_id)
                if record is None or record.payload["package_id"] != package_id:
                    diagnostics.append({
                        "target": spec.target_id,
                        "error": "not a PEP of this package",
                    })
                    continue
                object_id = record.payload.get("object_id", "")
                if not object_id:
                    diagnostics.append({
                        "target": spec.target_id,
                        "error": "PEP carries no feature data to edit",
                    })
                    continue
            else:
                diagnostics.append({
                    "target": spec.target_id,
                    "error": f"unknown edit target kind {spec.target_kind!r}",
                })
                continue

            obj = txn.require(KIND_OBJECT, object_id)
            schema_id = obj.payload["schema_id"]
            if schema_id not in schemas:
                schemas[schema_id] = self.engine.get_schema(schema_id)
            schema = schemas[schema_id]

            proposed: dict[str, dict | None] = {}
            for column, raw in spec.values.items():
                try:
                    value = self.engine.validate_value(schema, column, raw)
                except Exception as exc:  # DomainError subclasses
                    diagnostics.append({
                        "target": spec.target_id,
                        "column": column,
                        "error": str(exc),
                    })
                    continue
                proposed[column] = value.encode() if value is not None else None

            items.append(
                WorkItem(
                    work_item_id=f"{index}",
                    target_kind=spec.target_kind,
                    target_id=spec.target_id,
                    object_id=object_id,
                    proposed_values=proposed,
                    item_status=RequestStatus.SAVED,
                )
            )

        if diagnostics:
            raise ValidationFailed("one or more edits are invalid", diagnostics=diagnostics)
        if not items:
            raise ValidationFailed("a change request needs at least one edit")
        return items

    def create_provisioning_request(
        self,
        actor: Session,
        kind: str | RequestKind,
        customer_id: str,
        product_id: str,
        package_id: str,
        target_refs: list[tuple[str, str]],
    ) -> int:
        """Create a Submitted request as part of a provisioning cascade.

        Runs inside the caller's transaction; the customer master calls this
        while subscribing a customer or adding a PEP.
        """
        require_ops(actor)
        kind = RequestKind(kind)
        with self.store.transaction() as txn:
            now = self.clock().isoformat(timespec="seconds")
            request_id = txn.next_value("request")
            items = tuple(
                WorkItem(
                    work_item_id=f"{index}",
                    target_kind=ref_kind,
                    target_id=ref_id,
                    object_id="",
                    proposed_values={},
                    item_status=RequestStatus.SUBMITTED,
                )
                for index, (ref_kind, ref_id) in enumerate(target_refs, start=1)
            )
            request = ChangeRequest(
                request_id=request_id,
                class_of_service=ClassOfService.STANDARD,
                request_time=now,
                customer_id=customer_id,
                product_id=product_id,
                package_id=package_id,
                kind=kind,
                status=RequestStatus.SUBMITTED,
                created_by=actor.user_id,
                start_date=now,
                work_items=items,
            )
            self._put_request(txn, request, extra_refs=tuple(target_refs))
            self.outbox.dispatch(
                EventKind.REQUEST_SUBMITTED, customer_id, request_id=request_id
            )
        return request_id

    def _put_request(
        self,
        txn: Transaction,
        request: ChangeRequest,
        extra_refs: tuple[tuple[str, str], ...] = (),
    ) -> None:
        """Persist a request; open requests hold references to what they touch.

        The storage layer refuses to delete any record an open request still
        references; the references are dropped once the request goes terminal.
        """
        if request.status in TERMINAL_STATUSES:
            refs: tuple[tuple[str, str], ...] = ()
        else:
            refs = (
                (KIND_CUSTOMER, request.customer_id),
                (KIND_PRODUCT, request.product_id),
                (KIND_PACKAGE, request.package_id),
            )
            seen = set(refs)
            for item in request.work_items:
                ref = (item.target_kind, item.target_id)
                if ref not in seen:
                    refs += (ref,)
                    seen.add(ref)
            for ref in extra_refs:
                if ref not in seen:
                    refs += (ref,)
                    seen.add(ref)
        txn.put(KIND_REQUEST, str(request.request_id), request.to_payload(), parent_refs=refs)

    # -- assignment --------------------------------------------------------

    def assign_request(self, session: Session, request_id: int, assignee_id: str) -> ChangeRequest:
        """Assign (or, for admins, reassign) a request to an ops user.

        First assignment moves Submitted → Under Review.  A non-admin ops
        user may only claim work for themselves; reassignment of an in-flight
        request is an admin action.
        """
        require_ops(session)
        assignee = self.users.find_user(assignee_id)
        if assignee is None or assignee.role not in OPS_ROLES:
            raise NotAnOpsUser(f"{assignee_id!r} is not an ops user", user_id=assignee_id)

        with self.store.transaction() as txn:
            request = self._require_request(txn, request_id)
            if request.suspended:
                raise InvalidState(
                    f"request {request_id} is suspended", request_id=request_id
                )
            if request.status is RequestStatus.SUBMITTED and not request.assigned_to:
                if not session.is_admin and assignee_id != session.user_id:
                    raise PermissionDenied(
                        "non-admin ops users may only assign requests to themselves",
                        user_id=session.user_id,
                    )
                updated = replace(
                    request,
                    status=RequestStatus.UNDER_REVIEW,
                    assigned_to=assignee_id,
                    last_assignee=assignee_id,
                    work_items=self._mirror(request.work_items, RequestStatus.UNDER_REVIEW),
                )
                self._put_request(txn, updated)
                self.outbox.dispatch(
                    EventKind.STATUS_CHANGED,
                    updated.customer_id,
                    request_id=request_id,
                    detail=f"{RequestStatus.SUBMITTED.value} -> {updated.status.value}",
                )
                return updated
            if request.status in (RequestStatus.UNDER_REVIEW, RequestStatus.PENDING):
                if not session.is_admin:
                    raise PermissionDenied(
                        "reassignment is an admin action", user_id=session.user_id
                    )
                updated = replace(request, assigned_to=assignee_id, last_assignee=assignee_id)
                self._put_request(txn, updated)
                return updated
            raise InvalidState(
                f"cannot assign a request in status {request.status.value!r}",
                request_id=request_id,
                status=request.status.value,
            )

    # -- transitions -------------------------------------------------------

    def transition_request(self, session: Session, request_id: int, action: str) -> ChangeRequest:
        """Apply a lifecycle action; on completion the proposed values land."""
        require_unrestricted(session)
        action = str(action).strip().lower()
        with self.store.transaction() as txn:
            request = self._require_request(txn, request_id)
            edge = TRANSITIONS.get((request.status, action))
            if edge is None:
                raise InvalidTransition(
                    f"cannot {action!r} a request in status {request.status.value!r}",
                    request_id=request_id,
                    status=request.status.value,
                    action=action,
                )
            if request.suspended:
                raise InvalidState(
                    f"request {request_id} is suspended; resume it first",
                    request_id=request_id,
                )
            target, rule = edge
            self._check_rule(session, rule, request, action)

            updated = replace(
                request,
                status=target,
                work_items=self._mirror(request.work_items, target),
            )
            if target in TERMINAL_STATUSES:
                updated = replace(
                    updated,
                    assigned_to="",
                    end_date=self.clock().isoformat(timespec="seconds"),
                )
            if target is RequestStatus.COMPLETED:
                self._apply_items(request)
            self._put_request(txn, updated)
            event = (
                EventKind.REQUEST_SUBMITTED
                if target is RequestStatus.SUBMITTED
                else EventKind.STATUS_CHANGED
            )
            self.outbox.dispatch(
                event,
                updated.customer_id,
                request_id=request_id,
                detail=f"{request.status.value} -> {target.value}",
            )
            return updated

    def _check_rule(
        self, session: Session, rule: Rule, request: ChangeRequest, action: str
    ) -> None:
        if rule is Rule.CREATOR:
            allowed = session.user_id == request.created_by
        elif rule is Rule.ADMIN:
            allowed = session.is_admin
        elif rule is Rule.ASSIGNEE:
            allowed = session.is_ops and session.user_id == request.assigned_to
        else:  # ASSIGNEE_OR_ADMIN
            allowed = session.is_admin or (
                session.is_ops and session.user_id == request.assigned_to
            )
        if not allowed:
            raise PermissionDenied(
                f"{action!r} on request {request.request_id} requires {rule.value}",
                user_id=session.user_id,
                action=action,
            )

    @staticmethod
    def _mirror(items: tuple[WorkItem, ...], status: RequestStatus) -> tuple[WorkItem, ...]:
        return tuple(replace(item, item_status=status) for item in items)

    def _apply_items(self, request: ChangeRequest) -> None:
        """Overlay each work item's proposed values onto its target object."""
        for item in request.work_items:
            if not item.object_id or not item.proposed_values:
                continue
            proposed: dict[str, TypedValue | None] = {}
            for column, encoded in item.proposed_values.items():
                proposed[column] = None if encoded is None else TypedValue.decode(encoded)
            self.customers.apply_values(item.object_id, proposed)

    # -- suspension --------------------------------------------------------

    def suspend_request(self, session: Session, request_id: int) -> ChangeRequest:
        require_ops(session)
        if not session.is_admin:
            raise PermissionDenied("suspension is an admin action", user_id=session.user_id)
        with self.store.transaction() as txn:
            request = self._require_request(txn, request_id)
            if request.status in TERMINAL_STATUSES:
                raise InvalidState(
                    f"cannot suspend a request in terminal status {request.status.value!r}",
                    request_id=request_id,
                    status=request.status.value,
                )
            if request.suspended:
                raise InvalidState(
                    f"request {request_id} is already suspended", request_id=request_id
                )
            updated = replace(request, suspended=True)
            self._put_request(txn, updated)
        return updated

    def resume_request(self, session: Session, request_id: int) -> ChangeRequest:
        require_ops(session)
        if not session.is_admin:
            raise PermissionDenied("resumption is an admin action", user_id=session.user_id)
        with self.store.transaction() as txn:
            request = self._require_request(txn, request_id)
            if not request.suspended:
                raise InvalidState(
                    f"request {request_id} is not suspended", request_id=request_id
                )
            updated = replace(request, suspended=False)
            self._put_request(txn, updated)
        return updated

    # -- queue views -------------------------------------------------------

    def list_queue(
        self,
        session: Session,
        status: str | None = None,
        sort: str | None = None,
        record_kind: str | None = None,
        page: int = 1,
        page_size: int | None = None,
    ) -> QueuePage:
        """The ops landing view.

        Default order is strictly descending Request Id; an explicit sort key
        becomes the primary with class of service as secondary tie-break
        (Emergency first) and descending request id last.  A leading ``-`` on
        the sort key flips direction.  Non-admin callers do not see suspended
        requests unless they ask for them.
        """
        require_ops(session)
        wanted_status = RequestStatus.parse(status) if status else None
        wanted_kind = RecordKind.parse(record_kind) if record_kind else None
        descending = False
        sort_key = "request_id"
        explicit_sort = False
        if sort:
            raw = sort.strip()
            if raw.startswith("-"):
                descending = True
                raw = raw[1:]
            key = raw.strip().lower()
            key = _LABEL_TO_KEY.get(key, key)
            if key not in {k for k, _ in QUEUE_COLUMNS}:
                raise UnknownSortKey(f"no queue column {sort!r}", sort=sort)
            sort_key = key
            explicit_sort = True
        else:
            descending = True  # default: descending Request Id

        requests = self._all_requests()
        rows: list[tuple[ChangeRequest, QueueRow]] = []
        names = self._name_cache()
        for request in requests:
            if wanted_status is not None and request.status is not wanted_status:
                continue
            if wanted_kind is RecordKind.NEW and not (
                request.status is RequestStatus.SUBMITTED and not request.assigned_to
            ):
                continue
            if wanted_kind is RecordKind.ASSIGNED and not request.assigned_to:
                continue
            if wanted_kind is RecordKind.SUSPENDED and not request.suspended:
                continue
            if (
                request.suspended
                and not session.is_admin
                and wanted_kind is not RecordKind.SUSPENDED
            ):
                continue
            rows.append((request, self._row(request, names)))

        # Stable multi-pass sort: final tie-break first, primary last.
        rows.sort(key=lambda pair: pair[0].request_id, reverse=True)
        if explicit_sort and sort_key != "request_id":
            rows.sort(key=lambda pair: pair[0].class_of_service.rank)
        rows.sort(key=lambda pair: self._sort_value(pair, sort_key), reverse=descending)

        size = page_size or self.page_size
        if page < 1:
            page = 1
        start = (page - 1) * size
        page_rows = tuple(row for _req, row in rows[start : start + size])
        return QueuePage(rows=page_rows, page=page, page_size=size, total_rows=len(rows))

    @staticmethod
    def _sort_value(pair: tuple[ChangeRequest, QueueRow], key: str):
        request, row = pair
        if key == "request_id":
            return request.request_id
        if key == "class_of_service":
            return request.class_of_service.rank
        if key == "status":
            return _STATUS_RANK[request.status]
        return getattr(row, key)

    def _all_requests(self) -> list[ChangeRequest]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_REQUEST)
        return [ChangeRequest.from_payload(r.payload) for r in records]

    def _name_cache(self) -> dict[str, dict[str, str]]:
        with self.store.transaction() as txn:
            customers = {
                r.entity_id: r.payload["name"] for r in txn.list(KIND_CUSTOMER)
            }
            products = {r.entity_id: r.payload["name"] for r in txn.list(KIND_PRODUCT)}
        return {"customers": customers, "products": products}

    def _row(self, request: ChangeRequest, names: dict[str, dict[str, str]]) -> QueueRow:
        customer_name = names["customers"].get(request.customer_id, "")
        product_name = names["products"].get(request.product_id, request.product_id)
        return QueueRow(
            request_id=request.request_id,
            class_of_service=request.class_of_service.value,
            request_time=request.request_time,
            customer=f"{request.customer_id}-{customer_name}" if customer_name else request.customer_id,
            product=product_name,
            status=request.status.value,
            assigned_to=request.assigned_to,
        )

    # -- detail and reports ------------------------------------------------

    def get_request(self, request_id: int) -> ChangeRequest:
        with self.store.transaction() as txn:
            return self._require_request(txn, request_id)

    def request_detail(self, session: Session, request_id: int) -> dict:
        """Drill-down view: PEP ids, affected policies with their objects."""
        require_ops(session)
        with self.store.transaction() as txn:
            request = self._require_request(txn, request_id)
            pep_ids = sorted(
                r.payload["pep_id"]
                for r in txn.list(KIND_PEP)
                if r.payload["package_id"] == request.package_id
            )
            package = txn.get(KIND_PACKAGE, request.package_id)
            member_objects = (
                set(package.payload["member_object_ids"]) if package else set()
            )
            policies = []
            for record in txn.list(KIND_CUSTOMER_POLICY):
                if record.payload["object_id"] not in member_objects:
                    continue
                policy = txn.get(KIND_POLICY, record.payload["policy_id"])
                obj = txn.get(KIND_OBJECT, record.payload["object_id"])
                policies.append({
                    "customer_policy_id": record.payload["customer_policy_id"],
                    "policy_id": record.payload["policy_id"],
                    "policy_name": policy.payload["name"] if policy else "",
                    "object": self._object_view(obj),
                })
            policies.sort(key=lambda p: p["customer_policy_id"])
        return {
            "request": request.to_payload(),
            "requested_at": request.request_time,
            "pep_ids": pep_ids,
            "policies": policies,
            "work_items": [item.to_payload() for item in request.work_items],
        }

    @staticmethod
    def _object_view(record) -> dict:
        if record is None:
            return {}
        payload = record.payload
        return {
            "object_id": payload["object_id"],
            "schema_id": payload["schema_id"],
            "blank": payload["blank"],
            "values": {
                column: encoded["value"] for column, encoded in payload["values"].items()
            },
        }

    def generate_report(
        self,
        session: Session,
        target: str = "self",
        since: str = "",
        until: str = "",
    ) -> AssignmentReport:
        """Per-assignee status counts and request list over a date range.

        Assignment is sticky for reporting: a request counts toward whoever
        last worked it, even after the terminal transition cleared the live
        assignee field.
        """
        require_ops(session)
        target = (target or "self").strip()
        if target.lower() in ("", "self"):
            user_ids = [session.user_id]
        elif target.lower() == "all":
            if not session.is_admin:
                raise PermissionDenied(
                    "non-admin ops users may only report on themselves",
                    user_id=session.user_id,
                )
            with self.store.transaction() as txn:
                user_ids = sorted(
                    r.entity_id
                    for r in txn.list(KIND_USER)
                    if r.payload["role"] in (role.value for role in OPS_ROLES)
                )
        else:
            if not session.is_admin and target != session.user_id:
                raise PermissionDenied(
                    "non-admin ops users may only report on themselves",
                    user_id=session.user_id,
                )
            account = self.users.find_user(target)
            if account is None or account.role not in OPS_ROLES:
                raise NotAnOpsUser(f"{target!r} is not an ops user", user_id=target)
            user_ids = [target]

        lower = _parse_when(since) if since else None
        upper = _parse_when(until, end=True) if until else None
        names = self._name_cache()
        requests = self._all_requests()

        sections = []
        for user_id in user_ids:
            mine = []
            for request in requests:
                if request.last_assignee != user_id:
                    continue
                moment = datetime.fromisoformat(request.request_time)
                if lower is not None and moment < lower:
                    continue
                if upper is not None and moment > upper:
                    continue
                mine.append(request)
            mine.sort(key=lambda r: r.request_id, reverse=True)
            counts = {status.value: 0 for status in RequestStatus}
            for request in mine:
                counts[request.status.value] += 1
            sections.append(
                ReportSection(
                    user_id=user_id,
                    status_counts=counts,
                    request_ids=tuple(r.request_id for r in mine),
                    rows=tuple(self._row(r, names) for r in mine),
                )
            )
        return AssignmentReport(
            generated_at=self.clock().isoformat(timespec="seconds"),
            since=since,
            until=until,
            sections=tuple(sections),
        )

    @staticmethod
    def report_to_csv(report: AssignmentReport) -> str:
        """Comma-separated tabular export: one row per assigned request."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["Assignee"] + [label for _key, label in QUEUE_COLUMNS])
        for section in report.sections:
            for row in section.rows:
                writer.writerow([
                    section.user_id,
                    row.request_id,
                    row.class_of_service,
                    row.request_time,
                    row.customer,
                    row.product,
                    row.status,
                    row.assigned_to,
                ])
        return buffer.getvalue()

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def _require_request(txn: Transaction, request_id) -> ChangeRequest:
        record = txn.get(KIND_REQUEST, str(request_id))
        if record is None:
            raise UnknownRequest(f"no change request {request_id!r}", request_id=request_id)
        return ChangeRequest.from_payload(record.payload)


def _parse_when(raw: str, end: bool = False) -> datetime:
    """Parse a report boundary; a bare date covers its whole day."""
    try:
        moment = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValidationFailed(f"not a timestamp: {raw!r}", value=raw) from exc
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    if end and len(raw) == 10:
        moment = moment + timedelta(days=1) - timedelta(seconds=1)
    return moment
