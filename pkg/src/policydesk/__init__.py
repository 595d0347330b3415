"""policydesk: multi-tenant change management for security-policy products.

A provider defines products whose policies are backed by typed form
templates; customers subscribe, receive per-policy protocol objects grouped
into packages, and raise change requests that flow through an ops work
queue — submission, assignment, review, approval, and completion, at which
point the proposed values land on the objects.
"""

from .config import ServiceConfig, load_config
from .customers import (
    PEP,
    Customer,
    CustomerMaster,
    CustomerPolicy,
    PepSpec,
    ProtocolObject,
    ProtocolPackage,
    Subscription,
)
from .errors import DomainError
from .fixtures import SeedReport, load_seed
from .notifications import EventKind, Notification, Outbox
from .serialize import canonical_json, export_template, import_template
from .service import Service
from .storage import MemoryStore, SqliteStore, StoredRecord
from .templates import (
    ComponentDef,
    ItemSpec,
    ObjectSchema,
    ProductDef,
    PolicyDef,
    ProtocolTemplate,
    TemplateEngine,
    TemplateItem,
    TemplateKind,
)
from .users import (
    Privilege,
    Profile,
    ProductGrant,
    Role,
    Session,
    UserAccount,
    UserMaster,
    Workspace,
)
from .values import DataType, TypedValue, file_token
from .workqueue import (
    ChangeRequest,
    ClassOfService,
    EditSpec,
    QUEUE_COLUMNS,
    QueuePage,
    QueueRow,
    RecordKind,
    RequestKind,
    RequestStatus,
    Rule,
    TRANSITIONS,
    WorkItem,
    WorkQueue,
    transition_graph,
)

__version__ = "0.9.0"

__all__ = [
    "ChangeRequest",
    "ClassOfService",
    "ComponentDef",
    "Customer",
    "CustomerMaster",
    "CustomerPolicy",
    "DataType",
    "DomainError",
    "EditSpec",
    "EventKind",
    "ItemSpec",
    "MemoryStore",
    "Notification",
    "ObjectSchema",
    "Outbox",
    "PEP",
    "PepSpec",
    "PolicyDef",
    "Privilege",
    "ProductDef",
    "ProductGrant",
    "Profile",
    "ProtocolObject",
    "ProtocolPackage",
    "ProtocolTemplate",
    "QUEUE_COLUMNS",
    "QueuePage",
    "QueueRow",
    "RecordKind",
    "RequestKind",
    "RequestStatus",
    "Role",
    "Rule",
    "SeedReport",
    "Service",
    "ServiceConfig",
    "Session",
    "SqliteStore",
    "StoredRecord",
    "Subscription",
    "TemplateEngine",
    "TemplateItem",
    "TemplateKind",
    "TRANSITIONS",
    "TypedValue",
    "UserAccount",
    "UserMaster",
    "WorkItem",
    "WorkQueue",
    "Workspace",
    "canonical_json",
    "export_template",
    "file_token",
    "import_template",
    "load_config",
    "load_seed",
    "transition_graph",
]
