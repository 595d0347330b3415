"""The assembled service: every module wired over one shared record store.

The facade owns cross-module wiring (grant checks need subscriptions, the
provisioning cascade needs the queue, workspaces need customer and product
names) and adds the ops-role gate in front of template and product
definition — the template engine itself is deliberately session-free.
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Callable

from .config import ServiceConfig
from .customers import CustomerMaster
from .errors import ConfigInvalid
from .notifications import Outbox
from .serialize import export_template, import_template
from .storage import KIND_USER, MemoryStore, SqliteStore
from .templates import ProtocolTemplate, TemplateEngine, TemplateKind
from .users import (
    Profile,
    Role,
    Session,
    UserMaster,
    Workspace,
    require_ops,
)
from .workqueue import WorkQueue

SYSTEM_USER = "system@policydesk.internal"


class Service:
    def __init__(
        self,
        store: MemoryStore | None = None,
        config: ServiceConfig | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.config = config or ServiceConfig()
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.store = store if store is not None else self._open_store(self.config)

        self.engine = TemplateEngine(self.store)
        self.outbox = Outbox(self.store)
        self.users = UserMaster(
            self.store,
            clock=self.clock,
            idle_minutes=self.config.session_idle_minutes,
        )
        self.customers = CustomerMaster(self.store, self.engine, self.outbox)
        self.queue = WorkQueue(
            self.store,
            self.engine,
            self.customers,
            self.users,
            self.outbox,
            clock=self.clock,
            page_size=self.config.queue_page_size,
        )

        # Cross-module providers.
        self.users.subscription_exists = self.customers.subscription_exists
        self.users.all_workspaces = self.customers.all_workspaces
        self.users.customer_workspaces = self._customer_workspaces
        self.customers.create_request = self.queue.create_provisioning_request

    @staticmethod
    def _open_store(config: ServiceConfig) -> MemoryStore:
        if config.storage_path:
            return SqliteStore(config.storage_path)
        return MemoryStore()

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "Service":
        return cls(config=config)

    def close(self) -> None:
        close = getattr(self.store, "close", None)
        if close is not None:
            close()

    # -- bootstrap ---------------------------------------------------------

    def bootstrap_admin(self, email: str, secret: str):
        """Create the first OpsAdmin account; a no-op if it already exists."""
        existing = self.users.find_user(email)
        if existing is not None:
            return existing
        return self.users.create_user(
            self.system_session(),
            email=email,
            role=Role.OPS_ADMIN,
            profile=Profile(name="Bootstrap Administrator"),
            secret=secret,
        )

    def system_session(self) -> Session:
        """Internal ops-admin identity for bootstrap and fixture loading."""
        return Session(token="", user_id=SYSTEM_USER, role=Role.OPS_ADMIN)

    def has_ops_account(self) -> bool:
        with self.store.transaction() as txn:
            for record in txn.list(KIND_USER):
                if Role(record.payload["role"]) is not Role.CUSTOMER:
                    return True
        return False

    def require_loginable(self) -> None:
        if not self.has_ops_account() and not self.config.bootstrap_admin_email:
            raise ConfigInvalid(
                "no ops account exists and no bootstrap admin is configured; "
                "nobody could ever log in"
            )

    # -- sessions ----------------------------------------------------------

    def login(self, email: str, secret: str):
        return self.users.login(email, secret)

    def resolve(self, token: str) -> Session:
        return self.users.resolve_session(token)

    # -- workspace provider ------------------------------------------------

    def _customer_workspaces(self, user_id: str) -> list[Workspace]:
        out = []
        for grant in self.users.grants_for(user_id):
            workspace = self.customers.workspace_for(
                grant.customer_id, grant.product_id, grant.privilege
            )
            if workspace is not None:
                out.append(workspace)
        out.sort(key=lambda w: (w.customer_id, w.product_id))
        return out

    # -- template & product definition (ops-gated) -------------------------

    def template_create(self, actor: Session, kind, name: str, items=()) -> ProtocolTemplate:
        require_ops(actor)
        return self.engine.create_protocol_template(TemplateKind(kind), name, items)

    def template_import(self, actor: Session, document: str) -> ProtocolTemplate:
        require_ops(actor)
        return import_template(self.engine, document)

    def template_export(self, actor: Session, template_id: str) -> str:
        require_ops(actor)
        return export_template(self.engine.get_template(template_id))

    def template_add_item(
        self, actor: Session, template_id: str, item, parent_id: str | None = None
    ) -> ProtocolTemplate:
        require_ops(actor)
        return self.engine.add_template_item(template_id, item, parent_id)

    def template_set_parent(
        self, actor: Session, template_id: str, item_id: str, parent_id: str
    ) -> ProtocolTemplate:
        require_ops(actor)
        return self.engine.set_item_parent(template_id, item_id, parent_id)

    def template_set_enabled(
        self, actor: Session, template_id: str, item_id: str, enabled: bool
    ) -> ProtocolTemplate:
        require_ops(actor)
        return self.engine.set_item_enabled(template_id, item_id, enabled)

    def template_delete(self, actor: Session, template_id: str) -> None:
        require_ops(actor)
        self.engine.delete_template(template_id)

    def product_define(
        self,
        actor: Session,
        name: str,
        component_defs=(),
        policy_names=(),
        pep_template_id: str | None = None,
    ):
        require_ops(actor)
        return self.engine.define_product(name, component_defs, policy_names, pep_template_id)

    def policy_assign_template(self, actor: Session, policy_id: str, template_id: str):
        require_ops(actor)
        return self.engine.assign_policy_template(policy_id, template_id)

    def product_set_pep_template(self, actor: Session, product_id: str, template_id: str):
        require_ops(actor)
        return self.engine.set_product_pep_template(product_id, template_id)
