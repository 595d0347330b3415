"""Shared fixtures: a service on a fresh in-memory store plus a small world.

The ``world`` fixture builds the smallest interesting tenant: one protocol
template, one PEP template, a product with two policies, a customer with a
verified ReadWrite contact user, and one subscription (which itself files the
two provisioning requests).  Tests that need a different shape build their own
via the helpers here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from types import SimpleNamespace

import pytest

from policydesk import (
    MemoryStore,
    Profile,
    Role,
    Privilege,
    Service,
    ServiceConfig,
    TemplateKind,
)

ADMIN_EMAIL = "root@netops.example"
ADMIN_SECRET = "root-secret-1"
OPS1_EMAIL = "omar@netops.example"
OPS2_EMAIL = "nina@netops.example"
OPS_SECRET = "ops-secret-1"
CAROL_EMAIL = "carol@acme.example"
CAROL_SECRET = "carol-secret-1"
ANSWERS = ("2019/03", "94105")


class TickingClock:
    """Deterministic clock; every reading advances one second."""

    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2026, 8, 22, 9, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        self.now += timedelta(seconds=1)
        return self.now

    def advance(self, **kwargs) -> None:
        self.now += timedelta(**kwargs)


@pytest.fixture
def clock():
    return TickingClock()


@pytest.fixture
def service(clock):
    svc = Service(store=MemoryStore(), clock=clock)
    svc.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    yield svc
    svc.close()


@pytest.fixture
def admin(service):
    session, _ = service.login(ADMIN_EMAIL, ADMIN_SECRET)
    return session


@pytest.fixture
def ops(service, admin):
    service.users.create_user(
        admin, OPS1_EMAIL, Role.OPS, profile=Profile(name="Omar Osei"), secret=OPS_SECRET
    )
    session, _ = service.login(OPS1_EMAIL, OPS_SECRET)
    return session


@pytest.fixture
def ops2(service, admin):
    service.users.create_user(
        admin, OPS2_EMAIL, Role.OPS, profile=Profile(name="Nina Petrova"), secret=OPS_SECRET
    )
    session, _ = service.login(OPS2_EMAIL, OPS_SECRET)
    return session


PROTOCOL_ITEMS = (
    {"name": "Connectivity", "data_type": "Text"},
    {"name": "Mode", "data_type": "Text", "parent": "Connectivity"},
    {"name": "Port Count", "data_type": "Numeric"},
    {"name": "Config Blob", "data_type": "File"},
)

PEP_ITEMS = (
    {"name": "Latency Class", "data_type": "Text"},
    {"name": "Throughput", "data_type": "Numeric"},
)


def build_product(service, actor, *, name="SecureNet Shield", policies=("Ingress Filtering", "Egress Filtering")):
    """Template + product + policy wiring; returns (product, protocol_tpl, pep_tpl)."""
    protocol = service.template_create(actor, TemplateKind.PROTOCOL, f"{name} Baseline", items=PROTOCOL_ITEMS)
    pep_tpl = service.template_create(actor, TemplateKind.PEP, f"{name} Edge Device", items=PEP_ITEMS)
    product = service.product_define(actor, name, policy_names=list(policies))
    for policy_id in product.policy_ids:
        service.policy_assign_template(actor, policy_id, protocol.template_id)
    product = service.product_set_pep_template(actor, product.product_id, pep_tpl.template_id)
    return product, protocol, pep_tpl


def build_world(service, admin, *, subscribe=True):
    """One customer on one product, contact user verified and granted RW."""
    product, protocol, pep_tpl = build_product(service, admin)
    service.users.create_user(
        admin, CAROL_EMAIL, Role.CUSTOMER, profile=Profile(name="Carol Chen"), secret=CAROL_SECRET
    )
    customer = service.customers.create_customer(admin, "Acme Networks", contact_user_id=CAROL_EMAIL)

    subscription = None
    package_id = ""
    cp_ids = []
    if subscribe:
        subscription = service.customers.subscribe_product(
            admin,
            customer.customer_id,
            product.product_id,
            [{"pep_id": "edge-sfo-1", "features": {"Latency Class": "gold", "Throughput": "40"}}],
        )
        package_id = subscription.package_ids[0]
        cp_ids = [cp.customer_policy_id for cp in service.customers.customer_policies(customer.customer_id)]
        service.users.grant_product_access(
            admin, CAROL_EMAIL, customer.customer_id, product.product_id, Privilege.READ_WRITE
        )

    # First login is restricted until the off-line verification answers are set.
    restricted, _ = service.login(CAROL_EMAIL, CAROL_SECRET)
    service.users.set_offline_verification(restricted, ANSWERS)
    carol, _ = service.login(CAROL_EMAIL, CAROL_SECRET)

    return SimpleNamespace(
        product=product,
        protocol=protocol,
        pep_template=pep_tpl,
        customer=customer,
        subscription=subscription,
        package_id=package_id,
        cp_ids=cp_ids,
        carol=carol,
    )


@pytest.fixture
def world(service, admin):
    return build_world(service, admin)


def file_change_request(service, world, session, *, values=None, draft=False, cos="Standard"):
    edits = [
        {
            "target_kind": "customer_policy",
            "target_id": world.cp_ids[0],
            "values": values if values is not None else {"Mode": "strict"},
        }
    ]
    return service.queue.submit_change_request(session, world.package_id, cos, edits, draft=draft)


@pytest.fixture
def api_client(service):
    from fastapi.testclient import TestClient

    from policydesk.api import create_app

    with TestClient(create_app(service)) as client:
        yield client


# -- acceptance reporting ---------------------------------------------------
#
# test_acceptance.py registers one entry per criterion; this hook turns the
# pytest outcomes into the one-line-per-criterion verdict the suite promises.

def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    criteria = getattr(module, "CRITERIA", {})
    if not criteria:
        return

    outcomes = {}
    for verdict in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(verdict, ()):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.rsplit("::", 1)[-1].split("[", 1)[0]
            if outcomes.get(name) != "FAIL":  # any failed variant fails the criterion
                outcomes[name] = "PASS" if verdict == "passed" else "FAIL"

    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for test_name, label in criteria.items():
        verdict = outcomes.get(test_name, "NOT RUN")
        terminalreporter.write_line(f"[{verdict}] {label}")
