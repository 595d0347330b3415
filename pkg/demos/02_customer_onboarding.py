#!/usr/bin/env python3
"""
Customer onboarding: one subscription, a whole cascade
======================================================

Subscribing a customer to a product creates everything the customer needs
in a single transaction: a blank protocol object per policy, the wrapping
customer-policy rows, a package, the enforcement points, and the two
provisioning requests the ops queue starts from.  If any part fails,
nothing at all is written.
"""

from policydesk import Privilege, Profile, Role, Service
from policydesk.errors import UnknownRecipient
from policydesk.storage import (
    KIND_CUSTOMER_POLICY,
    KIND_OBJECT,
    KIND_PACKAGE,
    KIND_PEP,
    KIND_REQUEST,
)

WATCHED = {
    KIND_OBJECT: "protocol objects",
    KIND_CUSTOMER_POLICY: "customer policies",
    KIND_PACKAGE: "packages",
    KIND_PEP: "enforcement points",
    KIND_REQUEST: "requests",
}


def record_counts(service):
    with service.store.transaction() as txn:
        return {kind: len(txn.list(kind)) for kind in WATCHED}


service = Service()
service.bootstrap_admin("root@netops.example", "root-secret-1")
admin, _ = service.login("root@netops.example", "root-secret-1")

# Product setup (see demo 01 for the long version).
from policydesk import TemplateKind  # noqa: E402

protocol = service.template_create(
    admin, TemplateKind.PROTOCOL, "Firewall Baseline",
    items=[{"name": "Mode", "data_type": "Text"},
           {"name": "Port Count", "data_type": "Numeric"}],
)
pep_tpl = service.template_create(
    admin, TemplateKind.PEP, "Edge Device",
    items=[{"name": "Latency Class", "data_type": "Text"}],
)
product = service.product_define(
    admin, "SecureNet Shield",
    policy_names=["Ingress Filtering", "Egress Filtering", "Audit Logging"],
)
for policy_id in product.policy_ids:
    service.policy_assign_template(admin, policy_id, protocol.template_id)
product = service.product_set_pep_template(admin, product.product_id, pep_tpl.template_id)

service.users.create_user(
    admin, "carol@acme.example", Role.CUSTOMER,
    profile=Profile(name="Carol Chen"), secret="carol-secret-1",
)
customer = service.customers.create_customer(
    admin, "Acme Networks", contact_user_id="carol@acme.example"
)

before = record_counts(service)
subscription = service.customers.subscribe_product(
    admin,
    customer.customer_id,
    product.product_id,
    [
        {"pep_id": "edge-sfo-1", "features": {"Latency Class": "gold"}},
        {"pep_id": "edge-nyc-1"},
    ],
)
after = record_counts(service)

print(f"subscribed {customer.name} to {product.name}; the cascade wrote:")
for kind, label in WATCHED.items():
    print(f"  {after[kind] - before[kind]:2d} {label}")

print("provisioning requests start out Submitted:")
for request_id in (1, 2):
    request = service.queue.get_request(request_id)
    print(f"  #{request.request_id} {request.kind.value}: {request.status.value}")

print("the contact user was notified:")
for note in service.outbox.entries():
    print(f"  -> {note.recipient_email}: {note.subject}")

# The same cascade against a customer with no reachable contact aborts
# whole: the failed attempt leaves not a single record behind.
orphan = service.customers.create_customer(admin, "Shellco", contact_user_id="")
before = record_counts(service)
try:
    service.customers.subscribe_product(
        admin, orphan.customer_id, product.product_id, [{"pep_id": "edge-ber-1"}]
    )
except UnknownRecipient as exc:
    print(f"contactless customer refused: {exc}")
assert record_counts(service) == before
print("...and the store is exactly as it was before the attempt.")

# Finally, the contact gets read access so she can see her workspace.
service.users.grant_product_access(
    admin, "carol@acme.example", customer.customer_id,
    product.product_id, Privilege.READ_WRITE,
)
restricted, _ = service.login("carol@acme.example", "carol-secret-1")
service.users.set_offline_verification(restricted, ("2019/03", "94105"))
carol, _ = service.login("carol@acme.example", "carol-secret-1")
for workspace in service.users.workspaces_for(carol):
    print(f"carol sees: {workspace.customer_name} / {workspace.product_name}"
          f" ({workspace.privilege.value})")

service.close()
