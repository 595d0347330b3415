"""The seed-data loader builds a working environment from one document."""

import json

import pytest

from policydesk import Privilege, RequestStatus, load_seed
from policydesk.errors import ValidationFailed

SEED = {
    "format": "policydesk-seed/1",
    "users": [
        {"email": "omar@netops.example", "role": "Ops", "secret": "pw-omar", "name": "Omar Osei"},
        {"email": "carol@acme.example", "role": "Customer", "secret": "pw-carol", "name": "Carol Chen"},
    ],
    "templates": [
        {
            "kind": "Protocol",
            "name": "Firewall Baseline",
            "items": [
                {"name": "Connectivity", "data_type": "Text"},
                {"name": "Mode", "parent": "Connectivity"},
            ],
        },
        {
            "kind": "PEP",
            "name": "Edge Device",
            "items": [{"name": "Latency Class", "data_type": "Text"}],
        },
    ],
    "products": [
        {
            "name": "SecureNet Shield",
            "policies": [
                {"name": "Ingress Filtering", "template": "Firewall Baseline"},
                {"name": "Egress Filtering", "template": "Firewall Baseline"},
            ],
            "pep_template": "Edge Device",
        }
    ],
    "customers": [
        {
            "name": "Acme Networks",
            "contact": "carol@acme.example",
            "subscriptions": [
                {
                    "product": "SecureNet Shield",
                    "peps": [{"pep_id": "edge-sfo-1", "features": {"Latency Class": "gold"}}],
                }
            ],
            "grants": [
                {"user": "carol@acme.example", "product": "SecureNet Shield",
                 "privilege": "ReadWrite"}
            ],
        }
    ],
}


def test_seed_builds_the_whole_environment(service, admin):
    report = load_seed(service, admin, SEED)

    assert report.users == ["omar@netops.example", "carol@acme.example"]
    assert set(report.templates) == {"Firewall Baseline", "Edge Device"}
    assert set(report.products) == {"SecureNet Shield"}
    assert set(report.customers) == {"Acme Networks"}

    customer_id = report.customers["Acme Networks"]
    subs = service.customers.list_subscriptions(customer_id)
    assert len(subs) == 1
    assert len(subs[0].customer_policy_ids) == 2
    assert [p.pep_id for p in service.customers.list_peps(customer_id)] == ["edge-sfo-1"]

    privilege = service.users.effective_privilege(
        "carol@acme.example", customer_id, report.products["SecureNet Shield"]
    )
    assert privilege is Privilege.READ_WRITE

    # the cascade filed its two provisioning requests
    queue = service.queue.list_queue(admin, page_size=10)
    assert queue.total_rows == 2
    assert all(row.status == RequestStatus.SUBMITTED.value for row in queue.rows)

    # seeded people can actually log in
    session, _ = service.login("omar@netops.example", "pw-omar")
    assert session.is_ops


def test_seed_accepts_json_text_and_files(service, admin, tmp_path):
    load_seed(service, admin, json.dumps(SEED))

    fresh = tmp_path / "seed.json"
    trimmed = dict(SEED, customers=[], products=[], templates=[], users=[])
    fresh.write_text(json.dumps(trimmed))
    report = load_seed(service, admin, fresh)
    assert report.users == []


@pytest.mark.parametrize(
    "mutation, message_bit",
    [
        ({"format": "other/1"}, "format"),
        ({"products": [{"name": "P", "policies": [], "pep_template": "Nope"}]}, "unknown template"),
        (
            {
                "customers": [
                    {"name": "C", "subscriptions": [{"product": "Ghost", "peps": []}]}
                ]
            },
            "unknown product",
        ),
    ],
)
def test_seed_name_resolution_failures(service, admin, mutation, message_bit):
    document = {**SEED, "users": [], "templates": [], "products": [], "customers": []}
    document.update(mutation)
    with pytest.raises(ValidationFailed) as err:
        load_seed(service, admin, document)
    assert message_bit.split()[0] in str(err.value).lower()


def test_seed_garbage_is_rejected(service, admin):
    with pytest.raises(ValidationFailed):
        load_seed(service, admin, "{not json")
    with pytest.raises(ValidationFailed):
        load_seed(service, admin, 42)
