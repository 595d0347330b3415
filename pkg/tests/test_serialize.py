"""Canonical JSON and the template interchange format."""

import json

import pytest
from hypothesis import given, strategies as st

from policydesk import MemoryStore, Service, TemplateKind, canonical_json, export_template, import_template
from policydesk.errors import DuplicateTemplateId, ValidationFailed
from policydesk.serialize import canonical_loads, parse_template_document

from conftest import ADMIN_EMAIL, ADMIN_SECRET, PROTOCOL_ITEMS


def test_canonical_json_is_order_independent_and_compact():
    a = canonical_json({"b": 1, "a": [1, 2], "c": {"y": 0, "x": 1}})
    b = canonical_json({"c": {"x": 1, "y": 0}, "a": [1, 2], "b": 1})
    assert a == b
    assert " " not in a
    assert canonical_json({"name": "Pörtal"}) == '{"name":"Pörtal"}'  # no ascii escaping


json_scalars = st.one_of(st.none(), st.booleans(), st.integers(), st.text(max_size=20))
json_data = st.recursive(
    json_scalars,
    lambda inner: st.one_of(
        st.lists(inner, max_size=4),
        st.dictionaries(st.text(max_size=8), inner, max_size=4),
    ),
    max_leaves=15,
)


@given(json_data)
def test_canonical_round_trip(data):
    assert canonical_loads(canonical_json(data)) == data
    # canonical form is a fixed point
    assert canonical_json(canonical_loads(canonical_json(data))) == canonical_json(data)


def test_canonical_loads_rejects_garbage():
    with pytest.raises(ValidationFailed):
        canonical_loads("{nope")


def test_template_document_round_trip(service, admin):
    template = service.template_create(
        admin, TemplateKind.PROTOCOL, "Transportable", items=PROTOCOL_ITEMS
    )
    document = service.template_export(admin, template.template_id)
    parsed = parse_template_document(document)
    assert parsed == template

    # a second deployment imports it with ids and version intact
    other = Service(store=MemoryStore())
    other.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    other_admin, _ = other.login(ADMIN_EMAIL, ADMIN_SECRET)
    imported = other.template_import(other_admin, document)
    assert imported.template_id == template.template_id
    assert imported.items == template.items
    # counters moved past the imported ids: the next template id is fresh
    fresh = other.template_create(other_admin, TemplateKind.PROTOCOL, "Next")
    assert fresh.template_id != template.template_id


def test_import_refuses_duplicates_and_malformed_documents(service, admin):
    template = service.template_create(admin, TemplateKind.PROTOCOL, "Here", items=PROTOCOL_ITEMS)
    document = service.template_export(admin, template.template_id)
    with pytest.raises(DuplicateTemplateId):
        service.template_import(admin, document)
    with pytest.raises(ValidationFailed):
        import_template(service.engine, canonical_json({"format": "something-else/9"}))
    with pytest.raises(ValidationFailed):
        import_template(service.engine, json.dumps({"format": "protocol-template/1"}))


def test_export_is_stable_across_calls(service, admin):
    template = service.template_create(admin, TemplateKind.PROTOCOL, "Stable", items=PROTOCOL_ITEMS)
    assert export_template(template) == export_template(template)
