#!/usr/bin/env python3
"""
Defining protocol templates and products
========================================

An ops admin builds a nested form template, wires it to a product's
policies, and round-trips the definition through the interchange format.
"""

from policydesk import Service, TemplateKind, export_template

service = Service()
service.bootstrap_admin("root@netops.example", "root-secret-1")
admin, _ = service.login("root@netops.example", "root-secret-1")

# A template is a forest of typed items; children can inherit the parent's
# data type instead of naming their own.
template = service.template_create(
    admin,
    TemplateKind.PROTOCOL,
    "Perimeter Firewall Baseline",
    items=[
        {"name": "Connectivity", "data_type": "Text"},
        {"name": "Mode", "parent": "Connectivity", "inherit_attributes": True},
        {"name": "Failover Peer", "parent": "Connectivity", "data_type": "Text"},
        {"name": "Port Count", "data_type": "Numeric"},
        {"name": "Config Blob", "data_type": "File"},
    ],
)
print(f"created {template.template_id} v{template.version}: {template.name}")

schema = service.engine.materialize_object_schema(template.template_id)
print(f"schema {schema.schema_id} — parents always come before their children:")
for column in schema.columns:
    indent = "    " if column.parent_name else "  "
    print(f"{indent}{column.name} ({column.data_type.value})")

# Disabling an item takes it out of service for every descendant...
connectivity = template.item_by_name("Connectivity")
service.template_set_enabled(admin, template.template_id, connectivity.item_id, False)
resolved = service.engine.resolve_schema_items(service.engine.get_schema(schema.schema_id))
print("with Connectivity disabled, writable columns are:",
      sorted(n for n, item in resolved.items() if item.ancestors_enabled))

# ...and re-enabling restores them; stored objects never change shape.
service.template_set_enabled(admin, template.template_id, connectivity.item_id, True)

pep_template = service.template_create(
    admin,
    TemplateKind.PEP,
    "Edge Enforcement Device",
    items=[{"name": "Latency Class", "data_type": "Text"},
           {"name": "Throughput", "data_type": "Numeric"}],
)

# A product bundles named policies; each policy points at the template
# whose schema its per-customer objects will follow.
product = service.product_define(
    admin,
    "SecureNet Shield",
    policy_names=["Ingress Filtering", "Egress Filtering"],
)
for policy_id in product.policy_ids:
    service.policy_assign_template(admin, policy_id, template.template_id)
product = service.product_set_pep_template(admin, product.product_id, pep_template.template_id)
print(f"product {product.product_id} ({product.name}) with {len(product.policy_ids)} policies")

# The whole template travels as one JSON document and re-imports elsewhere
# under its original ids.
document = export_template(service.engine.get_template(template.template_id))
print(f"export is {len(document)} bytes of canonical JSON")

other = Service()
other.bootstrap_admin("root@netops.example", "root-secret-1")
other_admin, _ = other.login("root@netops.example", "root-secret-1")
copied = other.template_import(other_admin, document)
print(f"re-imported as {copied.template_id} ({copied.name}) — same id, fresh service")

service.close()
other.close()
