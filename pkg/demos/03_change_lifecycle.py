#!/usr/bin/env python3
"""
A change request's life: draft to completed
===========================================

Carol (the customer contact, ReadWrite) files a change against her
package; Omar (ops) claims it from the queue, reviews, approves, and
completes it — at which point the proposed values land on the object.
"""

from policydesk import Privilege, Profile, Role, Service, TemplateKind

service = Service()
service.bootstrap_admin("root@netops.example", "root-secret-1")
admin, _ = service.login("root@netops.example", "root-secret-1")

# -- setup: product, customer, subscription (condensed from demos 01/02) --
protocol = service.template_create(
    admin, TemplateKind.PROTOCOL, "Firewall Baseline",
    items=[{"name": "Mode", "data_type": "Text"},
           {"name": "Port Count", "data_type": "Numeric"}],
)
pep_tpl = service.template_create(
    admin, TemplateKind.PEP, "Edge Device",
    items=[{"name": "Latency Class", "data_type": "Text"}],
)
product = service.product_define(admin, "SecureNet Shield",
                                 policy_names=["Ingress Filtering"])
service.policy_assign_template(admin, product.policy_ids[0], protocol.template_id)
service.product_set_pep_template(admin, product.product_id, pep_tpl.template_id)

service.users.create_user(admin, "omar@netops.example", Role.OPS,
                          profile=Profile(name="Omar Osei"), secret="ops-secret-1")
service.users.create_user(admin, "carol@acme.example", Role.CUSTOMER,
                          profile=Profile(name="Carol Chen"), secret="carol-secret-1")
customer = service.customers.create_customer(admin, "Acme Networks",
                                             contact_user_id="carol@acme.example")
subscription = service.customers.subscribe_product(
    admin, customer.customer_id, product.product_id, [{"pep_id": "edge-sfo-1"}]
)
service.users.grant_product_access(admin, "carol@acme.example", customer.customer_id,
                                   product.product_id, Privilege.READ_WRITE)
restricted, _ = service.login("carol@acme.example", "carol-secret-1")
service.users.set_offline_verification(restricted, ("2019/03", "94105"))
carol, _ = service.login("carol@acme.example", "carol-secret-1")
omar, _ = service.login("omar@netops.example", "ops-secret-1")

package_id = subscription.package_ids[0]
cp = service.customers.customer_policies(customer.customer_id)[0]

# -- carol drafts, reconsiders, submits -----------------------------------
draft = service.queue.submit_change_request(
    carol, package_id, "Expedited",
    [{"target_kind": "customer_policy", "target_id": cp.customer_policy_id,
      "values": {"Mode": "strict", "Port Count": "8"}}],
    draft=True,
)
print(f"request #{draft.request_id} saved as a {draft.status.value} draft")
request = service.queue.transition_request(carol, draft.request_id, "submit")
print(f"request #{request.request_id} is now {request.status.value}")

# -- omar works the queue -------------------------------------------------
page = service.queue.list_queue(omar)
print(f"queue shows {page.total_rows} rows; top is request #{page.rows[0].request_id}")

service.queue.assign_request(omar, request.request_id, "omar@netops.example")
print(f"omar claimed #{request.request_id}; it moved to Under Review")

detail = service.queue.request_detail(omar, request.request_id)
proposed = detail["work_items"][0]["proposed_values"]
for policy in detail["policies"]:
    print(f"  reviewing {policy['policy_name']}: proposed {sorted(proposed)}")

# A question for the customer?  Park it and pick it back up.
service.queue.transition_request(omar, request.request_id, "pend")
service.queue.transition_request(omar, request.request_id, "review")

service.queue.transition_request(omar, request.request_id, "approve")
done = service.queue.transition_request(omar, request.request_id, "complete")
print(f"request #{done.request_id}: {done.status.value},"
      f" assignee cleared ({done.assigned_to!r}), finished {done.end_date}")

obj = service.customers.get_object(cp.object_id)
print("object now carries:", {name: value.raw for name, value in obj.values.items()})

# -- the paper trail ------------------------------------------------------
report = service.queue.generate_report(admin, target="all")
for section in report.sections:
    if section.rows:
        counts = ", ".join(f"{status}: {n}"
                           for status, n in sorted(section.status_counts.items()) if n)
        print(f"assignment report — {section.user_id}: {counts}")

service.close()
