"""Acceptance gate: one test per agreed criterion, one verdict line each.

Every expectation here is stated independently of the implementation —
hard-coded tables, brute-force shadows, and record counting — so a test only
goes green when the behavior, not the code's own constants, is right.
"""

import random
import threading
from decimal import Decimal

import pytest

from policydesk import (
    MemoryStore,
    Privilege,
    Profile,
    RequestStatus,
    Role,
    Service,
    ServiceConfig,
    file_token,
    transition_graph,
)
from policydesk.errors import (
    InvalidState,
    InvalidTransition,
    PermissionDenied,
    TemplateInUse,
    ValidationFailed,
)
from policydesk.storage import (
    KIND_CUSTOMER_POLICY,
    KIND_NOTIFICATION,
    KIND_OBJECT,
    KIND_PACKAGE,
    KIND_PEP,
    KIND_REQUEST,
    KIND_SUBSCRIPTION,
)

from conftest import (
    ADMIN_EMAIL,
    ADMIN_SECRET,
    ANSWERS,
    CAROL_EMAIL,
    CAROL_SECRET,
    TickingClock,
    build_product,
    build_world,
    file_change_request,
)

CRITERIA = {
    "test_status_closure": "status enum closure and transition reachability",
    "test_permission_matrix": "permission matrix: role x action x state, zero deviations",
    "test_subscription_cascade": "subscription cascade is exact and atomic under faults",
    "test_queue_ordering": "queue ordering, filters, and concurrent id allocation",
    "test_template_rules": "template delete guards, column order, disabled-parent gate",
    "test_apply_on_complete": "apply-on-complete matches the brute-force overlay",
    "test_access_control": "RW/RO gating and verification-answer privacy",
    "test_durability": "restart preserves requests and the id high-water mark",
}


# -- 1. status closure -------------------------------------------------------

def test_status_closure():
    expected = ["Saved", "Submitted", "Cancelled", "Under Review",
                "Rejected", "Pending", "Approved", "Completed"]
    assert [status.value for status in RequestStatus] == expected

    # serialization round-trips every label
    for label in expected:
        assert RequestStatus(label).value == label
        assert RequestStatus.parse(label.lower().replace(" ", "_")) is RequestStatus(label)

    graph = transition_graph()
    reached, frontier = {RequestStatus.SAVED}, [RequestStatus.SAVED]
    while frontier:
        for target in graph[frontier.pop()]:
            if target not in reached:
                reached.add(target)
                frontier.append(target)
    assert reached == set(RequestStatus), "some status is unreachable from Saved"
    for terminal in ("Cancelled", "Rejected", "Completed"):
        assert graph[RequestStatus(terminal)] == set(), f"{terminal} has outgoing edges"


# -- 2. permission matrix ----------------------------------------------------

# The documented rules, spelled out by hand: (status, action) -> allowed actors.
# Any pair absent here must be refused as an invalid transition for everyone.
SPEC_EDGES = {
    ("Saved", "submit"): {"creator"},
    ("Saved", "cancel"): {"creator"},
    ("Submitted", "cancel"): {"creator"},
    ("Submitted", "reject"): {"admin"},
    ("Under Review", "pend"): {"assignee", "admin"},
    ("Under Review", "approve"): {"assignee", "admin"},
    ("Under Review", "reject"): {"assignee", "admin"},
    ("Pending", "review"): {"assignee"},
    ("Approved", "complete"): {"assignee", "admin"},
}
ACTIONS = ("submit", "cancel", "reject", "pend", "approve", "review", "complete")
STATUSES = ("Saved", "Submitted", "Cancelled", "Under Review",
            "Rejected", "Pending", "Approved", "Completed")


def test_permission_matrix(service, admin, ops, ops2, world):
    queue = service.queue

    def drive_to(status):
        draft = file_change_request(service, world, world.carol, draft=True)
        rid = draft.request_id
        if status == "Saved":
            return rid
        queue.transition_request(world.carol, rid, "submit")
        if status == "Submitted":
            return rid
        if status == "Cancelled":
            queue.transition_request(world.carol, rid, "cancel")
            return rid
        queue.assign_request(ops, rid, ops.user_id)
        if status == "Under Review":
            return rid
        if status == "Rejected":
            queue.transition_request(ops, rid, "reject")
            return rid
        if status == "Pending":
            queue.transition_request(ops, rid, "pend")
            return rid
        queue.transition_request(ops, rid, "approve")
        if status == "Approved":
            return rid
        queue.transition_request(ops, rid, "complete")
        return rid

    actors = {"creator": world.carol, "assignee": ops, "other": ops2, "admin": admin}
    deviations = []
    checked = 0

    for status in STATUSES:
        for action in ACTIONS:
            allowed = SPEC_EDGES.get((status, action), set())
            for actor_name, actor_session in actors.items():
                rid = drive_to(status)
                try:
                    queue.transition_request(actor_session, rid, action)
                    observed = "allowed"
                except InvalidTransition:
                    observed = "invalid"
                except PermissionDenied:
                    observed = "denied"
                if (status, action) not in SPEC_EDGES:
                    expected = "invalid"
                elif actor_name in allowed:
                    expected = "allowed"
                else:
                    expected = "denied"
                checked += 1
                if observed != expected:
                    deviations.append((status, action, actor_name, expected, observed))

    assert checked == len(STATUSES) * len(ACTIONS) * len(actors)
    assert deviations == [], f"{len(deviations)} deviations: {deviations[:10]}"

    # assignment rules: non-admin self-assign only; reassignment is admin-only
    rid = drive_to("Submitted")
    with pytest.raises(PermissionDenied):
        queue.assign_request(ops, rid, ops2.user_id)
    queue.assign_request(ops, rid, ops.user_id)
    with pytest.raises(PermissionDenied):
        queue.assign_request(ops2, rid, ops2.user_id)
    queue.assign_request(admin, rid, ops2.user_id)

    # suspension: admin only, never on terminal requests
    with pytest.raises(PermissionDenied):
        queue.suspend_request(ops, rid)
    queue.suspend_request(admin, rid)
    with pytest.raises(InvalidState):
        queue.transition_request(admin, rid, "approve")
    queue.resume_request(admin, rid)
    done = drive_to("Completed")
    with pytest.raises(InvalidState):
        queue.suspend_request(admin, done)

    # reports: non-admin sees itself only
    with pytest.raises(PermissionDenied):
        queue.generate_report(ops, target="all")
    with pytest.raises(PermissionDenied):
        queue.generate_report(ops, target=ops2.user_id)
    assert [s.user_id for s in queue.generate_report(ops).sections] == [ops.user_id]
    assert len(queue.generate_report(admin, target="all").sections) >= 3


# -- 3. subscription cascade -------------------------------------------------

CASCADE_KINDS = (KIND_OBJECT, KIND_CUSTOMER_POLICY, KIND_PACKAGE, KIND_PEP,
                 KIND_REQUEST, KIND_SUBSCRIPTION, KIND_NOTIFICATION)


def counts(store):
    with store.transaction() as txn:
        return {kind: len(txn.list(kind)) for kind in CASCADE_KINDS}


class CommitFails(MemoryStore):
    armed = False

    def _commit(self, state):
        if self.armed:
            self.armed = False
            raise RuntimeError("injected commit fault")
        super()._commit(state)


@pytest.mark.parametrize("policy_count", [1, 2, 5])
def test_subscription_cascade(policy_count, monkeypatch):
    store = CommitFails()
    service = Service(store=store, clock=TickingClock())
    service.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    admin, _ = service.login(ADMIN_EMAIL, ADMIN_SECRET)

    product, *_ = build_product(
        service, admin, policies=[f"Policy {i}" for i in range(policy_count)]
    )
    service.users.create_user(admin, CAROL_EMAIL, Role.CUSTOMER,
                              profile=Profile(name="Carol"), secret="pw")
    customer = service.customers.create_customer(admin, "Acme", contact_user_id=CAROL_EMAIL)
    pep_specs = [{"pep_id": "edge-1", "features": {"Latency Class": "gold"}},
                 {"pep_id": "edge-2"}]

    # fault A: the store dies at commit time -> zero records of any kind
    before = counts(store)
    store.armed = True
    with pytest.raises(RuntimeError):
        service.customers.subscribe_product(
            admin, customer.customer_id, product.product_id, pep_specs
        )
    assert counts(store) == before, "commit fault left partial records"

    # fault B: a domain failure mid-cascade (the PEP notification explodes)
    original = service.outbox.dispatch

    def explode(kind, *args, **kwargs):
        from policydesk.notifications import EventKind
        if kind is EventKind.PEP_ADDED:
            raise RuntimeError("injected dispatch fault")
        return original(kind, *args, **kwargs)

    monkeypatch.setattr(service.outbox, "dispatch", explode)
    with pytest.raises(RuntimeError):
        service.customers.subscribe_product(
            admin, customer.customer_id, product.product_id, pep_specs
        )
    monkeypatch.setattr(service.outbox, "dispatch", original)
    assert counts(store) == before, "mid-cascade fault left partial records"

    # and the healthy run creates exactly the promised shape
    service.customers.subscribe_product(
        admin, customer.customer_id, product.product_id, pep_specs
    )
    after = counts(store)
    blanks = after[KIND_OBJECT] - before[KIND_OBJECT] - 1  # minus edge-1's feature object
    assert blanks == policy_count
    assert after[KIND_PACKAGE] - before[KIND_PACKAGE] == 1
    assert after[KIND_PEP] - before[KIND_PEP] == 2
    assert after[KIND_REQUEST] - before[KIND_REQUEST] == 2
    statuses = [service.queue.get_request(r).status for r in (1, 2)]
    assert statuses == [RequestStatus.SUBMITTED, RequestStatus.SUBMITTED]


# -- 4. queue ordering -------------------------------------------------------

def test_queue_ordering(service, admin, ops, world):
    rng = random.Random(0x5EED)
    queue = service.queue
    classes = ("Standard", "Expedited", "Emergency")

    for _ in range(200):
        request = file_change_request(
            service, world, world.carol,
            cos=rng.choice(classes), draft=rng.random() < 0.15,
        )
        roll = rng.random()
        if request.status is RequestStatus.SUBMITTED:
            if roll < 0.25:
                queue.assign_request(ops, request.request_id, ops.user_id)
                if roll < 0.10:
                    queue.transition_request(ops, request.request_id, "approve")
            elif roll < 0.35:
                queue.transition_request(world.carol, request.request_id, "cancel")

    everything = queue.list_queue(admin, page_size=300)
    ids = [row.request_id for row in everything.rows]
    assert len(ids) == 202  # 200 plus the two provisioning requests
    assert all(a > b for a, b in zip(ids, ids[1:])), "default view not strictly descending"

    for status in RequestStatus:
        filtered = [r.request_id for r in
                    queue.list_queue(admin, status=status.value, page_size=300).rows]
        expected = [rid for rid in ids if queue.get_request(rid).status is status]
        assert filtered == expected, f"{status.value} filter broke relative order"

    # 100 concurrent submissions -> 100 unique, strictly increasing ids
    high_water = max(ids)
    collected = []
    lock = threading.Lock()

    def submit():
        request = file_change_request(service, world, world.carol)
        with lock:
            collected.append(request.request_id)

    threads = [threading.Thread(target=submit) for _ in range(100)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    assert len(set(collected)) == 100, "duplicate request ids under concurrency"
    assert sorted(collected) == list(range(high_water + 1, high_water + 101))


# -- 5. template rules -------------------------------------------------------

def test_template_rules(service, admin):
    from policydesk import TemplateKind

    rng = random.Random(61723)
    engine = service.engine

    # 5a. randomized in-use / unused deletion across several reference graphs
    for round_number in range(3):
        product, protocol, pep_tpl = build_product(
            service, admin, name=f"Graph {round_number}", policies=("P1", "P2")
        )
        spare = service.template_create(
            admin, TemplateKind.PROTOCOL, f"Spare {round_number}",
            items=[{"name": "Only", "data_type": "Text"}],
        )
        subscribed = rng.random() < 0.7
        if subscribed:
            contact = f"user{round_number}@x.example"
            service.users.create_user(admin, contact, Role.CUSTOMER, secret="pw")
            customer = service.customers.create_customer(
                admin, f"Tenant {round_number}", contact_user_id=contact
            )
            service.customers.subscribe_product(
                admin, customer.customer_id, product.product_id, [{"pep_id": "e-1"}]
            )
            with pytest.raises(TemplateInUse):
                service.template_delete(admin, protocol.template_id)
        else:
            service.template_delete(admin, protocol.template_id)  # unused: fine
        service.template_delete(admin, spare.template_id)  # never referenced by data

    # 5b. parent-before-child column order on random engine-built forests
    for round_number in range(3):
        template = service.template_create(
            admin, TemplateKind.PROTOCOL, f"Forest {round_number}"
        )
        parents: dict[str, str | None] = {}
        depth: dict[str, int] = {}
        for index in range(rng.randint(5, 28)):
            name = f"n{index}"
            eligible = [i for i in parents if depth[i] < 5]
            parent = rng.choice(eligible) if eligible and rng.random() < 0.6 else None
            item_name = {"name": name, "data_type": rng.choice(["Text", "Numeric", None])}
            template = service.template_add_item(
                admin, template.template_id, item_name,
                parent_id=template.item_by_name(parent).item_id if parent else None,
            )
            parents[name] = parent
            depth[name] = 0 if parent is None else depth[parent] + 1

        schema = engine.materialize_object_schema(template.template_id)
        position = {column.name: i for i, column in enumerate(schema.columns)}
        assert len(position) == len(parents)
        for name, parent in parents.items():
            while parent is not None:  # scan the full ancestor chain
                assert position[parent] < position[name], f"{parent} after {name}"
                parent = parents[parent]

    # 5c. child edits rejected while the parent is disabled, end to end
    world = build_world(service, admin)
    connectivity = world.protocol.item_by_name("Connectivity")
    service.template_set_enabled(admin, world.protocol.template_id, connectivity.item_id, False)
    with pytest.raises(ValidationFailed) as err:
        file_change_request(service, world, world.carol, values={"Mode": "strict"})
    assert "not enabled" in str(err.value.details["diagnostics"])
    # sibling columns outside the disabled subtree still work
    request = file_change_request(service, world, world.carol, values={"Port Count": "4"})
    assert request.status is RequestStatus.SUBMITTED


# -- 6. apply-on-complete oracle --------------------------------------------

def test_apply_on_complete(service, admin, ops):
    from policydesk import TemplateKind

    rng = random.Random(0xAB12)
    protocol = service.template_create(
        admin, TemplateKind.PROTOCOL, "Wide Form",
        items=[
            {"name": "Alpha", "data_type": "Text"},
            {"name": "Beta", "data_type": "Text"},
            {"name": "Gamma", "data_type": "Numeric"},
            {"name": "Delta", "data_type": "Numeric"},
            {"name": "Blob", "data_type": "File"},
        ],
    )
    pep_tpl = service.template_create(admin, TemplateKind.PEP, "Bare Edge",
                                      items=[{"name": "Tier", "data_type": "Text"}])
    product = service.product_define(admin, "Oracle Product", policy_names=["Only Policy"])
    service.policy_assign_template(admin, product.policy_ids[0], protocol.template_id)
    service.product_set_pep_template(admin, product.product_id, pep_tpl.template_id)

    service.users.create_user(admin, CAROL_EMAIL, Role.CUSTOMER, secret="pw")
    customer = service.customers.create_customer(admin, "Oracle Tenant",
                                                 contact_user_id=CAROL_EMAIL)
    subscription = service.customers.subscribe_product(
        admin, customer.customer_id, product.product_id, [{"pep_id": "e-1"}]
    )
    package_id = subscription.package_ids[0]
    cp_id = subscription.customer_policy_ids[0]
    object_id = service.customers.get_package(package_id).member_object_ids[0]

    columns = {"Alpha": "text", "Beta": "text", "Gamma": "numeric",
               "Delta": "numeric", "Blob": "file"}

    def random_value(kind):
        if kind == "text":
            return rng.choice(["alpha", "beta gamma", "x", "routing-profile-7"])
        if kind == "numeric":
            return rng.choice(["0", "17", "-3", "2.50", "10000.125"])
        return file_token(rng.randbytes(8))

    shadow: dict[str, str] = {}  # the brute-force expectation
    for _ in range(100):
        edit: dict[str, str] = {}
        for name, kind in columns.items():
            roll = rng.random()
            if roll < 0.4:
                continue  # column untouched this round
            if roll < 0.55:
                edit[name] = ""  # explicit clear
            else:
                edit[name] = random_value(kind)
        if not edit:
            edit["Alpha"] = "kept busy"

        request = service.queue.submit_change_request(
            admin, package_id, "Standard",
            [{"target_kind": "customer_policy", "target_id": cp_id, "values": edit}],
        )
        service.queue.assign_request(ops, request.request_id, ops.user_id)
        service.queue.transition_request(ops, request.request_id, "approve")
        service.queue.transition_request(ops, request.request_id, "complete")

        for name, raw in edit.items():  # the overlay, independently
            if raw == "":
                shadow.pop(name, None)
            else:
                shadow[name] = raw

        stored = {k: v.raw for k, v in service.customers.get_object(object_id).values.items()}
        assert set(stored) == set(shadow)
        for name in shadow:
            if columns[name] == "numeric":
                assert Decimal(stored[name]) == Decimal(shadow[name])
            else:
                assert stored[name] == shadow[name]


# -- 7. access control -------------------------------------------------------

def test_access_control(service, admin, ops, world):
    # ReadWrite accepted (the world's carol holds RW)
    accepted = file_change_request(service, world, world.carol)
    assert accepted.status is RequestStatus.SUBMITTED

    # ReadOnly refused
    service.users.create_user(admin, "dan@acme.example", Role.CUSTOMER,
                              profile=Profile(name="Dan"), secret="pw")
    service.users.grant_product_access(
        admin, "dan@acme.example", world.customer.customer_id,
        world.product.product_id, Privilege.READ_ONLY,
    )
    restricted, _ = service.login("dan@acme.example", "pw")
    service.users.set_offline_verification(restricted, ("2021/07", "02139"))
    dan, _ = service.login("dan@acme.example", "pw")
    with pytest.raises(PermissionDenied):
        file_change_request(service, world, dan)

    # verification answers: readable by ops, unreadable by any customer session
    assert service.users.verify_offline(admin, CAROL_EMAIL) == ANSWERS
    assert service.users.verify_offline(ops, CAROL_EMAIL) == ANSWERS
    for customer_session in (world.carol, dan, restricted):
        with pytest.raises(PermissionDenied):
            service.users.verify_offline(customer_session, CAROL_EMAIL)
        with pytest.raises(PermissionDenied):
            service.users.verify_offline(customer_session, "dan@acme.example")


# -- 8. durability -----------------------------------------------------------

def test_durability(tmp_path):
    config = ServiceConfig(storage_path=str(tmp_path / "records.db"))
    service = Service.from_config(config)
    service.bootstrap_admin(ADMIN_EMAIL, ADMIN_SECRET)
    admin, _ = service.login(ADMIN_EMAIL, ADMIN_SECRET)
    world = build_world(service, admin)

    filed = [file_change_request(service, world, world.carol).request_id for _ in range(5)]
    service.queue.assign_request(admin, filed[0], admin.user_id)
    service.queue.transition_request(admin, filed[0], "approve")
    service.queue.transition_request(admin, filed[0], "complete")
    expected = {
        rid: service.queue.get_request(rid).status for rid in filed
    }
    high_water = max(filed)
    service.close()  # the restart

    reopened = Service.from_config(config)
    for rid, status in expected.items():
        survived = reopened.queue.get_request(rid)
        assert survived.status is status, f"request {rid} lost its state"
    carol, _ = reopened.login(CAROL_EMAIL, CAROL_SECRET)
    world.carol = carol
    next_id = file_change_request(reopened, world, carol).request_id
    assert next_id == high_water + 1, "id high-water mark did not survive restart"
    reopened.close()
