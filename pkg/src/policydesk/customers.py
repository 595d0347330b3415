"""Customer provisioning: subscriptions, policy instances, packages and PEPs.

Subscribing a customer to a product fans out into a whole constellation of
records — per-policy blank objects, customer-policy links, an initial package,
the PEPs named in the order, and the two change requests that put all of it in
front of the operations queue.  The entire fan-out happens inside one storage
transaction so a failure at any point (including an unresolvable notification
contact) leaves nothing behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import (
    AlreadySubscribed,
    DuplicateCustomerName,
    DuplicatePEPId,
    NoPEPProvided,
    UnknownEntity,
    UnknownPackage,
    UnknownProduct,
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
    KIND_SUBSCRIPTION,
    MemoryStore,
    StoredRecord,
    Transaction,
)
from .templates import ObjectSchema, TemplateEngine
from .users import Privilege, Session, Workspace, require_ops
from .values import TypedValue, decode_values, encode_values

NEW_PACKAGE = "NewPackage"


@dataclass(frozen=True)
class Customer:
    customer_id: str
    name: str
    contact_user_id: str = ""


@dataclass(frozen=True)
class PepSpec:
    """What the caller wants a PEP to look like: an id plus feature values."""

    pep_id: str
    features: dict[str, str] = field(default_factory=dict)

    @classmethod
    def coerce(cls, raw: "PepSpec | dict") -> "PepSpec":
        if isinstance(raw, PepSpec):
            return raw
        return cls(pep_id=str(raw.get("pep_id", "")), features=dict(raw.get("features", {})))


@dataclass(frozen=True)
class ProtocolObject:
    object_id: str
    schema_id: str
    customer_id: str
    values: dict[str, TypedValue]
    blank: bool


@dataclass(frozen=True)
class CustomerPolicy:
    customer_policy_id: str
    customer_id: str
    subscription_id: str
    policy_id: str
    object_id: str


@dataclass(frozen=True)
class ProtocolPackage:
    package_id: str
    customer_id: str
    subscription_id: str
    product_id: str
    member_object_ids: tuple[str, ...]


@dataclass(frozen=True)
class PEP:
    pep_id: str
    customer_id: str
    subscription_id: str
    product_id: str
    package_id: str
    object_id: str = ""

    @property
    def entity_id(self) -> str:
        return pep_key(self.customer_id, self.pep_id)


@dataclass(frozen=True)
class Subscription:
    subscription_id: str
    customer_id: str
    product_id: str
    customer_policy_ids: tuple[str, ...]
    package_ids: tuple[str, ...]
    pep_ids: tuple[str, ...]


def pep_key(customer_id: str, pep_id: str) -> str:
    """PEP identifiers are unique per customer, so records key on both."""
    return f"{customer_id}:{pep_id}"


class CustomerMaster:
    def __init__(self, store: MemoryStore, engine: TemplateEngine, outbox: Outbox):
        self.store = store
        self.engine = engine
        self.outbox = outbox
        # Wired by the service facade; creates the provisioning change requests
        # that accompany a subscription or a PEP addition.
        self.create_request: Callable[..., int] | None = None

    # -- customers ---------------------------------------------------------

    def create_customer(self, actor: Session, name: str, contact_user_id: str = "") -> Customer:
        require_ops(actor)
        name = name.strip()
        if not name:
            raise ValidationFailed("customer name must not be empty")
        with self.store.transaction() as txn:
            for record in txn.list(KIND_CUSTOMER):
                if record.payload["name"] == name:
                    raise DuplicateCustomerName(f"customer named {name!r} already exists")
            customer_id = f"CUS-{txn.next_value('customer')}"
            customer = Customer(customer_id, name, contact_user_id)
            txn.put(KIND_CUSTOMER, customer_id, {
                "customer_id": customer_id,
                "name": name,
                "contact_user_id": contact_user_id,
            })
        return customer

    def set_contact(self, actor: Session, customer_id: str, contact_user_id: str) -> Customer:
        require_ops(actor)
        with self.store.transaction() as txn:
            record = self._require_customer(txn, customer_id)
            payload = dict(record.payload)
            payload["contact_user_id"] = contact_user_id
            txn.put(KIND_CUSTOMER, customer_id, payload)
        return Customer(customer_id, payload["name"], contact_user_id)

    def get_customer(self, customer_id: str) -> Customer:
        with self.store.transaction() as txn:
            record = self._require_customer(txn, customer_id)
        return self._customer(record)

    def find_customer(self, name: str) -> Customer | None:
        with self.store.transaction() as txn:
            for record in txn.list(KIND_CUSTOMER):
                if record.payload["name"] == name:
                    return self._customer(record)
        return None

    def list_customers(self) -> list[Customer]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_CUSTOMER)
        out = [self._customer(r) for r in records]
        out.sort(key=lambda c: c.customer_id)
        return out

    @staticmethod
    def _customer(record: StoredRecord) -> Customer:
        p = record.payload
        return Customer(p["customer_id"], p["name"], p.get("contact_user_id", ""))

    @staticmethod
    def _require_customer(txn: Transaction, customer_id: str) -> StoredRecord:
        record = txn.get(KIND_CUSTOMER, customer_id)
        if record is None:
            raise UnknownEntity(f"no customer {customer_id!r}", kind="customer", entity_id=customer_id)
        return record

    # -- subscription cascade ----------------------------------------------

    def subscribe_product(
        self,
        actor: Session,
        customer_id: str,
        product_id: str,
        pep_specs: list[PepSpec | dict],
    ) -> Subscription:
        """Subscribe a customer to a product.

        Creates, atomically: one blank object + customer-policy link per
        product policy, one package holding those objects, the requested PEPs
        (each with a feature object when features were supplied), and two
        Submitted change requests — one for the PEPs, one for the package.
        """
        require_ops(actor)
        specs = [PepSpec.coerce(s) for s in pep_specs]
        if not specs:
            raise NoPEPProvided("a subscription order must name at least one PEP")
        seen: set[str] = set()
        for spec in specs:
            if not spec.pep_id.strip():
                raise ValidationFailed("PEP id must not be empty")
            if spec.pep_id in seen:
                raise DuplicatePEPId(f"PEP {spec.pep_id!r} appears twice in the order")
            seen.add(spec.pep_id)

        if self.create_request is None:  # pragma: no cover - wiring error
            raise RuntimeError("CustomerMaster.create_request is not wired")

        with self.store.transaction() as txn:
            self._require_customer(txn, customer_id)
            product = txn.get(KIND_PRODUCT, product_id)
            if product is None:
                raise UnknownProduct(f"no product {product_id!r}", product_id=product_id)
            for record in txn.list(KIND_SUBSCRIPTION):
                p = record.payload
                if p["customer_id"] == customer_id and p["product_id"] == product_id:
                    raise AlreadySubscribed(
                        f"{customer_id} already subscribes to {product_id}",
                        customer_id=customer_id,
                        product_id=product_id,
                    )
            policy_ids = list(product.payload["policy_ids"])
            if not policy_ids:
                raise ValidationFailed(f"product {product_id!r} has no policies; not subscribable")
            for pep_id in sorted(seen):
                if txn.exists(KIND_PEP, pep_key(customer_id, pep_id)):
                    raise DuplicatePEPId(
                        f"customer {customer_id} already has PEP {pep_id!r}", pep_id=pep_id
                    )

            subscription_id = f"SUB-{txn.next_value('subscription')}"
            txn.put(
                KIND_SUBSCRIPTION,
                subscription_id,
                {
                    "subscription_id": subscription_id,
                    "customer_id": customer_id,
                    "product_id": product_id,
                    "customer_policy_ids": [],
                    "package_ids": [],
                    "pep_ids": [],
                },
                parent_refs=((KIND_CUSTOMER, customer_id), (KIND_PRODUCT, product_id)),
            )

            cp_ids: list[str] = []
            object_ids: list[str] = []
            for policy_id in policy_ids:
                policy = txn.require(KIND_POLICY, policy_id)
                template_id = policy.payload.get("template_id") or ""
                if not template_id:
                    raise ValidationFailed(
                        f"policy {policy_id} of {product_id} has no protocol template; "
                        "product is not subscribable"
                    )
                schema = self.engine.materialize_object_schema(template_id)
                object_id = self._create_blank_object(txn, schema, customer_id)
                object_ids.append(object_id)
                cp_id = f"CPL-{txn.next_value('customer_policy')}"
                cp_ids.append(cp_id)
                txn.put(
                    KIND_CUSTOMER_POLICY,
                    cp_id,
                    {
                        "customer_policy_id": cp_id,
                        "customer_id": customer_id,
                        "subscription_id": subscription_id,
                        "policy_id": policy_id,
                        "object_id": object_id,
                    },
                    parent_refs=(
                        (KIND_SUBSCRIPTION, subscription_id),
                        (KIND_POLICY, policy_id),
                        (KIND_OBJECT, object_id),
                    ),
                )

            package_id = f"PKG-{txn.next_value('package')}"
            txn.put(
                KIND_PACKAGE,
                package_id,
                {
                    "package_id": package_id,
                    "customer_id": customer_id,
                    "subscription_id": subscription_id,
                    "product_id": product_id,
                    "member_object_ids": list(object_ids),
                },
                parent_refs=tuple(
                    [(KIND_SUBSCRIPTION, subscription_id)]
                    + [(KIND_OBJECT, oid) for oid in object_ids]
                ),
            )

            pep_entity_ids: list[str] = []
            for spec in specs:
                pep = self._create_pep(
                    txn, customer_id, subscription_id, product_id, package_id, spec
                )
                pep_entity_ids.append(pep.entity_id)

            txn.put(
                KIND_SUBSCRIPTION,
                subscription_id,
                {
                    "subscription_id": subscription_id,
                    "customer_id": customer_id,
                    "product_id": product_id,
                    "customer_policy_ids": cp_ids,
                    "package_ids": [package_id],
                    "pep_ids": [s.pep_id for s in specs],
                },
                parent_refs=((KIND_CUSTOMER, customer_id), (KIND_PRODUCT, product_id)),
            )

            self.create_request(
                actor,
                kind="PEPRequest",
                customer_id=customer_id,
                product_id=product_id,
                package_id=package_id,
                target_refs=[(KIND_PEP, eid) for eid in pep_entity_ids],
            )
            self.create_request(
                actor,
                kind="PackageRequest",
                customer_id=customer_id,
                product_id=product_id,
                package_id=package_id,
                target_refs=[(KIND_CUSTOMER_POLICY, cid) for cid in cp_ids],
            )

            for spec in specs:
                self.outbox.dispatch(
                    EventKind.PEP_ADDED, customer_id, detail=spec.pep_id
                )

            return Subscription(
                subscription_id,
                customer_id,
                product_id,
                tuple(cp_ids),
                (package_id,),
                tuple(s.pep_id for s in specs),
            )

    def _create_blank_object(self, txn: Transaction, schema: ObjectSchema, customer_id: str) -> str:
        object_id = f"OBJ-{txn.next_value('object')}"
        txn.put(
            KIND_OBJECT,
            object_id,
            {
                "object_id": object_id,
                "schema_id": schema.schema_id,
                "customer_id": customer_id,
                "values": {},
                "blank": True,
            },
            parent_refs=(("schema", schema.schema_id),),
        )
        return object_id

    def _create_pep(
        self,
        txn: Transaction,
        customer_id: str,
        subscription_id: str,
        product_id: str,
        package_id: str,
        spec: PepSpec,
    ) -> PEP:
        entity_id = pep_key(customer_id, spec.pep_id)
        if txn.exists(KIND_PEP, entity_id):
            raise DuplicatePEPId(
                f"customer {customer_id} already has PEP {spec.pep_id!r}", pep_id=spec.pep_id
            )
        product = txn.require(KIND_PRODUCT, product_id)
        pep_template_id = product.payload.get("pep_template_id") or ""
        object_id = ""
        if spec.features:
            if not pep_template_id:
                raise ValidationFailed(
                    f"product {product_id} has no PEP template; features cannot be recorded"
                )
            schema = self.engine.materialize_object_schema(pep_template_id)
            values: dict[str, TypedValue] = {}
            for column, raw in spec.features.items():
                value = self.engine.validate_value(schema, column, raw)
                if value is not None:
                    values[column] = value
            object_id = f"OBJ-{txn.next_value('object')}"
            txn.put(
                KIND_OBJECT,
                object_id,
                {
                    "object_id": object_id,
                    "schema_id": schema.schema_id,
                    "customer_id": customer_id,
                    "values": encode_values(values),
                    "blank": not values,
                },
                parent_refs=(("schema", schema.schema_id),),
            )
        refs = [(KIND_SUBSCRIPTION, subscription_id), (KIND_PACKAGE, package_id)]
        if object_id:
            refs.append((KIND_OBJECT, object_id))
        txn.put(
            KIND_PEP,
            entity_id,
            {
                "pep_id": spec.pep_id,
                "customer_id": customer_id,
                "subscription_id": subscription_id,
                "product_id": product_id,
                "package_id": package_id,
                "object_id": object_id,
            },
            parent_refs=tuple(refs),
        )
        return PEP(spec.pep_id, customer_id, subscription_id, product_id, package_id, object_id)

    # -- PEP addition after the fact ---------------------------------------

    def add_pep(
        self,
        actor: Session,
        customer_id: str,
        spec: PepSpec | dict,
        package_id: str = NEW_PACKAGE,
        product_id: str = "",
    ) -> PEP:
        """Attach one more PEP to an existing subscription.

        ``package_id`` may name an existing package, or be ``"NewPackage"`` to
        provision a fresh package (with its own blank policy objects) for the
        PEP to land in.  Either way one Submitted change request accompanies
        the addition.
        """
        require_ops(actor)
        spec = PepSpec.coerce(spec)
        if not spec.pep_id.strip():
            raise ValidationFailed("PEP id must not be empty")
        if self.create_request is None:  # pragma: no cover - wiring error
            raise RuntimeError("CustomerMaster.create_request is not wired")

        with self.store.transaction() as txn:
            self._require_customer(txn, customer_id)
            if package_id != NEW_PACKAGE:
                package = txn.get(KIND_PACKAGE, package_id)
                if package is None or package.payload["customer_id"] != customer_id:
                    raise UnknownPackage(
                        f"customer {customer_id} has no package {package_id!r}",
                        package_id=package_id,
                    )
                subscription_id = package.payload["subscription_id"]
                product_id = package.payload["product_id"]
                target_package = package_id
            else:
                subscription_id, product_id = self._pick_subscription(
                    txn, customer_id, product_id
                )
                target_package = self._provision_package(
                    txn, customer_id, subscription_id, product_id
                )

            pep = self._create_pep(
                txn, customer_id, subscription_id, product_id, target_package, spec
            )

            sub = txn.require(KIND_SUBSCRIPTION, subscription_id)
            payload = dict(sub.payload)
            payload["pep_ids"] = list(payload["pep_ids"]) + [spec.pep_id]
            txn.put(KIND_SUBSCRIPTION, subscription_id, payload, parent_refs=sub.parent_refs)

            self.create_request(
                actor,
                kind="PEPRequest",
                customer_id=customer_id,
                product_id=product_id,
                package_id=target_package,
                target_refs=[(KIND_PEP, pep.entity_id)],
            )
            self.outbox.dispatch(EventKind.PEP_ADDED, customer_id, detail=spec.pep_id)
            return pep

    def _pick_subscription(
        self, txn: Transaction, customer_id: str, product_id: str
    ) -> tuple[str, str]:
        subs = [
            r for r in txn.list(KIND_SUBSCRIPTION) if r.payload["customer_id"] == customer_id
        ]
        if product_id:
            subs = [r for r in subs if r.payload["product_id"] == product_id]
        if not subs:
            raise ValidationFailed(
                f"customer {customer_id} has no matching subscription for the new PEP"
            )
        if len(subs) > 1:
            raise ValidationFailed(
                f"customer {customer_id} holds several subscriptions; "
                "name the product the PEP belongs to"
            )
        payload = subs[0].payload
        return payload["subscription_id"], payload["product_id"]

    def _provision_package(
        self, txn: Transaction, customer_id: str, subscription_id: str, product_id: str
    ) -> str:
        """A NewPackage order gets fresh blank objects, one per product policy."""
        product = txn.require(KIND_PRODUCT, product_id)
        sub = txn.require(KIND_SUBSCRIPTION, subscription_id)
        object_ids: list[str] = []
        cp_ids: list[str] = []
        for policy_id in product.payload["policy_ids"]:
            policy = txn.require(KIND_POLICY, policy_id)
            template_id = policy.payload.get("template_id") or ""
            if not template_id:
                raise ValidationFailed(
                    f"policy {policy_id} of {product_id} has no protocol template"
                )
            schema = self.engine.materialize_object_schema(template_id)
            object_id = self._create_blank_object(txn, schema, customer_id)
            object_ids.append(object_id)
            cp_id = f"CPL-{txn.next_value('customer_policy')}"
            cp_ids.append(cp_id)
            txn.put(
                KIND_CUSTOMER_POLICY,
                cp_id,
                {
                    "customer_policy_id": cp_id,
                    "customer_id": customer_id,
                    "subscription_id": subscription_id,
                    "policy_id": policy_id,
                    "object_id": object_id,
                },
                parent_refs=(
                    (KIND_SUBSCRIPTION, subscription_id),
                    (KIND_POLICY, policy_id),
                    (KIND_OBJECT, object_id),
                ),
            )
        package_id = f"PKG-{txn.next_value('package')}"
        txn.put(
            KIND_PACKAGE,
            package_id,
            {
                "package_id": package_id,
                "customer_id": customer_id,
                "subscription_id": subscription_id,
                "product_id": product_id,
                "member_object_ids": object_ids,
            },
            parent_refs=tuple(
                [(KIND_SUBSCRIPTION, subscription_id)]
                + [(KIND_OBJECT, oid) for oid in object_ids]
            ),
        )
        payload = dict(sub.payload)
        payload["customer_policy_ids"] = list(payload["customer_policy_ids"]) + cp_ids
        payload["package_ids"] = list(payload["package_ids"]) + [package_id]
        txn.put(KIND_SUBSCRIPTION, subscription_id, payload, parent_refs=sub.parent_refs)
        return package_id

    # -- deletion ----------------------------------------------------------

    def delete_entity(self, actor: Session, kind: str, entity_id: str) -> None:
        """Delete a provisioning entity, refusing while dependants exist.

        The storage layer's referential guard does the actual blocking; this
        method only sequences the deletes so that a legitimate removal (e.g. a
        package nobody references) takes its dependants with it in one
        transaction.
        """
        require_ops(actor)
        if kind == "template":
            self.engine.delete_template(entity_id)
            return
        handler = {
            "customer": self._delete_customer,
            "product": self._delete_product,
            "subscription": self._delete_subscription,
            "package": self._delete_package,
            "pep": self._delete_pep,
        }.get(kind)
        if handler is None:
            raise UnknownEntity(f"cannot delete entities of kind {kind!r}", kind=kind)
        with self.store.transaction() as txn:
            handler(txn, entity_id)

    def _delete_customer(self, txn: Transaction, customer_id: str) -> None:
        self._require_customer(txn, customer_id)
        txn.delete(KIND_CUSTOMER, customer_id)

    def _delete_product(self, txn: Transaction, product_id: str) -> None:
        product = txn.get(KIND_PRODUCT, product_id)
        if product is None:
            raise UnknownProduct(f"no product {product_id!r}", product_id=product_id)
        # Policies belong to the product; remove them first so the product's
        # own delete is not blocked by its children.
        for policy_id in product.payload["policy_ids"]:
            txn.delete(KIND_POLICY, policy_id)
        txn.delete(KIND_PRODUCT, product_id)

    def _delete_subscription(self, txn: Transaction, subscription_id: str) -> None:
        sub = txn.get(KIND_SUBSCRIPTION, subscription_id)
        if sub is None:
            raise UnknownEntity(
                f"no subscription {subscription_id!r}",
                kind="subscription",
                entity_id=subscription_id,
            )
        txn.delete(KIND_SUBSCRIPTION, subscription_id)

    def _delete_package(self, txn: Transaction, package_id: str) -> None:
        package = txn.get(KIND_PACKAGE, package_id)
        if package is None:
            raise UnknownPackage(f"no package {package_id!r}", package_id=package_id)
        payload = package.payload
        member_ids = list(payload["member_object_ids"])
        # Customer-policy links hang off the member objects; they stand or
        # fall with the package.
        for record in txn.list(KIND_CUSTOMER_POLICY):
            if record.payload["object_id"] in member_ids:
                txn.delete(KIND_CUSTOMER_POLICY, record.entity_id)
        txn.delete(KIND_PACKAGE, package_id)
        for object_id in member_ids:
            txn.delete(KIND_OBJECT, object_id)
        sub = txn.get(KIND_SUBSCRIPTION, payload["subscription_id"])
        if sub is not None:
            p = dict(sub.payload)
            p["package_ids"] = [x for x in p["package_ids"] if x != package_id]
            p["customer_policy_ids"] = [
                x for x in p["customer_policy_ids"] if txn.exists(KIND_CUSTOMER_POLICY, x)
            ]
            txn.put(KIND_SUBSCRIPTION, sub.entity_id, p, parent_refs=sub.parent_refs)

    def _delete_pep(self, txn: Transaction, entity_id: str) -> None:
        pep = txn.get(KIND_PEP, entity_id)
        if pep is None:
            raise UnknownEntity(f"no PEP {entity_id!r}", kind="pep", entity_id=entity_id)
        payload = pep.payload
        txn.delete(KIND_PEP, entity_id)
        if payload.get("object_id"):
            txn.delete(KIND_OBJECT, payload["object_id"])
        sub = txn.get(KIND_SUBSCRIPTION, payload["subscription_id"])
        if sub is not None:
            p = dict(sub.payload)
            p["pep_ids"] = [x for x in p["pep_ids"] if x != payload["pep_id"]]
            txn.put(KIND_SUBSCRIPTION, sub.entity_id, p, parent_refs=sub.parent_refs)

    # -- objects and values ------------------------------------------------

    def get_object(self, object_id: str) -> ProtocolObject:
        with self.store.transaction() as txn:
            record = txn.get(KIND_OBJECT, object_id)
            if record is None:
                raise UnknownEntity(f"no object {object_id!r}", kind="object", entity_id=object_id)
        values = decode_values(record.payload["values"])
        return ProtocolObject(
            object_id=object_id,
            schema_id=record.payload["schema_id"],
            customer_id=record.payload["customer_id"],
            values=values,
            blank=record.payload["blank"],
        )

    def apply_values(self, object_id: str, proposed: dict[str, TypedValue | None]) -> ProtocolObject:
        """Overlay proposed values onto an object (inside the caller's txn).

        ``None`` clears a column back to unset.  The blank flag is recomputed:
        an object is blank exactly when every column is unset.
        """
        with self.store.transaction() as txn:
            record = txn.get(KIND_OBJECT, object_id)
            if record is None:
                raise UnknownEntity(f"no object {object_id!r}", kind="object", entity_id=object_id)
            payload = dict(record.payload)
            stored = dict(payload["values"])
            for column, value in proposed.items():
                if value is None:
                    stored.pop(column, None)
                else:
                    stored[column] = value.encode()
            payload["values"] = stored
            payload["blank"] = not stored
            txn.put(KIND_OBJECT, object_id, payload, parent_refs=record.parent_refs)
        return ProtocolObject(
            object_id=object_id,
            schema_id=payload["schema_id"],
            customer_id=payload["customer_id"],
            values=decode_values(stored),
            blank=payload["blank"],
        )

    # -- lookups used by the queue and the API -----------------------------

    def get_subscription(self, subscription_id: str) -> Subscription:
        with self.store.transaction() as txn:
            record = txn.get(KIND_SUBSCRIPTION, subscription_id)
            if record is None:
                raise UnknownEntity(
                    f"no subscription {subscription_id!r}",
                    kind="subscription",
                    entity_id=subscription_id,
                )
        return self._subscription(record)

    def list_subscriptions(self, customer_id: str = "") -> list[Subscription]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_SUBSCRIPTION)
        subs = [
            self._subscription(r)
            for r in records
            if not customer_id or r.payload["customer_id"] == customer_id
        ]
        subs.sort(key=lambda s: s.subscription_id)
        return subs

    @staticmethod
    def _subscription(record: StoredRecord) -> Subscription:
        p = record.payload
        return Subscription(
            p["subscription_id"],
            p["customer_id"],
            p["product_id"],
            tuple(p["customer_policy_ids"]),
            tuple(p["package_ids"]),
            tuple(p["pep_ids"]),
        )

    def get_package(self, package_id: str) -> ProtocolPackage:
        with self.store.transaction() as txn:
            record = txn.get(KIND_PACKAGE, package_id)
            if record is None:
                raise UnknownPackage(f"no package {package_id!r}", package_id=package_id)
        p = record.payload
        return ProtocolPackage(
            p["package_id"],
            p["customer_id"],
            p["subscription_id"],
            p["product_id"],
            tuple(p["member_object_ids"]),
        )

    def get_pep(self, customer_id: str, pep_id: str) -> PEP:
        with self.store.transaction() as txn:
            record = txn.get(KIND_PEP, pep_key(customer_id, pep_id))
            if record is None:
                raise UnknownEntity(f"customer {customer_id} has no PEP {pep_id!r}", kind="pep")
        p = record.payload
        return PEP(
            p["pep_id"], p["customer_id"], p["subscription_id"],
            p["product_id"], p["package_id"], p.get("object_id", ""),
        )

    def list_peps(self, customer_id: str) -> list[PEP]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_PEP)
        peps = [
            PEP(
                r.payload["pep_id"], r.payload["customer_id"], r.payload["subscription_id"],
                r.payload["product_id"], r.payload["package_id"], r.payload.get("object_id", ""),
            )
            for r in records
            if r.payload["customer_id"] == customer_id
        ]
        peps.sort(key=lambda p: p.pep_id)
        return peps

    def customer_policies(self, customer_id: str) -> list[CustomerPolicy]:
        with self.store.transaction() as txn:
            records = txn.list(KIND_CUSTOMER_POLICY)
        out = [
            CustomerPolicy(
                r.payload["customer_policy_id"], r.payload["customer_id"],
                r.payload["subscription_id"], r.payload["policy_id"], r.payload["object_id"],
            )
            for r in records
            if r.payload["customer_id"] == customer_id
        ]
        out.sort(key=lambda c: c.customer_policy_id)
        return out

    # -- provider hooks for the user master --------------------------------

    def subscription_exists(self, customer_id: str, product_id: str) -> bool:
        with self.store.transaction() as txn:
            for record in txn.list(KIND_SUBSCRIPTION):
                p = record.payload
                if p["customer_id"] == customer_id and p["product_id"] == product_id:
                    return True
        return False

    def all_workspaces(self) -> list[Workspace]:
        with self.store.transaction() as txn:
            subs = txn.list(KIND_SUBSCRIPTION)
            names: dict[tuple[str, str], tuple[str, str]] = {}
            for record in subs:
                p = record.payload
                customer = txn.get(KIND_CUSTOMER, p["customer_id"])
                product = txn.get(KIND_PRODUCT, p["product_id"])
                names[(p["customer_id"], p["product_id"])] = (
                    customer.payload["name"] if customer else p["customer_id"],
                    product.payload["name"] if product else p["product_id"],
                )
        out = [
            Workspace(cid, cname, pid, pname, Privilege.READ_WRITE)
            for (cid, pid), (cname, pname) in names.items()
        ]
        out.sort(key=lambda w: (w.customer_id, w.product_id))
        return out

    def workspace_for(self, customer_id: str, product_id: str, privilege: Privilege) -> Workspace | None:
        """Build a workspace for a grant, or None if the subscription lapsed."""
        with self.store.transaction() as txn:
            found = False
            for record in txn.list(KIND_SUBSCRIPTION):
                p = record.payload
                if p["customer_id"] == customer_id and p["product_id"] == product_id:
                    found = True
                    break
            if not found:
                return None
            customer = txn.get(KIND_CUSTOMER, customer_id)
            product = txn.get(KIND_PRODUCT, product_id)
        return Workspace(
            customer_id,
            customer.payload["name"] if customer else customer_id,
            product_id,
            product.payload["name"] if product else product_id,
            privilege,
        )
