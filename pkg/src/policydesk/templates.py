"""Products, protocol/PEP templates, and object-schema materialization.

A template is an ordered forest of typed items.  Materializing a template
produces an ObjectSchema: one column per item, parents always ahead of
their descendants (depth-first, insertion order among siblings).  Schemas
are pinned per template version so records authored against an older
version stay valid when the template moves on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import (
    DuplicateItemName,
    DuplicateProductName,
    InvalidComponent,
    DescriptionEmpty,
    MultipleParents,
    ParentCycle,
    ParentDisabled,
    TemplateInUse,
    UnknownParent,
    UnknownTemplate,
    ValidationFailed,
)
from .storage import (
    KIND_OBJECT,
    KIND_POLICY,
    KIND_PRODUCT,
    KIND_SCHEMA,
    KIND_TEMPLATE,
    KIND_TEMPLATE_VERSION,
    MemoryStore,
    StoredRecord,
    Transaction,
)
from .values import DataType, TypedValue, parse_data_type, parse_value


class TemplateKind(str, Enum):
    PROTOCOL = "Protocol"
    PEP = "PEP"


class ComponentType(str, Enum):
    PRODUCT = "Product"
    POLICY = "Policy"


class DataSource(str, Enum):
    NONE = "None"
    POLICY_OBJECT = "PolicyObject"


@dataclass(frozen=True)
class ComponentDef:
    component_name: str
    description: str
    data_type: DataType = DataType.TEXT
    component_type: ComponentType = ComponentType.PRODUCT
    data_source: DataSource = DataSource.NONE

    def to_payload(self) -> dict:
        return {
            "component_name": self.component_name,
            "description": self.description,
            "data_type": self.data_type.value,
            "component_type": self.component_type.value,
            "data_source": self.data_source.value,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ComponentDef":
        return cls(
            component_name=payload["component_name"],
            description=payload["description"],
            data_type=DataType(payload["data_type"]),
            component_type=ComponentType(payload["component_type"]),
            data_source=DataSource(payload["data_source"]),
        )


@dataclass(frozen=True)
class ProductDef:
    product_id: str
    name: str
    components: tuple[ComponentDef, ...]
    policy_ids: tuple[str, ...]
    pep_template_id: str | None = None


@dataclass(frozen=True)
class PolicyDef:
    policy_id: str
    name: str
    product_id: str
    template_id: str | None = None


@dataclass(frozen=True)
class TemplateItem:
    item_id: str
    name: str
    data_type: DataType | None = None
    parent_id: str | None = None
    enabled: bool = True
    inherit_attributes: bool = False
    required: bool = False

    def to_payload(self) -> dict:
        return {
            "item_id": self.item_id,
            "name": self.name,
            "data_type": self.data_type.value if self.data_type else None,
            "parent_id": self.parent_id,
            "enabled": self.enabled,
            "inherit_attributes": self.inherit_attributes,
            "required": self.required,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TemplateItem":
        return cls(
            item_id=payload["item_id"],
            name=payload["name"],
            data_type=DataType(payload["data_type"]) if payload.get("data_type") else None,
            parent_id=payload.get("parent_id"),
            enabled=payload.get("enabled", True),
            inherit_attributes=payload.get("inherit_attributes", False),
            required=payload.get("required", False),
        )


@dataclass(frozen=True)
class ProtocolTemplate:
    template_id: str
    kind: TemplateKind
    name: str
    version: int
    items: tuple[TemplateItem, ...]

    def item_by_id(self, item_id: str) -> TemplateItem | None:
        for item in self.items:
            if item.item_id == item_id:
                return item
        return None

    def item_by_name(self, name: str) -> TemplateItem | None:
        for item in self.items:
            if item.name == name:
                return item
        return None

    def to_payload(self) -> dict:
        return {
            "template_id": self.template_id,
            "kind": self.kind.value,
            "name": self.name,
            "version": self.version,
            "items": [item.to_payload() for item in self.items],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ProtocolTemplate":
        return cls(
            template_id=payload["template_id"],
            kind=TemplateKind(payload["kind"]),
            name=payload["name"],
            version=payload["version"],
            items=tuple(TemplateItem.from_payload(p) for p in payload["items"]),
        )


@dataclass(frozen=True)
class ItemSpec:
    """Input form for a template item; parent may be an item name or id."""

    name: str
    data_type: DataType | str | None = None
    parent: str | None = None
    enabled: bool = True
    inherit_attributes: bool = False
    required: bool = False

    @classmethod
    def coerce(cls, raw) -> "ItemSpec":
        if isinstance(raw, ItemSpec):
            return raw
        if isinstance(raw, dict):
            return cls(
                name=raw.get("name", ""),
                data_type=raw.get("data_type"),
                parent=raw.get("parent"),
                enabled=raw.get("enabled", True),
                inherit_attributes=raw.get("inherit_attributes", False),
                required=raw.get("required", False),
            )
        raise ValidationFailed(f"not an item spec: {raw!r}")


@dataclass(frozen=True)
class SchemaColumn:
    name: str
    data_type: DataType
    required: bool
    parent_name: str | None


@dataclass(frozen=True)
class ObjectSchema:
    schema_id: str
    template_id: str
    version: int
    columns: tuple[SchemaColumn, ...]

    def column(self, name: str) -> SchemaColumn | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def to_payload(self) -> dict:
        return {
            "schema_id": self.schema_id,
            "template_id": self.template_id,
            "version": self.version,
            "columns": [
                {
                    "name": c.name,
                    "data_type": c.data_type.value,
                    "required": c.required,
                    "parent_name": c.parent_name,
                }
                for c in self.columns
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ObjectSchema":
        return cls(
            schema_id=payload["schema_id"],
            template_id=payload["template_id"],
            version=payload["version"],
            columns=tuple(
                SchemaColumn(
                    name=c["name"],
                    data_type=DataType(c["data_type"]),
                    required=c["required"],
                    parent_name=c.get("parent_name"),
                )
                for c in payload["columns"]
            ),
        )


@dataclass(frozen=True)
class ResolvedItem:
    """Template item with inheritance applied and the ancestor gate computed."""

    name: str
    data_type: DataType
    required: bool
    parent_name: str | None
    ancestors_enabled: bool


# -- forest rules (pure) ----------------------------------------------------

def check_attach(parents: dict[str, str | None], child_id: str, parent_id: str) -> None:
    """Validate attaching child under parent in an existing forest.

    Rejects exactly: unknown endpoints, a child that already has a parent,
    and edges that would close a cycle.
    """
    if parent_id not in parents:
        raise UnknownParent(f"no item {parent_id!r}", item_id=parent_id)
    if child_id not in parents:
        raise UnknownParent(f"no item {child_id!r}", item_id=child_id)
    if parents[child_id] is not None:
        raise MultipleParents(f"item {child_id!r} already has a parent", item_id=child_id)
    node: str | None = parent_id
    while node is not None:
        if node == child_id:
            raise ParentCycle(f"attaching {child_id!r} under {parent_id!r} closes a cycle")
        node = parents[node]


def _check_forest(items: tuple[TemplateItem, ...]) -> None:
    by_id = {item.item_id: item for item in items}
    for item in items:
        if item.parent_id is not None and item.parent_id not in by_id:
            raise UnknownParent(f"no item {item.parent_id!r}", item_id=item.parent_id)
    for item in items:
        seen = {item.item_id}
        node = item.parent_id
        while node is not None:
            if node in seen:
                raise ParentCycle(f"cycle through item {node!r}")
            seen.add(node)
            node = by_id[node].parent_id


def schema_order(items: tuple[TemplateItem, ...]) -> tuple[TemplateItem, ...]:
    """Depth-first item order: every parent ahead of all its descendants."""
    children: dict[str | None, list[TemplateItem]] = {}
    for item in items:
        children.setdefault(item.parent_id, []).append(item)
    ordered: list[TemplateItem] = []

    def visit(item: TemplateItem) -> None:
        ordered.append(item)
        for child in children.get(item.item_id, []):
            visit(child)

    for root in children.get(None, []):
        visit(root)
    return tuple(ordered)


def resolve_items(
    items: tuple[TemplateItem, ...],
    enabled_override: dict[str, bool] | None = None,
) -> dict[str, ResolvedItem]:
    """Apply data-type inheritance and compute the enabled-ancestor gate.

    ``enabled_override`` substitutes per-item enablement by item id without
    touching structure: schemas pin the item tree of one template version,
    but whether an item accepts writes follows the template as it is now.
    """
    by_id = {item.item_id: item for item in items}

    def is_enabled(item_id: str) -> bool:
        if enabled_override is not None and item_id in enabled_override:
            return enabled_override[item_id]
        return by_id[item_id].enabled

    resolved: dict[str, ResolvedItem] = {}
    for item in items:
        data_type = item.data_type
        if data_type is None and item.inherit_attributes:
            node = item.parent_id
            while node is not None:
                ancestor = by_id[node]
                if ancestor.data_type is not None:
                    data_type = ancestor.data_type
                    break
                node = ancestor.parent_id
        if data_type is None:
            data_type = DataType.TEXT
        ancestors_enabled = True
        node = item.parent_id
        while node is not None:
            if not is_enabled(node):
                ancestors_enabled = False
                break
            node = by_id[node].parent_id
        parent_name = by_id[item.parent_id].name if item.parent_id else None
        resolved[item.name] = ResolvedItem(
            name=item.name,
            data_type=data_type,
            required=item.required,
            parent_name=parent_name,
            ancestors_enabled=ancestors_enabled,
        )
    return resolved


def materialize_columns(items: tuple[TemplateItem, ...]) -> tuple[SchemaColumn, ...]:
    resolved = resolve_items(items)
    return tuple(
        SchemaColumn(
            name=item.name,
            data_type=resolved[item.name].data_type,
            required=item.required,
            parent_name=resolved[item.name].parent_name,
        )
        for item in schema_order(items)
    )


def validate_item_value(item: ResolvedItem, raw) -> TypedValue | None:
    """Validate one raw value against a resolved item.

    A value may only be written when every ancestor of the item is enabled.
    """
    if not item.ancestors_enabled:
        raise ParentDisabled(f"parent of {item.name!r} is not enabled", column=item.name)
    return parse_value(item.data_type, raw, required=item.required, column=item.name)


def validate_component(spec) -> ComponentDef:
    """Normalize and validate a component definition; Text is the default type."""
    if isinstance(spec, ComponentDef):
        payload = spec.to_payload()
    elif isinstance(spec, dict):
        payload = dict(spec)
    else:
        raise InvalidComponent(f"not a component: {spec!r}", field="component")
    name = payload.get("component_name") or payload.get("name") or ""
    if not name:
        raise InvalidComponent("component name is empty", field="component_name")
    description = payload.get("description", "")
    if not description:
        raise DescriptionEmpty(f"component {name!r} has an empty description", field="description")
    data_type = parse_data_type(payload.get("data_type")) or DataType.TEXT
    component_type = payload.get("component_type", ComponentType.PRODUCT)
    if not isinstance(component_type, ComponentType):
        try:
            component_type = ComponentType(component_type)
        except ValueError:
            raise InvalidComponent(
                f"unknown component type {component_type!r}", field="component_type"
            )
    data_source = payload.get("data_source", DataSource.NONE)
    if not isinstance(data_source, DataSource):
        try:
            data_source = DataSource(data_source)
        except ValueError:
            raise InvalidComponent(f"unknown data source {data_source!r}", field="data_source")
    return ComponentDef(
        component_name=name,
        description=description,
        data_type=data_type,
        component_type=component_type,
        data_source=data_source,
    )


class TemplateEngine:
    """Product, policy, and template definitions over the record store."""

    def __init__(self, store: MemoryStore):
        self.store = store

    # -- products and policies ---------------------------------------------

    def define_product(
        self,
        name: str,
        component_defs=(),
        policy_names=(),
        pep_template_id: str | None = None,
    ) -> ProductDef:
        if not name:
            raise InvalidComponent("product name is empty", field="name")
        components = tuple(validate_component(c) for c in component_defs)
        seen_policies = set()
        for policy_name in policy_names:
            if not policy_name:
                raise InvalidComponent("policy name is empty", field="policy_name")
            if policy_name in seen_policies:
                raise InvalidComponent(
                    f"policy name {policy_name!r} repeated", field="policy_name"
                )
            seen_policies.add(policy_name)
        with self.store.transaction() as txn:
            for record in txn.list(KIND_PRODUCT):
                if record.payload["name"] == name:
                    raise DuplicateProductName(f"product {name!r} exists", name=name)
            if pep_template_id is not None:
                template = self._read_template(txn, pep_template_id)
                if template.kind is not TemplateKind.PEP:
                    raise InvalidComponent(
                        f"template {pep_template_id!r} is not a PEP template",
                        field="pep_template_id",
                    )
            product_id = f"PRD-{txn.next_value('product')}"
            policy_ids = [f"POL-{txn.next_value('policy')}" for _ in policy_names]
            txn.put(
                KIND_PRODUCT,
                product_id,
                {
                    "product_id": product_id,
                    "name": name,
                    "components": [c.to_payload() for c in components],
                    "policy_ids": policy_ids,
                    "pep_template_id": pep_template_id,
                },
            )
            for policy_id, policy_name in zip(policy_ids, policy_names):
                txn.put(
                    KIND_POLICY,
                    policy_id,
                    {
                        "policy_id": policy_id,
                        "name": policy_name,
                        "product_id": product_id,
                        "template_id": None,
                    },
                    parent_refs=((KIND_PRODUCT, product_id),),
                )
            return self._read_product(txn, product_id)

    def define_component(self, spec) -> ComponentDef:
        return validate_component(spec)

    def get_product(self, product_id: str) -> ProductDef:
        with self.store.transaction() as txn:
            return self._read_product(txn, product_id)

    def find_product_by_name(self, name: str) -> ProductDef | None:
        with self.store.transaction() as txn:
            for record in txn.list(KIND_PRODUCT):
                if record.payload["name"] == name:
                    return self._read_product(txn, record.entity_id)
        return None

    def list_products(self) -> list[ProductDef]:
        with self.store.transaction() as txn:
            return [self._read_product(txn, r.entity_id) for r in txn.list(KIND_PRODUCT)]

    def get_policy(self, policy_id: str) -> PolicyDef:
        with self.store.transaction() as txn:
            return _policy_from(txn.require(KIND_POLICY, policy_id))

    def assign_policy_template(self, policy_id: str, template_id: str) -> PolicyDef:
        with self.store.transaction() as txn:
            record = txn.require(KIND_POLICY, policy_id)
            template = self._read_template(txn, template_id)
            if template.kind is not TemplateKind.PROTOCOL:
                raise ValidationFailed(
                    f"template {template_id!r} is a PEP template, not a protocol template",
                    template_id=template_id,
                )
            payload = dict(record.payload)
            payload["template_id"] = template_id
            txn.put(KIND_POLICY, policy_id, payload, parent_refs=record.parent_refs)
            return _policy_from(txn.get(KIND_POLICY, policy_id))

    def set_product_pep_template(self, product_id: str, template_id: str) -> ProductDef:
        with self.store.transaction() as txn:
            record = txn.require(KIND_PRODUCT, product_id)
            template = self._read_template(txn, template_id)
            if template.kind is not TemplateKind.PEP:
                raise ValidationFailed(
                    f"template {template_id!r} is not a PEP template", template_id=template_id
                )
            payload = dict(record.payload)
            payload["pep_template_id"] = template_id
            txn.put(KIND_PRODUCT, product_id, payload)
            return self._read_product(txn, product_id)

    def subscribable(self, product: ProductDef) -> bool:
        """A product is offered for subscription once every policy has a template."""
        if not product.policy_ids:
            return False
        for policy_id in product.policy_ids:
            if self.get_policy(policy_id).template_id is None:
                return False
        return True

    # -- templates ----------------------------------------------------------

    def create_protocol_template(self, kind, name: str, items=()) -> ProtocolTemplate:
        kind = TemplateKind(kind)
        if not name:
            raise ValidationFailed("template name is empty", field="name")
        specs = [ItemSpec.coerce(i) for i in items]
        names = [s.name for s in specs]
        for item_name in names:
            if not item_name:
                raise ValidationFailed("item name is empty", field="item_name")
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DuplicateItemName(f"item names repeated: {sorted(dupes)}", names=sorted(dupes))
        with self.store.transaction() as txn:
            template_id = f"TPL-{txn.next_value('template')}"
            ids_by_name = {s.name: f"ITM-{txn.next_value('item')}" for s in specs}
            built = []
            for spec in specs:
                parent_id = None
                if spec.parent is not None:
                    if spec.parent in ids_by_name:
                        parent_id = ids_by_name[spec.parent]
                    elif spec.parent in ids_by_name.values():
                        parent_id = spec.parent
                    else:
                        raise UnknownParent(
                            f"no item {spec.parent!r} in template", item_id=spec.parent
                        )
                built.append(
                    TemplateItem(
                        item_id=ids_by_name[spec.name],
                        name=spec.name,
                        data_type=parse_data_type(spec.data_type),
                        parent_id=parent_id,
                        enabled=spec.enabled,
                        inherit_attributes=spec.inherit_attributes,
                        required=spec.required,
                    )
                )
            template = ProtocolTemplate(
                template_id=template_id, kind=kind, name=name, version=1, items=tuple(built)
            )
            _check_forest(template.items)
            self._store_version(txn, template)
            return template

    def register_template(self, template: ProtocolTemplate) -> ProtocolTemplate:
        """Store a fully-formed template (import path); ids are preserved."""
        from .errors import DuplicateTemplateId

        _check_forest(template.items)
        with self.store.transaction() as txn:
            if txn.exists(KIND_TEMPLATE, template.template_id):
                raise DuplicateTemplateId(
                    f"template {template.template_id!r} exists", template_id=template.template_id
                )
            self._bump_counter_past(txn, "template", template.template_id, "TPL-")
            for item in template.items:
                self._bump_counter_past(txn, "item", item.item_id, "ITM-")
            template = replace(template, version=template.version)
            self._store_version(txn, template)
            return template

    def get_template(self, template_id: str) -> ProtocolTemplate:
        with self.store.transaction() as txn:
            return self._read_template(txn, template_id)

    def get_template_version(self, template_id: str, version: int) -> ProtocolTemplate:
        with self.store.transaction() as txn:
            record = txn.get(KIND_TEMPLATE_VERSION, f"{template_id}@v{version}")
            if record is None:
                raise UnknownTemplate(
                    f"no template {template_id!r} at version {version}",
                    template_id=template_id,
                    version=version,
                )
            return ProtocolTemplate.from_payload(record.payload)

    def list_templates(self) -> list[ProtocolTemplate]:
        with self.store.transaction() as txn:
            return [ProtocolTemplate.from_payload(r.payload) for r in txn.list(KIND_TEMPLATE)]

    def add_template_item(self, template_id: str, item, parent_id: str | None = None) -> ProtocolTemplate:
        spec = ItemSpec.coerce(item)
        with self.store.transaction() as txn:
            template = self._read_template(txn, template_id)
            if template.item_by_name(spec.name) is not None:
                raise DuplicateItemName(f"item {spec.name!r} exists", name=spec.name)
            parent_ref = parent_id if parent_id is not None else spec.parent
            resolved_parent = None
            if parent_ref is not None:
                parent_item = template.item_by_id(parent_ref) or template.item_by_name(parent_ref)
                if parent_item is None:
                    raise UnknownParent(f"no item {parent_ref!r}", item_id=parent_ref)
                resolved_parent = parent_item.item_id
            new_item = TemplateItem(
                item_id=f"ITM-{txn.next_value('item')}",
                name=spec.name,
                data_type=parse_data_type(spec.data_type),
                parent_id=resolved_parent,
                enabled=spec.enabled,
                inherit_attributes=spec.inherit_attributes,
                required=spec.required,
            )
            template = replace(
                template, version=template.version + 1, items=template.items + (new_item,)
            )
            _check_forest(template.items)
            self._store_version(txn, template)
            return template

    def set_item_parent(self, template_id: str, item_id: str, parent_id: str) -> ProtocolTemplate:
        """Attach an existing root item under a parent (one new forest edge)."""
        with self.store.transaction() as txn:
            template = self._read_template(txn, template_id)
            parents = {i.item_id: i.parent_id for i in template.items}
            check_attach(parents, item_id, parent_id)
            items = tuple(
                replace(i, parent_id=parent_id) if i.item_id == item_id else i
                for i in template.items
            )
            template = replace(template, version=template.version + 1, items=items)
            self._store_version(txn, template)
            return template

    def set_item_enabled(self, template_id: str, item_id: str, enabled: bool) -> ProtocolTemplate:
        with self.store.transaction() as txn:
            template = self._read_template(txn, template_id)
            if template.item_by_id(item_id) is None:
                raise UnknownParent(f"no item {item_id!r}", item_id=item_id)
            items = tuple(
                replace(i, enabled=enabled) if i.item_id == item_id else i
                for i in template.items
            )
            template = replace(template, version=template.version + 1, items=items)
            self._store_version(txn, template)
            return template

    def materialize_object_schema(self, template_id: str) -> ObjectSchema:
        with self.store.transaction() as txn:
            template = self._read_template(txn, template_id)
            return self._materialize(txn, template)

    def get_schema(self, schema_id: str) -> ObjectSchema:
        with self.store.transaction() as txn:
            record = txn.get(KIND_SCHEMA, schema_id)
            if record is None:
                raise UnknownTemplate(f"no schema {schema_id!r}", schema_id=schema_id)
            return ObjectSchema.from_payload(record.payload)

    def delete_template(self, template_id: str) -> None:
        with self.store.transaction() as txn:
            self._read_template(txn, template_id)
            customers = set()
            schema_ids = []
            for record in txn.list(KIND_SCHEMA):
                if record.payload["template_id"] == template_id:
                    schema_ids.append(record.entity_id)
            for record in txn.list(KIND_OBJECT):
                if record.payload["schema_id"] in schema_ids:
                    customers.add(record.payload["customer_id"])
            if customers:
                raise TemplateInUse(
                    f"template {template_id!r} is in use",
                    template_id=template_id,
                    customers=sorted(customers),
                )
            # Definition-only references are cleared, not blockers.
            for record in txn.list(KIND_POLICY):
                if record.payload.get("template_id") == template_id:
                    payload = dict(record.payload)
                    payload["template_id"] = None
                    txn.put(KIND_POLICY, record.entity_id, payload, parent_refs=record.parent_refs)
            for record in txn.list(KIND_PRODUCT):
                if record.payload.get("pep_template_id") == template_id:
                    payload = dict(record.payload)
                    payload["pep_template_id"] = None
                    txn.put(KIND_PRODUCT, record.entity_id, payload)
            for schema_id in schema_ids:
                txn.delete(KIND_SCHEMA, schema_id)
            for record in txn.list(KIND_TEMPLATE_VERSION):
                if record.payload["template_id"] == template_id:
                    txn.delete(KIND_TEMPLATE_VERSION, record.entity_id)
            txn.delete(KIND_TEMPLATE, template_id)

    # -- value validation ----------------------------------------------------

    def resolve_schema_items(self, schema: ObjectSchema) -> dict[str, ResolvedItem]:
        """Resolve a pinned schema's items, with enablement read live.

        Data types and parentage stay as the schema's template version froze
        them — stored objects must not shift shape — but disabling an item is
        an operational switch and takes effect for every later write, so the
        enabled flags come from the template's current state.
        """
        pinned = self.get_template_version(schema.template_id, schema.version)
        current = self.get_template(schema.template_id)
        enabled_now = {item.item_id: item.enabled for item in current.items}
        return resolve_items(pinned.items, enabled_override=enabled_now)

    def validate_value(self, schema: ObjectSchema, column: str, raw) -> TypedValue | None:
        resolved = self.resolve_schema_items(schema)
        if column not in resolved:
            raise ValidationFailed(f"unknown column {column!r}", column=column)
        return validate_item_value(resolved[column], raw)

    # -- internals -----------------------------------------------------------

    def _store_version(self, txn: Transaction, template: ProtocolTemplate) -> None:
        payload = template.to_payload()
        txn.put(KIND_TEMPLATE, template.template_id, payload)
        version_id = f"{template.template_id}@v{template.version}"
        txn.put(
            KIND_TEMPLATE_VERSION,
            version_id,
            payload,
            parent_refs=((KIND_TEMPLATE, template.template_id),),
        )
        schema = ObjectSchema(
            schema_id=version_id,
            template_id=template.template_id,
            version=template.version,
            columns=materialize_columns(template.items),
        )
        txn.put(
            KIND_SCHEMA,
            schema.schema_id,
            schema.to_payload(),
            parent_refs=((KIND_TEMPLATE_VERSION, version_id),),
        )

    def _materialize(self, txn: Transaction, template: ProtocolTemplate) -> ObjectSchema:
        schema_id = f"{template.template_id}@v{template.version}"
        record = txn.get(KIND_SCHEMA, schema_id)
        if record is not None:
            return ObjectSchema.from_payload(record.payload)
        schema = ObjectSchema(
            schema_id=schema_id,
            template_id=template.template_id,
            version=template.version,
            columns=materialize_columns(template.items),
        )
        txn.put(
            KIND_SCHEMA,
            schema.schema_id,
            schema.to_payload(),
            parent_refs=((KIND_TEMPLATE_VERSION, schema_id),),
        )
        return schema

    def _read_template(self, txn: Transaction, template_id: str) -> ProtocolTemplate:
        record = txn.get(KIND_TEMPLATE, template_id)
        if record is None:
            raise UnknownTemplate(f"no template {template_id!r}", template_id=template_id)
        return ProtocolTemplate.from_payload(record.payload)

    def _read_product(self, txn: Transaction, product_id: str) -> ProductDef:
        record = txn.get(KIND_PRODUCT, product_id)
        if record is None:
            from .errors import UnknownProduct

            raise UnknownProduct(f"no product {product_id!r}", product_id=product_id)
        payload = record.payload
        return ProductDef(
            product_id=payload["product_id"],
            name=payload["name"],
            components=tuple(ComponentDef.from_payload(c) for c in payload["components"]),
            policy_ids=tuple(payload["policy_ids"]),
            pep_template_id=payload.get("pep_template_id"),
        )

    @staticmethod
    def _bump_counter_past(txn: Transaction, counter: str, entity_id: str, prefix: str) -> None:
        if entity_id.startswith(prefix):
            suffix = entity_id[len(prefix):]
            if suffix.isdigit() and int(suffix) > txn.peek_counter(counter):
                while txn.peek_counter(counter) < int(suffix):
                    txn.next_value(counter)


def _policy_from(record: StoredRecord) -> PolicyDef:
    payload = record.payload
    return PolicyDef(
        policy_id=payload["policy_id"],
        name=payload["name"],
        product_id=payload["product_id"],
        template_id=payload.get("template_id"),
    )
