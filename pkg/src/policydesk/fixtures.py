"""Seed-data loader: one JSON document provisions a whole environment.

The format names things the way people do (template names, product names,
customer names); the loader resolves them to generated ids in dependency
order — users, templates, products, customers with their subscriptions and
grants.  Demos and the acceptance suite share the same loader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationFailed
from .templates import TemplateKind
from .users import Privilege, Profile, Role, Session

SEED_FORMAT = "policydesk-seed/1"


@dataclass
class SeedReport:
    users: list[str] = field(default_factory=list)
    templates: dict[str, str] = field(default_factory=dict)  # name -> template_id
    products: dict[str, str] = field(default_factory=dict)  # name -> product_id
    customers: dict[str, str] = field(default_factory=dict)  # name -> customer_id


def load_seed(service, actor: Session, source) -> SeedReport:
    """Apply a seed document through the service facade as ``actor``.

    ``source`` may be a dict, a JSON string, or a path to a JSON file.
    """
    document = _as_document(source)
    if document.get("format") != SEED_FORMAT:
        raise ValidationFailed(f"not a seed document (expected format {SEED_FORMAT!r})")
    report = SeedReport()

    for spec in document.get("users", []):
        service.users.create_user(
            actor,
            email=spec["email"],
            role=Role(spec.get("role", Role.CUSTOMER.value)),
            profile=Profile(name=spec.get("name", ""), phone=spec.get("phone", "")),
            secret=spec.get("secret", ""),
        )
        report.users.append(spec["email"])

    for spec in document.get("templates", []):
        template = service.template_create(
            actor,
            kind=TemplateKind(spec.get("kind", TemplateKind.PROTOCOL.value)),
            name=spec["name"],
            items=spec.get("items", []),
        )
        report.templates[template.name] = template.template_id

    for spec in document.get("products", []):
        product = service.product_define(
            actor,
            name=spec["name"],
            component_defs=spec.get("components", []),
            policy_names=[p["name"] for p in spec.get("policies", [])],
            pep_template_id=_template_ref(report, spec.get("pep_template")),
        )
        report.products[spec["name"]] = product.product_id
        for policy_id, policy_spec in zip(product.policy_ids, spec.get("policies", [])):
            template_id = _template_ref(report, policy_spec.get("template"))
            if template_id:
                service.policy_assign_template(actor, policy_id, template_id)

    for spec in document.get("customers", []):
        customer = service.customers.create_customer(
            actor, name=spec["name"], contact_user_id=spec.get("contact", "")
        )
        report.customers[spec["name"]] = customer.customer_id
        for sub in spec.get("subscriptions", []):
            product_id = report.products.get(sub["product"])
            if product_id is None:
                raise ValidationFailed(
                    f"seed references unknown product {sub['product']!r}"
                )
            service.customers.subscribe_product(
                actor, customer.customer_id, product_id, sub.get("peps", [])
            )
        for grant in spec.get("grants", []):
            product_id = report.products.get(grant["product"])
            if product_id is None:
                raise ValidationFailed(
                    f"seed references unknown product {grant['product']!r}"
                )
            service.users.grant_product_access(
                actor,
                user_id=grant["user"],
                customer_id=customer.customer_id,
                product_id=product_id,
                privilege=Privilege(grant.get("privilege", Privilege.READ_ONLY.value)),
            )

    return report


def _as_document(source) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)):
        text = str(source)
        if text.lstrip().startswith("{"):
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValidationFailed(f"seed document is not valid JSON: {exc}") from exc
        try:
            raw = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationFailed(f"cannot read seed file {source}: {exc}") from exc
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValidationFailed(f"seed file {source} is not valid JSON: {exc}") from exc
    raise ValidationFailed(f"not a seed document: {type(source).__name__}")


def _template_ref(report: SeedReport, name) -> str | None:
    if not name:
        return None
    template_id = report.templates.get(name)
    if template_id is None:
        raise ValidationFailed(f"seed references unknown template {name!r}")
    return template_id
