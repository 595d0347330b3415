"""Canonical serialization plus template import/export documents.

One serialization to rule them all: JSON with sorted keys and no incidental
whitespace, so equal entities serialize to byte-identical text and documents
round-trip losslessly.
"""

from __future__ import annotations

import json

from .errors import ValidationFailed
from .templates import ProtocolTemplate, TemplateEngine

TEMPLATE_FORMAT = "protocol-template/1"


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationFailed(f"not valid JSON: {exc}") from exc


def export_template(template: ProtocolTemplate) -> str:
    """Serialize a template (ids included) to its interchange document."""
    return canonical_json({"format": TEMPLATE_FORMAT, "template": template.to_payload()})


def parse_template_document(text: str) -> ProtocolTemplate:
    document = canonical_loads(text)
    if not isinstance(document, dict) or document.get("format") != TEMPLATE_FORMAT:
        raise ValidationFailed(
            f"not a template document (expected format {TEMPLATE_FORMAT!r})"
        )
    try:
        return ProtocolTemplate.from_payload(document["template"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationFailed(f"malformed template document: {exc}") from exc


def import_template(engine: TemplateEngine, text: str) -> ProtocolTemplate:
    """Register a previously exported template, ids and version preserved."""
    return engine.register_template(parse_template_document(text))
