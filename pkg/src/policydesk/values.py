"""Typed values for protocol object columns.

Three data types exist: Text, Numeric, File.  Numeric values are exact
decimals (optional sign and fraction, no exponents); File values are
content-hash tokens handed out by the upload interface.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum

from .errors import RequiredMissing, TypeMismatch, UnknownDataType


class DataType(str, Enum):
    TEXT = "Text"
    NUMERIC = "Numeric"
    FILE = "File"


NUMERIC_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
FILE_TOKEN_RE = re.compile(r"^sha256:[0-9a-f]{64}$")


def parse_data_type(raw: str | DataType | None) -> DataType | None:
    """Map a wire string onto a DataType; None passes through (unset)."""
    if raw is None or isinstance(raw, DataType):
        return raw
    try:
        return DataType(raw)
    except ValueError:
        raise UnknownDataType(f"not a data type: {raw!r}", value=raw)


def file_token(content: bytes) -> str:
    return "sha256:" + hashlib.sha256(content).hexdigest()


@dataclass(frozen=True)
class TypedValue:
    """A validated value tagged with its column data type."""

    data_type: DataType
    text: str | None = None
    number: Decimal | None = None
    token: str | None = None

    @property
    def raw(self) -> str:
        if self.data_type is DataType.NUMERIC:
            return str(self.number)
        if self.data_type is DataType.FILE:
            return self.token or ""
        return self.text or ""

    def encode(self) -> dict:
        return {"type": self.data_type.value, "value": self.raw}

    @classmethod
    def decode(cls, payload: dict) -> "TypedValue":
        return parse_value(DataType(payload["type"]), payload["value"], required=False, column="")  # type: ignore[return-value]


def parse_value(data_type: DataType, raw, *, required: bool, column: str) -> TypedValue | None:
    """Validate a raw wire value against a column type.

    Returns None for an empty optional value (the column stays unset).
    Raises RequiredMissing / TypeMismatch per the column rules.
    """
    if raw is None or (isinstance(raw, str) and raw == ""):
        if required:
            raise RequiredMissing(f"required value missing for {column!r}", column=column)
        return None

    if data_type is DataType.TEXT:
        if not isinstance(raw, str):
            raise TypeMismatch(f"{column!r} expects text", column=column, value=raw)
        return TypedValue(DataType.TEXT, text=raw)

    if data_type is DataType.NUMERIC:
        if isinstance(raw, bool) or isinstance(raw, float):
            raise TypeMismatch(f"{column!r} expects a decimal numeral string", column=column, value=raw)
        if isinstance(raw, int):
            raw = str(raw)
        if not isinstance(raw, str) or not NUMERIC_RE.match(raw):
            raise TypeMismatch(f"{column!r} expects a decimal numeral", column=column, value=raw)
        return TypedValue(DataType.NUMERIC, number=Decimal(raw))

    if data_type is DataType.FILE:
        if not isinstance(raw, str) or not FILE_TOKEN_RE.match(raw):
            raise TypeMismatch(f"{column!r} expects an upload token", column=column, value=raw)
        return TypedValue(DataType.FILE, token=raw)

    raise UnknownDataType(f"not a data type: {data_type!r}", value=data_type)


def encode_values(values: dict[str, TypedValue]) -> dict[str, dict]:
    return {name: value.encode() for name, value in sorted(values.items())}


def decode_values(payload: dict[str, dict]) -> dict[str, TypedValue]:
    return {name: TypedValue.decode(encoded) for name, encoded in payload.items()}
