"""Validate documents against the shipped schemas, resolving cross-file refs."""

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from opfunc.schemas import load_schema

_NAMES = ("report", "witness", "trace", "repr")
_SCHEMAS = {n: load_schema(n) for n in _NAMES}
_REGISTRY = Registry().with_resources(
    (s["$id"], Resource.from_contents(s)) for s in _SCHEMAS.values()
)


def validate(doc, name="report"):
    Draft202012Validator(_SCHEMAS[name], registry=_REGISTRY).validate(doc)
