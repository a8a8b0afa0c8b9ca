"""JSON schemas of the result documents written by the command-line tools."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema


def kinds() -> list[str]:
    return sorted(p.name.split(".")[0] for p in resources.files("qdpcw.schemas").iterdir()
                  if p.name.endswith(".schema.json"))


@lru_cache(maxsize=None)
def load_schema(kind: str) -> dict:
    try:
        text = resources.files("qdpcw.schemas").joinpath(f"{kind}.schema.json").read_text()
    except FileNotFoundError:
        raise ValueError(f"no schema for document kind {kind!r}") from None
    return json.loads(text)


def validate(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``doc`` matches the schema of its kind."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("document has no 'kind' field")
    schema = load_schema(doc["kind"])
    jsonschema.Draft202012Validator(schema).validate(doc)
