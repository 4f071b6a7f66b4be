"""JSON schemas for the files written by the command-line tool."""

import json
from importlib import resources


def load_schema(name: str) -> dict:
    """Load ``<name>.schema.json`` (``report``, ``witness``, ``trace`` or ``repr``)."""
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
