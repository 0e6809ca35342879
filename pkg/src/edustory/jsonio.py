"""Canonical JSON helpers.

All on-disk artifacts use sorted keys and a fixed layout so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def canonical_dumps(obj: Any) -> str:
    """Compact canonical form, used for digests and wire payloads."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def pretty_dumps(obj: Any) -> str:
    """Readable canonical form, used for files. Ends with a newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path | str, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(pretty_dumps(obj), encoding="utf-8")
    return path


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
