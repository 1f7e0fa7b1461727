from __future__ import annotations

import dataclasses
import enum
import hashlib
import json


def _encode(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if dataclasses.is_dataclass(obj):
        return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (set, frozenset)):
        return sorted(obj, key=repr)
    raise TypeError(f"cannot digest {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(obj, default=_encode, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def stable_digest(obj) -> str:
    """sha256 over a canonical JSON rendering; strings are hashed as-is."""
    data = obj if isinstance(obj, str) else canonical_json(obj)
    return hashlib.sha256(data.encode("utf-8")).hexdigest()
