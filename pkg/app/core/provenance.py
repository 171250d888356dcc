"""
Provenance fingerprints for reproducible artifacts.

Every dataset, checkpoint and report records a deterministic hash of the
configuration that produced it, so a file can be traced back to
(config, flags, seed) without any hidden state.
"""

import hashlib
import json
from typing import Any

from pydantic import BaseModel


def _canonical(payload: Any) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    return payload


def fingerprint(prefix: str, *args: Any, **kwargs: Any) -> str:
    """
    Generate a provenance key from arbitrary JSON-like arguments.

    Creates a deterministic hash from arguments.

    Args:
        prefix: Key prefix (e.g., "train")
        *args: Positional arguments (pydantic models are dumped first)
        **kwargs: Keyword arguments

    Returns:
        Key of the form ``prefix:<16 hex chars>``

    Examples:
        >>> fingerprint("gen", seed=7, count=10)
        'gen:...'
    """
    key_data = {
        "prefix": prefix,
        "args": [_canonical(a) for a in args],
        "kwargs": {k: _canonical(v) for k, v in kwargs.items()},
    }

    # Sorted keys make the representation independent of dict ordering
    json_str = json.dumps(key_data, sort_keys=True, default=str)
    hash_digest = hashlib.sha256(json_str.encode()).hexdigest()

    return f"{prefix}:{hash_digest[:16]}"


def provenance_record(prefix: str, config: Any, **seeds: int) -> dict[str, Any]:
    """
    Build the provenance block embedded in reports and checkpoint headers.

    Args:
        prefix: Fingerprint prefix
        config: Config model or mapping that produced the artifact
        **seeds: Seeds in effect (recorded verbatim)

    Returns:
        Dictionary with the fingerprint and seeds
    """
    return {"fingerprint": fingerprint(prefix, config, **seeds), "seeds": dict(sorted(seeds.items()))}
