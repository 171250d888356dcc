"""JSON report writer."""

import json
from pathlib import Path
from typing import Any

from app.core.logging import run_logger, to_jsonable


def write_report(kind: str, payload: dict[str, Any], path: Path, provenance: dict[str, Any]) -> Path:
    """
    Write a sorted-key JSON report with its provenance block.

    Args:
        kind: Report kind (e.g. "mixing_error")
        payload: Report body
        path: Destination file
        provenance: Fingerprint and seeds that produced the report
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    document = {"kind": kind, **to_jsonable(payload), "provenance": provenance}
    out.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    run_logger.log_report_written(kind, str(out))
    return out
