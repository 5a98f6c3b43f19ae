from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping

from app.records import RunRecord, to_jsonable

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def float_text(value: float) -> str:
    """17 significant digits; integral values keep a trailing '.0' so they read back as floats."""
    text = format(value, FLOAT_FORMAT)
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _encode(value: Any, indent: int | None, level: int = 0) -> str:
    # value is already a plain tree from to_jsonable
    if isinstance(value, float):
        return float_text(value)
    if isinstance(value, (list, dict)):
        if not value:
            return "[]" if isinstance(value, list) else "{}"
        if isinstance(value, dict):
            items = [
                f"{json.dumps(k, ensure_ascii=False)}: {_encode(value[k], indent, level + 1)}" for k in sorted(value)
            ]
            opening, closing = "{", "}"
        else:
            items = [_encode(v, indent, level + 1) for v in value]
            opening, closing = "[", "]"
        if indent is None:
            return opening + ", ".join(items) + closing
        inner = "\n" + " " * (indent * (level + 1))
        return opening + inner + ("," + inner).join(items) + "\n" + " " * (indent * level) + closing
    return json.dumps(value, ensure_ascii=False)


def dumps_json(data: Any) -> str:
    return _encode(to_jsonable(data), indent=2) + "\n"


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def _csv_cell(value: Any) -> Any:
    value = to_jsonable(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return float_text(value)
    if isinstance(value, (list, dict)):
        return _encode(value, indent=None)
    return value


def dumps_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    rows = list(rows)
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
    return buf.getvalue()


def record_rows(record: RunRecord) -> list[dict[str, Any]]:
    """Flat table view of a record for CSV output."""
    payload = record.payload
    if "rows" in payload:
        return list(payload["rows"])
    if "suites" in payload:
        return [
            {"suite": s["name"], "passed": s["passed"], "worst": s.get("worst"), "detail": s.get("detail", "")}
            for s in payload["suites"]
        ]
    if "blocks" in payload:
        return [dict(b) for b in payload["blocks"]]
    spectrum = payload.get("spectrum", {})
    if "eigenvalues" not in spectrum:
        return [{k: v for k, v in spectrum.items()}]
    return [{"re": re, "im": im} for re, im in to_jsonable(spectrum.get("eigenvalues", []))]


def write_record(record: RunRecord, out_path: Path | None, fmt: str = "json") -> str:
    if fmt == "json":
        text = dumps_json(record.to_dict())
    elif fmt == "csv":
        text = dumps_csv(record_rows(record))
    else:
        raise ValueError(f"unknown output format {fmt!r}")

    if out_path is None:
        return text
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="utf-8")
    logger.info("wrote %s result: %s", fmt, out_path)
    return text
