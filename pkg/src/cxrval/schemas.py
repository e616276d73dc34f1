"""Published JSON schemas for every emitted artifact, and a checker."""

from __future__ import annotations

import csv
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

# file name -> (schema name, one record per line)
JSON_ARTIFACTS = {
    "results.jsonl": ("study_record", True),
    "protocol.jsonl": ("protocol_record", True),
    "protocol_summary.json": ("protocol_summary", False),
    "calibration.json": ("calibration", False),
    "grounding_metrics.json": ("grounding_metrics", False),
    "manifest.jsonl": ("manifest_record", True),
    "enriched.jsonl": ("enriched_annotation", True),
    "layouts.jsonl": ("phantom_layout_record", True),
}
CSV_HEADERS = {
    "roc_ms_ssim.csv": ["threshold", "tpr", "fpr"],
    "roc_chi2_inverted.csv": ["threshold", "tpr", "fpr"],
    "per_pathology.csv": ["kind", "pathology", "n", "n_occurrences", "mean", "q1", "median", "q3", "min", "max"],
}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict[str, Any]:
    text = resources.files("cxrval.data").joinpath(f"schemas/{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(obj: Any, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` when ``obj`` breaks schema ``name``."""
    jsonschema.validate(obj, load_schema(name))


def _json_errors(path: Path, name: str, per_line: bool) -> list[str]:
    validator = jsonschema.Draft202012Validator(load_schema(name))
    errors = []
    text = path.read_text(encoding="utf-8")
    docs = [(i, line) for i, line in enumerate(text.splitlines(), 1) if line.strip()] if per_line else [(1, text)]
    for lineno, doc in docs:
        try:
            obj = json.loads(doc)
        except json.JSONDecodeError as exc:
            errors.append(f"{path}:{lineno}: malformed JSON ({exc.msg})")
            continue
        for err in validator.iter_errors(obj):
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            errors.append(f"{path}:{lineno}: {where}: {err.message}")
    return errors


def _csv_errors(path: Path, header: list[str]) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        return [f"{path}: expected header {','.join(header)}"]
    bad = [i for i, r in enumerate(rows[1:], 2) if len(r) != len(header)]
    return [f"{path}:{i}: expected {len(header)} columns" for i in bad]


def check_file(path: str | Path) -> list[str]:
    """Validation errors for one artifact; unknown file names are skipped."""
    p = Path(path)
    if p.name in JSON_ARTIFACTS:
        return _json_errors(p, *JSON_ARTIFACTS[p.name])
    if p.name in CSV_HEADERS:
        return _csv_errors(p, CSV_HEADERS[p.name])
    return []


def known_artifacts(root: str | Path) -> list[Path]:
    root = Path(root)
    if root.is_file():
        return [root]
    names = set(JSON_ARTIFACTS) | set(CSV_HEADERS)
    return sorted(p for p in root.rglob("*") if p.is_file() and p.name in names)
