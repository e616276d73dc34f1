"""Manifest ingestion, image IO and canonical result serialization."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np
from PIL import Image

from .core import Box, PathologyLabel, Study, View

FLOAT_DECIMALS = 6


class ManifestError(ValueError):
    """A manifest line could not be turned into a :class:`Study`."""


def load_image(path: str | Path) -> np.ndarray:
    """Read a grayscale PNG/JPEG.

    8-bit images come back as ``uint8``. Deeper images are max-normalized onto
    the 0..255 range as ``float64`` so every raster shares one dynamic range.
    """
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
            arr = np.asarray(im).astype(np.float64)
            peak = arr.max()
            return arr * (255.0 / peak) if peak > 0 else arr
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im).copy()


def save_image(image: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def _study_from_record(rec: dict[str, Any], base_dir: Path, lineno: int) -> Study:
    for key in ("study_id", "image_path", "report_text"):
        if key not in rec:
            raise ManifestError(f"line {lineno}: missing {key}")
    if not isinstance(rec["study_id"], str) or not rec["study_id"]:
        raise ManifestError(f"line {lineno}: study_id must be a non-empty string")
    if not isinstance(rec["report_text"], str):
        raise ManifestError(f"line {lineno}: report_text must be a string")
    try:
        view = View(rec.get("view", "PA"))
    except ValueError:
        raise ManifestError(f"line {lineno}: view must be PA or AP, got {rec.get('view')!r}") from None
    gt_boxes = None
    if rec.get("gt_boxes") is not None:
        try:
            gt_boxes = tuple(Box.from_dict(b) for b in rec["gt_boxes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"line {lineno}: invalid gt box: {exc}") from None
    gt_pathologies = None
    if rec.get("gt_pathologies") is not None:
        try:
            gt_pathologies = frozenset(PathologyLabel.parse(p) for p in rec["gt_pathologies"])
        except ValueError as exc:
            raise ManifestError(f"line {lineno}: {exc}") from None
    seed = rec.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ManifestError(f"line {lineno}: seed must be an integer")
    image_path = Path(rec["image_path"])
    if not image_path.is_absolute():
        image_path = base_dir / image_path
    return Study(
        study_id=rec["study_id"],
        report_text=rec["report_text"],
        view=view,
        image_path=str(image_path),
        gt_boxes=gt_boxes,
        gt_pathologies=gt_pathologies,
        seed=seed,
    )


def load_manifest(path: str | Path) -> list[Study]:
    """Parse a JSONL manifest into studies, preserving file order.

    Relative ``image_path`` values resolve against the manifest's directory.
    Images are not read here; a missing file surfaces on first pixel access.
    """
    path = Path(path)
    base_dir = path.parent
    studies: list[Study] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            study = _study_from_record(rec, base_dir, lineno)
            if study.study_id in seen:
                raise ManifestError(f"line {lineno}: duplicate study_id {study.study_id!r}")
            seen.add(study.study_id)
            studies.append(study)
    return studies


def study_to_record(study: Study, relative_to: str | Path | None = None) -> dict[str, Any]:
    image_path = study.image_path
    if relative_to is not None and image_path is not None:
        try:
            image_path = str(Path(image_path).resolve().relative_to(Path(relative_to).resolve()))
        except ValueError:
            pass
    rec: dict[str, Any] = {
        "study_id": study.study_id,
        "image_path": image_path,
        "report_text": study.report_text,
        "view": study.view.value,
    }
    if study.gt_boxes is not None:
        rec["gt_boxes"] = [b.to_dict() for b in study.gt_boxes]
    if study.gt_pathologies is not None:
        rec["gt_pathologies"] = sorted(p.value for p in study.gt_pathologies)
    if study.seed is not None:
        rec["seed"] = study.seed
    return rec


def save_manifest(studies: Iterable[Study], path: str | Path) -> None:
    path = Path(path)
    write_jsonl((study_to_record(s, relative_to=path.parent) for s in studies), path)


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite float {x!r} cannot be serialized")
        return format(x, f".{FLOAT_DECIMALS}f")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(json.dumps(str(k), ensure_ascii=False) + ":" + _encode(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return json.dumps(obj.value, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and every float fixed at 6 decimals.

    NaN and infinities raise ``ValueError``.
    """
    return _encode(obj)


def write_jsonl(records: Iterable[Any], path: str | Path) -> None:
    text = "".join(canonical_json(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None


def save_results(records: Iterable[dict[str, Any]], path: str | Path) -> None:
    """Write one canonical JSON object per line.

    Serialization happens before the file is opened, so a NaN anywhere leaves
    no partial output behind.
    """
    write_jsonl(list(records), path)


def load_results(path: str | Path) -> list[dict[str, Any]]:
    return list(read_jsonl(path))


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(canonical_json(obj) + "\n", encoding="utf-8")
