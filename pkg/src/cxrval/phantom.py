"""Deterministic chest-like phantoms with a known layout.

A phantom is the sum of three layers: a base anatomy (body, lungs,
mediastinum, heart, trachea, clavicles), one additive layer per rendered
finding, and a seeded texture jitter confined to the body. Because every
layer is a pure function of (size, integer offset, seed), the layout can be
recovered from pixels and a report re-rendered exactly, which is what the
phantom backends in :mod:`cxrval.adapters.phantom` rely on.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .adapters.text import RuleTextExtractor
from .anatomy import default_vocabulary, synthesize_caption
from .core import Box, PathologyLabel, Study, View

MIN_SIZE = 176
SIDES = ("right", "left")


class PhantomSpecError(ValueError):
    pass


@lru_cache(maxsize=1)
def layout_table() -> dict[str, Any]:
    text = resources.files("cxrval.data").joinpath("phantom_layout.json").read_text(encoding="utf-8")
    return json.loads(text)


def localizable_labels() -> list[PathologyLabel]:
    return [PathologyLabel.parse(k) for k in sorted(layout_table()["pathologies"])]


def allowed_zones(label: PathologyLabel) -> list[str]:
    entry = layout_table()["pathologies"].get(label.value)
    if entry is None:
        return []
    if entry["default_laterality"] == "midline":
        return list(entry["zones"])
    return [f"{side} {z}" for z in entry["zones"] for side in SIDES]


def _default_zones(label: PathologyLabel, laterality: str) -> list[str]:
    entry = layout_table()["pathologies"][label.value]
    if entry["default_laterality"] == "midline":
        return [entry["zones"][0]]
    if laterality in ("unspecified", "", None):
        laterality = entry["default_laterality"]
    sides = SIDES if laterality == "bilateral" else (laterality,)
    return [f"{side} {entry['zones'][0]}" for side in sides]


@dataclass(frozen=True, order=True)
class Finding:
    label: PathologyLabel
    zone: str


def _sort_key(f: Finding) -> tuple[str, str]:
    return (f.label.value, f.zone)


def canonical_findings(findings: Iterable[Finding]) -> tuple[Finding, ...]:
    return tuple(sorted(set(findings), key=_sort_key))


def resolve_findings(items: Sequence[dict[str, Any] | str]) -> tuple[Finding, ...]:
    """Turn phantom-spec pathology entries into concrete (label, zone) findings.

    An entry is either a bare class name or a dict with ``label`` and an
    optional ``zone`` or ``laterality``.
    """
    out: list[Finding] = []
    for item in items:
        if isinstance(item, str):
            item = {"label": item}
        raw = item.get("label", item.get("pathology"))
        if raw is None:
            raise PhantomSpecError(f"pathology entry without a label: {item!r}")
        try:
            label = PathologyLabel.parse(raw)
        except ValueError as exc:
            raise PhantomSpecError(str(exc)) from None
        if label is PathologyLabel.NO_FINDING:
            continue
        zones = allowed_zones(label)
        if "zone" in item:
            zone = " ".join(str(item["zone"]).lower().split())
            if zone not in default_vocabulary():
                raise PhantomSpecError(f"unknown zone name {item['zone']!r}")
            if zone not in zones:
                raise PhantomSpecError(f"{label.value} cannot be rendered in {zone!r}; allowed: {zones}")
            out.append(Finding(label, zone))
        else:
            lat = item.get("laterality", "unspecified")
            if lat not in ("left", "right", "bilateral", "unspecified"):
                raise PhantomSpecError(f"unknown laterality {lat!r}")
            out.extend(Finding(label, z) for z in _default_zones(label, lat))
    return canonical_findings(out)


def report_for(findings: Sequence[Finding]) -> str:
    """Render findings as one caption sentence per pathology."""
    if not findings:
        return "No acute findings."
    by_label: dict[PathologyLabel, list[str]] = {}
    for f in canonical_findings(findings):
        by_label.setdefault(f.label, []).append(f.zone)
    return " ".join(synthesize_caption(label, zones) + "." for label, zones in by_label.items())


@lru_cache(maxsize=1)
def _extractor() -> RuleTextExtractor:
    return RuleTextExtractor(default_vocabulary().regions)


def findings_from_report(report: str) -> tuple[Finding, ...]:
    """Parse a report into renderable findings.

    Region names in the same sentence pick the zone; otherwise the sentence's
    laterality (or the class default) does.
    """
    out: list[Finding] = []
    for m in _extractor().mentions(report):
        if m.label is PathologyLabel.NO_FINDING:
            continue
        zones = allowed_zones(m.label)
        if not zones:
            continue
        named = [r for r in m.regions if r in zones]
        out.extend(Finding(m.label, z) for z in (named or _default_zones(m.label, m.laterality)))
    return canonical_findings(out)


# -- geometry -----------------------------------------------------------------


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    c = np.arange(size, dtype=np.float64) + 0.5
    return c[None, :], c[:, None]  # xs (1, S), ys (S, 1)


def _ellipse(size: int, offset: tuple[int, int], center: Sequence[float], axes: Sequence[float],
             scale: float = 1.0) -> np.ndarray:
    xs, ys = _grid(size)
    cx, cy = center[0] * size + offset[0], center[1] * size + offset[1]
    ax, ay = axes[0] * size * scale, axes[1] * size * scale
    return ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2 <= 1.0


def _ellipse_radius(size: int, offset: tuple[int, int], center: Sequence[float], axes: Sequence[float]) -> np.ndarray:
    xs, ys = _grid(size)
    cx, cy = center[0] * size + offset[0], center[1] * size + offset[1]
    return np.sqrt(((xs - cx) / (axes[0] * size)) ** 2 + ((ys - cy) / (axes[1] * size)) ** 2)


def _frac_box_px(box: Sequence[float], size: int, offset: tuple[int, int]) -> tuple[float, float, float, float]:
    return (box[0] * size + offset[0], box[1] * size + offset[1], box[2] * size + offset[0], box[3] * size + offset[1])


def _box_mask(size: int, px_box: tuple[float, float, float, float]) -> np.ndarray:
    xs, ys = _grid(size)
    return (xs >= px_box[0]) & (xs < px_box[2]) & (ys >= px_box[1]) & (ys < px_box[3])


def region_boxes(size: int, offset: tuple[int, int] = (0, 0)) -> dict[str, Box]:
    """The 36 anchor region boxes on the pixel grid, translated and clamped to the image."""
    out: dict[str, Box] = {}
    for name, fb in layout_table()["regions"].items():
        # snap before translating so an integer offset moves every box by exactly that much
        x0, y0, x1, y1 = (float(round(v)) for v in _frac_box_px(fb, size, (0, 0)))
        x0, y0, x1, y1 = x0 + offset[0], y0 + offset[1], x1 + offset[0], y1 + offset[1]
        x0, y0, x1, y1 = max(x0, 0.0), max(y0, 0.0), min(x1, float(size)), min(y1, float(size))
        if x0 < x1 and y0 < y1:
            out[name] = Box(x0, y0, x1, y1, label=name)
    return out


@lru_cache(maxsize=256)
def _base(size: int, offset: tuple[int, int], heart_scale: float = 1.0, widened: bool = False) -> np.ndarray:
    t = layout_table()
    inten, st = t["intensity"], t["structures"]
    img = np.zeros((size, size), dtype=np.float64)
    img[_ellipse(size, offset, st["body"]["center"], st["body"]["axes"])] = inten["body"]
    for side in ("right lung", "left lung"):
        img[_ellipse(size, offset, st[side]["center"], st[side]["axes"])] = inten["lung"]
    img[_box_mask(size, _frac_box_px(st["mediastinum"]["box"], size, offset))] = inten["mediastinum"]
    if widened:
        img[_box_mask(size, _frac_box_px(st["widened mediastinum"]["box"], size, offset))] = inten["mediastinum"]
    img[_ellipse(size, offset, st["heart"]["center"], st["heart"]["axes"], heart_scale)] = inten["heart"]
    img[_box_mask(size, _frac_box_px(st["trachea"]["box"], size, offset))] = inten["trachea"]
    for side in ("right clavicle", "left clavicle"):
        img[_box_mask(size, _frac_box_px(st[side]["box"], size, offset))] = inten["clavicle"]
    img.setflags(write=False)
    return img


def base_image(size: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Clean anatomy without findings or jitter (read-only)."""
    return _base(size, tuple(offset))


def body_mask(size: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    st = layout_table()["structures"]["body"]
    return _ellipse(size, tuple(offset), st["center"], st["axes"])


def lung_mask(size: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    st = layout_table()["structures"]
    return _ellipse(size, offset, st["right lung"]["center"], st["right lung"]["axes"]) | _ellipse(
        size, offset, st["left lung"]["center"], st["left lung"]["axes"]
    )


def _side_of(zone: str) -> Optional[str]:
    first = zone.split(" ", 1)[0]
    return first if first in SIDES else None


def _finding_layer(size: int, offset: tuple[int, int], f: Finding) -> np.ndarray:
    t = layout_table()
    entry = t["pathologies"][f.label.value]
    shape = entry["shape"]
    if shape == "heart_scale":
        return _base(size, offset, heart_scale=entry["scale"]) - _base(size, offset)
    if shape == "widen":
        return _base(size, offset, widened=True) - _base(size, offset)

    zx0, zy0, zx1, zy1 = _frac_box_px(t["regions"][f.zone], size, offset)
    zw, zh = zx1 - zx0, zy1 - zy0
    xs, ys = _grid(size)
    u = (xs - zx0) / zw
    v = (ys - zy0) / zh
    side = _side_of(f.zone)
    u_lat = u if side != "left" else 1.0 - u  # 0 at the lateral edge
    amp = float(entry.get("amplitude", 0.0))
    inside = _box_mask(size, (zx0, zy0, zx1, zy1))
    layer = np.zeros((size, size), dtype=np.float64)

    def at(ul: float, vv: float) -> tuple[float, float]:
        uu = ul if side != "left" else 1.0 - ul
        return zx0 + uu * zw, zy0 + vv * zh

    if shape in ("blob", "haze"):
        cx, cy = zx0 + zw / 2, zy0 + zh / 2
        sigma = entry["sigma"] * min(zw, zh)
        g = amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
        layer = np.where(g >= 0.02 * amp, g, 0.0)
    elif shape in ("crescent", "pleural_band"):
        lung = t["structures"][f"{side} lung"]
        r = _ellipse_radius(size, offset, lung["center"], lung["axes"])
        lo, hi = entry["band"]
        layer = np.where((r >= lo) & (r <= hi) & (u_lat < 0.5), amp, 0.0)
    elif shape == "patch":
        cx, cy = at(*entry["center"])
        rad = entry["radius"] * min(zw, zh)
        period = entry["period"] * size
        tex = 0.6 + 0.4 * np.cos(2 * np.pi * (xs - cx) / period) * np.cos(2 * np.pi * (ys - cy) / period)
        layer = np.where((xs - cx) ** 2 + (ys - cy) ** 2 <= rad**2, amp * tex, 0.0)
    elif shape == "nodule":
        cx, cy = at(*entry["center"])
        rad = entry["radius"] * size
        layer = np.where((xs - cx) ** 2 + (ys - cy) ** 2 <= rad**2, amp, 0.0)
    elif shape == "ellipse":
        cx, cy = at(*entry["center"])
        rx, ry = entry["radii"][0] * zw, entry["radii"][1] * zh
        layer = np.where(((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0, amp, 0.0)
    elif shape == "band":
        lo, hi = entry["x"]
        sel = (np.abs(v - entry["y"]) <= entry["half_height"]) & (u_lat >= lo) & (u_lat <= hi)
        layer = np.where(sel, amp, 0.0)
    elif shape == "meniscus":
        layer = np.where(v >= entry["level"] + entry["rise"] * u_lat, amp, 0.0)
        layer = np.where(body_mask(size, offset), layer, 0.0)
    elif shape == "gap":
        clav = _frac_box_px(t["structures"][f"{side} clavicle"]["box"], size, offset)
        sel = _box_mask(size, clav) & (np.abs(u - entry["center"]) < entry["half_width"])
        layer = np.where(sel, amp, 0.0)
    elif shape == "tube":
        cx = zx0 + zw / 2
        hw = entry["half_width"] * size
        layer = np.broadcast_to(np.where(np.abs(xs - cx) <= hw, amp, 0.0), (size, size))
    else:  # pragma: no cover - guarded by the shipped table
        raise PhantomSpecError(f"unknown shape {shape!r}")
    return np.where(inside, layer, 0.0)


@dataclass(frozen=True)
class Template:
    """Sparse additive layer of one finding: flat pixel indices and values."""

    finding: Finding
    size: int
    index: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    box: Box

    @property
    def layer(self) -> np.ndarray:
        out = np.zeros(self.size * self.size, dtype=np.float64)
        out[self.index] = self.values
        return out.reshape(self.size, self.size)


@lru_cache(maxsize=128)
def templates(size: int, offset: tuple[int, int] = (0, 0)) -> tuple[Template, ...]:
    """One additive layer per renderable (label, zone), with its support box."""
    out = []
    for label in localizable_labels():
        for zone in allowed_zones(label):
            f = Finding(label, zone)
            layer = _finding_layer(size, offset, f)
            rows = np.flatnonzero(np.abs(layer).any(axis=1))
            cols = np.flatnonzero(np.abs(layer).any(axis=0))
            box = Box(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1),
                      label=label.value, phrase=synthesize_caption(label, [zone]))
            idx = np.flatnonzero(layer.ravel())
            out.append(Template(f, size, idx, layer.ravel()[idx].copy(), box))
    return tuple(out)


def template_for(size: int, offset: tuple[int, int], finding: Finding) -> Template:
    for t in templates(size, tuple(offset)):
        if t.finding == finding:
            return t
    raise PhantomSpecError(f"no template for {finding}")


def jitter_layer(seed: int, size: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    sigma = layout_table()["jitter_sigma"]
    noise = np.random.default_rng(seed).normal(0.0, sigma, size=(size, size))
    return np.where(body_mask(size, offset), noise, 0.0)


def render(findings: Sequence[Finding], size: int, offset: tuple[int, int] = (0, 0),
           seed: Optional[int] = 0) -> np.ndarray:
    """Render a uint8 phantom; ``seed=None`` omits the jitter layer."""
    offset = (int(offset[0]), int(offset[1]))
    img = _base(size, offset).copy()
    flat = img.ravel()
    for f in canonical_findings(findings):
        t = template_for(size, offset, f)
        flat[t.index] += t.values
    if seed is not None:
        img += jitter_layer(seed, size, offset)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# -- layout recovery ----------------------------------------------------------


def _bbox(mask: np.ndarray) -> Optional[tuple[int, int, int, int]]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


def _offset_from_bbox(found: tuple[int, int, int, int], ref: tuple[int, int, int, int],
                      shape: tuple[int, int]) -> tuple[int, int]:
    h, w = shape
    dx = found[0] - ref[0] if found[0] > 0 else found[2] - ref[2]
    dy = found[1] - ref[1] if found[1] > 0 else found[3] - ref[3]
    if found[0] <= 0 and found[2] >= w - 1:
        dx = 0
    if found[1] <= 0 and found[3] >= h - 1:
        dy = 0
    return dx, dy


def detect_offset(image: np.ndarray) -> Optional[tuple[int, int]]:
    """Integer translation of a square phantom, from the body outline."""
    img = np.asarray(image)
    if img.shape[0] != img.shape[1] or img.shape[0] < MIN_SIZE:
        return None
    found = _bbox(img > 0)
    if found is None:
        return None
    ref = _bbox(body_mask(img.shape[0]))
    return _offset_from_bbox(found, ref, img.shape)  # type: ignore[arg-type]


def offset_from_lung_mask(mask: np.ndarray) -> Optional[tuple[int, int]]:
    m = np.asarray(mask, dtype=bool)
    if m.shape[0] != m.shape[1]:
        return None
    found = _bbox(m)
    if found is None:
        return None
    ref = _bbox(lung_mask(m.shape[0]))
    return _offset_from_bbox(found, ref, m.shape)  # type: ignore[arg-type]


# -- decomposition ------------------------------------------------------------


@lru_cache(maxsize=16)
def _design(size: int, offset: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, tuple[Finding, ...]]:
    temps = templates(size, offset)
    idx = np.unique(np.concatenate([t.index for t in temps]))
    matrix = np.zeros((idx.size, len(temps)), dtype=np.float64)
    for j, t in enumerate(temps):
        matrix[np.searchsorted(idx, t.index), j] = t.values
    return idx, matrix, tuple(t.finding for t in temps)


_decomp_cache: "OrderedDict[bytes, Optional[dict[Finding, float]]]" = OrderedDict()
_decomp_lock = threading.Lock()


def decompose(image: np.ndarray) -> Optional[dict[Finding, float]]:
    """Least-squares loading of every finding template on an image.

    Returns ``None`` when no phantom body is found. A loading near 1 means
    the finding is rendered at full strength; near 0 means absent.
    """
    img = np.ascontiguousarray(image)
    key = hashlib.sha1(img.tobytes() + repr((img.shape, img.dtype.str)).encode()).digest()
    with _decomp_lock:
        if key in _decomp_cache:
            _decomp_cache.move_to_end(key)
            return _decomp_cache[key]
    offset = detect_offset(img)
    result: Optional[dict[Finding, float]] = None
    if offset is not None:
        size = img.shape[0]
        idx, matrix, findings = _design(size, offset)
        resid = img.astype(np.float64).ravel()[idx] - _base(size, offset).ravel()[idx]
        coef, _ = nnls(matrix, resid)
        result = {f: float(c) for f, c in zip(findings, coef)}
    with _decomp_lock:
        _decomp_cache[key] = result
        while len(_decomp_cache) > 256:
            _decomp_cache.popitem(last=False)
    return result


# -- studies ------------------------------------------------------------------


@dataclass(frozen=True)
class PhantomLayout:
    size: int
    offset: tuple[int, int]
    seed: int
    findings: tuple[Finding, ...]
    finding_boxes: tuple[Box, ...]
    regions: dict[str, Box] = field(compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "size": self.size,
            "offset": list(self.offset),
            "seed": self.seed,
            "findings": [
                {"label": f.label.value, "zone": f.zone, "box": b.to_dict()}
                for f, b in zip(self.findings, self.finding_boxes)
            ],
        }


def make_phantom_study(spec: dict[str, Any]) -> tuple[Study, PhantomLayout]:
    """Build a phantom study from a spec.

    ``spec`` keys: ``pathologies`` (class names, ``{"label", "zone"}`` or
    ``{"label", "laterality"}``), ``seed``, ``size`` (default 256),
    ``offset`` (integer ``[dx, dy]``), ``study_id`` and ``view``.
    """
    size = int(spec.get("size", 256))
    if size < MIN_SIZE:
        raise PhantomSpecError(f"phantom size must be >= {MIN_SIZE}, got {size}")
    seed = int(spec.get("seed", 0))
    off = spec.get("offset", (0, 0))
    if len(off) != 2 or any(int(o) != o for o in off):
        raise PhantomSpecError(f"offset must be two integers, got {off!r}")
    offset = (int(off[0]), int(off[1]))
    findings = resolve_findings(spec.get("pathologies", []))
    image = render(findings, size, offset, seed)
    boxes = tuple(template_for(size, offset, f).box for f in findings)
    gt_boxes = tuple(
        Box(b.x_min, b.y_min, b.x_max, b.y_max, label=f.label.value, phrase=synthesize_caption(f.label, [f.zone]))
        for f, b in zip(findings, boxes)
    )
    labels = frozenset(f.label for f in findings) or frozenset({PathologyLabel.NO_FINDING})
    study = Study(
        study_id=str(spec.get("study_id", f"phantom-{seed}")),
        report_text=report_for(findings),
        view=View(spec.get("view", "PA")),
        gt_boxes=gt_boxes,
        gt_pathologies=labels,
        seed=seed,
        pixels=image,
    )
    return study, PhantomLayout(size, offset, seed, findings, boxes, region_boxes(size, offset))


def random_specs(count: int, seed: int, size: int = 256, p_clean: float = 0.05, max_findings: int = 2,
                 max_offset: int = 4, id_prefix: str = "phantom") -> list[dict[str, Any]]:
    """Seeded phantom specs: each study draws 1..max_findings distinct classes."""
    rng = np.random.default_rng(seed)
    labels = localizable_labels()
    specs = []
    for i in range(count):
        items: list[dict[str, Any]] = []
        if rng.random() >= p_clean:
            k = int(rng.integers(1, max_findings + 1))
            for j in sorted(rng.choice(len(labels), size=k, replace=False)):
                label = labels[int(j)]
                zones = allowed_zones(label)
                pick = int(rng.integers(len(zones)))
                if layout_table()["pathologies"][label.value]["default_laterality"] == "bilateral" and rng.random() < 0.5:
                    items.append({"label": label.value, "laterality": "bilateral"})
                else:
                    items.append({"label": label.value, "zone": zones[pick]})
        specs.append({
            "study_id": f"{id_prefix}-{i:03d}",
            "pathologies": items,
            "seed": int(rng.integers(0, 2**31 - 1)),
            "size": size,
            "offset": [int(v) for v in rng.integers(-max_offset, max_offset + 1, size=2)],
        })
    return specs


@lru_cache(maxsize=1)
def fixture_config() -> dict[str, Any]:
    return json.loads(resources.files("cxrval.data").joinpath("phantom_fixture.json").read_text(encoding="utf-8"))


def fixture_studies(count: Optional[int] = None) -> list[Study]:
    """The shipped seeded phantom fixture set (100 studies by default)."""
    cfg = dict(fixture_config())
    if count is not None:
        cfg["count"] = count
    specs = random_specs(**cfg)
    return [make_phantom_study(s)[0] for s in specs]
