"""Command-line entry point: ``cxrval <subcommand> ...``.

Exit status is 0 on success (individual study failures are recorded, not
fatal), 1 when the input data cannot be used, and 2 for configuration or
usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from .adapters.base import AdapterError, ConfigError
from .anatomy import Vocabulary, VocabularyError, default_vocabulary, enrich
from .config import RunConfig, load_config
from .core import Box, RegionDetection
from .evaluation.grounding import grounding_map, grounding_miou
from .evaluation.protocol import ProtocolConfig, calibration_samples, run_protocol
from .evaluation.roc import DegenerateRocError, calibrate
from .io import ManifestError, load_manifest, read_jsonl, save_image, save_results, write_json, write_jsonl
from .phantom import PhantomSpecError, fixture_config, make_phantom_study, random_specs
from .pipeline import ordered_map, run_studies
from .schemas import CSV_HEADERS, check_file, known_artifacts

log = logging.getLogger("cxrval")

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_DATA):
        super().__init__(message)
        self.code = code


def _fmt(x: Any) -> str:
    return format(x, ".6f") if isinstance(x, float) else str(x)


def _write_csv(path: Path, header: list[str], rows: list[dict[str, Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])


def _out_dir(path: str | Path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- config ---------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--manifest", help="JSONL study manifest")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--tau-det", type=float, help="detection validity threshold")
    p.add_argument("--pad", type=float, help="ROI padding fraction")
    p.add_argument("--best-of-n", type=int, help="generations per report")
    p.add_argument("--backend", dest="default_backend", choices=("phantom", "external", "none"),
                   help="backend for roles the config leaves unbound")
    p.add_argument("--ssim-window", type=int)
    p.add_argument("--ssim-sigma", dest="ssim_window_sigma", type=float)
    p.add_argument("--dynamic-range", dest="ssim_dynamic_range", type=float)


def _run_config(args: argparse.Namespace) -> RunConfig:
    keys = ("manifest", "output_dir", "seed", "workers", "tau_det", "pad", "best_of_n", "default_backend",
            "ssim_window", "ssim_window_sigma", "ssim_dynamic_range")
    try:
        cfg = load_config(args.config).with_overrides(**{k: getattr(args, k, None) for k in keys})
        cfg.ssim_config()
    except (ConfigError, TypeError, ValueError) as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    if not cfg.manifest:
        raise CliError("no manifest given (--manifest or manifest= in the config)", EXIT_CONFIG)
    return cfg


def _setup(args: argparse.Namespace):
    cfg = _run_config(args)
    try:
        registry = cfg.build_registry()
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    try:
        studies = load_manifest(cfg.manifest)  # type: ignore[arg-type]
    except (ManifestError, OSError) as exc:
        raise CliError(f"{cfg.manifest}: {exc}") from None
    return cfg, registry, studies


# -- subcommands ----------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cfg, registry, studies = _setup(args)
    records = run_studies(studies, registry, cfg.score_config(), cfg.workers)
    out = _out_dir(cfg.output_dir)
    save_results(records, out / "results.jsonl")
    n_err = sum(r["status"] == "error" for r in records)
    log.info("scored %d studies (%d errors) -> %s", len(records), n_err, out / "results.jsonl")
    return EXIT_OK


def _read_regions(path: Path) -> tuple[Optional[list[RegionDetection]], dict[str, list[RegionDetection]]]:
    def parse(items: list[dict[str, Any]]) -> list[RegionDetection]:
        return [RegionDetection(r["region_name"], _box(r["box"]), float(r.get("confidence", 1.0))) for r in items]

    text = path.read_text(encoding="utf-8").strip()
    if not text:
        return [], {}
    try:
        doc = json.loads(text)
        if isinstance(doc, dict) and "regions" in doc and "study_id" not in doc:
            return parse(doc["regions"]), {}
    except json.JSONDecodeError:
        pass
    per_study = {rec["study_id"]: parse(rec["regions"]) for rec in read_jsonl(path)}
    return None, per_study


def _box(v: Any) -> Box:
    if isinstance(v, dict):
        return Box.from_dict(v)
    return Box(*(float(c) for c in v))


def cmd_enrich(args: argparse.Namespace) -> int:
    vocab = Vocabulary.load(args.vocabulary) if args.vocabulary else default_vocabulary()
    try:
        shared, per_study = _read_regions(Path(args.regions))
        annotations = list(read_jsonl(args.annotations))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read enrichment inputs: {exc}") from None
    out_rows = []
    for i, ann in enumerate(annotations, 1):
        sid = ann.get("study_id")
        regions = shared if shared is not None else per_study.get(sid)
        if not regions:
            raise CliError(f"annotation {ann.get('id', i)}: no region detections for study {sid!r}")
        try:
            e = enrich(ann["pathology"], _box(ann["box"]), regions, args.iou_floor, args.bilateral_floor, vocab)
        except VocabularyError as exc:
            raise CliError(str(exc)) from None
        except (KeyError, ValueError) as exc:
            raise CliError(f"annotation {ann.get('id', i)}: {exc}") from None
        out_rows.append({
            "id": str(ann.get("id", i)), "study_id": sid, "pathology": e.pathology.value,
            "box": list(e.box.coords()), "regions": list(e.regions), "caption": e.caption,
            "gt_box": e.as_gt_box().to_dict(),
        })
    out = _out_dir(args.out)
    write_jsonl(out_rows, out / "enriched.jsonl")
    log.info("enriched %d annotations -> %s", len(out_rows), out / "enriched.jsonl")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        records = list(read_jsonl(args.results))
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    ms, chi_inv, labels = calibration_samples(records)
    results = {}
    out = _out_dir(args.out or Path(args.results).parent)
    try:
        for name, scores in (("ms_ssim", ms), ("chi2_inverted", chi_inv)):
            res, curve = calibrate(scores, labels, name)
            results[name] = res.to_dict()
            _write_csv(out / f"roc_{name}.csv", CSV_HEADERS[f"roc_{name}.csv"], curve.to_rows())
    except DegenerateRocError as exc:
        raise CliError(str(exc)) from None
    results["n_samples"] = len(labels)
    write_json(results, out / "calibration.json")
    for name in ("ms_ssim", "chi2_inverted"):
        r = results[name]
        log.info("%s: threshold %.3f  tpr %.3f  fpr %.3f  J %.3f", name, r["threshold"], r["tpr_at"], r["fpr_at"], r["j"])
    return EXIT_OK


def _phantom_specs(args: argparse.Namespace) -> list[dict[str, Any]]:
    cfg: dict[str, Any] = dict(fixture_config())
    if args.spec:
        try:
            doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read phantom spec: {exc}") from None
        if isinstance(doc, dict) and "studies" in doc:
            return list(doc["studies"])
        if isinstance(doc, list):
            return doc
        cfg.update(doc)
    if args.count is not None:
        cfg["count"] = args.count
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        return random_specs(**cfg)
    except TypeError as exc:
        raise CliError(f"bad phantom spec: {exc}") from None


def cmd_phantom(args: argparse.Namespace) -> int:
    if args.count is not None and args.count < 0:
        raise CliError("count must be non-negative", EXIT_CONFIG)
    specs = _phantom_specs(args)
    out = _out_dir(args.out)
    images = _out_dir(out / "images")
    manifest, layouts = [], []
    for i, spec in enumerate(specs):
        spec = dict(spec)
        spec.setdefault("study_id", f"phantom-{i:03d}")
        try:
            study, layout = make_phantom_study(spec)
        except (PhantomSpecError, ValueError) as exc:
            raise CliError(f"study {spec['study_id']}: {exc}") from None
        rel = f"images/{study.study_id}.png"
        save_image(study.image, images / f"{study.study_id}.png")
        rec = {"study_id": study.study_id, "image_path": rel, "report_text": study.report_text,
               "view": study.view.value, "gt_boxes": [b.to_dict() for b in study.gt_boxes or ()],
               "gt_pathologies": sorted(p.value for p in study.gt_pathologies or ()), "seed": study.seed}
        manifest.append(rec)
        layouts.append({"study_id": study.study_id, **layout.to_dict()})
    write_jsonl(manifest, out / "manifest.jsonl")
    write_jsonl(layouts, out / "layouts.jsonl")
    log.info("wrote %d phantom studies -> %s", len(manifest), out / "manifest.jsonl")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    metrics = [m.strip() for m in (args.metrics or "").split(",") if m.strip()]
    unknown = set(metrics) - {"map", "miou"}
    if unknown:
        raise CliError(f"unknown metrics: {', '.join(sorted(unknown))}", EXIT_CONFIG)
    if not metrics and not args.protocol:
        args.protocol = True
    cfg, registry, studies = _setup(args)
    out = _out_dir(cfg.output_dir)

    if metrics:
        gts = {s.study_id: list(s.gt_boxes) for s in studies if s.gt_boxes}
        if not gts:
            raise CliError("requested grounding metrics but the manifest has no gt_boxes")

        def ground(s):
            try:
                return list(registry.localize(s.image, s.report_text).boxes)
            except (AdapterError, OSError, ValueError) as exc:
                log.warning("%s: grounding failed: %s", s.study_id, exc)
                return None

        found = ordered_map(ground, studies, cfg.workers)
        preds = {s.study_id: p or [] for s, p in zip(studies, found)}
        report: dict[str, Any] = {"n_studies": len(gts), "iou_threshold": args.iou_threshold,
                                  "n_errors": sum(p is None for p in found)}
        if "map" in metrics:
            report.update(grounding_map(preds, gts, args.iou_threshold))
        if "miou" in metrics:
            report["miou"] = grounding_miou(preds, gts)
        write_json(report, out / "grounding_metrics.json")
        log.info("grounding: %s", {k: report[k] for k in ("map", "miou") if k in report})

    if args.protocol:
        pcfg = ProtocolConfig(cfg.score_config(), seed=cfg.seed, delta=cfg.delta, workers=cfg.workers)
        try:
            records, summary = run_protocol(studies, registry, pcfg)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        save_results([r.to_dict() for r in records], out / "protocol.jsonl")
        write_json(summary, out / "protocol_summary.json")
        rows = []
        for kind in ("real", "false"):
            for tag, st in summary["per_pathology"][kind].items():
                rows.append({"kind": kind, "pathology": tag, **st})
        _write_csv(out / "per_pathology.csv", CSV_HEADERS["per_pathology.csv"], rows)
        log.info("protocol scenarios: %s", summary["scenario_counts"])
    return EXIT_OK


def cmd_schema_check(args: argparse.Namespace) -> int:
    files = [f for p in args.paths for f in known_artifacts(p)]
    if not files:
        raise CliError("no known artifacts found under " + ", ".join(args.paths))
    failed = 0
    for f in files:
        errors = check_file(f)
        if errors:
            failed += 1
            for e in errors[:20]:
                print(e, file=sys.stderr)
        print(f"{'FAIL' if errors else 'ok  '} {f}")
    return EXIT_DATA if failed else EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cxrval", description="Report-grounded validation of chest X-ray reports.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="score every study in a manifest")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enrich", help="attach anatomical regions and captions to pathology boxes")
    p.add_argument("annotations", help="JSONL of {id, study_id, pathology, box}")
    p.add_argument("--regions", required=True, help='JSON {"regions": [...]} or JSONL per study_id')
    p.add_argument("--vocabulary", help="region vocabulary JSON (default: shipped)")
    p.add_argument("--iou-floor", type=float, default=0.05)
    p.add_argument("--bilateral-floor", type=float, default=0.1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("calibrate", help="ROC and Youden thresholds from scored records")
    p.add_argument("results", help="results.jsonl or protocol.jsonl")
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="grounding metrics and the real/false report protocol")
    _add_run_flags(p)
    p.add_argument("--metrics", help="comma list of map,miou")
    p.add_argument("--protocol", action="store_true", help="run the real/false report protocol")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", help="write a seeded phantom study set")
    p.add_argument("--spec", help="JSON: generator settings, a list of study specs, or {studies: [...]}")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="phantoms")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("schema-check", help="validate emitted artifacts against their schemas")
    p.add_argument("paths", nargs="+", help="files or directories")
    p.set_defaults(func=cmd_schema_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
