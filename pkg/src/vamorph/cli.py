"""Command-line entry point: ``vamorph <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 numerical failure.
Every artifact is written atomically; ``--workers`` never changes outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseline
from .dataset import (
    Manifest,
    augment_dataset,
    read_manifest,
    rejections_jsonl,
    split_by_identity,
    translate_dataset,
    run_parallel,
    write_manifest,
)
from .errors import ComputationError, ValidationError
from .imageio import atomic_write_bytes, atomic_write_text, png_bytes, read_image
from .metrics import Prediction, evaluate, heatmap, heatmap_csv, heatmap_image, read_predictions, write_predictions
from .nir import NirReferenceStats, compute_reference_stats
from .va_space import build_grid, load_template, plan_morphs

log = logging.getLogger("vamorph")

DEFAULT_SEED = 42
EXIT_VALIDATION, EXIT_IO, EXIT_COMPUTE = 2, 3, 4


def _plan_rows(template):
    grid = build_grid(template)
    rows = [{"index": 0, "kind": "neutral", "angle_deg": None, "intensity": 0.0, "valence": 0.0,
             "arousal": 0.0, "apex_a": None, "apex_b": None, "t": None, "r": 0.0, "label": "NEUTRAL"}]
    for i, plan in enumerate(plan_morphs(grid, template), 1):
        p = plan.target
        rows.append({"index": i, "kind": p.kind, "angle_deg": p.angle_deg, "intensity": p.intensity,
                     "valence": p.valence, "arousal": p.arousal, "apex_a": plan.apex_a,
                     "apex_b": plan.apex_b, "t": plan.t, "r": plan.r, "label": plan.label()})
    return rows


def cmd_plan(args) -> int:
    template = load_template(args.template)
    rows = _plan_rows(template)
    if args.format == "json":
        text = json.dumps({"template": template.to_dict(), "points": rows}, indent=2) + "\n"
    else:
        head = f"{'#':>4} {'kind':<12}{'angle':>8}{'r':>6}{'valence':>10}{'arousal':>10}  {'t':>5}  label"
        lines = [head]
        for row in rows:
            angle = "-" if row["angle_deg"] is None else f"{row['angle_deg']:.1f}"
            t = "-" if row["t"] is None else f"{row['t']:.3f}"
            lines.append(f"{row['index']:>4} {row['kind']:<12}{angle:>8}{row['intensity']:>6.2f}"
                         f"{row['valence']:>10.4f}{row['arousal']:>10.4f}  {t:>5}  {row['label']}")
        counts = {k: sum(r["kind"] == k for r in rows) for k in ("neutral", "prototype", "synthesized")}
        lines.append(f"{len(rows)} points: {counts['neutral']} neutral, {counts['prototype']} prototype, "
                     f"{counts['synthesized']} synthesized")
        text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_make_fixture(args) -> int:
    from .fixture import make_fixture

    path = make_fixture(args.out_dir, template=load_template(args.template))
    print(path)
    return 0


def cmd_augment(args) -> int:
    template = load_template(args.template)
    manifest = read_manifest(args.manifest, validate_files=True)
    out_dir = Path(args.out_dir)
    result, rejections = augment_dataset(manifest, template, out_dir, workers=args.workers)
    atomic_write_text(out_dir / "rejections.jsonl", rejections_jsonl(rejections))
    write_manifest(result, out_dir / "manifest.jsonl")
    print(f"{len(result)} records, {len(rejections)} rejected -> {out_dir / 'manifest.jsonl'}", file=sys.stderr)
    return 0


def cmd_nir_stats(args) -> int:
    paths = [Path(p) for p in args.images]
    if args.manifest:
        m = read_manifest(args.manifest, validate_files=True)
        paths += [m.resolve(r.image_path) for r in m.records if r.domain == "NIR"]
    stats = compute_reference_stats(read_image(p) for p in paths)
    atomic_write_text(args.out, json.dumps(stats.to_dict()) + "\n")
    return 0


def cmd_translate(args) -> int:
    stats = NirReferenceStats.load(args.stats)
    manifest = read_manifest(args.manifest, validate_files=True)
    out_dir = Path(args.out_dir)
    result = translate_dataset(manifest, stats, out_dir, workers=args.workers)
    write_manifest(result, out_dir / "manifest.jsonl")
    return 0


def cmd_split(args) -> int:
    manifest = read_manifest(args.manifest)
    result = split_by_identity(manifest, args.test_fraction, args.seed)
    out = Path(args.out)
    write_manifest(result.relocate(out.parent), out)
    return 0


def _feature_task(args):
    path, d_side = args
    return baseline.extract_features(read_image(path), d_side)


def _features(manifest: Manifest, records, d_side: int, workers: int) -> np.ndarray:
    tasks = [(manifest.resolve(r.image_path), d_side) for r in records]
    return np.array(run_parallel(_feature_task, tasks, workers))


def _select(manifest: Manifest, split: str):
    recs = manifest.records if split == "all" else [r for r in manifest.records if r.split == split]
    if not recs:
        raise ValidationError(f"manifest has no records with split={split}")
    return recs


def cmd_train(args) -> int:
    manifest = read_manifest(args.manifest, validate_files=True)
    recs = _select(manifest, "train")
    missing = [r.image_path for r in recs if r.valence is None or r.arousal is None]
    if missing:
        raise ValidationError(f"{len(missing)} training records lack VA labels, e.g. {missing[:3]}")
    x = _features(manifest, recs, args.d_side, args.workers)
    y = np.array([[r.valence, r.arousal] for r in recs])
    model = baseline.fit(x, y, args.lam, d_side=args.d_side)
    atomic_write_text(args.out, json.dumps(model.to_dict()) + "\n")
    return 0


def cmd_predict(args) -> int:
    model = baseline.RidgeModel.load(args.model)
    manifest = read_manifest(args.manifest, validate_files=True)
    recs = _select(manifest, args.split)
    x = _features(manifest, recs, model.d_side or baseline.DEFAULT_SIDE, args.workers)
    out = baseline.predict(model, x)
    preds = [Prediction(r.image_path, float(v), float(a)) for r, (v, a) in zip(recs, out)]
    atomic_write_text(args.out, write_predictions(preds))
    return 0


def _eval_inputs(args):
    manifest = read_manifest(args.manifest)
    recs = _select(manifest, args.split)
    missing = [r.image_path for r in recs if r.valence is None or r.arousal is None]
    if missing:
        raise ValidationError(f"{len(missing)} records lack VA labels, e.g. {missing[:3]}")
    return recs, read_predictions(args.predictions)


def cmd_evaluate(args) -> int:
    recs, preds = _eval_inputs(args)
    report = evaluate(recs, preds, group=not args.no_group)
    text = report.to_json()
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_heatmap(args) -> int:
    recs, preds = _eval_inputs(args)
    grid = heatmap(recs, preds, args.resolution)
    out_dir = Path(args.out_dir)
    for quantity in ("count", "rmse_valence", "rmse_arousal"):
        atomic_write_text(out_dir / f"heatmap_{quantity}.csv", heatmap_csv(grid, quantity))
        atomic_write_bytes(out_dir / f"heatmap_{quantity}.png",
                           png_bytes(heatmap_image(grid, quantity, args.cell_px)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vamorph",
        description="Valence-arousal face-morph dataset augmentation, NIR proxy translation and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    def workers(p):
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes (default: 1)")

    def template(p):
        p.add_argument("--template", help="VA template JSON (default: built-in 10-205 deg template)")

    p = add("plan", cmd_plan, "print the VA grid and morph plan")
    template(p)
    p.add_argument("--format", choices=("table", "json"), default="table", help="output format")
    p.add_argument("--out", help="write to this file instead of stdout")

    p = add("make-fixture", cmd_make_fixture, "write the synthetic 2-subject face fixture")
    p.add_argument("--out-dir", required=True, help="destination directory")
    template(p)

    p = add("augment", cmd_augment, "morph categorical expressions over the VA grid")
    p.add_argument("--manifest", required=True, help="input manifest (JSONL)")
    p.add_argument("--out-dir", required=True, help="output directory for images and manifest.jsonl")
    template(p)
    workers(p)

    p = add("nir-stats", cmd_nir_stats, "pool NIR reference intensity statistics")
    p.add_argument("images", nargs="*", help="grayscale NIR reference images")
    p.add_argument("--manifest", help="also use every domain=NIR record of this manifest")
    p.add_argument("--out", required=True, help="stats JSON to write")

    p = add("translate", cmd_translate, "translate VL records to NIR-style images")
    p.add_argument("--manifest", required=True, help="input VL manifest")
    p.add_argument("--stats", required=True, help="NIR reference stats JSON")
    p.add_argument("--out-dir", required=True, help="output directory")
    workers(p)

    p = add("split", cmd_split, "identity-disjoint train/test split")
    p.add_argument("--manifest", required=True, help="input manifest")
    p.add_argument("--out", required=True, help="output manifest (same directory as input)")
    p.add_argument("--test-fraction", type=float, default=0.1, help="fraction of subjects for test (default 0.1)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")

    p = add("train-baseline", cmd_train, "fit the ridge baseline on split=train records")
    p.add_argument("--manifest", required=True, help="split manifest")
    p.add_argument("--out", required=True, help="model JSON to write")
    p.add_argument("--lambda", dest="lam", type=float, default=baseline.DEFAULT_LAMBDA,
                   help=f"ridge strength (default {baseline.DEFAULT_LAMBDA})")
    p.add_argument("--d-side", type=int, default=baseline.DEFAULT_SIDE,
                   help=f"feature grid side (default {baseline.DEFAULT_SIDE})")
    workers(p)

    p = add("predict", cmd_predict, "predict VA for manifest records")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--manifest", required=True, help="manifest to predict on")
    p.add_argument("--out", required=True, help="predictions JSONL to write")
    p.add_argument("--split", choices=("train", "test", "unassigned", "all"), default="test",
                   help="records to predict (default test)")
    workers(p)

    for name, fn, help_ in (("evaluate", cmd_evaluate, "RMSE/CCC report for predictions"),
                            ("heatmap", cmd_heatmap, "VA-plane binned RMSE heatmaps")):
        p = add(name, fn, help_)
        p.add_argument("--manifest", required=True, help="manifest with ground-truth labels")
        p.add_argument("--predictions", required=True, help="predictions JSONL")
        p.add_argument("--split", choices=("train", "test", "unassigned", "all"), default="test",
                       help="records to score (default test)")
        if name == "evaluate":
            p.add_argument("--out", help="report JSON (default stdout)")
            p.add_argument("--no-group", action="store_true", help="skip per-emotion scores")
        else:
            p.add_argument("--out-dir", required=True, help="directory for CSV and PNG files")
            p.add_argument("--resolution", type=int, default=10, help="bins per axis (default 10)")
            p.add_argument("--cell-px", type=int, default=16, help="PNG pixels per cell (default 16)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ComputationError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
