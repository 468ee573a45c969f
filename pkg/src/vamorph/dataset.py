"""Sample manifests and the dataset-level pipelines built on them.

A manifest is a JSONL file with one :class:`SampleRecord` per line. All
paths inside it are relative to the manifest's own directory. An optional
first line ``{"__manifest__": {...}}`` carries the schema version and the
VA template used to build the dataset.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .errors import LandmarkError, ManifestError, MorphRejected, ValidationError
from .imageio import atomic_write_text, image_size, read_image, write_png
from .landmarks import LandmarkSet, load_landmarks, validate_points
from .morph import morph_grid_point
from .nir import NirReferenceStats, to_nir
from .va_space import NEUTRAL, VATemplate, build_grid, plan_morphs, polar_to_va

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HEADER_KEY = "__manifest__"
DOMAINS = ("VL", "NIR", "NIR_SYNTH")
ORIGINS = ("original", "morphed", "translated")
SPLITS = ("train", "test", "unassigned")
_LABEL_TOL = 1e-9


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    subject_id: str
    emotion_label: str
    domain: Literal["VL", "NIR", "NIR_SYNTH"] = "VL"
    origin: Literal["original", "morphed", "translated"] = "original"
    split: Literal["train", "test", "unassigned"] = "unassigned"
    landmark_path: str | None = None
    angle_deg: float | None = None
    intensity: float | None = None
    valence: float | None = None
    arousal: float | None = None
    landmarks: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not self.subject_id:
            raise ManifestError("subject_id must be non-empty")
        if not self.image_path:
            raise ManifestError("image_path must be non-empty")
        if self.domain not in DOMAINS:
            raise ManifestError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.origin not in ORIGINS:
            raise ManifestError(f"origin must be one of {ORIGINS}, got {self.origin!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")
        for name in ("valence", "arousal"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and -1 <= v <= 1):
                raise ManifestError(f"{name} {v} outside [-1, 1]")
        if self.intensity is not None and not 0 <= self.intensity <= 1:
            raise ManifestError(f"intensity {self.intensity} outside [0, 1]")
        if None not in (self.angle_deg, self.intensity, self.valence, self.arousal):
            v, a = polar_to_va(self.angle_deg, self.intensity)
            if abs(v - self.valence) > _LABEL_TOL or abs(a - self.arousal) > _LABEL_TOL:
                raise ManifestError(
                    f"{self.image_path}: (valence, arousal) = ({self.valence}, {self.arousal}) "
                    f"inconsistent with angle {self.angle_deg}, intensity {self.intensity}")
        if self.landmarks is not None:
            object.__setattr__(self, "landmarks", tuple(tuple(map(float, p)) for p in self.landmarks))

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            doc[f.name] = [list(p) for p in v] if f.name == "landmarks" else v
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SampleRecord":
        if not isinstance(doc, dict):
            raise ManifestError("record must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ManifestError(f"unknown record fields: {unknown}")
        for key in ("image_path", "subject_id", "emotion_label"):
            if not isinstance(doc.get(key), str):
                raise ManifestError(f"field {key!r} is required and must be a string")
        for key in ("angle_deg", "intensity", "valence", "arousal"):
            v = doc.get(key)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ManifestError(f"field {key!r} must be a number")
        return cls(**doc)


@dataclass
class Manifest:
    records: list[SampleRecord] = field(default_factory=list)
    template: VATemplate | None = None
    schema_version: int = SCHEMA_VERSION
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.image_path in seen:
                raise ManifestError(f"duplicate image_path {r.image_path!r}")
            seen.add(r.image_path)

    def __len__(self):
        return len(self.records)

    def resolve(self, rel: str) -> Path:
        return (self.root or Path(".")) / rel

    def subjects(self) -> list[str]:
        return sorted({r.subject_id for r in self.records})

    def filter(self, split: str | None = None) -> "Manifest":
        recs = [r for r in self.records if split is None or r.split == split]
        return Manifest(recs, self.template, self.schema_version, self.root)

    def relocate(self, new_root: str | Path) -> "Manifest":
        """Same records with paths rewritten relative to ``new_root``."""
        new_root = Path(new_root)
        recs = [replace(r, image_path=_rel(self.resolve(r.image_path), new_root),
                        landmark_path=(_rel(self.resolve(r.landmark_path), new_root)
                                       if r.landmark_path is not None else None))
                for r in self.records]
        return Manifest(recs, self.template, self.schema_version, new_root)

    def validate_files(self):
        missing = []
        for r in self.records:
            for rel in (r.image_path, r.landmark_path):
                if rel is not None and not self.resolve(rel).is_file():
                    missing.append(rel)
        if missing:
            raise ManifestError(f"{len(missing)} referenced files are missing, e.g. {missing[:5]}")

    def to_jsonl(self) -> str:
        lines = []
        if self.template is not None or self.schema_version != SCHEMA_VERSION:
            header = {"schema_version": self.schema_version}
            if self.template is not None:
                header["template"] = self.template.to_dict()
            lines.append(json.dumps({HEADER_KEY: header}))
        lines.extend(json.dumps(r.to_dict()) for r in self.records)
        return "".join(line + "\n" for line in lines)


def parse_manifest(text: str, root: Path | None = None) -> Manifest:
    records = []
    template = None
    version = SCHEMA_VERSION
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if isinstance(doc, dict) and HEADER_KEY in doc:
            if records or lineno != 1:
                raise ManifestError(f"line {lineno}: manifest header must be the first line")
            header = doc[HEADER_KEY]
            version = int(header.get("schema_version", SCHEMA_VERSION))
            if version != SCHEMA_VERSION:
                raise ManifestError(f"unsupported schema_version {version}")
            if header.get("template") is not None:
                template = VATemplate.from_dict(header["template"])
            continue
        try:
            rec = SampleRecord.from_dict(doc)
        except (ManifestError, TypeError, ValidationError) as exc:
            raise ManifestError(f"line {lineno}: {exc}") from exc
        if rec.image_path in seen:
            raise ManifestError(
                f"line {lineno}: duplicate image_path {rec.image_path!r} (first on line {seen[rec.image_path]})")
        seen[rec.image_path] = lineno
        records.append(rec)
    return Manifest(records, template, version, root)


def read_manifest(path: str | Path, validate_files: bool = False) -> Manifest:
    path = Path(path)
    m = parse_manifest(path.read_text(encoding="utf-8"), root=path.parent)
    if validate_files:
        m.validate_files()
    return m


def write_manifest(manifest: Manifest, path: str | Path):
    atomic_write_text(path, manifest.to_jsonl())


def _rel(target: Path, start: Path) -> str:
    return Path(os.path.relpath(os.path.abspath(target), os.path.abspath(start))).as_posix()


# -- augmentation -----------------------------------------------------------

@dataclass(frozen=True)
class _Source:
    record: SampleRecord
    image: np.ndarray
    landmarks: LandmarkSet


def _load_source(manifest: Manifest, rec: SampleRecord) -> _Source:
    img_path = manifest.resolve(rec.image_path)
    if not img_path.is_file():
        raise FileNotFoundError(f"image not found for subject {rec.subject_id}: {img_path}")
    width, height = image_size(img_path)
    if rec.landmarks is not None:
        lm = validate_points(rec.landmarks, width, height)
    elif rec.landmark_path is not None:
        lm_path = manifest.resolve(rec.landmark_path)
        if not lm_path.is_file():
            raise FileNotFoundError(f"landmark file not found for subject {rec.subject_id}: {lm_path}")
        lm = load_landmarks(lm_path, width, height)
    else:
        raise LandmarkError(f"subject {rec.subject_id}, {rec.emotion_label}: record has no landmarks")
    return _Source(rec, read_image(img_path), lm)


def _subject_sources(manifest: Manifest, template: VATemplate) -> dict[str, dict[str, SampleRecord]]:
    needed = [NEUTRAL] + [a.emotion for a in template.anchors]
    by_subject: dict[str, dict[str, SampleRecord]] = {}
    for rec in manifest.records:
        if rec.origin != "original":
            raise ManifestError(f"{rec.image_path}: augmentation input must have origin=original")
        slot = by_subject.setdefault(rec.subject_id, {})
        if rec.emotion_label in slot:
            raise ManifestError(f"subject {rec.subject_id} has more than one {rec.emotion_label} record")
        slot[rec.emotion_label] = rec
    for subject in sorted(by_subject):
        for emotion in needed:
            if emotion not in by_subject[subject]:
                raise ManifestError(f"subject {subject} is missing the {emotion} expression")
    return by_subject


def morph_filename(subject: str, angle: float, intensity: float) -> str:
    return f"{subject}/{angle:06.2f}_{intensity:.2f}.png"


@dataclass(frozen=True)
class Rejection:
    subject_id: str
    angle_deg: float
    intensity: float
    reason: str
    detail: str

    def to_dict(self) -> dict:
        return {"subject_id": self.subject_id, "angle_deg": self.angle_deg,
                "intensity": self.intensity, "reason": self.reason, "detail": self.detail}


def _morph_task(args):
    neutral, apex_a, apex_b, plan, out_path = args
    try:
        img, lm = morph_grid_point(neutral, apex_a, apex_b, plan)
    except MorphRejected as exc:
        return None, exc.reason, exc.detail
    write_png(out_path, img)
    return lm.to_list(), None, None


def run_parallel(fn, tasks, workers: int):
    """Map ``fn`` over ``tasks`` in order, optionally on a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _sort_key(rec: SampleRecord):
    neutral = rec.emotion_label == NEUTRAL and rec.angle_deg is None
    return (rec.subject_id, 0 if neutral else 1, rec.angle_deg or 0.0, rec.intensity or 0.0, rec.image_path)


def augment_dataset(manifest: Manifest, template: VATemplate, out_dir: str | Path,
                    workers: int = 1) -> tuple[Manifest, list[Rejection]]:
    """Expand every subject's categorical expressions over the template grid.

    Writes morphed PNGs under ``out_dir`` and returns the new manifest (rooted
    at ``out_dir``) with the list of rejected grid points. Neutral and
    prototype points reference the original images instead of copies.
    """
    out_dir = Path(out_dir)
    grid = build_grid(template)
    plans = plan_morphs(grid, template)
    by_subject = _subject_sources(manifest, template)

    records: list[SampleRecord] = []
    tasks, task_meta = [], []
    for subject in sorted(by_subject):
        slots = by_subject[subject]
        sources = {name: _load_source(manifest, rec) for name, rec in slots.items()
                   if name == NEUTRAL or name in {a.emotion for a in template.anchors}}
        neutral = sources[NEUTRAL]
        domain = neutral.record.domain

        def passthrough(src: _Source, **labels) -> SampleRecord:
            rec = src.record
            return SampleRecord(
                image_path=_rel(manifest.resolve(rec.image_path), out_dir),
                landmark_path=(_rel(manifest.resolve(rec.landmark_path), out_dir)
                               if rec.landmark_path is not None else None),
                landmarks=rec.landmarks if rec.landmark_path is None else None,
                subject_id=subject, domain=domain, origin="original", **labels)

        records.append(passthrough(neutral, emotion_label=NEUTRAL, intensity=0.0, valence=0.0, arousal=0.0))
        for plan in plans:
            p = plan.target
            labels = dict(angle_deg=p.angle_deg, intensity=p.intensity, valence=p.valence, arousal=p.arousal)
            if p.kind == "prototype":
                records.append(passthrough(sources[plan.apex_a], emotion_label=plan.apex_a, **labels))
                continue
            rel = morph_filename(subject, p.angle_deg, p.intensity)
            a, b = sources[plan.apex_a], sources[plan.apex_b]
            tasks.append(((neutral.image, neutral.landmarks), (a.image, a.landmarks),
                          (b.image, b.landmarks), plan, out_dir / rel))
            task_meta.append((subject, domain, plan, rel, labels))

    rejections = []
    for (subject, domain, plan, rel, labels), (lm, reason, detail) in zip(task_meta, run_parallel(_morph_task, tasks, workers)):
        if lm is None:
            p = plan.target
            log.warning("rejected %s at angle %s intensity %s: %s", subject, p.angle_deg, p.intensity, reason)
            rejections.append(Rejection(subject, p.angle_deg, p.intensity, reason, detail))
            continue
        records.append(SampleRecord(
            image_path=rel, subject_id=subject, emotion_label=plan.label(), domain=domain,
            origin="morphed", landmarks=lm, **labels))

    records.sort(key=_sort_key)
    return Manifest(records, template, SCHEMA_VERSION, out_dir), rejections


def rejections_jsonl(rejections: Iterable[Rejection]) -> str:
    return "".join(json.dumps(r.to_dict()) + "\n" for r in rejections)


# -- translation ------------------------------------------------------------

def _translate_task(args):
    src, stats, dst = args
    write_png(dst, to_nir(read_image(src), stats))


def translated_filename(index: int, rec: SampleRecord) -> str:
    return f"{rec.subject_id}/{index:05d}_{Path(rec.image_path).stem}.png"


def translate_dataset(manifest: Manifest, stats: NirReferenceStats, out_dir: str | Path,
                      workers: int = 1) -> Manifest:
    """NIR-style copies of every VL record; labels are carried over unchanged."""
    out_dir = Path(out_dir)
    for rec in manifest.records:
        if rec.domain != "VL":
            raise ManifestError(f"{rec.image_path}: translation input must be domain=VL, got {rec.domain}")
    records, tasks = [], []
    for i, rec in enumerate(manifest.records):
        rel = translated_filename(i, rec)
        tasks.append((manifest.resolve(rec.image_path), stats, out_dir / rel))
        lm_path = _rel(manifest.resolve(rec.landmark_path), out_dir) if rec.landmark_path else None
        records.append(replace(rec, image_path=rel, landmark_path=lm_path,
                               domain="NIR_SYNTH", origin="translated"))
    for src, _, _ in tasks:
        if not Path(src).is_file():
            raise FileNotFoundError(f"image not found: {src}")
    run_parallel(_translate_task, tasks, workers)
    return Manifest(records, manifest.template, SCHEMA_VERSION, out_dir)


# -- identity split ---------------------------------------------------------

def split_by_identity(manifest: Manifest, test_fraction: float = 0.1, seed: int = 42) -> Manifest:
    """Assign whole subjects to test (ceil(fraction * #subjects) of them) or train."""
    if not 0 < test_fraction < 1:
        raise ValidationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    subjects = manifest.subjects()
    if len(subjects) < 2:
        raise ValidationError(f"need at least 2 subjects to split, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    n_test = min(math.ceil(round(test_fraction * len(subjects), 9)), len(subjects) - 1)
    test = {subjects[i] for i in order[:n_test]}
    records = [replace(r, split="test" if r.subject_id in test else "train") for r in manifest.records]
    return Manifest(records, manifest.template, manifest.schema_version, manifest.root)
