"""Procedurally drawn synthetic faces with exact 68-point landmarks.

Used for offline tests and demos: each subject gets a neutral face plus the
six basic expressions, drawn from the same landmark geometry that is written
next to the image, so the annotations are exact by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .dataset import Manifest, SampleRecord, write_manifest
from .imageio import atomic_write_text, write_png
from .va_space import NEUTRAL, VATemplate, default_template


@dataclass(frozen=True)
class Expression:
    brow_raise: float = 0.0
    brow_inner: float = 0.0
    eye_open: float = 1.0
    mouth_width: float = 0.0
    mouth_open: float = 0.0
    smile: float = 0.0
    upper_lip: float = 0.0
    jaw_drop: float = 0.0


EXPRESSIONS = {
    NEUTRAL: Expression(),
    "HAPPY": Expression(eye_open=0.8, mouth_width=4.0, mouth_open=1.5, smile=3.5, brow_raise=0.5),
    "SURPRISE": Expression(brow_raise=4.0, eye_open=1.35, mouth_width=-3.0, mouth_open=6.0, jaw_drop=3.0),
    "AFRAID": Expression(brow_raise=2.5, brow_inner=2.0, eye_open=1.3, mouth_width=2.0, mouth_open=3.0,
                         smile=-1.0, jaw_drop=1.0),
    "ANGRY": Expression(brow_raise=-2.0, brow_inner=-2.0, eye_open=0.8, mouth_width=-1.5, smile=-1.0),
    "DISGUST": Expression(brow_raise=-1.5, brow_inner=-1.0, eye_open=0.85, upper_lip=2.0, smile=-1.5,
                          mouth_open=1.0),
    "SAD": Expression(brow_inner=2.5, brow_raise=-0.5, eye_open=0.85, smile=-2.5, mouth_width=-1.0),
}


@dataclass(frozen=True)
class FaceShape:
    cx: float
    cy: float
    half_width: float
    half_height: float
    skin: tuple[int, int, int]
    background: tuple[int, int, int]


SUBJECTS = {
    "S001": FaceShape(64.0, 66.0, 40.0, 50.0, (224, 180, 150), (60, 80, 110)),
    "S002": FaceShape(63.0, 67.0, 37.0, 52.0, (170, 120, 90), (90, 100, 70)),
}


def face_landmarks(shape: FaceShape, e: Expression) -> np.ndarray:
    """68 points in the iBUG ordering for one face and expression."""
    cx, cy, hw, hh = shape.cx, shape.cy, shape.half_width, shape.half_height
    pts = np.zeros((68, 2))

    # jaw 0..16, from the left temple round the chin to the right temple
    for i, a in enumerate(np.linspace(np.pi * 0.98, np.pi * 0.02, 17)):
        drop = e.jaw_drop * np.sin(a) ** 4
        pts[i] = cx + hw * np.cos(a), cy + 0.05 * hh + 0.9 * hh * np.sin(a) ** 1.2 + drop

    eye_y = cy - 0.18 * hh
    brow_y = eye_y - 0.2 * hh - e.brow_raise
    for k in range(5):
        s = k / 4
        x_off = 0.72 * hw - s * 0.55 * hw
        lift = 3.0 * np.sin(np.pi * (0.3 + 0.7 * s)) + e.brow_inner * s
        pts[17 + k] = cx - x_off, brow_y - lift
        pts[26 - k] = cx + x_off, brow_y - lift

    for k in range(4):
        pts[27 + k] = cx, eye_y + 0.02 * hh + k * 0.1 * hh
    nose_y = eye_y + 0.38 * hh
    for k, dx in enumerate((-0.2, -0.1, 0.0, 0.1, 0.2)):
        pts[31 + k] = cx + dx * hw, nose_y - (1.5 if k == 2 else 0.0) + 2.0 * abs(dx) * 5

    eye_dx = 0.38 * hw
    ew = 0.3 * hw
    eh = 3.2 * e.eye_open
    # both eyes run clockwise from their left corner
    lid = [(-ew / 2, 0.0), (-ew / 6, -eh), (ew / 6, -eh), (ew / 2, 0.0), (ew / 6, eh * 0.8), (-ew / 6, eh * 0.8)]
    for side, base in ((-1, 36), (1, 42)):
        ex = cx + side * eye_dx
        for k, (dx, dy) in enumerate(lid):
            pts[base + k] = ex + dx, eye_y + dy

    mouth_y = cy + 0.42 * hh + 0.5 * e.jaw_drop
    mw = 0.32 * hw + e.mouth_width / 2
    gap = 1.0 + e.mouth_open / 2
    corner_y = mouth_y - e.smile
    outer_up = [(-1.0, 0.0), (-0.6, -4.0), (-0.25, -5.0), (0.0, -4.2), (0.25, -5.0), (0.6, -4.0), (1.0, 0.0)]
    for k, (fx, dy) in enumerate(outer_up):
        y = corner_y if k in (0, 6) else mouth_y + dy - gap + 1.0 - e.upper_lip * (1 - abs(fx))
        pts[48 + k] = cx + fx * mw, y
    outer_low = [(0.6, 4.5), (0.25, 5.5), (0.0, 5.8), (-0.25, 5.5), (-0.6, 4.5)]
    for k, (fx, dy) in enumerate(outer_low):
        pts[55 + k] = cx + fx * mw, mouth_y + dy + gap - 1.0 - e.smile * 0.3 * abs(fx)
    iw = mw - 3.0
    pts[60] = cx - iw, corner_y * 0.6 + mouth_y * 0.4
    pts[64] = cx + iw, corner_y * 0.6 + mouth_y * 0.4
    for k, fx in enumerate((-0.45, 0.0, 0.45)):
        pts[61 + k] = cx + fx * iw, mouth_y - gap - e.upper_lip * 0.5
    for k, fx in enumerate((0.45, 0.0, -0.45)):
        pts[65 + k] = cx + fx * iw, mouth_y + gap
    return pts


def draw_face(shape: FaceShape, lm: np.ndarray, size: int = 128) -> np.ndarray:
    img = Image.new("RGB", (size, size), shape.background)
    # soft vertical shading in the background so warps move visible texture
    arr = np.asarray(img).astype(np.float64)
    ramp = np.linspace(-25, 25, size)[:, None, None]
    stripes = 8 * np.sin(np.arange(size) / 5.0)[None, :, None]
    img = Image.fromarray(np.clip(arr + ramp + stripes, 0, 255).astype(np.uint8))
    d = ImageDraw.Draw(img)

    jaw = [tuple(p) for p in lm[0:17]]
    top = [(shape.cx + shape.half_width * np.cos(a), shape.cy - 0.85 * shape.half_height * np.sin(a))
           for a in np.linspace(0.02 * np.pi, 0.98 * np.pi, 15)]
    d.polygon(jaw + top, fill=shape.skin)
    dark = tuple(int(c * 0.45) for c in shape.skin)
    d.line([tuple(p) for p in lm[17:22]], fill=dark, width=3)
    d.line([tuple(p) for p in lm[22:27]], fill=dark, width=3)
    d.line([tuple(p) for p in lm[27:31]], fill=tuple(int(c * 0.75) for c in shape.skin), width=2)
    d.line([tuple(p) for p in lm[31:36]], fill=tuple(int(c * 0.6) for c in shape.skin), width=2)
    for base in (36, 42):
        eye = [tuple(p) for p in lm[base:base + 6]]
        d.polygon(eye, fill=(245, 245, 240), outline=dark)
        c = lm[base:base + 6].mean(axis=0)
        d.ellipse([c[0] - 2.5, c[1] - 2.5, c[0] + 2.5, c[1] + 2.5], fill=(40, 30, 25))
    d.polygon([tuple(p) for p in lm[48:60]], fill=(170, 60, 70))
    d.polygon([tuple(p) for p in lm[60:68]], fill=(70, 20, 25))
    return np.asarray(img)


def make_fixture(out_dir: str | Path, subjects: dict[str, FaceShape] | None = None,
                 template: VATemplate | None = None, size: int = 128) -> Path:
    """Write images, landmark JSON and ``manifest.jsonl``; returns the manifest path."""
    out_dir = Path(out_dir)
    subjects = SUBJECTS if subjects is None else subjects
    template = default_template() if template is None else template
    emotions = [NEUTRAL] + [a.emotion for a in template.anchors]
    records = []
    for sid in sorted(subjects):
        shape = subjects[sid]
        for emotion in emotions:
            lm = face_landmarks(shape, EXPRESSIONS[emotion])
            img_rel = f"images/{sid}/{emotion}.png"
            lm_rel = f"landmarks/{sid}/{emotion}.json"
            write_png(out_dir / img_rel, draw_face(shape, lm, size))
            atomic_write_text(out_dir / lm_rel, json.dumps([[round(x, 4), round(y, 4)] for x, y in lm]) + "\n")
            records.append(SampleRecord(image_path=img_rel, landmark_path=lm_rel, subject_id=sid,
                                        emotion_label=emotion, domain="VL", origin="original"))
    path = out_dir / "manifest.jsonl"
    write_manifest(Manifest(records), path)
    return path
