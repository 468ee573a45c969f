"""Valence-arousal circumplex template, sampling grid and morph planning.

Angles are kept in degrees everywhere and only converted to radians inside
the trig calls. Grid angles are always generated as ``angle_min + k * step``
so membership tests reduce to integer index arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

from .errors import PlanningError, TemplateError, ValidationError

EMOTIONS = ("HAPPY", "SURPRISE", "AFRAID", "ANGRY", "DISGUST", "SAD")
NEUTRAL = "NEUTRAL"

_GRID_TOL = 1e-9
_DECIMALS = 12

GridKind = Literal["neutral", "prototype", "synthesized"]


@dataclass(frozen=True)
class EmotionAnchor:
    emotion: str
    angle_deg: float


@dataclass(frozen=True)
class VATemplate:
    angle_min_deg: float
    angle_max_deg: float
    angle_step_deg: float
    intensity_min: float
    intensity_max: float
    intensity_step: float
    anchors: tuple[EmotionAnchor, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        self._validate()

    def _validate(self):
        if not all(math.isfinite(v) for v in (
            self.angle_min_deg, self.angle_max_deg, self.angle_step_deg,
            self.intensity_min, self.intensity_max, self.intensity_step,
        )):
            raise TemplateError("template values must be finite")
        if self.angle_step_deg <= 0:
            raise TemplateError("angle_step_deg must be positive")
        if self.angle_min_deg > self.angle_max_deg:
            raise TemplateError("angle_min_deg must not exceed angle_max_deg")
        _steps(self.angle_min_deg, self.angle_max_deg, self.angle_step_deg, "angle")

        if self.intensity_step <= 0:
            raise TemplateError("intensity_step must be positive")
        if not 0 < self.intensity_min <= self.intensity_max <= 1:
            raise TemplateError("intensities must satisfy 0 < intensity_min <= intensity_max <= 1")
        _steps(self.intensity_min, self.intensity_max, self.intensity_step, "intensity")

        if not self.anchors:
            raise TemplateError("template needs at least one anchor")
        names = [a.emotion for a in self.anchors]
        if len(set(names)) != len(names):
            raise TemplateError(f"duplicate anchor emotions: {names}")
        if NEUTRAL in names:
            raise TemplateError("NEUTRAL is the grid center and cannot be an anchor")
        idx = [self.angle_index(a.angle_deg) for a in self.anchors]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise TemplateError("anchor angles must be strictly increasing")
        if idx[0] != 0 or idx[-1] != self.n_angles - 1:
            raise TemplateError("first anchor must sit at angle_min_deg and last at angle_max_deg")

    @property
    def n_angles(self) -> int:
        return _steps(self.angle_min_deg, self.angle_max_deg, self.angle_step_deg, "angle") + 1

    @property
    def n_intensities(self) -> int:
        return _steps(self.intensity_min, self.intensity_max, self.intensity_step, "intensity") + 1

    def angles(self) -> list[float]:
        return [self.grid_angle(k) for k in range(self.n_angles)]

    def intensities(self) -> list[float]:
        n = self.n_intensities
        vals = [round(self.intensity_min + k * self.intensity_step, _DECIMALS) for k in range(n)]
        vals[-1] = self.intensity_max
        return vals

    def grid_angle(self, k: int) -> float:
        if k == self.n_angles - 1:
            return float(self.angle_max_deg)
        return round(self.angle_min_deg + k * self.angle_step_deg, _DECIMALS)

    def angle_index(self, angle_deg: float) -> int:
        """Index of ``angle_deg`` on the angle grid; raises if it is off-grid."""
        k = round((angle_deg - self.angle_min_deg) / self.angle_step_deg)
        if not 0 <= k < self.n_angles or abs(self.angle_min_deg + k * self.angle_step_deg - angle_deg) > _GRID_TOL:
            raise TemplateError(f"angle {angle_deg} is not on the template angle grid")
        return k

    def anchor_angles(self) -> list[float]:
        """Anchor angles snapped onto the exact grid values."""
        return [self.grid_angle(self.angle_index(a.angle_deg)) for a in self.anchors]

    def to_dict(self) -> dict:
        return {
            "angle_min_deg": self.angle_min_deg,
            "angle_max_deg": self.angle_max_deg,
            "angle_step_deg": self.angle_step_deg,
            "intensity_min": self.intensity_min,
            "intensity_max": self.intensity_max,
            "intensity_step": self.intensity_step,
            "anchors": [{"emotion": a.emotion, "angle_deg": a.angle_deg} for a in self.anchors],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "VATemplate":
        keys = ("angle_min_deg", "angle_max_deg", "angle_step_deg",
                "intensity_min", "intensity_max", "intensity_step", "anchors")
        if not isinstance(doc, dict):
            raise TemplateError("template document must be a JSON object")
        missing = [k for k in keys if k not in doc]
        if missing:
            raise TemplateError(f"template is missing keys: {missing}")
        try:
            anchors = tuple(EmotionAnchor(str(a["emotion"]), float(a["angle_deg"])) for a in doc["anchors"])
            nums = [float(doc[k]) for k in keys[:-1]]
        except (KeyError, TypeError, ValueError) as exc:
            raise TemplateError(f"malformed template: {exc}") from exc
        return cls(*nums, anchors=anchors)


def _steps(lo: float, hi: float, step: float, what: str) -> int:
    n = round((hi - lo) / step)
    if abs(lo + n * step - hi) > _GRID_TOL:
        raise TemplateError(f"{what} range [{lo}, {hi}] is not a multiple of step {step}")
    return n


def default_template() -> VATemplate:
    """Template spanning 10..205 degrees in 15 degree steps, intensities 0.1..1.0."""
    anchors = (
        EmotionAnchor("HAPPY", 10.0),
        EmotionAnchor("SURPRISE", 85.0),
        EmotionAnchor("AFRAID", 115.0),
        EmotionAnchor("ANGRY", 145.0),
        EmotionAnchor("DISGUST", 175.0),
        EmotionAnchor("SAD", 205.0),
    )
    return VATemplate(10.0, 205.0, 15.0, 0.1, 1.0, 0.1, anchors)


def load_template(path: str | Path | None) -> VATemplate:
    if path is None:
        return default_template()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TemplateError(f"{path}: invalid JSON ({exc})") from exc
    return VATemplate.from_dict(doc)


@dataclass(frozen=True)
class GridPoint:
    angle_deg: float | None
    intensity: float
    valence: float
    arousal: float
    kind: GridKind


@dataclass(frozen=True)
class MorphPlan:
    target: GridPoint
    apex_a: str
    apex_b: str
    t: float
    r: float

    def reconstruct_angle(self, template: VATemplate) -> float:
        """Angle implied by the plan's anchors and angular weight."""
        angles = dict(zip((a.emotion for a in template.anchors), template.anchor_angles()))
        ta, tb = angles[self.apex_a], angles[self.apex_b]
        return ta + self.t * (tb - ta)

    def label(self) -> str:
        """Grouping label such as ``HAPPY`` or ``HAPPY_80%_SURPRISE_20%``."""
        if self.apex_a == self.apex_b or self.t == 0:
            return self.apex_a
        pa = round((1 - self.t) * 100)
        return f"{self.apex_a}_{pa}%_{self.apex_b}_{100 - pa}%"


def polar_to_va(angle_deg: float, intensity: float) -> tuple[float, float]:
    """Map a circumplex polar coordinate to (valence, arousal)."""
    if not 0 <= intensity <= 1:
        raise ValidationError(f"intensity {intensity} outside [0, 1]")
    theta = math.radians(angle_deg)
    return intensity * math.cos(theta), intensity * math.sin(theta)


def build_grid(template: VATemplate) -> list[GridPoint]:
    anchor_idx = {template.angle_index(a.angle_deg) for a in template.anchors}
    intensities = template.intensities()
    points = [GridPoint(None, 0.0, 0.0, 0.0, "neutral")]
    for k in range(template.n_angles):
        angle = template.grid_angle(k)
        for j, r in enumerate(intensities):
            v, a = polar_to_va(angle, r)
            kind = "prototype" if k in anchor_idx and j == len(intensities) - 1 else "synthesized"
            points.append(GridPoint(angle, r, v, a, kind))
    return points


def plan_morphs(grid: Iterable[GridPoint], template: VATemplate) -> list[MorphPlan]:
    names = [a.emotion for a in template.anchors]
    angles = template.anchor_angles()
    plans = []
    for p in grid:
        if p.kind == "neutral":
            continue
        theta = p.angle_deg
        if theta is None or not angles[0] <= theta <= angles[-1]:
            raise PlanningError(f"grid angle {theta} outside anchor span [{angles[0]}, {angles[-1]}]")
        if theta in angles:
            name = names[angles.index(theta)]
            plans.append(MorphPlan(p, name, name, 0.0, p.intensity))
            continue
        i = max(i for i, a in enumerate(angles) if a < theta)
        t = (theta - angles[i]) / (angles[i + 1] - angles[i])
        plans.append(MorphPlan(p, names[i], names[i + 1], t, p.intensity))
    return plans
