"""68-point facial landmark sets: parsing, blending and frame extension."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LandmarkError

N_LANDMARKS = 68
N_BOUNDARY = 8


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """68 sub-pixel (x, y) points in a ``width`` x ``height`` frame, origin top-left."""

    points: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(self.points, other.points)

    def to_list(self) -> list[list[float]]:
        return self.points.tolist()


@dataclass(frozen=True, eq=False)
class ExtendedLandmarkSet:
    base: LandmarkSet
    boundary: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.base.points, self.boundary])

    @property
    def width(self) -> int:
        return self.base.width

    @property
    def height(self) -> int:
        return self.base.height

    def __eq__(self, other):
        if not isinstance(other, ExtendedLandmarkSet):
            return NotImplemented
        return self.base == other.base and np.array_equal(self.boundary, other.boundary)


def validate_points(points, width: int, height: int) -> LandmarkSet:
    try:
        pts = np.asarray(points, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise LandmarkError(f"landmarks must be numeric [x, y] pairs: {exc}") from exc
    if pts.ndim != 2 or pts.shape[1] != 2:
        if pts.ndim >= 1 and len(pts) != N_LANDMARKS:
            raise LandmarkError(f"expected {N_LANDMARKS} points, got {len(pts)}")
        raise LandmarkError("landmarks must be a list of [x, y] pairs")
    if len(pts) != N_LANDMARKS:
        raise LandmarkError(f"expected {N_LANDMARKS} points, got {len(pts)}")
    for i, (x, y) in enumerate(pts):
        if not (math.isfinite(x) and math.isfinite(y)):
            raise LandmarkError(f"landmark {i} is not finite: ({x}, {y})")
        if not (0 <= x < width and 0 <= y < height):
            raise LandmarkError(f"landmark {i} at ({x}, {y}) lies outside the {width}x{height} frame")
    return LandmarkSet(pts, int(width), int(height))


def parse_landmarks(document: str | bytes, width: int, height: int) -> LandmarkSet:
    """Parse a JSON array of 68 ``[x, y]`` pairs."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise LandmarkError(f"landmark document is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise LandmarkError("landmark document must be a JSON array")
    for i, pair in enumerate(doc):
        if not isinstance(pair, list) or len(pair) != 2 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair
        ):
            raise LandmarkError(f"landmark {i} is not an [x, y] number pair")
    return validate_points(doc, width, height)


def load_landmarks(path: str | Path, width: int, height: int) -> LandmarkSet:
    path = Path(path)
    try:
        return parse_landmarks(path.read_text(encoding="utf-8"), width, height)
    except LandmarkError as exc:
        raise LandmarkError(f"{path}: {exc}") from exc


def dump_landmarks(lm: LandmarkSet) -> str:
    return json.dumps(lm.to_list())


def _check_frames(*sets: LandmarkSet):
    dims = {(s.width, s.height) for s in sets}
    if len(dims) != 1:
        raise LandmarkError(f"landmark sets have mismatched frames: {sorted(dims)}")


def interpolate(a: LandmarkSet, b: LandmarkSet, w: float) -> LandmarkSet:
    _check_frames(a, b)
    if not 0 <= w <= 1:
        raise LandmarkError(f"interpolation weight {w} outside [0, 1]")
    if w == 0 or np.array_equal(a.points, b.points):
        return a
    if w == 1:
        return b
    return LandmarkSet((1 - w) * a.points + w * b.points, a.width, a.height)


def combine3(n: LandmarkSet, a: LandmarkSet, b: LandmarkSet, t: float, r: float) -> LandmarkSet:
    """Neutral-to-apex blend by ``r`` of the apex-to-apex blend by ``t``."""
    _check_frames(n, a, b)
    return interpolate(n, interpolate(a, b, t), r)


def boundary_points(width: int, height: int) -> np.ndarray:
    """Corners clockwise from top-left, then the top/right/bottom/left edge midpoints."""
    xm, ym = width - 1, height - 1
    return np.array([
        [0, 0], [xm, 0], [xm, ym], [0, ym],
        [xm / 2, 0], [xm, ym / 2], [xm / 2, ym], [0, ym / 2],
    ], dtype=np.float64)


def extend_with_boundary(lm: LandmarkSet) -> ExtendedLandmarkSet:
    return ExtendedLandmarkSet(lm, boundary_points(lm.width, lm.height))
