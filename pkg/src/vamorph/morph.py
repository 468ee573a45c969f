"""Piecewise-affine face warping and multi-source cross-dissolve.

Images are numpy ``uint8`` arrays shaped ``(H, W)`` or ``(H, W, 3)``.
Warps triangulate the *destination* shape and pull every output pixel back
through the inverse per-triangle affine map, sampling bilinearly with edge
clamping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTriangleError,
    LandmarkError,
    MorphRejected,
    TriangulationError,
    ValidationError,
)
from .landmarks import ExtendedLandmarkSet, LandmarkSet, combine3, extend_with_boundary, interpolate
from .triangulation import TriangleMesh, delaunay
from .va_space import MorphPlan

MIN_TRIANGLE_AREA = 0.5
_BARY_TOL = 1e-9


@dataclass(frozen=True)
class AffineTransform:
    """(x, y) -> (a*x + b*y + c, d*x + e*y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def apply(self, x, y):
        return self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d, self.e, self.f)


def affine_from_triangles(src, dst) -> AffineTransform:
    """Solve the affine map taking the three ``src`` vertices onto ``dst``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    area = 0.5 * abs((src[1, 0] - src[0, 0]) * (src[2, 1] - src[0, 1])
                     - (src[1, 1] - src[0, 1]) * (src[2, 0] - src[0, 0]))
    if area <= 1e-9:
        raise DegenerateTriangleError(f"source triangle is degenerate (area {area:.3g} px^2)")
    m = np.column_stack([src, np.ones(3)])
    abc = np.linalg.solve(m, dst[:, 0])
    def_ = np.linalg.solve(m, dst[:, 1])
    return AffineTransform(*abc, *def_)


def check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValidationError(f"images must be 8-bit, got {img.dtype}")
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] not in (1, 3)):
        raise ValidationError(f"images must be HxW or HxWx3, got shape {img.shape}")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    return img


def round_to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and saturate to 0..255."""
    out = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


def triangle_labels(mesh: TriangleMesh, width: int, height: int) -> np.ndarray:
    """Index of the mesh triangle covering each pixel centre, or -1.

    Pixels on shared edges go to the lowest-numbered triangle.
    """
    labels = np.full((height, width), -1, dtype=np.int64)
    v = mesh.vertices
    for k, (i, j, l) in enumerate(mesh.triangles):
        tri = v[[i, j, l]]
        x0 = max(int(np.floor(tri[:, 0].min())), 0)
        x1 = min(int(np.ceil(tri[:, 0].max())), width - 1)
        y0 = max(int(np.floor(tri[:, 1].min())), 0)
        y1 = min(int(np.ceil(tri[:, 1].max())), height - 1)
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        (ax, ay), (bx, by), (cx, cy) = tri
        den = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy)
        if den == 0:
            continue
        l1 = ((by - cy) * (xs - cx) + (cx - bx) * (ys - cy)) / den
        l2 = ((cy - ay) * (xs - cx) + (ax - cx) * (ys - cy)) / den
        l3 = 1 - l1 - l2
        inside = (l1 >= -_BARY_TOL) & (l2 >= -_BARY_TOL) & (l3 >= -_BARY_TOL)
        region = labels[y0:y1 + 1, x0:x1 + 1]
        region[inside & (region < 0)] = k
    return labels


def _bilinear(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    src = img.astype(np.float64)
    if src.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def _inverse_maps(src_pts: np.ndarray, dst_pts: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    coeffs = np.empty((len(mesh.triangles), 6))
    for k, tri in enumerate(mesh.triangles):
        coeffs[k] = affine_from_triangles(dst_pts[tri], src_pts[tri]).as_tuple()
    return coeffs


def _warp_float(img: np.ndarray, src_pts: np.ndarray, dst_pts: np.ndarray,
                mesh: TriangleMesh, labels: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    coeffs = _inverse_maps(src_pts, dst_pts, mesh)
    if (labels < 0).any():
        raise ValidationError("mesh does not cover the whole image frame")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    c = coeffs[labels]
    sx = c[..., 0] * xs + c[..., 1] * ys + c[..., 2]
    sy = c[..., 3] * xs + c[..., 4] * ys + c[..., 5]
    return _bilinear(img, sx, sy)


def _check_mesh(src_lm: ExtendedLandmarkSet, dst_lm: ExtendedLandmarkSet, mesh: TriangleMesh):
    n = len(dst_lm.points)
    if len(src_lm.points) != n or len(mesh.vertices) != n:
        raise LandmarkError(
            f"vertex count mismatch: src {len(src_lm.points)}, dst {n}, mesh {len(mesh.vertices)}")
    if mesh.triangles.size and mesh.triangles.max() >= n:
        raise LandmarkError("mesh references vertices beyond the landmark set")


def warp_piecewise(img, src_lm: ExtendedLandmarkSet, dst_lm: ExtendedLandmarkSet,
                   mesh: TriangleMesh) -> np.ndarray:
    """Warp ``img`` from the ``src_lm`` shape into the ``dst_lm`` shape."""
    img = check_image(img)
    _check_mesh(src_lm, dst_lm, mesh)
    if img.shape[:2] != (dst_lm.height, dst_lm.width):
        raise ValidationError(f"image shape {img.shape[:2]} does not match landmark frame "
                              f"{dst_lm.width}x{dst_lm.height}")
    labels = triangle_labels(mesh, dst_lm.width, dst_lm.height)
    return round_to_uint8(_warp_float(img, src_lm.points, dst_lm.points, mesh, labels))


@dataclass(frozen=True)
class AlignmentVerdict:
    accepted: bool
    reason: str | None = None
    triangle: int | None = None

    def __bool__(self):
        return self.accepted


def misalignment_check(src_lm: ExtendedLandmarkSet, dst_lm: ExtendedLandmarkSet,
                       mesh: TriangleMesh) -> AlignmentVerdict:
    """Reject degenerate destination triangles and triangles whose orientation flips."""
    dst_area = mesh.signed_areas(dst_lm.points)
    src_area = mesh.signed_areas(src_lm.points)
    small = np.flatnonzero(np.abs(dst_area) < MIN_TRIANGLE_AREA)
    if small.size:
        return AlignmentVerdict(False, "degenerate triangle", int(small[0]))
    flipped = np.flatnonzero(np.sign(src_area) != np.sign(dst_area))
    if flipped.size:
        return AlignmentVerdict(False, "orientation flip", int(flipped[0]))
    return AlignmentVerdict(True)


def _blend(sources, target: LandmarkSet, weights) -> np.ndarray:
    """Warp each (img, lm) source into ``target`` and mix with ``weights``."""
    imgs = [check_image(img) for img, _ in sources]
    shapes = {img.shape for img in imgs}
    if len(shapes) != 1:
        raise ValidationError(f"source images differ in shape: {sorted(shapes)}")
    h, w = imgs[0].shape[:2]
    if (h, w) != (target.height, target.width):
        raise ValidationError(f"image shape {(h, w)} does not match landmark frame "
                              f"{target.width}x{target.height}")
    dst = extend_with_boundary(target)
    try:
        mesh = delaunay(dst.points)
    except TriangulationError as exc:
        raise MorphRejected("degenerate triangle", str(exc)) from exc
    extended = [extend_with_boundary(lm) for _, lm in sources]
    for ext, wt in zip(extended, weights):
        if wt == 0:
            continue
        verdict = misalignment_check(ext, dst, mesh)
        if not verdict:
            raise MorphRejected(verdict.reason, f"triangle {verdict.triangle}")
    labels = triangle_labels(mesh, w, h)
    acc = np.zeros(imgs[0].shape, dtype=np.float64)
    for img, ext, wt in zip(imgs, extended, weights):
        if wt == 0:
            continue
        acc += wt * _warp_float(img, ext.points, dst.points, mesh, labels)
    return round_to_uint8(acc)


def morph_pair(img_a, lm_a: LandmarkSet, img_b, lm_b: LandmarkSet, w: float):
    """Morph two faces; returns (image, landmarks) at blend weight ``w``."""
    target = interpolate(lm_a, lm_b, w)
    out = _blend([(img_a, lm_a), (img_b, lm_b)], target, (1 - w, w))
    return out, target


def blend_weights(t: float, r: float) -> tuple[float, float, float]:
    """Weights of (neutral, apex_a, apex_b); they always sum to one."""
    return 1 - r, r * (1 - t), r * t


def morph_grid_point(neutral, apex_a, apex_b, plan: MorphPlan):
    """Synthesize the face for one grid point from its three (img, lm) sources."""
    (_, lm_n), (_, lm_a), (_, lm_b) = neutral, apex_a, apex_b
    target = combine3(lm_n, lm_a, lm_b, plan.t, plan.r)
    out = _blend([neutral, apex_a, apex_b], target, blend_weights(plan.t, plan.r))
    return out, target
