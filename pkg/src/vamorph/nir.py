"""Deterministic visible-light to NIR-style translation.

Stand-in for a learned translator: Rec. 601 luminance followed by histogram
matching against pooled intensity statistics of real NIR images.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .morph import check_image, round_to_uint8

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class NirReferenceStats:
    cdf: np.ndarray
    source_count: int

    def __post_init__(self):
        cdf = np.array(self.cdf, dtype=np.float64)
        if cdf.shape != (256,):
            raise ValidationError(f"cdf must have 256 entries, got {cdf.shape}")
        if not np.all(np.isfinite(cdf)) or np.any(np.diff(cdf) < 0) or cdf[0] < 0:
            raise ValidationError("cdf must be finite and non-decreasing")
        if cdf[255] != 1.0:
            raise ValidationError(f"cdf must end at 1.0, got {cdf[255]!r}")
        if self.source_count < 1:
            raise ValidationError("source_count must be at least 1")
        cdf.setflags(write=False)
        object.__setattr__(self, "cdf", cdf)

    def __eq__(self, other):
        if not isinstance(other, NirReferenceStats):
            return NotImplemented
        return self.source_count == other.source_count and np.array_equal(self.cdf, other.cdf)

    def to_dict(self) -> dict:
        return {"cdf": self.cdf.tolist(), "source_count": self.source_count}

    @classmethod
    def from_dict(cls, doc: dict) -> "NirReferenceStats":
        try:
            return cls(np.asarray(doc["cdf"], dtype=np.float64), int(doc["source_count"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed NIR stats document: {exc}") from exc

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NirReferenceStats":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(doc)


def _cdf(counts: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(counts, dtype=np.float64) / counts.sum()
    cdf[-1] = 1.0
    return cdf


def luminance(img) -> np.ndarray:
    """8-bit luminance; grayscale input is returned unchanged."""
    img = check_image(img)
    if img.ndim == 2:
        return img
    r, g, b = (img[..., c].astype(np.float64) for c in range(3))
    return round_to_uint8(LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b)


def compute_reference_stats(images) -> NirReferenceStats:
    images = list(images)
    if not images:
        raise ValidationError("need at least one reference image")
    counts = np.zeros(256, dtype=np.int64)
    for i, img in enumerate(images):
        img = check_image(img)
        if img.ndim != 2:
            raise ValidationError(f"reference image {i} is not grayscale")
        counts += np.bincount(img.ravel(), minlength=256)
    return NirReferenceStats(_cdf(counts), len(images))


def match_lut(source_cdf: np.ndarray, reference_cdf: np.ndarray) -> np.ndarray:
    """Lookup table v -> smallest k with reference_cdf[k] >= source_cdf[v]."""
    lut = np.searchsorted(reference_cdf, source_cdf, side="left")
    return np.minimum(lut, 255).astype(np.uint8)


def to_nir(img, stats: NirReferenceStats) -> np.ndarray:
    lum = luminance(img)
    src_cdf = _cdf(np.bincount(lum.ravel(), minlength=256))
    return match_lut(src_cdf, stats.cdf)[lum]


def ks_distance(img, cdf: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between an image's intensity CDF and ``cdf``."""
    img = check_image(img)
    own = _cdf(np.bincount(img.ravel(), minlength=256))
    return float(np.max(np.abs(own - np.asarray(cdf))))
