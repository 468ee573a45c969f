"""RMSE / CCC evaluation of valence-arousal predictions and VA-plane heatmaps."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import MetricError, ValidationError


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise MetricError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    if p.size == 0:
        raise MetricError("rmse of an empty sequence")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def ccc(pred, truth) -> float:
    """Concordance correlation coefficient with population (1/n) moments."""
    p, t = _pair(pred, truth)
    if p.size < 2:
        raise MetricError("ccc needs at least two samples")
    mp, mt = p.mean(), t.mean()
    cov = np.mean((p - mp) * (t - mt))
    den = np.mean((p - mp) ** 2) + np.mean((t - mt) ** 2) + (mp - mt) ** 2
    if den == 0:
        raise MetricError("degenerate CCC: both sequences constant with equal means")
    return float(2 * cov / den)


def _safe_ccc(pred, truth) -> float | None:
    try:
        return ccc(pred, truth)
    except MetricError:
        return None


@dataclass
class GroupScores:
    count: int
    rmse_valence: float
    rmse_arousal: float
    ccc_valence: float | None
    ccc_arousal: float | None
    rmse_2d: float


@dataclass
class EvalReport:
    n: int
    rmse_valence: float
    rmse_arousal: float
    ccc_valence: float | None
    ccc_arousal: float | None
    rmse_2d: float
    per_emotion: dict[str, GroupScores] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _scores(pv, pa, tv, ta) -> GroupScores:
    return GroupScores(
        count=len(pv),
        rmse_valence=rmse(pv, tv),
        rmse_arousal=rmse(pa, ta),
        ccc_valence=_safe_ccc(pv, tv),
        ccc_arousal=_safe_ccc(pa, ta),
        rmse_2d=float(np.sqrt(np.mean((pv - tv) ** 2 + (pa - ta) ** 2))),
    )


@dataclass(frozen=True)
class Prediction:
    image_path: str
    valence: float
    arousal: float


def read_predictions(path: str | Path) -> list[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                p = Prediction(str(doc["image_path"]), float(doc["valence"]), float(doc["arousal"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed prediction ({exc})") from exc
            preds.append(p)
    return preds


def write_predictions(preds: Iterable[Prediction]) -> str:
    return "".join(
        json.dumps({"image_path": p.image_path, "valence": p.valence, "arousal": p.arousal}) + "\n"
        for p in preds
    )


def align(records: Sequence, predictions: Sequence[Prediction]):
    """Pair manifest records with predictions by image_path.

    Returns arrays (pred_v, pred_a, true_v, true_a) and the emotion labels,
    in manifest order.
    """
    by_key: dict[str, Prediction] = {}
    dupes = []
    for p in predictions:
        if p.image_path in by_key:
            dupes.append(p.image_path)
        by_key[p.image_path] = p
    if dupes:
        raise ValidationError(f"duplicate prediction keys: {sorted(set(dupes))[:10]}")
    for p in by_key.values():
        if not (math.isfinite(p.valence) and math.isfinite(p.arousal)) or max(abs(p.valence), abs(p.arousal)) > 1:
            raise ValidationError(f"prediction for {p.image_path} is not finite or outside [-1, 1]")
    keys = [r.image_path for r in records]
    missing = [k for k in keys if k not in by_key]
    extra = sorted(set(by_key) - set(keys))
    if missing or extra:
        raise ValidationError(
            f"predictions do not match manifest: missing {missing[:10]} ({len(missing)}), "
            f"extra {extra[:10]} ({len(extra)})")
    pv = np.array([by_key[k].valence for k in keys])
    pa = np.array([by_key[k].arousal for k in keys])
    tv = np.array([r.valence for r in records], dtype=np.float64)
    ta = np.array([r.arousal for r in records], dtype=np.float64)
    return pv, pa, tv, ta, [r.emotion_label for r in records]


def evaluate(records: Sequence, predictions: Sequence[Prediction], group: bool = True) -> EvalReport:
    if not records:
        raise MetricError("nothing to evaluate: no records")
    pv, pa, tv, ta, labels = align(records, predictions)
    overall = _scores(pv, pa, tv, ta)
    report = EvalReport(
        n=overall.count,
        rmse_valence=overall.rmse_valence,
        rmse_arousal=overall.rmse_arousal,
        ccc_valence=overall.ccc_valence,
        ccc_arousal=overall.ccc_arousal,
        rmse_2d=overall.rmse_2d,
    )
    if group:
        labels = np.array(labels, dtype=object)
        for name in sorted(set(labels)):
            m = labels == name
            report.per_emotion[name] = _scores(pv[m], pa[m], tv[m], ta[m])
    return report


@dataclass
class HeatmapGrid:
    """Per-cell counts and RMSE, indexed [valence_bin, arousal_bin] by ground truth."""

    resolution: int
    count: np.ndarray
    sse_valence: np.ndarray
    sse_arousal: np.ndarray

    @property
    def n(self) -> int:
        return int(self.count.sum())

    def rmse(self, dimension: str) -> np.ndarray:
        sse = {"valence": self.sse_valence, "arousal": self.sse_arousal}[dimension]
        out = np.full(self.count.shape, np.nan)
        nz = self.count > 0
        out[nz] = np.sqrt(sse[nz] / self.count[nz])
        return out

    def centers(self) -> np.ndarray:
        edges = np.linspace(-1, 1, self.resolution + 1)
        return (edges[:-1] + edges[1:]) / 2


def bin_index(values, resolution: int) -> np.ndarray:
    """Bin of each value over [-1, 1]; the upper edge belongs to the last bin."""
    v = np.asarray(values, dtype=np.float64)
    idx = np.floor((v + 1) / 2 * resolution).astype(np.int64)
    return np.clip(idx, 0, resolution - 1)


def heatmap(records: Sequence, predictions: Sequence[Prediction], resolution: int = 10) -> HeatmapGrid:
    if resolution < 2:
        raise ValidationError("heatmap resolution must be at least 2")
    pv, pa, tv, ta, _ = align(records, predictions)
    return heatmap_arrays(pv, pa, tv, ta, resolution)


def heatmap_arrays(pv, pa, tv, ta, resolution: int) -> HeatmapGrid:
    if resolution < 2:
        raise ValidationError("heatmap resolution must be at least 2")
    iv, ia = bin_index(tv, resolution), bin_index(ta, resolution)
    shape = (resolution, resolution)
    count = np.zeros(shape, dtype=np.int64)
    sse_v = np.zeros(shape)
    sse_a = np.zeros(shape)
    np.add.at(count, (iv, ia), 1)
    np.add.at(sse_v, (iv, ia), (np.asarray(pv) - tv) ** 2)
    np.add.at(sse_a, (iv, ia), (np.asarray(pa) - ta) ** 2)
    return HeatmapGrid(resolution, count, sse_v, sse_a)


# Fixed 5-stop colormap (dark blue -> teal -> green -> yellow), linear between stops.
COLORMAP_STOPS = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=np.float64)
EMPTY_COLOR = (255, 255, 255)


def colormap(x) -> np.ndarray:
    """Map values in [0, 1] to RGB uint8 along COLORMAP_STOPS."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0, 1) * (len(COLORMAP_STOPS) - 1)
    lo = np.minimum(np.floor(x).astype(np.int64), len(COLORMAP_STOPS) - 2)
    frac = (x - lo)[..., None]
    rgb = COLORMAP_STOPS[lo] * (1 - frac) + COLORMAP_STOPS[lo + 1] * frac
    return np.floor(rgb + 0.5).astype(np.uint8)


def heatmap_csv(grid: HeatmapGrid, quantity: str = "rmse_arousal") -> str:
    """CSV with arousal bins as rows (descending) and valence bins as columns."""
    values = _quantity(grid, quantity)
    centers = grid.centers()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arousal\\valence"] + [f"{c:.4f}" for c in centers])
    for j in reversed(range(grid.resolution)):
        row = [f"{centers[j]:.4f}"]
        for i in range(grid.resolution):
            v = values[i, j]
            if quantity == "count":
                row.append(str(int(v)))
            else:
                row.append("" if grid.count[i, j] == 0 else f"{v:.6f}")
        w.writerow(row)
    return buf.getvalue()


def _quantity(grid: HeatmapGrid, quantity: str) -> np.ndarray:
    if quantity == "count":
        return grid.count.astype(np.float64)
    if quantity in ("rmse_valence", "rmse_arousal"):
        return grid.rmse(quantity.split("_")[1])
    raise ValidationError(f"unknown heatmap quantity {quantity!r}")


def heatmap_image(grid: HeatmapGrid, quantity: str = "rmse_arousal", cell_px: int = 16,
                  vmax: float | None = None) -> np.ndarray:
    """RGB raster: arousal increases upward, valence to the right.

    Values are scaled so 0 maps to the first colormap stop and ``vmax``
    (default: the grid maximum) to the last; empty cells are white.
    """
    values = _quantity(grid, quantity)
    filled = grid.count > 0
    if vmax is None:
        vmax = float(values[filled].max()) if filled.any() else 0.0
    scaled = values / vmax if vmax > 0 else np.zeros_like(values)
    rgb = colormap(np.nan_to_num(scaled))
    rgb[~filled] = EMPTY_COLOR
    # (valence, arousal) -> image rows top-down = arousal descending
    rgb = np.transpose(rgb, (1, 0, 2))[::-1]
    return np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)


def render_heatmap(grid: HeatmapGrid, quantity: str = "rmse_arousal", cell_px: int = 16):
    """Return (RGB image array, CSV text) for one heatmap quantity."""
    return heatmap_image(grid, quantity, cell_px), heatmap_csv(grid, quantity)
