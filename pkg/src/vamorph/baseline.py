"""Closed-form ridge regressor on downsampled luminance features.

Features are standardized with training-set moments; the bias column is
never regularized. Predictions are clamped to [-1, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SingularSystemError, ValidationError
from .morph import check_image
from .nir import LUMA_WEIGHTS

SCHEMA_VERSION = 1
DEFAULT_LAMBDA = 1.0
DEFAULT_SIDE = 32


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix averaging input cells over equal-width output bins."""
    edges = np.arange(n_in + 1, dtype=np.float64)
    bins = np.linspace(0, n_in, n_out + 1)
    lo = np.maximum(edges[None, :-1], bins[:-1, None])
    hi = np.minimum(edges[None, 1:], bins[1:, None])
    overlap = np.clip(hi - lo, 0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def extract_features(img, d_side: int = DEFAULT_SIDE) -> np.ndarray:
    """Area-averaged ``d_side`` x ``d_side`` luminance, row-major, with a trailing 1."""
    img = check_image(img)
    if d_side < 1:
        raise ValidationError("d_side must be positive")
    if img.ndim == 3:
        lum = img.astype(np.float64) @ np.array(LUMA_WEIGHTS)
    else:
        lum = img.astype(np.float64)
    h, w = lum.shape
    small = _area_matrix(h, d_side) @ lum @ _area_matrix(w, d_side).T
    return np.append(small.ravel(), 1.0)


@dataclass(frozen=True, eq=False)
class RidgeModel:
    """Weights act on standardized features; the last entry is the bias."""

    weights_valence: np.ndarray
    weights_arousal: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    lam: float
    d_side: int | None = None

    @property
    def d(self) -> int:
        return len(self.feature_mean)

    def standardize(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.d + 1:
            raise ValidationError(f"expected {self.d + 1} feature columns, got {x.shape[1]}")
        z = (x[:, :-1] - self.feature_mean) / self.feature_std
        return np.column_stack([z, x[:, -1]])

    def raw_predict(self, features) -> np.ndarray:
        z = self.standardize(features)
        return np.column_stack([z @ self.weights_valence, z @ self.weights_arousal])

    def raw_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Slopes (d, 2) and intercepts (2,) on unstandardized features."""
        w = np.column_stack([self.weights_valence, self.weights_arousal])
        slopes = w[:-1] / self.feature_std[:, None]
        return slopes, w[-1] - self.feature_mean @ slopes

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "lambda": self.lam,
            "d_side": self.d_side,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "weights_valence": self.weights_valence.tolist(),
            "weights_arousal": self.weights_arousal.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RidgeModel":
        try:
            if doc["schema_version"] != SCHEMA_VERSION:
                raise ValidationError(f"unsupported model schema_version {doc['schema_version']}")
            return cls(
                np.asarray(doc["weights_valence"], dtype=np.float64),
                np.asarray(doc["weights_arousal"], dtype=np.float64),
                np.asarray(doc["feature_mean"], dtype=np.float64),
                np.asarray(doc["feature_std"], dtype=np.float64),
                float(doc["lambda"]),
                doc.get("d_side"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model document: {exc}") from exc

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RidgeModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit(features, labels, lam: float = DEFAULT_LAMBDA, d_side: int | None = None) -> RidgeModel:
    """Solve (Z'Z + lam*I') w = Z'y per dimension, where I' skips the bias.

    ``features`` is n x (d+1) with a trailing bias column of ones; ``labels``
    is n x 2 (valence, arousal). Zero-variance columns get std 1 and weight 0.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).reshape(len(x), 2)
    if len(x) < 1:
        raise ValidationError("fit needs at least one sample")
    if lam < 0:
        raise ValidationError("lambda must be non-negative")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValidationError("features and labels must be finite")

    raw = x[:, :-1]
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    live = std > 0
    std = np.where(live, std, 1.0)
    z = np.column_stack([(raw - mean) / std, x[:, -1]])

    cols = np.append(np.flatnonzero(live), z.shape[1] - 1)
    zl = z[:, cols]
    reg = np.full(len(cols), lam)
    reg[-1] = 0.0
    gram = zl.T @ zl + np.diag(reg)
    try:
        sol = np.linalg.solve(gram, zl.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("normal equations are singular; use lambda > 0") from exc
    if lam == 0 and np.linalg.cond(gram) > 1e12:
        raise SingularSystemError("normal equations are singular; use lambda > 0")

    w = np.zeros((z.shape[1], 2))
    w[cols] = sol
    return RidgeModel(w[:, 0], w[:, 1], mean, std, float(lam), d_side)


def predict(model: RidgeModel, features) -> np.ndarray:
    """Clamped (valence, arousal) rows, one per feature row."""
    return np.clip(model.raw_predict(features), -1.0, 1.0)


def objective(model: RidgeModel, features, labels) -> float:
    """Regularized training loss for both dimensions (unclamped predictions)."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 2)
    resid = model.raw_predict(features) - y
    penalty = model.lam * (np.sum(model.weights_valence[:-1] ** 2) + np.sum(model.weights_arousal[:-1] ** 2))
    return float(np.sum(resid ** 2) + penalty)
