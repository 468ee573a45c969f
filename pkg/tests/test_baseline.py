import json

import numpy as np
import pytest

from vamorph.baseline import RidgeModel, extract_features, fit, objective, predict
from vamorph.errors import SingularSystemError, ValidationError


def ridge_oracle(x, y, lam):
    """Augmented least squares: stack sqrt(lam)*I under the standardized design.

    Independent of the normal-equation solve in the library; it never forms Z'Z.
    """
    raw = x[:, :-1]
    mean, std = raw.mean(0), raw.std(0)
    z = np.column_stack([(raw - mean) / std, np.ones(len(x))])
    d = raw.shape[1]
    pad = np.hstack([np.sqrt(lam) * np.eye(d), np.zeros((d, 1))])
    a = np.vstack([z, pad])
    b = np.vstack([y, np.zeros((d, 2))])
    w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w


def test_features_uniform():
    f = extract_features(np.full((64, 48), 77, np.uint8), 8)
    assert f.shape == (65,)
    assert np.allclose(f[:-1], 77) and f[-1] == 1.0


def test_features_global_mean(rng):
    img = rng.integers(0, 256, (30, 17), dtype=np.uint8)
    assert extract_features(img, 1)[0] == pytest.approx(img.mean(), abs=1e-9)


def test_features_half_columns():
    img = np.array([[0, 255], [0, 255]], np.uint8)
    assert extract_features(img, 1)[0] == 127.5
    assert extract_features(img, 2)[:-1].tolist() == [0, 255, 0, 255]


def test_features_non_divisible(rng):
    # 3 -> 2 bins: each output averages 1.5 input cells
    img = np.array([[0, 90, 180]], np.uint8).repeat(2, axis=0)
    f = extract_features(img, 2)[:-1].reshape(2, 2)
    assert np.allclose(f, [[30, 150], [30, 150]])


def test_features_rgb_uses_luminance():
    img = np.zeros((4, 4, 3), np.uint8)
    img[..., 1] = 200
    assert extract_features(img, 1)[0] == pytest.approx(0.587 * 200)


def test_zero_labels_give_zero_weights(rng):
    x = np.column_stack([rng.normal(size=(20, 4)), np.ones(20)])
    m = fit(x, np.zeros((20, 2)), lam=0.5)
    assert np.abs(m.weights_valence).max() < 1e-12 and np.abs(m.weights_arousal).max() < 1e-12


def test_exact_line_lambda_zero():
    xs = np.linspace(-0.4, 0.4, 9)
    x = np.column_stack([xs, np.ones(9)])
    y = np.column_stack([2 * xs, -xs + 0.1])
    slopes, icept = fit(x, y, lam=0).raw_coefficients()
    assert slopes[0, 0] == pytest.approx(2, abs=1e-12)
    assert icept[0] == pytest.approx(0, abs=1e-12)
    assert slopes[0, 1] == pytest.approx(-1, abs=1e-12)
    assert icept[1] == pytest.approx(0.1, abs=1e-12)


def test_matches_oracle(rng):
    x = np.column_stack([rng.normal(size=(50, 5)) * [1, 3, 0.2, 10, 1], np.ones(50)])
    y = rng.uniform(-1, 1, (50, 2))
    m = fit(x, y, lam=0.1)
    w = ridge_oracle(x, y, 0.1)
    assert np.abs(m.weights_valence - w[:, 0]).max() <= 1e-9
    assert np.abs(m.weights_arousal - w[:, 1]).max() <= 1e-9


def test_perturbation_optimality(rng):
    x = np.column_stack([rng.normal(size=(40, 6)), np.ones(40)])
    y = rng.uniform(-1, 1, (40, 2))
    m = fit(x, y, lam=2.0)
    base = objective(m, x, y)
    for _ in range(50):
        dv, da = rng.normal(scale=1e-3, size=(2, 7))
        moved = RidgeModel(m.weights_valence + dv, m.weights_arousal + da,
                           m.feature_mean, m.feature_std, m.lam)
        assert objective(moved, x, y) > base


def test_bias_not_penalized(rng):
    x = np.column_stack([rng.normal(size=(30, 3)), np.ones(30)])
    y = np.full((30, 2), 0.6)
    m = fit(x, y, lam=1000.0)
    assert m.weights_valence[-1] == pytest.approx(0.6, abs=1e-12)


def test_exact_interpolation(rng):
    d = 5
    x = np.column_stack([rng.normal(size=(d + 1, d)), np.ones(d + 1)])
    y = rng.uniform(-0.9, 0.9, (d + 1, 2))
    assert np.abs(predict(fit(x, y, lam=0), x) - y).max() < 1e-9


def test_zero_variance_column(rng):
    x = np.column_stack([rng.normal(size=(10, 2)), np.full(10, 5.0), np.ones(10)])
    m = fit(x, rng.uniform(-1, 1, (10, 2)), lam=0.3)
    assert m.feature_std[2] == 1.0
    assert m.weights_valence[2] == 0 and m.weights_arousal[2] == 0


def test_clamp():
    x = np.column_stack([np.array([0.0, 1.0, 2.0]), np.ones(3)])
    y = np.column_stack([[0.0, 0.5, 1.0], [0.0, -0.5, -1.0]])
    p = predict(fit(x, y, lam=0), np.array([[10.0, 1.0]]))
    assert p.tolist() == [[1.0, -1.0]]


def test_singular_without_regularization(rng):
    x = np.column_stack([rng.normal(size=(3, 6)), np.ones(3)])
    with pytest.raises(SingularSystemError):
        fit(x, rng.uniform(-1, 1, (3, 2)), lam=0)
    fit(x, rng.uniform(-1, 1, (3, 2)), lam=0.1)


def test_argument_errors(rng):
    x = np.column_stack([rng.normal(size=(4, 2)), np.ones(4)])
    with pytest.raises(ValidationError):
        fit(x, np.zeros((4, 2)), lam=-1)
    x[0, 0] = np.nan
    with pytest.raises(ValidationError):
        fit(x, np.zeros((4, 2)))


def test_json_round_trip(tmp_path, rng):
    x = np.column_stack([rng.normal(size=(12, 3)), np.ones(12)])
    m = fit(x, rng.uniform(-1, 1, (12, 2)), lam=0.7, d_side=4)
    m.save(tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["lambda"] == 0.7 and doc["d_side"] == 4
    back = RidgeModel.load(tmp_path / "m.json")
    assert np.array_equal(predict(back, x), predict(m, x))
    with pytest.raises(ValidationError):
        RidgeModel.from_dict({**doc, "schema_version": 99})
