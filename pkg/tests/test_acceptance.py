"""One test per acceptance criterion, each printing a PASS/FAIL line.

The lines are also collected and shown in the pytest terminal summary under
"acceptance criteria".
"""

import itertools
import json
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from conftest import ACCEPTANCE_LINES
from test_cli import pipeline, prepare_inputs
from vamorph.baseline import extract_features, fit, predict
from vamorph.dataset import Manifest, SampleRecord, read_manifest, split_by_identity
from vamorph.fixture import EXPRESSIONS, SUBJECTS, draw_face, face_landmarks
from vamorph.landmarks import validate_points
from vamorph.metrics import bin_index, ccc, heatmap_arrays, rmse
from vamorph.morph import morph_pair
from vamorph.nir import compute_reference_stats, ks_distance, luminance, to_nir
from vamorph.triangulation import delaunay
from vamorph.va_space import build_grid, default_template

README = Path(__file__).resolve().parents[1] / "README.md"


def report(number, title, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    """The whole CLI pipeline on the 2-subject fixture with the default template."""
    base = tmp_path_factory.mktemp("acceptance")
    fixture_dir = prepare_inputs(base, default_template().to_dict())
    runs, timings = {}, {}
    for name, workers in (("w1", 1), ("w1_rerun", 1), ("w4", 4), ("w8", 8)):
        t0 = time.perf_counter()
        runs[name] = pipeline(base / name, fixture_dir, workers, None)
        timings[name] = time.perf_counter() - t0
    return base, runs, timings


def test_criterion_1_grid_arithmetic(full_runs):
    grid = build_grid(default_template())
    kinds = {k: sum(p.kind == k for p in grid) for k in ("neutral", "prototype", "synthesized")}
    base, runs, timings = full_runs
    aug = read_manifest(base / "w1/aug/manifest.jsonl", validate_files=True)
    rejected = runs["w1"]["aug/rejections.jsonl"].count(b"\n")
    ok = (len(grid) == 141 and kinds == {"neutral": 1, "prototype": 6, "synthesized": 134}
          and len(aug) == 282 and rejected == 0 and timings["w1"] < 60)
    report(1, "grid arithmetic", ok,
           f"{len(grid)} points {kinds}; {len(aug)} records, {rejected} rejected, "
           f"full pipeline {timings['w1']:.1f}s")


def _face(sid, emotion):
    shape = SUBJECTS[sid]
    pts = face_landmarks(shape, EXPRESSIONS[emotion])
    return draw_face(shape, pts), validate_points(pts, 128, 128)


def test_criterion_2_morph_endpoints():
    worst = 0
    pairs = [(("S001", "HAPPY"), ("S001", "SAD")), (("S002", "NEUTRAL"), ("S002", "SURPRISE")),
             (("S001", "ANGRY"), ("S001", "DISGUST"))]
    for (sa, ea), (sb, eb) in pairs:
        ia, la = _face(sa, ea)
        ib, lb = _face(sb, eb)
        for w, expect in ((0.0, ia), (1.0, ib)):
            out, _ = morph_pair(ia, la, ib, lb, w)
            worst = max(worst, int(np.abs(out.astype(int) - expect).max()))
        for w in (0.13, 0.5, 0.77):
            out, _ = morph_pair(ia, la, ia, la, w)
            worst = max(worst, int(np.abs(out.astype(int) - ia).max()))
    report(2, "morph endpoint fidelity", worst <= 1, f"max deviation {worst} over endpoints and self-morphs")


def _in_circle_exact(a, b, c, d):
    """Strictly inside the circumcircle of ccw triangle abc, in exact rationals."""
    rows = []
    for p in (a, b, c):
        dx, dy = Fraction(p[0]) - Fraction(d[0]), Fraction(p[1]) - Fraction(d[1])
        rows.append((dx, dy, dx * dx + dy * dy))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    det = a1 * (b2 * c3 - b3 * c2) - a2 * (b1 * c3 - b3 * c1) + a3 * (b1 * c2 - b2 * c1)
    return det > 0


def test_criterion_3_delaunay_oracle():
    g = np.random.default_rng(2024)
    violations, worst_rel = 0, 0.0
    for trial in range(200):
        n = int(g.integers(3, 31))
        pts = g.uniform(0, 100, (n, 2)) if trial % 2 else np.round(g.uniform(0, 20, (n, 2)))
        pts = np.unique(pts, axis=0)
        if len(pts) < 3 or np.linalg.matrix_rank(pts[1:] - pts[0]) < 2:
            continue
        mesh = delaunay(pts)
        for tri in mesh.triangles:
            a, b, c = pts[tri]
            for k in range(len(pts)):
                if k not in tri and _in_circle_exact(a, b, c, pts[k]):
                    violations += 1
        total = float(np.sum(np.abs(mesh.signed_areas())))
        hull = ConvexHull(pts).volume
        worst_rel = max(worst_rel, abs(total - hull) / hull)
    report(3, "Delaunay oracle", violations == 0 and worst_rel <= 1e-6,
           f"{violations} circumcircle violations, max area rel err {worst_rel:.2e}")


def _rmse_direct(p, t):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(p, t)) / len(p))


def _ccc_direct(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    vx = math.fsum((a - mx) ** 2 for a in x) / n
    vy = math.fsum((b - my) ** 2 for b in y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y)) / n
    return 2 * cov / (vx + vy + (mx - my) ** 2)


def test_criterion_4_metric_oracles():
    g = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        n = int(g.integers(2, 200))
        x = g.uniform(-1, 1, n)
        y = np.clip(x * g.uniform(-1, 2) + g.normal(0, g.uniform(0.01, 1), n), -1, 1)
        worst = max(worst, abs(rmse(x, y) - _rmse_direct(x, y)), abs(ccc(x, y) - _ccc_direct(x, y)))
    x = g.uniform(-1, 1, 50)
    y = g.uniform(-1, 1, 50)
    ident = abs(ccc(x, x) - 1)
    const = abs(ccc(np.full(50, 0.3), y))
    sym = abs(ccc(x, y) - ccc(y, x))
    ok = worst <= 1e-12 and ident <= 1e-12 and const <= 1e-12 and sym <= 1e-12
    report(4, "metric oracle equivalence", ok,
           f"max |lib-direct| {worst:.1e}; |ccc(x,x)-1| {ident:.1e}; ccc(const,y) {const:.1e}; asym {sym:.1e}")


def test_criterion_5_label_consistency(augmented):
    manifest, _, _ = augmented
    worst, checked = 0.0, 0
    for r in manifest.records:
        if r.origin != "morphed":
            continue
        th = math.radians(r.angle_deg)
        worst = max(worst, abs(r.valence - r.intensity * math.cos(th)), abs(r.arousal - r.intensity * math.sin(th)))
        checked += 1
    report(5, "label consistency", checked == 268 and worst <= 1e-9,
           f"{checked} synthesized records, max deviation {worst:.1e}")


def test_criterion_6_split_protocol():
    m = Manifest([SampleRecord(image_path=f"{s}/{k}.png", subject_id=f"P{s:03d}", emotion_label="HAPPY")
                  for s in range(80) for k in range(2)])
    sizes, overlaps = set(), 0
    for seed in range(100):
        out = split_by_identity(m, 0.10, seed)
        test = {r.subject_id for r in out.records if r.split == "test"}
        train = {r.subject_id for r in out.records if r.split == "train"}
        sizes.add(len(test))
        overlaps += bool(test & train) or len(test | train) != 80
    report(6, "identity split", sizes == {8} and overlaps == 0,
           f"test sizes {sorted(sizes)}, {overlaps} seeds with overlap/loss")


def _normal_equations(x, y, lam):
    """Ridge weights on standardized features from the textbook normal equations."""
    raw = x[:, :-1]
    mu, sd = raw.mean(0), raw.std(0)
    z = np.column_stack([(raw - mu) / sd, np.ones(len(x))])
    penalty = lam * np.eye(z.shape[1])
    penalty[-1, -1] = 0
    return np.linalg.solve(z.T @ z + penalty, z.T @ y)


def test_criterion_7_ridge_sanity():
    g = np.random.default_rng(7)
    n, d = 400, 12
    feats = g.uniform(0, 255, (n, d))
    x = np.column_stack([feats, np.ones(n)])
    beta = g.normal(0, 1, (d, 2))
    signal = (feats - 127.5) / 255 @ beta
    signal *= 0.7 / np.abs(signal).max(axis=0)
    y = signal + g.normal(0, 0.01, (n, 2))
    tr, te = slice(0, 300), slice(300, None)
    model = fit(x[tr], y[tr], lam=1.0)
    pred = predict(model, x[te])
    r_v, r_a = (rmse(pred[:, k], y[te][:, k]) for k in range(2))
    oracle = _normal_equations(x[tr], y[tr], 1.0)
    werr = max(np.abs(model.weights_valence - oracle[:, 0]).max(),
               np.abs(model.weights_arousal - oracle[:, 1]).max())
    report(7, "ridge baseline", r_v < 0.05 and r_a < 0.05 and werr <= 1e-9,
           f"test RMSE v {r_v:.4f} a {r_a:.4f}; weight error {werr:.1e}")


def test_criterion_8_nir_proxy():
    # A pixel-wise map cannot split one gray level across outputs, so KS is bounded
    # by the heaviest source level. "At least 64 distinct levels" is read as 64+
    # levels of roughly equal population (each holding at most 1/64 of the pixels).
    g = np.random.default_rng(8)
    worst_ks, mono_bad = 0.0, 0
    for trial in range(12):
        levels = int(g.integers(64, 257))
        codes = np.sort(g.choice(256, levels, replace=False))
        src = codes[g.permutation(np.arange(256 * 256) % levels)].reshape(256, 256).astype(np.uint8)
        if trial % 3 == 0:
            src = np.stack([src, src, src], axis=-1)
        ref = (g.beta(g.uniform(1, 5), g.uniform(1, 5), (128, 128)) * 255).astype(np.uint8)
        stats = compute_reference_stats([ref])
        out = to_nir(src, stats)
        worst_ks = max(worst_ks, ks_distance(out, stats.cdf))
        lum = luminance(src).ravel()
        order = np.argsort(lum, kind="stable")
        mono_bad += int(np.any(np.diff(out.ravel()[order].astype(int)) < 0))
    report(8, "NIR proxy distribution match", worst_ks <= 0.02 and mono_bad == 0,
           f"max KS {worst_ks:.4f} over 12 images, {mono_bad} monotonicity violations")


def test_criterion_9_heatmap_conservation():
    g = np.random.default_rng(9)
    bad = 0
    for _ in range(300):
        n = int(g.integers(1, 500))
        res = int(g.integers(2, 21))
        t = g.uniform(-1, 1, (n, 2))
        t[g.random(n) < 0.1] = g.choice([-1.0, 1.0], size=2)
        grid = heatmap_arrays(t[:, 0], t[:, 1], t[:, 0], t[:, 1], res)
        bad += grid.n != n
    edge = heatmap_arrays([1.0], [1.0], [1.0], [1.0], 10)
    ok_edge = edge.count[9, 9] == 1 and bin_index([1.0], 10)[0] == 9
    report(9, "heatmap conservation", bad == 0 and ok_edge,
           f"{bad} of 300 grids lost samples; (1,1) in last bin: {bool(ok_edge)}")


def test_criterion_10_determinism(full_runs):
    _, runs, _ = full_runs
    ref = runs["w1"]
    mismatched = sorted({path for name, files in runs.items() for path in set(ref) | set(files)
                         if ref.get(path) != files.get(path)})
    report(10, "determinism", not mismatched,
           f"{len(ref)} files compared across reruns and workers 1/4/8; mismatched: {mismatched[:5]}")


def test_criterion_11_documented_limitation():
    text = README.read_text(encoding="utf-8") if README.is_file() else ""
    ok = "not reproducible" in text.lower() and "0.124" in text
    report(11, "non-reproducible results documented", ok, "README states the limitation")
