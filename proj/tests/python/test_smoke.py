import json

import numpy as np
import pytest

import stormcast


def blobs(shift_x=0.0, shift_y=0.0, size=48, seed=3):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(-6, size + 6, size=(30, 2))
    sigmas = rng.uniform(2, 5, size=30)
    yy, xx = np.mgrid[0:size, 0:size]
    field = np.zeros((size, size))
    for (cx, cy), s in zip(centres, sigmas):
        field += np.exp(-((xx - shift_x - cx) ** 2 + (yy - shift_y - cy) ** 2) / (2 * s * s))
    return (120 * np.minimum(field, 1.5)).astype(np.float32)


def test_schema_sizes():
    assert len(stormcast.schema_names("error153")) == 153
    assert len(stormcast.schema_names("ext129")) == 129
    with pytest.raises(ValueError):
        stormcast.schema_names("wide")


def test_max_filter_matches_numpy_window():
    frame = np.random.default_rng(0).uniform(0, 300, size=(20, 17)).astype(np.float32)
    out = stormcast.conv_filter(frame, "max", 3)
    padded = np.pad(frame, 1, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
    np.testing.assert_array_equal(out, windows.max(axis=(2, 3)))


def test_flow_recovers_a_shift():
    u, v = stormcast.compute_flow(blobs(), blobs(2, 1))
    assert abs(u.mean() - 2) < 0.1
    assert abs(v.mean() - 1) < 0.1


def test_extrapolation_error_vanishes_for_steady_motion():
    err = stormcast.extrapolation_error(blobs(0, 0), blobs(1, 0), blobs(2, 0))
    assert err.shape == (48, 48)
    assert err[8:-8, 8:-8].mean() < 1.0


def test_train_predict_and_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, size=400).astype(np.uint8)
    x = rng.normal(size=(400, 5)).astype(np.float32)
    x[:, 0] += 2.5 * y
    model = stormcast.train(x, y, kind="gb", config={"n_estimators": 20}, seed=4)
    p = model.predict_proba(x)
    assert ((p >= 0.5) == y).mean() > 0.9
    assert stormcast.roc_auc(p.tolist(), y) > 0.95
    importance = model.gini_importance()
    assert abs(sum(importance) - 1) < 1e-9
    assert int(np.argmax(importance)) == 0
    path = tmp_path / "gb.json"
    model.save(str(path))
    again = stormcast.load_model(str(path))
    np.testing.assert_array_equal(again.predict_proba(x), p)
    assert json.loads(path.read_text())["kind"] == "gb"


def test_published_rates_and_projection():
    m = stormcast.metrics(1150117, 131534, 1107016, 88433)
    assert round(m["precision"] * 100, 2) == 89.74
    assert round(m["recall"] * 100, 2) == 92.86
    assert round(m["fpr"] * 100, 2) == 10.62
    pr = stormcast.operational_projection(0.9286, 0.1062, 1238550, 1876590909)
    assert 0.0055 <= pr <= 0.0060
    assert 0.0025 <= stormcast.required_fpr(0.2, 1238550, 1876590909) <= 0.0028
    assert stormcast.gini([0.5, 0.5]) == 0.5


def test_balancing_keeps_classes_equal():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2, 3] = mask[7, 7] = mask[0, 9] = 1
    tiles = stormcast.balance_per_image(mask, seed=2)
    labels = [mask[y, x] for x, y in tiles]
    assert sum(labels) == 3 and len(labels) == 6


def test_small_experiment(tmp_path):
    report = stormcast.run_experiment(
        {
            "data": {"source": "synth", "scene": {"frames": 80, "geometry": {
                "width": 24, "height": 24, "lat_min": 45, "lat_max": 55, "lon_min": 5, "lon_max": 15}}},
            "folds": {"k": 2, "margin_minutes": 120},
            "model": {"kind": "rf", "n_estimators": 10},
            "out": str(tmp_path / "run"),
        }
    )
    cm = report["overall"]["confusion"]
    assert cm["tp"] + cm["fn"] > 0
    assert 0.5 < report["overall"]["metrics"]["accuracy"] <= 1.0
    assert (tmp_path / "run" / "report.json").exists()


def test_invalid_offset_is_a_value_error(tmp_path):
    with pytest.raises(ValueError, match="offset"):
        stormcast.run_experiment({"offset": "0:07", "out": str(tmp_path)})
