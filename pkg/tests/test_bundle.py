"""Bundle persistence: lossless round-trip, version gating and corruption
detection."""

from __future__ import annotations

import json

import numpy as np
import pytest

from olit.bundle import (
    BUNDLE_SUFFIX,
    FORMAT_VERSION,
    load_bundle,
    save_bundle,
)
from olit.carttree import predict_leaf
from olit.errors import CorruptBundleError, VersionMismatchError
from olit.linmodel import predict_proba


@pytest.fixture()
def saved(tmp_path, bundle42):
    path = tmp_path / f"model{BUNDLE_SUFFIX}"
    save_bundle(bundle42, path)
    return path


def test_round_trip_preserves_predictions(saved, bundle42):
    loaded = load_bundle(saved)
    assert loaded.calendar == bundle42.calendar
    assert loaded.feature_names == bundle42.feature_names
    assert loaded.classes == bundle42.classes
    assert loaded.tree_early == bundle42.tree_early
    assert loaded.tree_late == bundle42.tree_late

    rng = np.random.default_rng(0)
    early_d = len(bundle42.tree_early.feature_names)
    for _ in range(1000):
        row = rng.uniform(size=early_d)
        assert (
            predict_leaf(loaded.tree_early, row).majority_class
            == predict_leaf(bundle42.tree_early, row).majority_class
        )

    # logistic probabilities must round-trip bit for bit
    key = "week5:both"
    original = bundle42.lr_models[key]
    clone = loaded.lr_models[key]
    assert np.array_equal(original.weights, clone.weights)
    assert np.array_equal(original.bias, clone.bias)
    for _ in range(100):
        row = rng.uniform(size=len(original.feature_names))
        assert np.array_equal(predict_proba(original, row), predict_proba(clone, row))


def test_round_trip_window_results(saved, bundle42):
    loaded = load_bundle(saved)
    assert loaded.window_results == bundle42.window_results
    assert loaded.metadata == bundle42.metadata


def test_version_mismatch(saved):
    doc = json.loads(saved.read_text())
    doc["format_version"] = 999
    saved.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatchError):
        load_bundle(saved)


def test_truncated_file_is_corrupt(saved):
    text = saved.read_text()
    saved.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptBundleError):
        load_bundle(saved)


def test_tampered_payload_fails_checksum(saved):
    doc = json.loads(saved.read_text())
    doc["classes"] = [0, 2, 3]
    saved.write_text(json.dumps(doc))
    with pytest.raises(CorruptBundleError):
        load_bundle(saved)


def test_missing_checksum_is_corrupt(saved):
    doc = json.loads(saved.read_text())
    del doc["checksum"]
    saved.write_text(json.dumps(doc))
    with pytest.raises(CorruptBundleError):
        load_bundle(saved)


def test_missing_file_is_corrupt(tmp_path):
    with pytest.raises(CorruptBundleError):
        load_bundle(tmp_path / "nope.olit.json")


def test_save_is_deterministic(tmp_path, bundle42):
    a = tmp_path / "a.olit.json"
    b = tmp_path / "b.olit.json"
    save_bundle(bundle42, a)
    save_bundle(bundle42, b)
    assert a.read_bytes() == b.read_bytes()


def test_no_temp_files_left(tmp_path, bundle42):
    path = tmp_path / "model.olit.json"
    save_bundle(bundle42, path)
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []
    assert load_bundle(path).format_version == FORMAT_VERSION
