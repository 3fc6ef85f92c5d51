"""Model-bundle persistence.

A bundle is one JSON document holding the course calendar, normalization
maxima, both decision trees, the optional per-window logistic models and
training metadata, protected by a sha256 checksum.  Human-diffable beats
compact at this scale.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from .carttree import CartTree, tree_from_dict, tree_to_dict
from .errors import CorruptBundleError, VersionMismatchError
from .experiment import WindowResult
from .ingest import CourseCalendar, WindowSubset
from .linmodel import SoftmaxModel

FORMAT_VERSION = 1
BUNDLE_SUFFIX = ".olit.json"


@dataclass(frozen=True)
class ModelBundle:
    calendar: CourseCalendar
    feature_names: tuple[str, ...]
    normalization_maxima: dict[str, float]
    classes: tuple[int, ...]
    tree_early: CartTree  # weeks 1..5
    tree_late: CartTree  # weeks 5..8
    lr_models: Optional[dict[str, SoftmaxModel]] = None  # key "week{k}:{subset}"
    window_results: Optional[list[WindowResult]] = None
    metadata: Optional[dict] = None
    format_version: int = FORMAT_VERSION


def _calendar_to_dict(cal: CourseCalendar) -> dict:
    return {
        "course_start": cal.course_start.isoformat(),
        "n_weeks": cal.n_weeks,
        "mp_deadline_weeks": list(cal.mp_deadline_weeks),
        "quiz_deadline_weeks": list(cal.quiz_deadline_weeks),
        "pr_deadline_weeks": list(cal.pr_deadline_weeks),
    }


def _calendar_from_dict(data: dict) -> CourseCalendar:
    return CourseCalendar(
        course_start=date.fromisoformat(data["course_start"]),
        n_weeks=int(data["n_weeks"]),
        mp_deadline_weeks=tuple(data["mp_deadline_weeks"]),
        quiz_deadline_weeks=tuple(data["quiz_deadline_weeks"]),
        pr_deadline_weeks=tuple(data["pr_deadline_weeks"]),
    )


def _model_to_dict(model: SoftmaxModel) -> dict:
    return {
        "classes": list(model.classes),
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "feature_names": list(model.feature_names),
        "l2_lambda": model.l2_lambda,
    }


def _model_from_dict(data: dict) -> SoftmaxModel:
    return SoftmaxModel(
        classes=tuple(int(c) for c in data["classes"]),
        weights=np.asarray(data["weights"], dtype=float),
        bias=np.asarray(data["bias"], dtype=float),
        feature_names=tuple(data["feature_names"]),
        l2_lambda=float(data["l2_lambda"]),
    )


def _window_to_dict(r: WindowResult) -> dict:
    return {
        "week": r.upto_week,
        "subset": r.subset.value,
        "accuracy": r.test_accuracy,
        "n_features": r.n_features,
        "converged": r.converged,
    }


def _window_from_dict(data: dict) -> WindowResult:
    return WindowResult(
        upto_week=int(data["week"]),
        subset=WindowSubset(data["subset"]),
        test_accuracy=None if data["accuracy"] is None else float(data["accuracy"]),
        n_features=int(data["n_features"]),
        converged=bool(data["converged"]),
    )


def bundle_to_dict(bundle: ModelBundle) -> dict:
    return {
        "format_version": bundle.format_version,
        "calendar": _calendar_to_dict(bundle.calendar),
        "feature_names": list(bundle.feature_names),
        "normalization_maxima": dict(bundle.normalization_maxima),
        "classes": list(bundle.classes),
        "tree_early": tree_to_dict(bundle.tree_early),
        "tree_late": tree_to_dict(bundle.tree_late),
        "lr_models": (
            None
            if bundle.lr_models is None
            else {k: _model_to_dict(m) for k, m in sorted(bundle.lr_models.items())}
        ),
        "window_results": (
            None
            if bundle.window_results is None
            else [_window_to_dict(r) for r in bundle.window_results]
        ),
        "metadata": bundle.metadata or {},
    }


def bundle_from_dict(doc: dict) -> ModelBundle:
    return ModelBundle(
        calendar=_calendar_from_dict(doc["calendar"]),
        feature_names=tuple(doc["feature_names"]),
        normalization_maxima={k: float(v) for k, v in doc["normalization_maxima"].items()},
        classes=tuple(int(c) for c in doc["classes"]),
        tree_early=tree_from_dict(doc["tree_early"]),
        tree_late=tree_from_dict(doc["tree_late"]),
        lr_models=(
            None
            if doc.get("lr_models") is None
            else {k: _model_from_dict(m) for k, m in doc["lr_models"].items()}
        ),
        window_results=(
            None
            if doc.get("window_results") is None
            else [_window_from_dict(r) for r in doc["window_results"]]
        ),
        metadata=doc.get("metadata") or {},
        format_version=int(doc["format_version"]),
    )


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_text_atomic(path: str | Path, content: str) -> None:
    """Write via a sibling temp file + rename so interrupted runs never
    leave truncated artifacts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_bundle(bundle: ModelBundle, path: str | Path) -> None:
    payload = bundle_to_dict(bundle)
    doc = dict(payload)
    doc["checksum"] = _checksum(payload)
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_bundle(path: str | Path) -> ModelBundle:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptBundleError(f"cannot read bundle: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptBundleError(f"bundle is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptBundleError("bundle root must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(version, FORMAT_VERSION)
    stored = doc.pop("checksum", None)
    if stored is None:
        raise CorruptBundleError("bundle has no checksum")
    if _checksum(doc) != stored:
        raise CorruptBundleError("bundle checksum mismatch")
    try:
        return bundle_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptBundleError(f"bundle structure invalid: {exc}") from exc
