"""Shared fixtures: a seeded synthetic cohort, its ingested matrix and a
trained bundle, built once per session."""

from __future__ import annotations

import io
from datetime import date

import numpy as np
import pytest

from olit.cohortgen import GeneratorConfig, generate_cohort
from olit.ingest import (
    CourseCalendar,
    assemble_features,
    bin_by_week,
    normalize_features,
    parse_grades_csv,
    parse_log_csv,
)
from olit.training import TrainSettings, train_bundle


DEFAULT_START = date(2024, 1, 8)


def ingest_artifacts(artifacts, calendar=None):
    """Run the real ingest pipeline over generated CSV text."""
    calendar = calendar or CourseCalendar(course_start=DEFAULT_START)
    parsed = parse_log_csv(io.StringIO(artifacts.logs_csv), calendar)
    weekly = bin_by_week(parsed.events, calendar)
    grades = parse_grades_csv(io.StringIO(artifacts.grades_csv))
    matrix = normalize_features(assemble_features(weekly, grades, calendar))
    return matrix, parsed.events


@pytest.fixture(scope="session")
def calendar():
    return CourseCalendar(course_start=DEFAULT_START)


@pytest.fixture(scope="session")
def cohort42():
    """Deterministic rule-driven cohort (labels follow the embedded rules)."""
    return generate_cohort(GeneratorConfig(seed=42, rule_strength=1.0))


@pytest.fixture(scope="session")
def matrix42(cohort42, calendar):
    matrix, _ = ingest_artifacts(cohort42, calendar)
    return matrix


@pytest.fixture(scope="session")
def events42(cohort42, calendar):
    _, events = ingest_artifacts(cohort42, calendar)
    return events


@pytest.fixture(scope="session")
def bundle42(matrix42, calendar):
    """Fully trained bundle (LR window models included)."""
    return train_bundle(matrix42, calendar, TrainSettings(seed=42)).bundle


@pytest.fixture(scope="session")
def bundle42_nolr(matrix42, calendar):
    return train_bundle(
        matrix42, calendar, TrainSettings(seed=42, include_lr=False)
    ).bundle


def random_matrix(rng, n_rows, n_features, labels):
    """Small random FeatureMatrix with week-style feature names."""
    from olit.ingest import FeatureMatrix

    names = []
    kinds = ["Stat0", "Stat1", "Stat2", "Stat3", "MP1", "Quiz1"]
    for i in range(n_features):
        week = i // len(kinds) + 1
        names.append(f"Week{week} {kinds[i % len(kinds)]}")
    return FeatureMatrix(
        feature_names=tuple(names),
        values=rng.uniform(0, 1, size=(n_rows, n_features)),
        labels=np.asarray(labels, dtype=int),
        student_ids=tuple(f"r{i:03d}" for i in range(n_rows)),
    )
