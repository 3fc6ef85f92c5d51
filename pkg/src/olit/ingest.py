"""Activity-log and grade-book ingestion.

Parses Moodle-style event logs and grade CSVs, bins interactions into course
weeks, and assembles the normalized per-student feature matrix with columns
named ``Week{n} Stat{k}`` (activity fractions) and ``Week{n} MP{j}`` /
``Quiz{j}`` / ``PR{j}`` (assignment grade fractions at their deadline week).
"""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    BadTimestampError,
    DuplicateStudentError,
    EmptyFeatureSetError,
    EmptyFileError,
    InvalidConfigError,
    MalformedCsvError,
)

Source = Union[str, Path, IO[str]]

LOG_HEADER = ("student_id", "timestamp", "event_name")
GRADES_HEADER = (
    "student_id",
    "mp1", "mp2", "mp3",
    "quiz1", "quiz2", "quiz3",
    "pr1", "pr2", "pr3",
    "final",
)

UNGRADED = -1  # label sentinel for students with logs but no grade row


class ActivityCategory(Enum):
    """Interaction category; Stat index matches the feature naming scheme."""

    COURSE_CONTENT = 0
    ASSIGNMENT = 1
    GRADE_RELATED = 2
    FORUM = 3
    OTHER = None

    @property
    def stat_index(self) -> int | None:
        return self.value


# Known Moodle event names per category.  Lookup is case-insensitive and
# exact; anything else is OTHER.
_COURSE_CONTENT_EVENTS = (
    "course module viewed",
    "course viewed",
    "course activity completion updated",
    "course module instance list viewed",
    "content page viewed",
    "lesson started",
    "lesson resumed",
    "lesson restarted",
    "lesson ended",
)
_ASSIGNMENT_EVENTS = (
    "quiz attempt reviewed",
    "quiz attempt submitted",
    "quiz attempt summary viewed",
    "quiz attempt viewed",
    "quiz attempt started",
    "question answered",
    "question viewed",
    "submission re-assessed",
    "submission reassessed",
    "submission updated",
    "submission created",
    "submission viewed",
)
_GRADE_RELATED_EVENTS = (
    "grade user report viewed",
    "grade overview report viewed",
    "user graded",
    "grade deleted",
    "user profile viewed",
    "recent activity viewed",
    "user report viewed",
    "course user report viewed",
    "outline report viewed",
)
_FORUM_EVENTS = (
    "post updated",
    "post created",
    "discussion created",
    "some content has been posted",
    "discussion viewed",
)

EVENT_TAXONOMY: dict[str, ActivityCategory] = {}
for _names, _cat in (
    (_COURSE_CONTENT_EVENTS, ActivityCategory.COURSE_CONTENT),
    (_ASSIGNMENT_EVENTS, ActivityCategory.ASSIGNMENT),
    (_GRADE_RELATED_EVENTS, ActivityCategory.GRADE_RELATED),
    (_FORUM_EVENTS, ActivityCategory.FORUM),
):
    for _n in _names:
        EVENT_TAXONOMY[_n] = _cat


def categorize_event(event_name: str) -> ActivityCategory:
    """Map an event name to its category; unknown names are OTHER."""
    return EVENT_TAXONOMY.get(event_name.strip().lower(), ActivityCategory.OTHER)


class GradeClass(Enum):
    DROPOUT = "dropout"
    LOW = "low"
    HIGH = "high"

    @classmethod
    def from_grade(cls, grade: int) -> "GradeClass":
        if grade == 0:
            return cls.DROPOUT
        if 1 <= grade <= 3:
            return cls.LOW
        if 4 <= grade <= 5:
            return cls.HIGH
        raise ValueError(f"grade {grade} outside 0..5")


@dataclass(frozen=True)
class CourseCalendar:
    """Course timeline: start date, duration and assignment deadline weeks."""

    course_start: date
    n_weeks: int = 9
    mp_deadline_weeks: tuple[int, ...] = (3, 5, 8)
    quiz_deadline_weeks: tuple[int, ...] = (2, 4, 8)
    pr_deadline_weeks: tuple[int, ...] = (3, 5, 8)

    def __post_init__(self):
        if self.n_weeks < 1:
            raise InvalidConfigError("n_weeks must be positive")
        for name in ("mp_deadline_weeks", "quiz_deadline_weeks", "pr_deadline_weeks"):
            weeks = getattr(self, name)
            object.__setattr__(self, name, tuple(int(w) for w in weeks))
            weeks = getattr(self, name)
            if list(weeks) != sorted(weeks):
                raise InvalidConfigError(f"{name} must be sorted ascending")
            if any(w < 1 or w > self.n_weeks for w in weeks):
                raise InvalidConfigError(f"{name} must lie within [1, {self.n_weeks}]")

    @property
    def start_instant(self) -> datetime:
        return datetime(
            self.course_start.year, self.course_start.month, self.course_start.day,
            tzinfo=timezone.utc,
        )

    @property
    def end_instant(self) -> datetime:
        return self.start_instant + timedelta(weeks=self.n_weeks)

    def week_of(self, instant: datetime) -> int:
        """1-based course week; caller guarantees the instant is in window."""
        days = (instant - self.start_instant).days
        return days // 7 + 1

    def contains(self, instant: datetime) -> bool:
        return self.start_instant <= instant < self.end_instant


@dataclass(frozen=True)
class LogEvent:
    student_id: str
    timestamp: datetime  # always UTC
    event_name: str
    category: ActivityCategory


@dataclass(frozen=True)
class GradeRecord:
    """One grade-book row; None marks a missing (unsubmitted) score."""

    student_id: str
    mp: tuple[float | None, float | None, float | None]
    quiz: tuple[float | None, float | None, float | None]
    pr: tuple[float | None, float | None, float | None]
    final_grade: int

    def score(self, kind: str, j: int) -> float | None:
        return {"MP": self.mp, "Quiz": self.quiz, "PR": self.pr}[kind][j - 1]


@dataclass(frozen=True)
class FeatureMatrix:
    """Students x named features, plus final-grade labels.

    Treated as immutable: operations return new instances.  After
    :func:`normalize_features` the per-column activity maxima travel with the
    matrix so new students can be scaled identically at inference time.
    """

    feature_names: tuple[str, ...]
    values: np.ndarray  # shape (n_students, n_features), float64
    labels: np.ndarray  # shape (n_students,), int
    student_ids: tuple[str, ...]
    activity_maxima: tuple[float, ...] | None = None  # aligned with feature_names
    students_without_grades: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.feature_names) != len(set(self.feature_names)):
            raise InvalidConfigError("feature names must be unique")
        n, f = self.values.shape
        if n != len(self.labels) or n != len(self.student_ids):
            raise InvalidConfigError("row, label and id counts must agree")
        if f != len(self.feature_names):
            raise InvalidConfigError("column count must match feature names")

    @property
    def n_students(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def index_of(self, feature_name: str) -> int:
        try:
            return self.feature_names.index(feature_name)
        except ValueError:
            from .errors import UnknownFeatureError

            raise UnknownFeatureError(feature_name) from None

    def row_of(self, student_id: str) -> np.ndarray:
        try:
            i = self.student_ids.index(student_id)
        except ValueError:
            from .errors import UnknownStudentError

            raise UnknownStudentError(student_id) from None
        return self.values[i]

    def take(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=int)
        maxima = self.activity_maxima
        return FeatureMatrix(
            feature_names=self.feature_names,
            values=self.values[idx].copy(),
            labels=self.labels[idx].copy(),
            student_ids=tuple(self.student_ids[i] for i in idx),
            activity_maxima=maxima,
            students_without_grades=self.students_without_grades,
        )

    def append_rows(
        self,
        values: np.ndarray,
        labels: Sequence[int],
        student_ids: Sequence[str],
    ) -> "FeatureMatrix":
        return FeatureMatrix(
            feature_names=self.feature_names,
            values=np.vstack([self.values, values]),
            labels=np.concatenate([self.labels, np.asarray(labels, dtype=int)]),
            student_ids=self.student_ids + tuple(student_ids),
            activity_maxima=self.activity_maxima,
            students_without_grades=self.students_without_grades,
        )


@dataclass(frozen=True)
class ParsedLog:
    events: list[LogEvent]
    dropped_out_of_window: int


_FEATURE_RE = re.compile(r"^Week(\d+) (Stat([0-3])|MP(\d+)|Quiz(\d+)|PR(\d+))$")


def feature_week(name: str) -> int:
    m = _FEATURE_RE.match(name)
    if not m:
        raise ValueError(f"not a feature name: {name!r}")
    return int(m.group(1))


def feature_kind(name: str) -> str:
    """Return 'Stat', 'MP', 'Quiz' or 'PR'."""
    m = _FEATURE_RE.match(name)
    if not m:
        raise ValueError(f"not a feature name: {name!r}")
    return re.match(r"[A-Za-z]+", m.group(2)).group(0)


def is_activity_feature(name: str) -> bool:
    return feature_kind(name) == "Stat"


class WindowSubset(Enum):
    GRADES_ONLY = "grades"
    LOGS_ONLY = "logs"
    BOTH = "both"

    def admits(self, feature_name: str) -> bool:
        activity = is_activity_feature(feature_name)
        if self is WindowSubset.GRADES_ONLY:
            return not activity
        if self is WindowSubset.LOGS_ONLY:
            return activity
        return True


def _open_source(source: Source):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _parse_timestamp(raw: str, row_index: int, fmt: str | None) -> datetime:
    text = raw.strip()
    try:
        if fmt is not None:
            ts = datetime.strptime(text, fmt)
        else:
            # Python 3.10 fromisoformat does not accept a trailing Z.
            ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise BadTimestampError(raw, row_index) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_column_map(source: Source) -> dict[str, str]:
    """Read a key=value mapping file adapting a raw export to the canonical
    log schema.  Known keys: student_id, timestamp, event_name (column names
    in the raw file) and timestamp_format (strptime pattern)."""
    handle, owned = _open_source(source)
    try:
        mapping: dict[str, str] = {}
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfigError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in {"student_id", "timestamp", "event_name", "timestamp_format"}:
                raise InvalidConfigError(f"line {lineno}: unknown mapping key {key!r}")
            mapping[key] = value.strip()
        return mapping
    finally:
        if owned:
            handle.close()


def parse_log_csv(
    source: Source,
    calendar: CourseCalendar,
    column_map: Mapping[str, str] | None = None,
) -> ParsedLog:
    """Parse an activity-log CSV into categorized events.

    Rows with timestamps outside [course_start, course_start + n_weeks*7d)
    are dropped and counted; everything else must parse cleanly.
    """
    handle, owned = _open_source(source)
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError("log file has no header row") from None

        fmt = None
        if column_map:
            fmt = column_map.get("timestamp_format")
            positions = {}
            for canon in LOG_HEADER:
                wanted = column_map.get(canon, canon)
                if wanted not in header:
                    raise MalformedCsvError(
                        f"mapped column {wanted!r} for {canon!r} not in header {header}"
                    )
                positions[canon] = header.index(wanted)
            min_arity = max(positions.values()) + 1
        else:
            if tuple(h.strip() for h in header) != LOG_HEADER:
                raise MalformedCsvError(
                    f"expected header {','.join(LOG_HEADER)!r}, got {','.join(header)!r}"
                )
            positions = {name: i for i, name in enumerate(LOG_HEADER)}
            min_arity = len(LOG_HEADER)

        events: list[LogEvent] = []
        dropped = 0
        for row_index, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) < min_arity or (not column_map and len(row) != len(LOG_HEADER)):
                raise MalformedCsvError(
                    f"expected {min_arity} field(s), got {len(row)}", row_index
                )
            student_id = row[positions["student_id"]].strip()
            event_name = row[positions["event_name"]].strip()
            if not student_id or not event_name:
                raise MalformedCsvError("empty student_id or event_name", row_index)
            ts = _parse_timestamp(row[positions["timestamp"]], row_index, fmt)
            if not calendar.contains(ts):
                dropped += 1
                continue
            events.append(LogEvent(student_id, ts, event_name, categorize_event(event_name)))
        return ParsedLog(events=events, dropped_out_of_window=dropped)
    finally:
        if owned:
            handle.close()


def _parse_score(raw: str, row_index: int, column: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise MalformedCsvError(f"bad score {raw!r} in column {column}", row_index) from None
    if not 0.0 <= value <= 1.0:
        raise MalformedCsvError(f"score {value} outside [0,1] in column {column}", row_index)
    return value


def parse_grades_csv(source: Source) -> list[GradeRecord]:
    """Parse the grade-book CSV (one row per student)."""
    handle, owned = _open_source(source)
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError("grades file has no header row") from None
        if tuple(h.strip() for h in header) != GRADES_HEADER:
            raise MalformedCsvError(
                f"expected header {','.join(GRADES_HEADER)!r}, got {','.join(header)!r}"
            )
        records: list[GradeRecord] = []
        for row_index, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(GRADES_HEADER):
                raise MalformedCsvError(
                    f"expected {len(GRADES_HEADER)} fields, got {len(row)}", row_index
                )
            student_id = row[0].strip()
            if not student_id:
                raise MalformedCsvError("empty student_id", row_index)
            scores = [
                _parse_score(row[i], row_index, GRADES_HEADER[i]) for i in range(1, 10)
            ]
            try:
                final = int(row[10])
            except ValueError:
                raise MalformedCsvError(f"bad final grade {row[10]!r}", row_index) from None
            if not 0 <= final <= 5:
                raise MalformedCsvError(f"final grade {final} outside 0..5", row_index)
            records.append(
                GradeRecord(
                    student_id=student_id,
                    mp=tuple(scores[0:3]),
                    quiz=tuple(scores[3:6]),
                    pr=tuple(scores[6:9]),
                    final_grade=final,
                )
            )
        return records
    finally:
        if owned:
            handle.close()


WeeklyCounts = dict[str, dict[int, Counter]]


def bin_by_week(events: Iterable[LogEvent], calendar: CourseCalendar) -> WeeklyCounts:
    """Count events per student, course week and category.

    OTHER events are counted too (diagnostics) but never become features.
    """
    out: WeeklyCounts = {}
    for event in events:
        week = calendar.week_of(event.timestamp)
        out.setdefault(event.student_id, {}).setdefault(week, Counter())[event.category] += 1
    return out


def feature_columns(calendar: CourseCalendar) -> tuple[str, ...]:
    """Deterministic column order: week-major, Stat0..3, then MP/Quiz/PR at
    their deadline weeks."""
    names: list[str] = []
    for week in range(1, calendar.n_weeks + 1):
        for k in range(4):
            names.append(f"Week{week} Stat{k}")
        for kind, weeks in (
            ("MP", calendar.mp_deadline_weeks),
            ("Quiz", calendar.quiz_deadline_weeks),
            ("PR", calendar.pr_deadline_weeks),
        ):
            for j, deadline in enumerate(weeks, start=1):
                if deadline == week:
                    names.append(f"Week{week} {kind}{j}")
    return tuple(names)


def assemble_features(
    weekly: WeeklyCounts,
    grades: Sequence[GradeRecord],
    calendar: CourseCalendar,
) -> FeatureMatrix:
    """Build the unnormalized matrix over the union of logged and graded
    students.  Missing grades rows zero-fill the grade features and flag the
    student; missing scores count as 0."""
    seen: set[str] = set()
    for rec in grades:
        if rec.student_id in seen:
            raise DuplicateStudentError(rec.student_id)
        seen.add(rec.student_id)
    by_id = {rec.student_id: rec for rec in grades}
    students = sorted(set(weekly) | set(by_id))
    names = feature_columns(calendar)

    grade_feature: dict[str, tuple[str, int]] = {}
    for name in names:
        kind = feature_kind(name)
        if kind != "Stat":
            j = int(name.split(kind)[-1])
            grade_feature[name] = (kind, j)

    values = np.zeros((len(students), len(names)), dtype=float)
    labels = np.full(len(students), UNGRADED, dtype=int)
    ungraded: set[str] = set()
    for i, sid in enumerate(students):
        weeks = weekly.get(sid, {})
        rec = by_id.get(sid)
        if rec is None:
            ungraded.add(sid)
        else:
            labels[i] = rec.final_grade
        for c, name in enumerate(names):
            if name in grade_feature:
                if rec is not None:
                    kind, j = grade_feature[name]
                    score = rec.score(kind, j)
                    values[i, c] = 0.0 if score is None else score
            else:
                week = feature_week(name)
                stat = int(name[-1])
                counter = weeks.get(week)
                if counter:
                    for cat, count in counter.items():
                        if cat.stat_index == stat:
                            values[i, c] += count
    return FeatureMatrix(
        feature_names=names,
        values=values,
        labels=labels,
        student_ids=tuple(students),
        students_without_grades=frozenset(ungraded),
    )


def normalize_features(m: FeatureMatrix) -> FeatureMatrix:
    """Scale each activity column by its cohort maximum; grade columns pass
    through.  All-zero activity columns stay all-zero."""
    values = m.values.copy()
    maxima = []
    for c, name in enumerate(m.feature_names):
        if is_activity_feature(name):
            col_max = float(values[:, c].max()) if m.n_students else 0.0
            if col_max > 0:
                values[:, c] = values[:, c] / col_max
                maxima.append(col_max)
            else:
                maxima.append(1.0)
        else:
            maxima.append(1.0)
    return replace(m, values=values, activity_maxima=tuple(maxima))


def normalize_with_maxima(
    m: FeatureMatrix, maxima: Mapping[str, float]
) -> FeatureMatrix:
    """Normalize a (possibly single-row) matrix with previously fitted
    maxima, so new students are scaled identically to the training cohort."""
    values = m.values.copy()
    ordered = []
    for c, name in enumerate(m.feature_names):
        denom = float(maxima.get(name, 1.0))
        if is_activity_feature(name) and denom > 0:
            values[:, c] = values[:, c] / denom
        ordered.append(denom if is_activity_feature(name) else 1.0)
    return replace(m, values=values, activity_maxima=tuple(ordered))


def select_window(
    m: FeatureMatrix,
    upto_week: int,
    subset: WindowSubset = WindowSubset.BOTH,
    from_week: int = 1,
) -> FeatureMatrix:
    """Keep columns whose week lies in [from_week, upto_week] and whose kind
    matches the subset.  Raises EmptyFeatureSetError when nothing remains
    (the grades-only week-1 case under the default calendar)."""
    if upto_week < 1:
        raise InvalidConfigError("upto_week must be >= 1")
    if from_week < 1 or from_week > upto_week:
        raise InvalidConfigError("from_week must lie in [1, upto_week]")
    keep = [
        i
        for i, name in enumerate(m.feature_names)
        if from_week <= feature_week(name) <= upto_week and subset.admits(name)
    ]
    if not keep:
        raise EmptyFeatureSetError(
            f"no features for weeks [{from_week}, {upto_week}] with subset {subset.value}"
        )
    maxima = (
        tuple(m.activity_maxima[i] for i in keep) if m.activity_maxima is not None else None
    )
    return FeatureMatrix(
        feature_names=tuple(m.feature_names[i] for i in keep),
        values=m.values[:, keep].copy(),
        labels=m.labels.copy(),
        student_ids=m.student_ids,
        activity_maxima=maxima,
        students_without_grades=m.students_without_grades,
    )


def write_feature_csv(m: FeatureMatrix, target: Source) -> None:
    """Write the export schema: student_id, feature columns, final."""
    handle, owned = (open(target, "w", encoding="utf-8", newline=""), True) if isinstance(
        target, (str, Path)
    ) else (target, False)
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["student_id", *m.feature_names, "final"])
        for i, sid in enumerate(m.student_ids):
            row = [sid] + [repr(float(v)) for v in m.values[i]] + [str(int(m.labels[i]))]
            writer.writerow(row)
    finally:
        if owned:
            handle.close()


def read_feature_csv(source: Source) -> FeatureMatrix:
    """Read a feature-matrix CSV produced by :func:`write_feature_csv`."""
    handle, owned = _open_source(source)
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFileError("feature file has no header row") from None
        if len(header) < 3 or header[0] != "student_id" or header[-1] != "final":
            raise MalformedCsvError("feature CSV must be student_id,<features...>,final")
        names = tuple(header[1:-1])
        for name in names:
            if not _FEATURE_RE.match(name):
                raise MalformedCsvError(f"bad feature column name {name!r}")
        ids: list[str] = []
        rows: list[list[float]] = []
        labels: list[int] = []
        ungraded: set[str] = set()
        for row_index, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedCsvError(
                    f"expected {len(header)} fields, got {len(row)}", row_index
                )
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:-1]])
                label = int(row[-1])
            except ValueError:
                raise MalformedCsvError("non-numeric cell", row_index) from None
            labels.append(label)
            if label == UNGRADED:
                ungraded.add(row[0])
        values = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(names)))
        return FeatureMatrix(
            feature_names=names,
            values=values,
            labels=np.asarray(labels, dtype=int),
            student_ids=tuple(ids),
            students_without_grades=frozenset(ungraded),
        )
    finally:
        if owned:
            handle.close()


def feature_csv_text(m: FeatureMatrix) -> str:
    buf = io.StringIO()
    write_feature_csv(m, buf)
    return buf.getvalue()
