"""Seeded synthetic cohort generator.

Emits an activity-log CSV and a grade-book CSV in the canonical ingest
formats, plus a ground-truth manifest.  Five behavioural archetypes are
calibrated so that realized group statistics land near the published
reference values (mean interactions of roughly 92 / 273 / 450 for the
dropout / low / high achiever groups, activity peaking mid-course), and
final grades are coupled to the realized features through embedded
threshold rules on week-5 quantities so a depth-limited decision tree can
recover them from either course half.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping, Optional

import numpy as np

from .errors import InvalidConfigError
from .ingest import (
    ActivityCategory,
    CourseCalendar,
    FeatureMatrix,
    GradeClass,
    _ASSIGNMENT_EVENTS,
    _COURSE_CONTENT_EVENTS,
    _FORUM_EVENTS,
    _GRADE_RELATED_EVENTS,
    assemble_features,
    bin_by_week,
    normalize_features,
    parse_grades_csv,
    parse_log_csv,
)

ARCHETYPE_ORDER = ("Dropout", "Low2", "Low3", "High4", "High5")

# Thresholds of the embedded labelling rules, applied to normalized features.
RULE_MP2_HIGH = 0.83  # mini project 2 fraction separating high achievers
RULE_STAT1_FOUR = 0.46  # week-5 assignment interaction separating grade 4 from 5
RULE_STAT0_THREE = 0.46  # week-5 content interaction separating grade 3 from 2
RULE_STAT0_FLOOR = 0.20  # below this, with no mini project 2, the student fails
RULE_MP2_FLOOR = 0.40

RULE_FEATURES = ("Week5 MP2", "Week5 Stat0", "Week5 Stat1")

GROUP_TARGETS = {"dropout": 92.0, "low": 273.0, "high": 450.0}

_OTHER_EVENT_NAME = "calendar event viewed"  # intentionally not in the taxonomy

_EVENT_POOLS = {
    ActivityCategory.COURSE_CONTENT: _COURSE_CONTENT_EVENTS,
    ActivityCategory.ASSIGNMENT: _ASSIGNMENT_EVENTS,
    ActivityCategory.GRADE_RELATED: _GRADE_RELATED_EVENTS,
    ActivityCategory.FORUM: _FORUM_EVENTS,
}


def embedded_rule_label(mp2: float, stat0_week5: float, stat1_week5: float) -> int:
    """The generator's ground-truth grade rule over normalized features."""
    if mp2 >= RULE_MP2_HIGH:
        return 4 if stat1_week5 >= RULE_STAT1_FOUR else 5
    if stat0_week5 >= RULE_STAT0_THREE:
        return 3
    if stat0_week5 < RULE_STAT0_FLOOR and mp2 < RULE_MP2_FLOOR:
        return 0
    return 2


@dataclass(frozen=True)
class ScoreDist:
    """Beta-distributed assignment score with a submission probability."""

    mean: float
    concentration: float
    submit_prob: float

    def draw(self, rng: np.random.Generator, submit_scale: float = 1.0) -> Optional[float]:
        if rng.uniform() >= self.submit_prob * submit_scale:
            return None
        a = self.mean * self.concentration
        b = (1.0 - self.mean) * self.concentration
        return round(float(rng.beta(a, b)), 2)


@dataclass(frozen=True)
class ArchetypeParams:
    name: str
    proportion: float
    final_grade: int
    total_interaction_mean: float
    dispersion: float  # negative-binomial size; larger = thinner tail
    weekly_profile: tuple[float, ...]
    category_mix: tuple[float, float, float, float]
    scores: Mapping[str, ScoreDist]
    gated_submission: bool = False  # submissions only for flagged submitters

    def __post_init__(self):
        if abs(sum(self.weekly_profile) - 1.0) > 1e-9:
            raise InvalidConfigError(f"{self.name}: weekly_profile must sum to 1")
        if abs(sum(self.category_mix) - 1.0) > 1e-9:
            raise InvalidConfigError(f"{self.name}: category_mix must sum to 1")
        if not 0 <= self.final_grade <= 5:
            raise InvalidConfigError(f"{self.name}: final_grade outside 0..5")


def _scores(mp, quiz, pr) -> dict[str, ScoreDist]:
    out = {}
    for kind, triple in (("mp", mp), ("quiz", quiz), ("pr", pr)):
        for j, (mean, conc, prob) in enumerate(triple, start=1):
            out[f"{kind}{j}"] = ScoreDist(mean, conc, prob)
    return out


DEFAULT_ARCHETYPES: dict[str, ArchetypeParams] = {
    "Dropout": ArchetypeParams(
        name="Dropout",
        proportion=0.30,
        final_grade=0,
        total_interaction_mean=92.0,
        dispersion=40.0,
        weekly_profile=(0.26, 0.22, 0.17, 0.12, 0.09, 0.06, 0.04, 0.03, 0.01),
        category_mix=(0.50, 0.25, 0.15, 0.10),
        scores=_scores(
            mp=[(0.40, 8, 0.90), (0.35, 8, 0.05), (0.30, 8, 0.02)],
            quiz=[(0.45, 8, 0.95), (0.40, 8, 0.30), (0.30, 8, 0.02)],
            pr=[(0.50, 8, 0.50), (0.40, 8, 0.05), (0.30, 8, 0.02)],
        ),
        gated_submission=True,
    ),
    "Low2": ArchetypeParams(
        name="Low2",
        proportion=0.15,
        final_grade=2,
        total_interaction_mean=210.0,
        dispersion=40.0,
        weekly_profile=(0.06, 0.08, 0.12, 0.17, 0.19, 0.15, 0.09, 0.08, 0.06),
        category_mix=(0.42, 0.33, 0.15, 0.10),
        scores=_scores(
            mp=[(0.55, 30, 0.95), (0.55, 30, 0.92), (0.50, 30, 0.85)],
            quiz=[(0.55, 25, 0.95), (0.55, 25, 0.92), (0.50, 25, 0.85)],
            pr=[(0.60, 25, 0.90), (0.60, 25, 0.85), (0.55, 25, 0.80)],
        ),
    ),
    "Low3": ArchetypeParams(
        name="Low3",
        proportion=0.20,
        final_grade=3,
        total_interaction_mean=305.0,
        dispersion=40.0,
        weekly_profile=(0.05, 0.06, 0.10, 0.16, 0.26, 0.14, 0.09, 0.08, 0.06),
        category_mix=(0.58, 0.22, 0.12, 0.08),
        scores=_scores(
            mp=[(0.70, 35, 0.97), (0.68, 40, 0.97), (0.65, 35, 0.95)],
            quiz=[(0.70, 30, 0.97), (0.70, 30, 0.95), (0.65, 30, 0.93)],
            pr=[(0.70, 30, 0.95), (0.70, 30, 0.95), (0.65, 30, 0.90)],
        ),
    ),
    "High4": ArchetypeParams(
        name="High4",
        proportion=0.20,
        final_grade=4,
        total_interaction_mean=520.0,
        dispersion=40.0,
        weekly_profile=(0.06, 0.08, 0.12, 0.17, 0.20, 0.15, 0.09, 0.08, 0.05),
        category_mix=(0.46, 0.34, 0.12, 0.08),
        scores=_scores(
            mp=[(0.88, 50, 0.99), (0.91, 60, 0.99), (0.90, 50, 0.99)],
            quiz=[(0.88, 45, 0.99), (0.88, 45, 0.99), (0.88, 45, 0.99)],
            pr=[(0.88, 40, 0.98), (0.88, 40, 0.98), (0.88, 40, 0.98)],
        ),
    ),
    "High5": ArchetypeParams(
        name="High5",
        proportion=0.15,
        final_grade=5,
        total_interaction_mean=360.0,
        dispersion=40.0,
        weekly_profile=(0.07, 0.09, 0.12, 0.16, 0.19, 0.15, 0.09, 0.08, 0.05),
        category_mix=(0.52, 0.22, 0.16, 0.10),
        scores=_scores(
            mp=[(0.92, 60, 0.995), (0.93, 70, 0.995), (0.93, 60, 0.995)],
            quiz=[(0.92, 55, 0.99), (0.92, 55, 0.99), (0.92, 55, 0.99)],
            pr=[(0.92, 50, 0.99), (0.92, 50, 0.99), (0.92, 50, 0.99)],
        ),
    ),
}

DROPOUT_SUBMITTER_SHARE = 0.27


@dataclass(frozen=True)
class GeneratorConfig:
    n_students: int = 107
    seed: int = 42
    rule_strength: float = 0.9
    course_start: date = date(2024, 1, 8)
    misc_event_rate: float = 0.02  # share of clicks outside the known taxonomy
    archetypes: Mapping[str, ArchetypeParams] = field(
        default_factory=lambda: dict(DEFAULT_ARCHETYPES)
    )

    def __post_init__(self):
        if self.n_students < 5:
            raise InvalidConfigError("n_students must be >= 5 (one per class)")
        if not 0.0 <= self.rule_strength <= 1.0:
            raise InvalidConfigError("rule_strength must lie in [0, 1]")
        if not 0.0 <= self.misc_event_rate < 1.0:
            raise InvalidConfigError("misc_event_rate must lie in [0, 1)")
        total = sum(a.proportion for a in self.archetypes.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidConfigError(f"archetype proportions sum to {total}, expected 1")

    @property
    def calendar(self) -> CourseCalendar:
        return CourseCalendar(course_start=self.course_start)


@dataclass(frozen=True)
class CohortArtifacts:
    logs_csv: str
    grades_csv: str
    manifest: dict


def _largest_remainder_allocation(cfg: GeneratorConfig) -> list[str]:
    """Archetype per student slot; counts match proportions exactly up to
    the integer rounding of the largest-remainder method."""
    names = [n for n in ARCHETYPE_ORDER if n in cfg.archetypes]
    quotas = [cfg.archetypes[n].proportion * cfg.n_students for n in names]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    short = cfg.n_students - sum(counts)
    for i in sorted(range(len(names)), key=lambda i: (-remainders[i], i))[:short]:
        counts[i] += 1
    allocation: list[str] = []
    for name, count in zip(names, counts):
        allocation.extend([name] * count)
    return allocation


def _draw_events(
    rng: np.random.Generator,
    archetype: ArchetypeParams,
    total: int,
    cfg: GeneratorConfig,
) -> list[tuple[int, int, str]]:
    """(week, second_of_week, event_name) triples for one student."""
    if total <= 0:
        return []
    weekly = rng.multinomial(total, archetype.weekly_profile)
    misc = cfg.misc_event_rate
    mix = [w * (1.0 - misc) for w in archetype.category_mix] + [misc]
    categories = list(_EVENT_POOLS) + [None]
    events: list[tuple[int, int, str]] = []
    for week_idx, count in enumerate(weekly, start=1):
        if count == 0:
            continue
        per_cat = rng.multinomial(int(count), mix)
        for cat, k in zip(categories, per_cat):
            if k == 0:
                continue
            pool = (_OTHER_EVENT_NAME,) if cat is None else _EVENT_POOLS[cat]
            name_picks = rng.integers(0, len(pool), size=int(k))
            seconds = rng.integers(0, 7 * 24 * 3600, size=int(k))
            for pick, sec in zip(name_picks, seconds):
                events.append((week_idx, int(sec), pool[int(pick)]))
    return events


def _weekly_counts_total(events: list[tuple[int, int, str]]) -> int:
    return len(events)


def generate_cohort(cfg: GeneratorConfig = GeneratorConfig()) -> CohortArtifacts:
    """Generate the cohort deterministically for a given config and seed."""
    rng = np.random.default_rng(cfg.seed)
    calendar = cfg.calendar

    allocation = _largest_remainder_allocation(cfg)
    rng.shuffle(allocation)
    width = max(3, len(str(cfg.n_students)))
    student_ids = [f"s{i + 1:0{width}d}" for i in range(cfg.n_students)]

    dropout_ids = [sid for sid, a in zip(student_ids, allocation) if a == "Dropout"]
    n_submitters = int(round(DROPOUT_SUBMITTER_SHARE * len(dropout_ids)))
    submitters = set(
        rng.choice(dropout_ids, size=n_submitters, replace=False)
    ) if dropout_ids else set()

    per_student_events: dict[str, list[tuple[int, int, str]]] = {}
    per_student_scores: dict[str, dict[str, Optional[float]]] = {}
    used_rule: dict[str, bool] = {}
    totals: dict[str, int] = {}

    score_keys = [f"{kind}{j}" for kind in ("mp", "quiz", "pr") for j in (1, 2, 3)]
    for sid, aname in zip(student_ids, allocation):
        arch = cfg.archetypes[aname]
        p = arch.dispersion / (arch.dispersion + arch.total_interaction_mean)
        total = int(rng.negative_binomial(arch.dispersion, p))
        per_student_events[sid] = _draw_events(rng, arch, total, cfg)
        totals[sid] = len(per_student_events[sid])
        scale = 1.0
        if arch.gated_submission and sid not in submitters:
            scale = 0.0
        per_student_scores[sid] = {
            key: arch.scores[key].draw(rng, submit_scale=scale) for key in score_keys
        }
        used_rule[sid] = bool(rng.uniform() < cfg.rule_strength)

    logs_csv = _render_logs_csv(per_student_events, calendar)
    nominal = {
        sid: cfg.archetypes[aname].final_grade
        for sid, aname in zip(student_ids, allocation)
    }
    provisional_grades_csv = _render_grades_csv(student_ids, per_student_scores, nominal)

    matrix = _ingest_normalized(logs_csv, provisional_grades_csv, calendar)
    rule_values = {
        sid: {
            name: float(matrix.values[matrix.student_ids.index(sid), matrix.index_of(name)])
            for name in RULE_FEATURES
        }
        for sid in student_ids
    }

    finals: dict[str, int] = {}
    rule_labels: dict[str, int] = {}
    for sid in student_ids:
        rv = rule_values[sid]
        rule_labels[sid] = embedded_rule_label(
            rv["Week5 MP2"], rv["Week5 Stat0"], rv["Week5 Stat1"]
        )
        finals[sid] = rule_labels[sid] if used_rule[sid] else nominal[sid]

    grades_csv = _render_grades_csv(student_ids, per_student_scores, finals)

    grade_counts: dict[int, int] = {}
    for g in finals.values():
        grade_counts[g] = grade_counts.get(g, 0) + 1
    archetype_counts: dict[str, int] = {}
    for a in allocation:
        archetype_counts[a] = archetype_counts.get(a, 0) + 1

    group_totals: dict[str, list[int]] = {"dropout": [], "low": [], "high": []}
    for sid in student_ids:
        group_totals[GradeClass.from_grade(finals[sid]).value].append(totals[sid])
    group_means = {
        g: (sum(v) / len(v) if v else None) for g, v in group_totals.items()
    }
    archetype_total_means = {
        name: (
            sum(totals[sid] for sid, a in zip(student_ids, allocation) if a == name)
            / archetype_counts[name]
            if archetype_counts.get(name)
            else None
        )
        for name in ARCHETYPE_ORDER
        if name in cfg.archetypes
    }

    manifest = {
        "config": {
            "n_students": cfg.n_students,
            "seed": cfg.seed,
            "rule_strength": cfg.rule_strength,
            "course_start": cfg.course_start.isoformat(),
            "misc_event_rate": cfg.misc_event_rate,
            "proportions": {
                name: cfg.archetypes[name].proportion
                for name in ARCHETYPE_ORDER
                if name in cfg.archetypes
            },
        },
        "calendar": {
            "course_start": calendar.course_start.isoformat(),
            "n_weeks": calendar.n_weeks,
            "mp_deadline_weeks": list(calendar.mp_deadline_weeks),
            "quiz_deadline_weeks": list(calendar.quiz_deadline_weeks),
            "pr_deadline_weeks": list(calendar.pr_deadline_weeks),
        },
        "targets": {
            "group_mean_interactions": dict(GROUP_TARGETS),
            "archetype_mean_interactions": {
                name: cfg.archetypes[name].total_interaction_mean
                for name in ARCHETYPE_ORDER
                if name in cfg.archetypes
            },
        },
        "rules": {
            "features": list(RULE_FEATURES),
            "mp2_high": RULE_MP2_HIGH,
            "stat1_four": RULE_STAT1_FOUR,
            "stat0_three": RULE_STAT0_THREE,
            "stat0_floor": RULE_STAT0_FLOOR,
            "mp2_floor": RULE_MP2_FLOOR,
        },
        "students": [
            {
                "student_id": sid,
                "archetype": aname,
                "nominal_grade": nominal[sid],
                "total_interactions": totals[sid],
                "submitter": bool(sid in submitters) if aname == "Dropout" else True,
                "rule_inputs": rule_values[sid],
                "rule_label": rule_labels[sid],
                "used_rule": used_rule[sid],
                "final_grade": finals[sid],
            }
            for sid, aname in zip(student_ids, allocation)
        ],
        "realized": {
            "archetype_counts": archetype_counts,
            "grade_counts": {str(g): c for g, c in sorted(grade_counts.items())},
            "group_mean_interactions": group_means,
            "archetype_mean_interactions": archetype_total_means,
        },
    }
    return CohortArtifacts(logs_csv=logs_csv, grades_csv=grades_csv, manifest=manifest)


def _render_logs_csv(
    per_student: dict[str, list[tuple[int, int, str]]], calendar: CourseCalendar
) -> str:
    rows = []
    for sid in sorted(per_student):
        for week, sec, name in per_student[sid]:
            instant = calendar.start_instant + timedelta(weeks=week - 1, seconds=sec)
            rows.append((sid, instant, name))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = ["student_id,timestamp,event_name"]
    for sid, instant, name in rows:
        stamp = instant.strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"{sid},{stamp},{name}")
    return "\n".join(lines) + "\n"


def _format_score(score: Optional[float]) -> str:
    return "" if score is None else f"{score:.2f}"


def _render_grades_csv(
    student_ids: list[str],
    scores: dict[str, dict[str, Optional[float]]],
    finals: dict[str, int],
) -> str:
    lines = ["student_id,mp1,mp2,mp3,quiz1,quiz2,quiz3,pr1,pr2,pr3,final"]
    for sid in sorted(student_ids):
        s = scores[sid]
        cells = [sid]
        for key in ("mp1", "mp2", "mp3", "quiz1", "quiz2", "quiz3", "pr1", "pr2", "pr3"):
            cells.append(_format_score(s[key]))
        cells.append(str(finals[sid]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _ingest_normalized(
    logs_csv: str, grades_csv: str, calendar: CourseCalendar
) -> FeatureMatrix:
    parsed = parse_log_csv(io.StringIO(logs_csv), calendar)
    weekly = bin_by_week(parsed.events, calendar)
    grades = parse_grades_csv(io.StringIO(grades_csv))
    return normalize_features(assemble_features(weekly, grades, calendar))


@dataclass(frozen=True)
class CalibrationReport:
    archetype_deviation: dict[str, Optional[float]]  # relative, None if absent
    group_deviation: dict[str, Optional[float]]
    flags: tuple[str, ...]
    absent_archetypes: tuple[str, ...]


def summarize_manifest(manifest: dict, tolerance: float = 0.10) -> CalibrationReport:
    """Compare realized means against configured targets; flag >10% drift."""
    flags: list[str] = []
    absent: list[str] = []
    arch_dev: dict[str, Optional[float]] = {}
    targets = manifest["targets"]["archetype_mean_interactions"]
    realized = manifest["realized"]["archetype_mean_interactions"]
    for name, target in targets.items():
        got = realized.get(name)
        if got is None:
            absent.append(name)
            arch_dev[name] = None
            continue
        dev = (got - target) / target
        arch_dev[name] = dev
        if abs(dev) > tolerance:
            flags.append(f"archetype {name}: realized {got:.1f} vs target {target:.1f}")
    group_dev: dict[str, Optional[float]] = {}
    for group, target in manifest["targets"]["group_mean_interactions"].items():
        got = manifest["realized"]["group_mean_interactions"].get(group)
        if got is None:
            group_dev[group] = None
            absent.append(f"group:{group}")
            continue
        dev = (got - target) / target
        group_dev[group] = dev
        if abs(dev) > tolerance:
            flags.append(f"group {group}: realized {got:.1f} vs target {target:.1f}")
    return CalibrationReport(
        archetype_deviation=arch_dev,
        group_deviation=group_dev,
        flags=tuple(flags),
        absent_archetypes=tuple(absent),
    )
