"""Version cleaning and serializability statistics over release histories."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import random
import re
import statistics
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .hierarchy import ChangeKind

PRE_RELEASE_TAGS = ("alpha", "beta", "rc", "cr", "dev", "snapshot", "milestone", "ea")
RELEASE_TAGS = ("final", "release", "ga", "stable")
DATE_MINORITY_SHARE = 0.2
NA = "n.a."
ZERO_STD = "zero standard deviation"
BUCKETS = ("[0.5, 1]", "[0, 0.5]", "[0, -0.5]", "[-0.5, -1]", NA)

_SEPARATORS = re.compile(r"[.\-_+~]+")
_CHAR_SEPARATOR = re.compile(r"^(\d+)[a-z](\d+)$", re.IGNORECASE)
_NUMERIC_PREFIX = re.compile(r"^\d+(?:\.\d+)*")


class RemovalReason(enum.Enum):
    ALPHA_TAG = "ALPHA_TAG"
    DATE_MINORITY = "DATE_MINORITY"
    UNPARSEABLE = "UNPARSEABLE"


class EvolutionError(Exception):
    pass


class LengthMismatch(EvolutionError):
    pass


class EmptyAfterFilter(EvolutionError):
    pass


class RelocationCycle(EvolutionError):
    pass


@dataclass(frozen=True)
class VersionId:
    raw: str
    cleaned: str | None
    segments: tuple[int, ...] = ()
    removed_reason: RemovalReason | None = None

    @property
    def kept(self) -> bool:
        return self.removed_reason is None

    @property
    def key(self) -> tuple[int, ...]:
        """Sort key: numeric segments with trailing zeros dropped, so that
        1.0 and 1.0.0 compare equal."""
        segs = list(self.segments)
        while segs and segs[-1] == 0:
            segs.pop()
        return tuple(segs)

    def removed(self, reason: RemovalReason) -> "VersionId":
        return VersionId(self.raw, None, (), reason)


def _tag_pattern(tags: Iterable[str]) -> re.Pattern:
    alts = "|".join(re.escape(t) for t in tags)
    return re.compile(rf"^\d*(?:{alts})\d*$|^\d*m\d+$", re.IGNORECASE)


_DEFAULT_PRE = _tag_pattern(PRE_RELEASE_TAGS)


def clean_version(raw: str, pre_release_tags: Sequence[str] | None = None) -> VersionId:
    pre = _DEFAULT_PRE if pre_release_tags is None else _tag_pattern(pre_release_tags)
    parts = [p for p in _SEPARATORS.split(raw.strip()) if p]
    if any(pre.match(p) for p in parts):
        return VersionId(raw, None, (), RemovalReason.ALPHA_TAG)
    parts = [p for p in parts if p.lower() not in RELEASE_TAGS]
    normalized = []
    for p in parts:
        m = _CHAR_SEPARATOR.match(p)
        normalized.extend(m.groups() if m else (p,))
    m = _NUMERIC_PREFIX.match(".".join(normalized))
    if m is None:
        return VersionId(raw, None, (), RemovalReason.UNPARSEABLE)
    cleaned = m.group(0)
    return VersionId(raw, cleaned, tuple(int(s) for s in cleaned.split(".")))


def is_date_version(v: VersionId) -> bool:
    """An 8-digit leading segment that reads as a calendar date in 1990-2099."""
    if not v.kept:
        return False
    head = v.cleaned.split(".", 1)[0]
    if len(head) != 8:
        return False
    year, month, day = int(head[:4]), int(head[4:6]), int(head[6:])
    if not 1990 <= year <= 2099:
        return False
    try:
        dt.date(year, month, day)
    except ValueError:
        return False
    return True


def filter_date_versions(series: Sequence[VersionId], share: float = DATE_MINORITY_SHARE) -> list[VersionId]:
    """Mark date-formatted versions as removed when they make up at most
    ``share`` of the kept versions; a series mostly using dates is left alone."""
    kept = [v for v in series if v.kept]
    dates = [v for v in kept if is_date_version(v)]
    if not dates or len(dates) > share * len(kept):
        return list(series)
    return [v.removed(RemovalReason.DATE_MINORITY) if v.kept and is_date_version(v) else v for v in series]


def sort_versions(versions: Iterable[VersionId]) -> list[VersionId]:
    return sorted(versions, key=lambda v: v.key)


# -- statistics ------------------------------------------------------------------------

def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson coefficient, or None when either series is constant."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"series lengths differ: {len(xs)} != {len(ys)}")
    if len(xs) < 2 or len(set(xs)) == 1 or len(set(ys)) == 1:
        return None
    try:
        r = statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None
    return max(-1.0, min(1.0, r))


def bucket(rho: float | None) -> str:
    if rho is None:
        return NA
    if rho >= 0.5:
        return BUCKETS[0]
    if rho >= 0:
        return BUCKETS[1]
    if rho > -0.5:
        return BUCKETS[2]
    return BUCKETS[3]


@dataclass(frozen=True)
class SeriesPoint:
    version: VersionId
    release_date: dt.date
    serializable_count: int
    events: tuple[ChangeKind, ...] = ()


@dataclass(frozen=True)
class VersionSeries:
    dependency: str
    points: tuple[SeriesPoint, ...]
    relocated_from: tuple[str, ...] = ()

    @property
    def counts(self) -> list[int]:
        return [p.serializable_count for p in self.points]


@dataclass(frozen=True)
class CorrelationReport:
    rho_date: float | None
    rho_version: float | None
    na_reason: str | None = None

    def to_json(self) -> dict:
        return {"rho_date": self.rho_date, "rho_version": self.rho_version, "na_reason": self.na_reason,
                "bucket_date": bucket(self.rho_date), "bucket_version": bucket(self.rho_version)}


def correlate(series: VersionSeries) -> CorrelationReport:
    """Correlation of the serializable count with release date and with
    position in version order."""
    counts = series.counts
    dates = [p.release_date.toordinal() for p in series.points]
    rho_date = pearson(dates, counts) if len(counts) >= 2 else None
    rho_version = pearson(list(range(len(counts))), counts) if len(counts) >= 2 else None
    na = ZERO_STD if rho_date is None or rho_version is None else None
    return CorrelationReport(rho_date, rho_version, na)


def covers_years(series: VersionSeries, years: range) -> bool:
    have = {p.release_date.year for p in series.points}
    return all(y in have for y in years)


def overall_correlation(series: Sequence[VersionSeries], year_range: tuple[int, int] = (2015, 2024),
                        samples: int = 100, seed: int = 0) -> float | None:
    """Mean over ``samples`` draws of the pooled count-vs-year correlation,
    drawing one release per dependency and year.

    Only dependencies with a release in every year of the inclusive range
    take part. None when every draw has zero standard deviation.
    """
    years = range(year_range[0], year_range[1] + 1)
    retained = sorted((s for s in series if covers_years(s, years)), key=lambda s: s.dependency)
    if not retained:
        raise EmptyAfterFilter(f"no dependency has a release in every year {year_range[0]}-{year_range[1]}")
    by_year = [
        [[p.serializable_count for p in s.points if p.release_date.year == y] for y in years]
        for s in retained
    ]
    rng = random.Random(seed)
    values = []
    for _ in range(samples):
        xs, ys = [], []
        for per_year in by_year:
            for y, counts in zip(years, per_year):
                xs.append(y)
                ys.append(rng.choice(counts))
        rho = pearson(xs, ys)
        if rho is not None:
            values.append(rho)
    return statistics.fmean(values) if values else None


# -- datasets --------------------------------------------------------------------------

SERIALIZABLE_CHANGES = frozenset({ChangeKind.DIRECT_ADD, ChangeKind.DIRECT_REMOVE,
                                  ChangeKind.INDIRECT_ADD, ChangeKind.INDIRECT_REMOVE})


@dataclass(frozen=True)
class DatasetLabel:
    labels: frozenset[str] = frozenset()

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def to_json(self) -> list[str]:
        return sorted(self.labels)


def classify_dataset(series: VersionSeries, events: Iterable[Iterable[ChangeKind]] | None = None,
                     now_year: int | None = None) -> DatasetLabel:
    """Nested dataset membership: A (some serializable class), B (recent
    release), C (fluctuating count), D (a class gained or lost the marker)."""
    now_year = now_year if now_year is not None else dt.date.today().year
    if events is None:
        events = [p.events for p in series.points]
    labels = set()
    counts = series.counts
    if not any(c >= 1 for c in counts):
        return DatasetLabel()
    labels.add("A")
    if not any(p.release_date.year in (now_year, now_year - 1) for p in series.points):
        return DatasetLabel(frozenset(labels))
    labels.add("B")
    if len(set(counts)) <= 1:
        return DatasetLabel(frozenset(labels))
    labels.add("C")
    if any(k in SERIALIZABLE_CHANGES for per_version in events for k in per_version):
        labels.add("D")
    return DatasetLabel(frozenset(labels))


def resolve_relocations(listing: Mapping[str, str | None]) -> dict[str, str]:
    """Map every name (including relocation targets) to the end of its
    relocation chain."""
    out: dict[str, str] = {}
    names = set(listing) | {t for t in listing.values() if t}
    for name in sorted(names):
        path = [name]
        current = name
        while listing.get(current):
            current = listing[current]
            if current in path:
                raise RelocationCycle(" -> ".join(path + [current]))
            if current in out:
                break
            path.append(current)
        terminal = out.get(current, current)
        for n in path:
            out[n] = terminal
    return out


# -- table input -----------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    dependency: str
    version: str
    release_date: dt.date
    serializable_count: int
    relocated_to: str | None = None
    events: tuple[ChangeKind, ...] = ()


def _parse_events(value) -> tuple[ChangeKind, ...]:
    if value in (None, ""):
        return ()
    if isinstance(value, str):
        value = [v for v in re.split(r"[;|\s]+", value) if v]
    out = []
    for item in value:
        kind = item["kind"] if isinstance(item, dict) else item
        out.append(ChangeKind(kind.upper()))
    return tuple(out)


def _row(raw: Mapping) -> Row:
    return Row(
        str(raw["dependency"]).strip(),
        str(raw["version"]).strip(),
        dt.date.fromisoformat(str(raw["release_date"]).strip()[:10]),
        int(raw["serializable_count"]),
        (str(raw.get("relocated_to") or "").strip() or None),
        _parse_events(raw.get("events")),
    )


def load_rows(path: str | Path) -> list[Row]:
    """CSV with a header row, or JSON (a list of objects or ``{"rows": [...]}``).

    Columns: dependency, version, release_date (ISO), serializable_count,
    optional relocated_to and events (change kinds, ``;``-separated in CSV).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        data = json.loads(text)
        records = data["rows"] if isinstance(data, dict) else data
    else:
        records = list(csv.DictReader(text.splitlines()))
    rows = []
    for i, rec in enumerate(records, start=1):
        try:
            rows.append(_row(rec))
        except (KeyError, ValueError, TypeError) as exc:
            raise EvolutionError(f"row {i}: {type(exc).__name__}: {exc}") from None
    return rows


def build_series(rows: Sequence[Row]) -> tuple[list[VersionSeries], list[str]]:
    """Group rows under canonical names, clean and filter versions, and sort
    each history in version order. Returns the series and per-row warnings."""
    listing: dict[str, str | None] = {}
    for r in rows:
        if r.relocated_to:
            listing[r.dependency] = r.relocated_to
        else:
            listing.setdefault(r.dependency, None)
    canonical = resolve_relocations(listing)

    groups: dict[str, list[Row]] = defaultdict(list)
    for r in rows:
        groups[canonical[r.dependency]].append(r)

    warnings: list[str] = []
    out = []
    for dep in sorted(groups):
        group = groups[dep]
        versions = filter_date_versions([clean_version(r.version) for r in group])
        points: dict[tuple[int, ...], SeriesPoint] = {}
        for r, v in zip(group, versions):
            if not v.kept:
                warnings.append(f"{r.dependency} {r.version}: removed ({v.removed_reason.value})")
                continue
            if v.key in points:
                warnings.append(f"{r.dependency} {r.version}: duplicate of {points[v.key].version.raw}, ignored")
                continue
            points[v.key] = SeriesPoint(v, r.release_date, r.serializable_count, r.events)
        ordered = tuple(sorted(points.values(), key=lambda p: p.version.key))
        moved = tuple(sorted({r.dependency for r in group} - {dep}))
        if ordered:
            out.append(VersionSeries(dep, ordered, moved))
    return out, warnings


# -- corpus summary -------------------------------------------------------------------

def _pct(n: int, total: int) -> float:
    return round(100.0 * n / total, 2) if total else 0.0


def correlation_table(reports: Mapping[str, CorrelationReport]) -> dict:
    """Bucket counts and shares in the layout of a date/version correlation table."""
    total = len(reports)
    out = {}
    for axis in ("date", "version"):
        counts = {b: 0 for b in BUCKETS}
        for rep in reports.values():
            counts[bucket(rep.rho_date if axis == "date" else rep.rho_version)] += 1
        out[axis] = {b: {"count": n, "percent": _pct(n, total)} for b, n in counts.items()}
    out["total"] = total
    return out


def change_table(series: Sequence[VersionSeries]) -> dict:
    """Event counts and affected-dependency counts per change kind."""
    events = {k: 0 for k in ChangeKind}
    deps = {k: 0 for k in ChangeKind}
    for s in series:
        seen = set()
        for p in s.points:
            for k in p.events:
                events[k] += 1
                seen.add(k)
        for k in seen:
            deps[k] += 1
    total = sum(events.values())
    rows = {}
    for label, add, remove in (("class", ChangeKind.CLASS_ADDED, ChangeKind.CLASS_REMOVED),
                               ("direct", ChangeKind.DIRECT_ADD, ChangeKind.DIRECT_REMOVE),
                               ("indirect", ChangeKind.INDIRECT_ADD, ChangeKind.INDIRECT_REMOVE)):
        rows[label] = {
            "add": {"events": events[add], "percent": _pct(events[add], total), "dependencies": deps[add]},
            "remove": {"events": events[remove], "percent": _pct(events[remove], total),
                       "dependencies": deps[remove]},
        }
    rows["total_events"] = total
    rows["dependencies"] = len(series)
    return rows


@dataclass
class EvolutionResult:
    series: list[VersionSeries]
    correlations: dict[str, CorrelationReport]
    labels: dict[str, DatasetLabel]
    overall: float | None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        active = {d for d, lab in self.labels.items() if "B" in lab}
        return {
            "dependencies": [
                {"dependency": s.dependency, "relocated_from": list(s.relocated_from),
                 "versions": len(s.points), "correlation": self.correlations[s.dependency].to_json(),
                 "labels": self.labels[s.dependency].to_json()}
                for s in self.series
            ],
            "datasets": {k: sorted(d for d, lab in self.labels.items() if k in lab) for k in "ABCD"},
            "correlation_table": correlation_table({d: r for d, r in self.correlations.items() if d in active}),
            "change_table": change_table([s for s in self.series if s.dependency in active]),
            "overall_correlation": self.overall,
            "warnings": list(self.warnings),
        }


def analyze(rows: Sequence[Row], now_year: int, year_range: tuple[int, int] = (2015, 2024),
            samples: int = 100, seed: int = 0) -> EvolutionResult:
    series, warnings = build_series(rows)
    correlations = {s.dependency: correlate(s) for s in series}
    labels = {s.dependency: classify_dataset(s, now_year=now_year) for s in series}
    active = [s for s in series if "B" in labels[s.dependency]]
    try:
        overall = overall_correlation(active, year_range, samples, seed)
    except EmptyAfterFilter as exc:
        overall = None
        warnings.append(f"overall correlation: {exc}")
    return EvolutionResult(series, correlations, labels, overall, warnings)


def with_events(series: VersionSeries, events: Sequence[Iterable[ChangeKind]]) -> VersionSeries:
    """Attach per-version change events computed elsewhere."""
    if len(events) != len(series.points):
        raise LengthMismatch("one event list per version is required")
    return replace(series, points=tuple(replace(p, events=tuple(e)) for p, e in zip(series.points, events)))
