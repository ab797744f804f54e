"""Parsing and validation of per-second interval records.

A match file is UTF-8 JSON lines. The first line is a ``meta`` record that
carries the winner and duration; every other line is an ``interval`` record
describing one hero at one game second.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateHero,
    HeroCountViolation,
    InconsistentMatch,
    IngestError,
    MalformedLine,
    MissingMeta,
    NonMonotoneCounter,
    SchemaViolation,
)

logger = logging.getLogger(__name__)

N_HERO_POOL = 114
N_ITEMS = 244
TEAMS = ("A", "B")
HEROES_PER_TEAM = 5


@dataclass(frozen=True, slots=True)
class IntervalRecord:
    match_id: str
    game_time_s: int
    hero_id: int
    team: str
    life_state: int  # 0 alive, 1 dead
    gold: int
    experience: int
    pos_x: float
    pos_y: float
    deaths: int
    kills: int
    last_hits: int
    denies: int
    assists: int
    creeps_stacked: int
    camps_stacked: int
    towers_killed: int
    roshans_killed: int
    obs_placed: float
    sen_placed: float
    rune_pickups: float
    teamfight_participation: float
    items: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class MatchMeta:
    match_id: str
    winner: str
    duration_s: int


# (json key, attribute, kind). Order here is the wire order used by serialize.
_FIELDS: tuple[tuple[str, str, str], ...] = (
    ("game_time_s", "game_time_s", "int"),
    ("hero_id", "hero_id", "hero"),
    ("team", "team", "team"),
    ("life_state", "life_state", "life"),
    ("gold", "gold", "count"),
    ("xp", "experience", "count"),
    ("x", "pos_x", "real"),
    ("y", "pos_y", "real"),
    ("deaths", "deaths", "count"),
    ("kills", "kills", "count"),
    ("lh", "last_hits", "count"),
    ("denies", "denies", "count"),
    ("assists", "assists", "count"),
    ("creeps_stacked", "creeps_stacked", "count"),
    ("camps_stacked", "camps_stacked", "count"),
    ("towers_killed", "towers_killed", "count"),
    ("roshans_killed", "roshans_killed", "count"),
    ("obs_placed", "obs_placed", "nonneg"),
    ("sen_placed", "sen_placed", "nonneg"),
    ("rune_pickups", "rune_pickups", "nonneg"),
    ("teamfight_participation", "teamfight_participation", "nonneg"),
    ("items", "items", "items"),
)

# Counters that can only grow during a match. Current gold and teamfight
# participation (a ratio) are allowed to go down.
CUMULATIVE_COUNTERS: tuple[str, ...] = (
    "experience",
    "deaths",
    "kills",
    "last_hits",
    "denies",
    "assists",
    "creeps_stacked",
    "camps_stacked",
    "towers_killed",
    "roshans_killed",
    "obs_placed",
    "sen_placed",
    "rune_pickups",
)


@dataclass
class ParsedStream:
    """Outcome of parsing one stream: good records plus per-line errors."""

    meta: MatchMeta | None = None
    records: list[IntervalRecord] = field(default_factory=list)
    errors: list[IngestError] = field(default_factory=list)
    dropped_pre_horn: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


def _check(value, kind: str, c_a: int, n_items: int) -> str | None:
    """Return an error detail, or None when the value is acceptable."""
    if kind == "int":
        return None if _is_int(value) else "expected integer"
    if kind == "count":
        return None if _is_int(value) and value >= 0 else "expected integer >= 0"
    if kind == "hero":
        return None if _is_int(value) and 1 <= value <= c_a else f"expected integer in [1, {c_a}]"
    if kind == "team":
        return None if value in TEAMS else "expected 'A' or 'B'"
    if kind == "life":
        return None if _is_int(value) and value in (0, 1) else "expected 0 or 1"
    if kind == "real":
        return None if _is_real(value) else "expected finite number"
    if kind == "nonneg":
        return None if _is_real(value) and value >= 0 else "expected finite number >= 0"
    if kind == "items":
        if not isinstance(value, list):
            return "expected list"
        for item in value:
            if not (_is_int(item) and 1 <= item <= n_items):
                return f"item ids must be integers in [1, {n_items}]"
        return None
    raise AssertionError(kind)


def _parse_meta(obj: dict, line_no: int) -> MatchMeta:
    match_id = obj.get("match_id")
    if not isinstance(match_id, str):
        raise SchemaViolation(line_no, "match_id", "expected string")
    winner = obj.get("winner")
    if winner not in TEAMS:
        raise SchemaViolation(line_no, "winner", "expected 'A' or 'B'")
    duration = obj.get("duration_s")
    if not (_is_int(duration) and duration > 0):
        raise SchemaViolation(line_no, "duration_s", "expected integer > 0")
    return MatchMeta(match_id, winner, duration)


def _parse_interval(obj: dict, line_no: int, c_a: int, n_items: int) -> IntervalRecord:
    match_id = obj.get("match_id")
    if not isinstance(match_id, str):
        raise SchemaViolation(line_no, "match_id", "missing" if match_id is None else "expected string")
    values = {"match_id": match_id}
    for key, attr, kind in _FIELDS:
        if key not in obj:
            raise SchemaViolation(line_no, key, "missing")
        value = obj[key]
        detail = _check(value, kind, c_a, n_items)
        if detail is not None:
            raise SchemaViolation(line_no, key, detail)
        values[attr] = tuple(value) if kind == "items" else value
    return IntervalRecord(**values)


def parse_interval_stream(
    stream: Iterable[bytes | str],
    c_a: int = N_HERO_POOL,
    n_items: int = N_ITEMS,
) -> ParsedStream:
    """Parse newline-delimited JSON records.

    Malformed or schema-violating lines are collected in ``errors`` and left
    out of ``records``. Unknown keys are ignored. Records stamped before the
    horn (negative game time) are dropped and counted.
    """
    out = ParsedStream()
    seen_content = False
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                out.errors.append(MalformedLine(line_no, str(exc)))
                continue
        text = raw.strip()
        if not text:
            continue
        first = not seen_content
        seen_content = True
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            out.errors.append(MalformedLine(line_no, exc.msg))
            continue
        if not isinstance(obj, dict):
            out.errors.append(MalformedLine(line_no, "not a JSON object"))
            continue
        kind = obj.get("type", "interval")
        try:
            if kind == "meta" and first:
                out.meta = _parse_meta(obj, line_no)
            elif kind == "interval":
                record = _parse_interval(obj, line_no, c_a, n_items)
                if record.game_time_s < 0:
                    out.dropped_pre_horn += 1
                else:
                    out.records.append(record)
            else:
                raise SchemaViolation(line_no, "type", f"unexpected record type {kind!r}")
        except SchemaViolation as exc:
            out.errors.append(exc)
    return out


def serialize_record(record: IntervalRecord) -> str:
    obj = {"type": "interval", "match_id": record.match_id}
    for key, attr, kind in _FIELDS:
        value = getattr(record, attr)
        obj[key] = list(value) if kind == "items" else value
    return json.dumps(obj, separators=(",", ":"))


def serialize_meta(meta: MatchMeta) -> str:
    return json.dumps(
        {"type": "meta", "match_id": meta.match_id, "winner": meta.winner, "duration_s": meta.duration_s},
        separators=(",", ":"),
    )


@dataclass(frozen=True)
class MatchTimeline:
    match_id: str
    duration_s: int
    winner: str
    heroes: tuple[tuple[int, str], ...]  # team A first, then B; ascending id within team
    records: dict[int, tuple[IntervalRecord, ...]]

    @property
    def meta(self) -> MatchMeta:
        return MatchMeta(self.match_id, self.winner, self.duration_s)

    def team_heroes(self, team: str) -> list[int]:
        return [h for h, t in self.heroes if t == team]


def assemble_timeline(records: Iterable[IntervalRecord], meta: MatchMeta) -> MatchTimeline:
    """Group records by hero, order them by time and validate the lineup.

    Raises DuplicateHero, HeroCountViolation or NonMonotoneCounter.
    """
    per_hero: dict[int, list[IntervalRecord]] = {}
    team_of: dict[int, str] = {}
    for rec in records:
        if rec.match_id != meta.match_id:
            raise InconsistentMatch(f"record for {rec.match_id!r} in match {meta.match_id!r}")
        known = team_of.setdefault(rec.hero_id, rec.team)
        if known != rec.team:
            raise DuplicateHero(rec.hero_id)
        per_hero.setdefault(rec.hero_id, []).append(rec)

    counts = {team: sum(1 for t in team_of.values() if t == team) for team in TEAMS}
    if len(team_of) != 2 * HEROES_PER_TEAM or any(c != HEROES_PER_TEAM for c in counts.values()):
        raise HeroCountViolation({"distinct": len(team_of), **counts})

    ordered: dict[int, tuple[IntervalRecord, ...]] = {}
    for hero_id, recs in per_hero.items():
        recs.sort(key=lambda r: r.game_time_s)  # stable
        for prev, cur in zip(recs, recs[1:]):
            for name in CUMULATIVE_COUNTERS:
                if getattr(cur, name) < getattr(prev, name):
                    raise NonMonotoneCounter(hero_id, name, cur.game_time_s)
        ordered[hero_id] = tuple(recs)

    heroes = tuple(
        (h, team) for team in TEAMS for h in sorted(h for h, t in team_of.items() if t == team)
    )
    return MatchTimeline(meta.match_id, meta.duration_s, meta.winner, heroes, ordered)


def load_match_file(path: str | Path, c_a: int = N_HERO_POOL, n_items: int = N_ITEMS) -> MatchTimeline:
    """Read and validate one match file, raising the first problem found."""
    with open(path, "rb") as fh:
        parsed = parse_interval_stream(fh, c_a=c_a, n_items=n_items)
    if parsed.errors:
        raise parsed.errors[0]
    if parsed.meta is None:
        raise MissingMeta(f"{path}: first record must be of type 'meta'")
    return assemble_timeline(parsed.records, parsed.meta)


def read_meta(path: str | Path) -> MatchMeta:
    """Read only the leading meta record of a match file."""
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if raw.strip():
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise MalformedLine(line_no, exc.msg) from None
                if not isinstance(obj, dict) or obj.get("type") != "meta":
                    break
                return _parse_meta(obj, line_no)
    raise MissingMeta(f"{path}: first record must be of type 'meta'")


def write_match_file(path: str | Path, timeline: MatchTimeline) -> None:
    """Write a timeline in the ingestion format, records in time order."""
    rows = [rec for recs in timeline.records.values() for rec in recs]
    rows.sort(key=lambda r: (r.game_time_s, r.hero_id))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_meta(timeline.meta) + "\n")
        for rec in rows:
            fh.write(serialize_record(rec) + "\n")


def list_match_files(directory: str | Path) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix in (".jsonl", ".json") and p.is_file())
