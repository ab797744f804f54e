from __future__ import annotations

import json

import pytest

from mobaslice.ingest import IntervalRecord, MatchMeta, assemble_timeline


def make_record(match_id="m1", t=60, hero_id=1, team="A", **kw) -> IntervalRecord:
    base = dict(
        match_id=match_id, game_time_s=t, hero_id=hero_id, team=team, life_state=0, gold=625,
        experience=100, pos_x=100.0, pos_y=120.5, deaths=0, kills=0, last_hits=0, denies=0,
        assists=0, creeps_stacked=0, camps_stacked=0, towers_killed=0, roshans_killed=0,
        obs_placed=0.0, sen_placed=0.0, rune_pickups=0.0, teamfight_participation=0.0, items=(),
    )
    base.update(kw)
    return IntervalRecord(**base)


def interval_obj(**kw) -> dict:
    obj = {
        "type": "interval", "match_id": "m1", "game_time_s": 60, "hero_id": 14, "team": "A",
        "life_state": 0, "gold": 625, "xp": 100, "x": 100.0, "y": 120.5, "deaths": 0, "kills": 0,
        "lh": 0, "denies": 0, "assists": 0, "creeps_stacked": 0, "camps_stacked": 0,
        "towers_killed": 0, "roshans_killed": 0, "obs_placed": 0, "sen_placed": 0,
        "rune_pickups": 0, "teamfight_participation": 0.0, "items": [],
    }
    obj.update(kw)
    return obj


LINEUP = [(1, "A"), (2, "A"), (3, "A"), (4, "A"), (5, "A"), (6, "B"), (7, "B"), (8, "B"), (9, "B"), (10, "B")]


def lineup_records(times=(30, 90), match_id="m1", lineup=LINEUP, **kw):
    return [make_record(match_id, t, h, team, **kw) for h, team in lineup for t in times]


@pytest.fixture
def small_timeline():
    meta = MatchMeta("m1", "A", 240)
    return assemble_timeline(lineup_records(times=(30, 90, 150, 210)), meta)


def dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))
