from __future__ import annotations

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobaslice.errors import (
    DuplicateHero,
    HeroCountViolation,
    InconsistentMatch,
    MalformedLine,
    MissingMeta,
    NonMonotoneCounter,
    SchemaViolation,
)
from mobaslice.ingest import (
    IntervalRecord,
    MatchMeta,
    assemble_timeline,
    load_match_file,
    parse_interval_stream,
    serialize_meta,
    serialize_record,
    write_match_file,
)

from conftest import LINEUP, dumps, interval_obj, lineup_records, make_record


def test_single_line_passes_values_through():
    parsed = parse_interval_stream([dumps(interval_obj(hero_id=14, gold=625)).encode()])
    assert parsed.ok
    assert len(parsed.records) == 1
    assert parsed.records[0].hero_id == 14
    assert parsed.records[0].gold == 625


def test_empty_stream():
    parsed = parse_interval_stream(io.BytesIO(b""))
    assert parsed.records == [] and parsed.errors == [] and parsed.meta is None


def test_missing_field_is_reported_not_yielded():
    lines = [dumps(interval_obj(game_time_s=t)) for t in (1, 2, 3)]
    obj = interval_obj(game_time_s=2)
    del obj["gold"]
    lines[1] = dumps(obj)
    parsed = parse_interval_stream(lines)
    assert len(parsed.records) == 2
    assert len(parsed.errors) == 1
    err = parsed.errors[0]
    assert isinstance(err, SchemaViolation) and (err.line_no, err.field) == (2, "gold")


def test_unknown_fields_ignored():
    parsed = parse_interval_stream([dumps(interval_obj(extra="x", nested={"a": 1}))])
    assert parsed.ok and len(parsed.records) == 1


@pytest.mark.parametrize(
    "key,value",
    [
        ("hero_id", 0),
        ("hero_id", 115),
        ("hero_id", 3.0),
        ("team", "C"),
        ("life_state", 2),
        ("gold", -1),
        ("kills", True),
        ("x", "12"),
        ("x", float("nan")),
        ("obs_placed", -0.5),
        ("items", [0]),
        ("items", [245]),
        ("items", "1,2"),
        ("game_time_s", 1.5),
    ],
)
def test_schema_violations(key, value):
    parsed = parse_interval_stream([dumps(interval_obj(**{key: value}))])
    assert not parsed.records
    err = parsed.errors[0]
    assert isinstance(err, SchemaViolation)
    assert (err.line_no, err.field) == (1, key)


def test_malformed_lines():
    parsed = parse_interval_stream(["{not json", "[1, 2]", dumps(interval_obj())])
    assert [type(e) for e in parsed.errors] == [MalformedLine, MalformedLine]
    assert [e.line_no for e in parsed.errors] == [1, 2]
    assert len(parsed.records) == 1


def test_negative_game_time_dropped():
    parsed = parse_interval_stream([dumps(interval_obj(game_time_s=-30)), dumps(interval_obj(game_time_s=5))])
    assert parsed.ok
    assert parsed.dropped_pre_horn == 1
    assert [r.game_time_s for r in parsed.records] == [5]


def test_meta_only_on_first_line():
    meta = {"type": "meta", "match_id": "m1", "winner": "B", "duration_s": 600}
    parsed = parse_interval_stream([dumps(meta), dumps(interval_obj())])
    assert parsed.meta == MatchMeta("m1", "B", 600)
    late = parse_interval_stream([dumps(interval_obj()), dumps(meta)])
    assert isinstance(late.errors[0], SchemaViolation) and late.errors[0].field == "type"


def test_bad_meta():
    parsed = parse_interval_stream([dumps({"type": "meta", "match_id": "m1", "winner": "A", "duration_s": 0})])
    assert parsed.errors[0].field == "duration_s"


# -- round trip ---------------------------------------------------------------

counts = st.integers(min_value=0, max_value=10**6)
reals = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False)
records = st.builds(
    IntervalRecord,
    match_id=st.text(min_size=1, max_size=12),
    game_time_s=st.integers(min_value=0, max_value=10**5),
    hero_id=st.integers(min_value=1, max_value=114),
    team=st.sampled_from(["A", "B"]),
    life_state=st.sampled_from([0, 1]),
    gold=counts,
    experience=counts,
    pos_x=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    pos_y=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    deaths=counts, kills=counts, last_hits=counts, denies=counts, assists=counts,
    creeps_stacked=counts, camps_stacked=counts, towers_killed=counts, roshans_killed=counts,
    obs_placed=reals, sen_placed=reals, rune_pickups=reals, teamfight_participation=reals,
    items=st.lists(st.integers(min_value=1, max_value=244), max_size=9).map(tuple),
)


@settings(max_examples=200, deadline=None)
@given(records)
def test_serialize_parse_round_trip(rec):
    parsed = parse_interval_stream([serialize_record(rec)])
    assert parsed.ok
    assert parsed.records == [rec]


# -- timeline assembly --------------------------------------------------------


def test_assemble_valid_timeline():
    recs = lineup_records(times=(90, 30))
    tl = assemble_timeline(recs, MatchMeta("m1", "A", 1800))
    assert tl.duration_s == 1800
    assert tl.heroes == tuple(LINEUP)
    assert all([r.game_time_s for r in tl.records[h]] == [30, 90] for h, _ in LINEUP)


def test_eleven_heroes():
    recs = lineup_records() + [make_record(hero_id=11, team="B")]
    with pytest.raises(HeroCountViolation):
        assemble_timeline(recs, MatchMeta("m1", "A", 600))


def test_unbalanced_teams():
    lineup = [(h, "A") for h in range(1, 7)] + [(h, "B") for h in range(7, 11)]
    with pytest.raises(HeroCountViolation):
        assemble_timeline(lineup_records(lineup=lineup), MatchMeta("m1", "A", 600))


def test_hero_on_both_teams():
    recs = lineup_records() + [make_record(hero_id=3, team="B")]
    with pytest.raises(DuplicateHero) as exc:
        assemble_timeline(recs, MatchMeta("m1", "A", 600))
    assert exc.value.hero_id == 3


def test_counter_regression():
    recs = [r for r in lineup_records() if r.hero_id != 7]
    recs += [make_record(t=30, hero_id=7, team="B", kills=2), make_record(t=90, hero_id=7, team="B", kills=1)]
    with pytest.raises(NonMonotoneCounter) as exc:
        assemble_timeline(recs, MatchMeta("m1", "A", 600))
    assert (exc.value.hero_id, exc.value.field, exc.value.time) == (7, "kills", 90)


def test_gold_may_drop():
    recs = [r for r in lineup_records() if r.hero_id != 7]
    recs += [make_record(t=30, hero_id=7, team="B", gold=900), make_record(t=90, hero_id=7, team="B", gold=100)]
    assemble_timeline(recs, MatchMeta("m1", "A", 600))


def test_mixed_match_ids():
    recs = lineup_records() + [make_record(match_id="other")]
    with pytest.raises(InconsistentMatch):
        assemble_timeline(recs, MatchMeta("m1", "A", 600))


CORRUPTIONS = {
    "drop_hero": HeroCountViolation,
    "extra_hero": HeroCountViolation,
    "swap_team": DuplicateHero,
    "regress": NonMonotoneCounter,
}


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(CORRUPTIONS)), st.integers(min_value=0, max_value=9), st.sampled_from(
    ["experience", "deaths", "kills", "last_hits", "assists", "towers_killed", "rune_pickups"]))
def test_every_corruption_maps_to_its_error(kind, which, counter):
    recs = lineup_records(times=(30, 90, 150))
    hero_id, team = LINEUP[which]
    if kind == "drop_hero":
        recs = [r for r in recs if r.hero_id != hero_id]
    elif kind == "extra_hero":
        recs.append(make_record(hero_id=50, team=team))
    elif kind == "swap_team":
        recs.append(make_record(hero_id=hero_id, team="B" if team == "A" else "A"))
    else:
        recs = [r for r in recs if r.hero_id != hero_id]
        recs += [make_record(t=30, hero_id=hero_id, team=team, **{counter: 5}),
                 make_record(t=90, hero_id=hero_id, team=team, **{counter: 4})]
    with pytest.raises(CORRUPTIONS[kind]):
        assemble_timeline(recs, MatchMeta("m1", "A", 600))


def test_file_round_trip(tmp_path, small_timeline):
    path = tmp_path / "m1.jsonl"
    write_match_file(path, small_timeline)
    again = load_match_file(path)
    assert again == small_timeline
    assert path.read_text().splitlines()[0] == serialize_meta(small_timeline.meta)


def test_file_without_meta(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("\n".join(serialize_record(r) for r in lineup_records()) + "\n")
    with pytest.raises(MissingMeta):
        load_match_file(path)


def test_truncated_file(tmp_path, small_timeline):
    path = tmp_path / "m1.jsonl"
    write_match_file(path, small_timeline)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 40])
    with pytest.raises(MalformedLine):
        load_match_file(path)
