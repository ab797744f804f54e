"""Deterministic synthetic matches in the ingestion format.

Each match has a latent advantage of team A over team B that moves along a
noisy path pinned at 0 at the horn and at ``R * drift`` at the end, so the
sign of the terminal advantage is the winner. The path is noisier early in
the game. Gold, experience, kills, towers and hero positions respond to the
advantage, which is the only route by which the outcome reaches the
features. Heroes have pool-wide traits fixed for a given master seed: farm
rate, a strength that tilts the win probability of the lineup, and a timing
trait (early versus late game) that bends the mid-game advantage, scales the
hero's own farm over time and lengthens or shortens the match. These traits are only visible through hero identity. Every hero
follows the same item build, so items reflect gold only. Experience accrues
faster as the match progresses.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import IntervalRecord, MatchTimeline, write_match_file

MIN_LENGTH_MIN = 10.0
MAX_LENGTH_MIN = 100.0


@dataclass(frozen=True)
class SynthConfig:
    n_matches: int = 100
    seed: int = 0
    c_a: int = 114
    n_items: int = 244
    mean_length_min: float = 40.0
    std_length_min: float = 12.0
    drift: float = 1.0  # terminal |advantage|
    volatility: float = 0.15  # late-game advantage noise
    early_noise_mult: float = 3.0
    feature_noise: float = 1.0
    record_period_s: int = 30
    lineup_weight: float = 1.5  # logit of A winning per unit lineup strength
    timing_weight: float = 0.6  # mid-game advantage bend per unit timing gap

    def __post_init__(self):
        if self.n_matches < 0 or self.c_a < 10 or self.n_items < 1:
            raise ConfigError("need n_matches >= 0, c_a >= 10, n_items >= 1")
        if not MIN_LENGTH_MIN < self.mean_length_min < MAX_LENGTH_MIN or self.std_length_min <= 0:
            raise ConfigError("mean length must lie in (10, 100) minutes, std must be positive")
        if self.drift <= 0 or self.volatility < 0 or self.early_noise_mult < 1 or self.feature_noise < 0:
            raise ConfigError("invalid advantage/noise parameters")
        if self.lineup_weight < 0 or self.timing_weight < 0:
            raise ConfigError("lineup and timing weights must be non-negative")
        if not 1 <= self.record_period_s <= 60:
            raise ConfigError("record period must be within [1, 60] seconds")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> SynthConfig:
        """Read ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep or key not in types:
                raise ConfigError(f"{path}:{line_no}: unknown or malformed entry {line!r}")
            values[key] = int(raw) if types[key] in (int, "int") else float(raw)
        values.update(overrides)
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


@dataclass(frozen=True)
class _HeroTraits:
    farm: np.ndarray  # (c_a,) gold/xp rate multiplier
    build: np.ndarray  # (c_a, 64) purchase order, item ids
    thresholds: np.ndarray  # (c_a, 64) cumulative gold at which each purchase happens
    strength: np.ndarray  # (c_a,)
    timing: np.ndarray  # (c_a,) positive for late-game heroes
    lane: np.ndarray  # (c_a,) preferred distance from the front


@lru_cache(maxsize=8)
def _hero_traits(seed: int, c_a: int, n_items: int) -> _HeroTraits:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    farm = rng.uniform(0.6, 1.4, size=c_a)
    # one generic build shared by the pool, so items track gold and not identity
    prefs = rng.choice(n_items, size=12, replace=n_items < 12) + 1
    build = np.tile(prefs[rng.integers(0, 12, size=64)], (c_a, 1))
    thresholds = np.tile(600.0 + np.cumsum(rng.uniform(400.0, 2500.0, size=64)), (c_a, 1))
    strength = rng.standard_normal(c_a)
    timing = rng.standard_normal(c_a)
    lane = rng.uniform(8.0, 30.0, size=c_a)
    return _HeroTraits(farm, build, thresholds, strength, timing, lane)


def _sample_length_s(rng: np.random.Generator, cfg: SynthConfig, shift: float = 0.0) -> int:
    s2 = math.log1p((cfg.std_length_min / cfg.mean_length_min) ** 2)
    mu = math.log(cfg.mean_length_min) - s2 / 2 + shift
    while True:
        minutes = rng.lognormal(mu, math.sqrt(s2))
        if MIN_LENGTH_MIN <= minutes <= MAX_LENGTH_MIN:
            return int(round(minutes * 60))


def _advantage_path(
    rng: np.random.Generator, cfg: SynthConfig, T: int, R: int, bend: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Latent advantage of team A at every second, and the noise scale used.

    ``bend`` adds a hump that vanishes at both ends, so the terminal sign is
    still ``R``.
    """
    p = np.arange(T + 1) / T
    sigma = cfg.volatility * (1.0 + (cfg.early_noise_mult - 1.0) * (1.0 - p))
    dp = 1.0 / T
    steps = np.concatenate([[0.0], sigma[1:] * math.sqrt(dp) * rng.standard_normal(T)])
    walk = np.cumsum(steps)
    var = np.cumsum(np.concatenate([[0.0], sigma[1:] ** 2 * dp]))
    bridge = walk - (var / var[-1]) * walk[-1] if var[-1] > 0 else np.zeros_like(walk)
    drift = cfg.drift * rng.uniform(0.8, 1.2)
    return R * drift * p + bridge + bend * 4.0 * p * (1.0 - p), sigma / cfg.volatility if cfg.volatility > 0 else np.ones_like(p)


def _bernoulli_counts(rng: np.random.Generator, prob: np.ndarray) -> np.ndarray:
    hits = rng.random(prob.shape) < np.clip(prob, 0.0, 1.0)
    hits[..., 0] = False
    return np.cumsum(hits, axis=-1)


def generate_match(cfg: SynthConfig, index: int) -> MatchTimeline:
    """Match ``index`` of the corpus described by ``cfg``; a pure function of both."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    traits = _hero_traits(cfg.seed, cfg.c_a, cfg.n_items)
    heroes = rng.choice(cfg.c_a, size=10, replace=False) + 1
    side = np.array([1.0] * 5 + [-1.0] * 5)  # +1 team A
    timing = traits.timing[heroes - 1]
    strength_gap = float(side @ traits.strength[heroes - 1]) / math.sqrt(10)
    timing_gap = float(side @ timing) / math.sqrt(10)
    T = _sample_length_s(rng, cfg, shift=0.12 * float(timing.sum()) / math.sqrt(10))
    R = 1 if rng.random() < 1.0 / (1.0 + math.exp(-cfg.lineup_weight * strength_gap)) else -1
    # late-game lineups trail in the middle of the game
    adv, noise_level = _advantage_path(rng, cfg, T, R, bend=-cfg.timing_weight * timing_gap)
    p = np.arange(T + 1) / T
    team_adv = side[:, None] * adv[None, :]  # (10, T+1), own-team advantage

    phase = 1.0 + 0.25 * timing[:, None] * (2.0 * p[None, :] - 1.0)
    farm = traits.farm[heroes - 1][:, None] * rng.uniform(0.95, 1.05, size=(10, 1)) * np.clip(phase, 0.3, None)
    gain = np.clip(1.0 + 0.35 * team_adv, 0.1, None)
    gold_rate = 8.0 * farm * gain * rng.uniform(0.7, 1.3, size=(10, T + 1))
    gold_rate[:, 0] = 0.0
    gold = np.floor(np.cumsum(gold_rate, axis=1)).astype(np.int64) + 600
    # experience speeds up as the match progresses, so xp against game time tracks progress
    xp_rate = (9.0 * np.sqrt(farm) * (0.4 + 1.2 * p)[None, :] * np.clip(1.0 + 0.3 * team_adv, 0.1, None)
               * rng.uniform(0.7, 1.3, size=(10, T + 1)))
    xp_rate[:, 0] = 0.0
    xp = np.floor(np.cumsum(xp_rate, axis=1)).astype(np.int64)

    last_hits = _bernoulli_counts(rng, 0.12 * farm * gain)
    denies = _bernoulli_counts(rng, np.full((10, T + 1), 0.012))
    creeps = _bernoulli_counts(rng, np.full((10, T + 1), 0.0015))
    camps = _bernoulli_counts(rng, np.full((10, T + 1), 0.001))
    obs = _bernoulli_counts(rng, np.full((10, T + 1), 0.0025))
    sen = _bernoulli_counts(rng, np.full((10, T + 1), 0.002))
    runes = _bernoulli_counts(rng, np.full((10, T + 1), 0.002))

    kills = np.zeros((10, T + 1), dtype=np.int64)
    deaths = np.zeros((10, T + 1), dtype=np.int64)
    assists = np.zeros((10, T + 1), dtype=np.int64)
    towers = np.zeros((10, T + 1), dtype=np.int64)
    roshans = np.zeros((10, T + 1), dtype=np.int64)
    dead = np.zeros((10, T + 1), dtype=bool)
    team_rows = (np.arange(5), np.arange(5, 10))
    towers_left = [11, 11]
    for team, sgn in ((0, 1.0), (1, -1.0)):
        kill_prob = 0.008 * np.exp(1.2 * sgn * adv)
        push_prob = 0.002 * p * np.exp(2.0 * sgn * adv)
        rosh_prob = 0.0004 * p * np.exp(1.5 * sgn * adv)
        for tau in np.nonzero(rng.random(T + 1) < kill_prob)[0]:
            if tau == 0:
                continue
            killer = rng.choice(team_rows[team])
            victim = rng.choice(team_rows[1 - team])
            kills[killer, tau:] += 1
            deaths[victim, tau:] += 1
            for mate in team_rows[team]:
                if mate != killer and rng.random() < 0.5:
                    assists[mate, tau:] += 1
            respawn = int(15 + 45 * p[tau])
            dead[victim, tau : tau + respawn] = True
        for tau in np.nonzero(rng.random(T + 1) < push_prob)[0]:
            if towers_left[team] and tau > 0:
                towers_left[team] -= 1
                towers[rng.choice(team_rows[team]), tau:] += 1
        for tau in np.nonzero(rng.random(T + 1) < rosh_prob)[0]:
            if tau > 0:
                roshans[rng.choice(team_rows[team]), tau:] += 1
    team_kills = np.stack([kills[rows].sum(0) for rows in team_rows])  # (2, T+1)
    own_team_kills = np.concatenate([np.repeat(team_kills[:1], 5, 0), np.repeat(team_kills[1:], 5, 0)])
    participation = (kills + assists) / np.maximum(own_team_kills, 1)
    participation = np.minimum(participation, 1.0)

    front = 128.0 + 40.0 * adv  # moves toward team B's base when A leads
    lane = traits.lane[heroes - 1]
    pos_sd = 4.0 * cfg.feature_noise * noise_level
    diag = front[None, :] - side[:, None] * lane[:, None] + pos_sd[None, :] * rng.standard_normal((10, T + 1))
    pos_x = diag + 6.0 * rng.standard_normal((10, T + 1))
    pos_y = diag + 6.0 * rng.standard_normal((10, T + 1))
    fountain = np.where(side > 0, 70.0, 186.0)[:, None]
    pos_x = np.where(dead, fountain, pos_x)
    pos_y = np.where(dead, fountain, pos_y)

    match_id = f"synth-{cfg.seed}-{index:05d}"
    period = cfg.record_period_s
    records: dict[int, tuple[IntervalRecord, ...]] = {}
    for h in range(10):
        hero_id = int(heroes[h])
        offset = int(rng.integers(1, period + 1))
        times = np.arange(offset, T + 1, period)
        # each hero follows its own build; a purchase happens when cumulative gold passes its price
        picks = traits.build[hero_id - 1]
        n_bought = np.searchsorted(traits.thresholds[hero_id - 1], gold[h, times], side="right")
        team = "A" if side[h] > 0 else "B"
        recs = []
        for tau, nb in zip(times.tolist(), n_bought.tolist()):
            recs.append(IntervalRecord(
                match_id=match_id,
                game_time_s=tau,
                hero_id=hero_id,
                team=team,
                life_state=int(dead[h, tau]),
                gold=int(gold[h, tau]),
                experience=int(xp[h, tau]),
                pos_x=round(float(pos_x[h, tau]), 3),
                pos_y=round(float(pos_y[h, tau]), 3),
                deaths=int(deaths[h, tau]),
                kills=int(kills[h, tau]),
                last_hits=int(last_hits[h, tau]),
                denies=int(denies[h, tau]),
                assists=int(assists[h, tau]),
                creeps_stacked=int(creeps[h, tau]),
                camps_stacked=int(camps[h, tau]),
                towers_killed=int(towers[h, tau]),
                roshans_killed=int(roshans[h, tau]),
                obs_placed=float(obs[h, tau]),
                sen_placed=float(sen[h, tau]),
                rune_pickups=float(runes[h, tau]),
                teamfight_participation=round(float(participation[h, tau]), 4),
                items=tuple(int(i) for i in picks[max(0, nb - 9) : min(nb, 64)]),
            ))
        records[hero_id] = tuple(recs)

    lineup = tuple((int(h), "A") for h in sorted(heroes[:5])) + tuple((int(h), "B") for h in sorted(heroes[5:]))
    return MatchTimeline(match_id, T, "A" if R > 0 else "B", lineup, records)


def generate_corpus(cfg: SynthConfig, out_dir: str | Path) -> list[Path]:
    """Write ``cfg.n_matches`` match files plus the config used."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(cfg.n_matches):
        path = out / f"match_{i:05d}.jsonl"
        write_match_file(path, generate_match(cfg, i))
        paths.append(path)
    (out / "synth.cfg").write_text(cfg.to_text(), encoding="utf-8")
    return paths
