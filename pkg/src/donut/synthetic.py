"""Labeled seasonal KPI fixtures: periodic pattern with per-cycle variation,
Gaussian noise, injected anomaly segments and missing bursts."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .series import RawSeries

ANOMALY_TYPES = ("spike", "dip", "level_shift")


@dataclass
class SynthConfig:
    length: int = 43200
    interval: int = 60
    period: int = 1440
    start: int = 1_500_000_000
    base_level: float = 10.0
    amplitudes: tuple[float, ...] = (3.0, 1.0, 0.5)
    phases: tuple[float, ...] = (0.0, 1.0, 2.0)
    day_variation: float = 0.05
    trend: float = 0.0
    noise_sigma: float = 0.1
    anomaly_rate: float = 0.01
    anomaly_magnitude: tuple[float, float] = (6.0, 12.0)
    anomaly_duration: tuple[int, int] = (1, 15)
    shift_duration: tuple[int, int] = (30, 90)
    anomaly_types: tuple[str, ...] = ANOMALY_TYPES
    missing_rate: float = 0.003
    missing_burst: tuple[int, int] = (1, 10)
    seed: int = 0

    def __post_init__(self):
        for name in ("anomaly_rate", "missing_rate"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.anomaly_rate + self.missing_rate >= 1:
            raise ValueError("anomaly and missing rates would cover the entire series")
        if self.period < 2 or self.noise_sigma < 0 or self.length < 1:
            raise ValueError("need period >= 2, noise_sigma >= 0, length >= 1")
        if len(self.amplitudes) != len(self.phases):
            raise ValueError("amplitudes and phases must have equal length")
        bad = set(self.anomaly_types) - set(ANOMALY_TYPES)
        if bad:
            raise ValueError(f"unknown anomaly types {sorted(bad)}")


@dataclass
class SynthResult:
    raw: RawSeries
    clean: np.ndarray
    anomaly_kinds: list[tuple[int, int, str]] = field(default_factory=list)
    missing_bursts: list[tuple[int, int]] = field(default_factory=list)


def seasonal(t, cfg: SynthConfig) -> np.ndarray:
    """Base waveform: sum of harmonics of the period around ``base_level``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.full(t.shape, cfg.base_level)
    for k, (a, ph) in enumerate(zip(cfg.amplitudes, cfg.phases), start=1):
        out += a * np.sin(2 * np.pi * k * t / cfg.period + ph)
    return out


def cycle_jitter(n: int, cfg: SynthConfig, rng) -> np.ndarray:
    """Amplitude factor per point; one uniform draw per cycle, linearly
    interpolated between cycle starts so the curve has no jumps."""
    n_cycles = n // cfg.period + 2
    knots = rng.uniform(-cfg.day_variation, cfg.day_variation, size=n_cycles)
    t = np.arange(n) / cfg.period
    return 1.0 + np.interp(t, np.arange(n_cycles), knots)


def _place_one(rng, occupied: np.ndarray, d: int, gap: int = 1) -> tuple[int, int]:
    """A free interval of length ``d`` at least ``gap`` points away from occupied ones."""
    n = len(occupied)
    for _ in range(100 * n + 1000):
        s = int(rng.integers(0, n - d + 1))
        if not occupied[max(0, s - gap):s + d + gap].any():
            occupied[s:s + d] = True
            return s, s + d
    raise ValueError("cannot place segments: series too crowded")


def _place(rng, occupied: np.ndarray, total: int, lo: int, hi: int):
    """Non-overlapping segments with lengths in [lo, hi] covering exactly ``total`` points."""
    out, placed = [], 0
    while placed < total:
        d = int(min(rng.integers(lo, hi + 1), total - placed))
        out.append(_place_one(rng, occupied, d))
        placed += d
    return out


def generate(cfg: SynthConfig) -> SynthResult:
    """Draw a labeled series; identical configs give identical series."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    t = np.arange(n)
    base = seasonal(t, cfg) - cfg.base_level
    clean = cfg.base_level + base * cycle_jitter(n, cfg, rng) + cfg.trend * t
    values = clean + rng.normal(0.0, cfg.noise_sigma, size=n) if cfg.noise_sigma > 0 else clean.copy()

    occupied = np.zeros(n, dtype=bool)
    labels = np.zeros(n, dtype=np.int8)
    kinds = []
    n_anom = int(round(cfg.anomaly_rate * n))
    if n_anom:
        placed = 0
        while placed < n_anom:
            kind = cfg.anomaly_types[int(rng.integers(len(cfg.anomaly_types)))]
            lo, hi = cfg.shift_duration if kind == "level_shift" else cfg.anomaly_duration
            a, b = _place_one(rng, occupied, min(int(rng.integers(lo, hi + 1)), n_anom - placed))
            mag = rng.uniform(*cfg.anomaly_magnitude) * cfg.noise_sigma
            if kind == "spike":
                offset = mag
            elif kind == "dip":
                offset = -mag
            else:
                offset = mag * rng.choice([-1.0, 1.0])
            values[a:b] += offset
            labels[a:b] = 1
            kinds.append((a, b, kind))
            placed += b - a
    bursts = []
    n_miss = int(round(cfg.missing_rate * n))
    if n_miss:
        bursts = _place(rng, occupied, n_miss, *cfg.missing_burst)
        for a, b in bursts:
            values[a:b] = np.nan
    timestamps = cfg.start + cfg.interval * t
    kinds.sort()
    bursts.sort()
    return SynthResult(RawSeries(timestamps, values, labels), clean, kinds, bursts)


# --- flat key-value config ----------------------------------------------------

def parse_kv(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def coerce(cls, values: dict[str, str]):
    """Build dataclass ``cls`` from string values, converting by field default type."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in values.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        default = fields[key].default
        kwargs[key] = _convert(raw, default)
    return cls(**kwargs)


def _convert(raw: str, default):
    if isinstance(default, bool):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
            raise ValueError(f"bad boolean {raw!r}")
        return raw.lower() in ("true", "1", "yes", "on")
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        proto = default[0] if default else 0.0
        return tuple(_convert(p, proto) for p in parts)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path: str | Path) -> SynthConfig:
    return coerce(SynthConfig, parse_kv(Path(path).read_text()))
