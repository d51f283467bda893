"""Seeded synthetic building-telemetry generator.

Produces per-minute CSV datasets with a learnable occupancy pattern: people
arrive and leave on a noisy weekday schedule (mostly empty weekends, short
optional weekend visits), and the sensor channels respond to occupancy with
simple affine shifts plus Gaussian noise. Channel levels sit near plausible
office-building values so the downstream energy arithmetic is on a sensible
scale. No thermal physics is claimed.

Everything is drawn from one seeded generator per room (rooms get independent
spawned streams), so output is fully deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, time, timedelta
from pathlib import Path
from typing import Mapping

import numpy as np

from ._fsio import atomic_write_text
from .errors import ConfigError
from .timeseries import CSV_HEADER, Dataset, parse_csv_rows

DEFAULT_NOISE_SCALES: Mapping[str, float] = {
    "airflow_actual": 6.0,
    "airflow_setpoint": 1.5,
    "cooling_setpoint": 1.0,
    "heating_setpoint": 0.8,
    "damper_position_command": 8.0,
    "discharge_temperature": 3.0,
    "hw_valve_command": 10.0,
    "space_temperature_actual": 0.4,
}

DEFAULT_START = datetime(2021, 9, 6)  # a Monday; 8 weeks reaches the heating season


@dataclass(frozen=True)
class GenConfig:
    """Generator settings; all randomness derives from ``seed``."""

    seed: int = 0
    start: datetime = DEFAULT_START
    end: datetime | None = None  # defaults to start + 8 weeks
    rooms: int = 5
    room_ids: tuple[str, ...] | None = None
    arrival_hour: float = 8.0
    arrival_std: float = 0.5
    departure_hour: float = 18.0
    departure_std: float = 0.75
    flip_noise: float = 0.001
    weekend_occupancy: float = 0.2
    noise_scales: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_NOISE_SCALES))

    def __post_init__(self):
        if self.end is None:
            object.__setattr__(self, "end", self.start + timedelta(weeks=8))
        if self.start >= self.end:
            raise ConfigError(f"start {self.start} must precede end {self.end}")
        for name in ("flip_noise", "weekend_occupancy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.room_ids is None and self.rooms < 1:
            raise ConfigError(f"rooms must be >= 1, got {self.rooms}")
        missing = set(DEFAULT_NOISE_SCALES) - set(self.noise_scales)
        if missing:
            raise ConfigError(f"noise_scales missing channels: {sorted(missing)}")

    def resolved_room_ids(self) -> tuple[str, ...]:
        if self.room_ids is not None:
            return tuple(self.room_ids)
        return tuple(f"room{i + 1}" for i in range(self.rooms))


def _schedule(cfg: GenConfig, rng: np.random.Generator, total_minutes: int) -> np.ndarray:
    """Noisy daily arrival/departure schedule as a 0/1 minute series."""
    first_midnight = datetime.combine(cfg.start.date(), time())
    offset = int((cfg.start - first_midnight).total_seconds() // 60)
    n_days = (offset + total_minutes + 1439) // 1440

    minutes = np.zeros(n_days * 1440, dtype=np.int64)
    day = cfg.start.date()
    for d in range(n_days):
        base = d * 1440
        if day.weekday() < 5:
            arrival = float(np.clip(rng.normal(cfg.arrival_hour, cfg.arrival_std), 5.0, 12.0))
            departure = float(np.clip(rng.normal(cfg.departure_hour, cfg.departure_std), 13.0, 23.5))
            minutes[base + int(arrival * 60) : base + int(departure * 60)] = 1
        elif rng.random() < cfg.weekend_occupancy:
            visit_start = rng.uniform(9.0, 15.0)
            visit_hours = rng.uniform(1.0, 3.0)
            minutes[base + int(visit_start * 60) : base + int((visit_start + visit_hours) * 60)] = 1
        day = day + timedelta(days=1)
    return minutes[offset : offset + total_minutes]


def _room_csv(cfg: GenConfig, rng: np.random.Generator) -> str:
    total = int((cfg.end - cfg.start).total_seconds() // 60)
    scheduled = _schedule(cfg, rng, total)
    flips = rng.random(total) < cfg.flip_noise
    occ = scheduled ^ flips

    ns = cfg.noise_scales
    normal = rng.normal
    airflow = 32.0 + 55.0 * occ + normal(0.0, ns["airflow_actual"], total)
    airflow_sp = 65.0 + 20.0 * occ + normal(0.0, ns["airflow_setpoint"], total)
    cooling_sp = 74.8 + normal(0.0, ns["cooling_setpoint"], total)
    heating_sp = 67.4 + normal(0.0, ns["heating_setpoint"], total)
    damper = np.clip(25.0 + 40.0 * occ + normal(0.0, ns["damper_position_command"], total), 0.0, 100.0)
    discharge = 62.4 + normal(0.0, ns["discharge_temperature"], total)
    hw_valve = np.clip(normal(-8.0, ns["hw_valve_command"], total), 0.0, 100.0)
    space_temp = 70.3 + 1.9 * occ + normal(0.0, ns["space_temperature_actual"], total)

    lines = [",".join(CSV_HEADER)]
    ts = cfg.start
    minute = timedelta(minutes=1)
    for k in range(total):
        lines.append(
            f"{ts.isoformat(timespec='minutes')},"
            f"{airflow[k]:.2f},{airflow_sp[k]:.2f},{cooling_sp[k]:.2f},{heating_sp[k]:.2f},"
            f"{damper[k]:.2f},{discharge[k]:.2f},{hw_valve[k]:.2f},{space_temp[k]:.2f},"
            f"{occ[k]:d}"
        )
        ts += minute
    return "\n".join(lines) + "\n"


def generate(cfg: GenConfig, out_dir: str | Path | None = None) -> dict[str, Dataset]:
    """Generate one Dataset per room; also write ``<room>.csv`` files if asked.

    The returned datasets are parsed back from the exact CSV text that is
    written, so in-memory data and files always agree.
    """
    room_ids = cfg.resolved_room_ids()
    streams = np.random.SeedSequence(cfg.seed).spawn(len(room_ids))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    datasets: dict[str, Dataset] = {}
    for room_id, stream in zip(room_ids, streams):
        text = _room_csv(cfg, np.random.default_rng(stream))
        datasets[room_id] = parse_csv_rows(text.splitlines(), room_id, source=room_id)
        if out_dir is not None:
            atomic_write_text(out_dir / f"{room_id}.csv", text)
    return datasets
