"""HVAC energy accounting: rule-based-control baseline and predicted savings.

Per-minute consumption is modeled as convective heat moved by the terminal
unit: E = cp * airflow * |setpoint - room temperature|, with the governing
setpoint chosen by season (heating setpoint October-March, cooling setpoint
otherwise). The baseline just sums this over measured data; the
occupancy-control strategy is credited with the baseline energy spent during
minutes the model predicts unoccupied.

Energy values are relative units (airflow units are whatever the sensors
report); every reported figure is a ratio or a comparison, never calibrated
consumption.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .timeseries import Dataset, EventRecord

DEFAULT_HEATING_MONTHS = frozenset({10, 11, 12, 1, 2, 3})


@dataclass(frozen=True)
class EnergyConfig:
    """Constants for the baseline simulation and savings estimation."""

    cp: float = 1.005  # specific heat capacity of air, kJ/(kg K), near 300 K
    heating_months: frozenset[int] = DEFAULT_HEATING_MONTHS
    unoccupied_threshold: float = 0.5
    control_window: int = 30

    def __post_init__(self):
        if self.cp <= 0:
            raise ConfigError(f"cp must be positive, got {self.cp}")
        if not 0.0 < self.unoccupied_threshold < 1.0:
            raise ConfigError(
                f"unoccupied_threshold must lie in (0, 1), got {self.unoccupied_threshold}"
            )
        if not set(self.heating_months) <= set(range(1, 13)):
            raise ConfigError(f"heating_months must be months 1..12, got {self.heating_months}")
        if self.control_window < 1:
            raise ConfigError(f"control_window must be >= 1, got {self.control_window}")


def select_setpoint(record: EventRecord, cfg: EnergyConfig = EnergyConfig()) -> float:
    """Season-dependent governing setpoint for one record (degrees F)."""
    if record.timestamp.month in cfg.heating_months:
        return record.heating_setpoint
    return record.cooling_setpoint


def step_energy(record: EventRecord, cfg: EnergyConfig = EnergyConfig()) -> float:
    """Convective energy for one minute: cp * airflow * |setpoint - room temp|.

    The magnitude of the temperature gap is used so heating and cooling both
    count as consumption; negative recorded airflow (sensor noise) is floored
    to zero.
    """
    delta_t = select_setpoint(record, cfg) - record.space_temperature_actual
    airflow = max(record.airflow_actual, 0.0)
    return cfg.cp * airflow * abs(delta_t)


@dataclass(frozen=True)
class EnergySeries:
    """Per-timestep baseline energy for one room's evaluation range."""

    room_id: str
    values: np.ndarray = field(repr=False)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def __len__(self) -> int:
        return self.values.shape[0]


def simulate_rbc(dataset: Dataset, cfg: EnergyConfig = EnergyConfig()) -> EnergySeries:
    """Rule-based-control baseline: per-minute energy over the whole dataset."""
    if len(dataset) == 0:
        raise ShapeError("cannot simulate an empty dataset")
    values = np.fromiter(
        (step_energy(r, cfg) for r in dataset), dtype=np.float64, count=len(dataset)
    )
    return EnergySeries(dataset.room_id, values)


def estimate_savings(
    series: EnergySeries,
    predictions,
    cfg: EnergyConfig = EnergyConfig(),
) -> tuple[float, float]:
    """Baseline energy during predicted-unoccupied minutes, and its percent.

    A timestep counts as predicted unoccupied when its governing probability
    falls below ``cfg.unoccupied_threshold``. ``predictions`` must align 1:1
    with the series timesteps.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    if preds.shape != series.values.shape:
        raise ShapeError(
            f"{preds.shape} predictions do not align with {series.values.shape} energy steps"
        )
    saved = float(series.values[preds < cfg.unoccupied_threshold].sum())
    total = series.total
    if total == 0.0:
        warnings.warn(
            f"room {series.room_id}: baseline energy is zero; savings percent reported as 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return saved, 0.0
    return saved, 100.0 * saved / total


@dataclass(frozen=True)
class RoomSavings:
    """One savings-report row."""

    room_id: str
    actual_energy: float
    saved_energy: float
    savings_percent: float


@dataclass(frozen=True)
class SavingsReport:
    """Per-room savings rows plus the average row.

    The average percent is the arithmetic mean of the per-room percentages,
    not the ratio of the summed energies.
    """

    rows: tuple[RoomSavings, ...]
    average: RoomSavings


def savings_report(room_results) -> SavingsReport:
    """Build the report from (room_id, actual_energy, saved_energy) triples."""
    rows = []
    for room_id, actual, saved in room_results:
        if actual == 0.0:
            warnings.warn(
                f"room {room_id}: baseline energy is zero; savings percent reported as 0",
                RuntimeWarning,
                stacklevel=2,
            )
            percent = 0.0
        else:
            percent = 100.0 * saved / actual
        rows.append(RoomSavings(str(room_id), float(actual), float(saved), percent))
    if not rows:
        raise ShapeError("savings report needs at least one room")
    average = RoomSavings(
        "AVERAGE",
        sum(r.actual_energy for r in rows) / len(rows),
        sum(r.saved_energy for r in rows) / len(rows),
        sum(r.savings_percent for r in rows) / len(rows),
    )
    return SavingsReport(tuple(rows), average)


SAVINGS_CSV_HEADER = "room,actual_energy,saved_energy,savings_percent"


def format_savings_csv(report: SavingsReport) -> str:
    """Render the report with two-decimal display values."""
    lines = [SAVINGS_CSV_HEADER]
    for r in report.rows + (report.average,):
        lines.append(
            f"{r.room_id},{r.actual_energy:.2f},{r.saved_energy:.2f},{r.savings_percent:.2f}"
        )
    return "\n".join(lines) + "\n"
