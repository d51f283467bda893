"""Telemetry data model: CSV ingestion, calendar features, normalization,
chronological splitting, and future-window occupancy targets.

A room's telemetry is a strictly increasing per-minute sequence of
:class:`EventRecord`. Feature engineering turns it into a
:class:`FeatureMatrix` whose column layout is fixed (sensor channels first,
then calendar features); z-scoring statistics are fit on the train split only
and stored in :class:`NormStats`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateSplitError,
    DomainError,
    OrderingError,
    ParseError,
    SchemaError,
    ShapeError,
)

# Canonical CSV column order (also the first eight feature columns).
SENSOR_COLUMNS = (
    "airflow_actual",
    "airflow_setpoint",
    "cooling_setpoint",
    "heating_setpoint",
    "damper_position_command",
    "discharge_temperature",
    "hw_valve_command",
    "space_temperature_actual",
)

CSV_HEADER = ("timestamp",) + SENSOR_COLUMNS + ("occupancy",)

CALENDAR_COLUMNS = ("day_of_week", "hour", "month", "is_weekend")

# Features that are binary indicators and must never be z-scored.
BINARY_FEATURES = frozenset({"is_weekend", "occupancy"})

# Prediction horizons (minutes) the sweep supports.
SUPPORTED_WINDOWS = (1, 5, 10, 30, 60, 120, 240, 480)


@dataclass(frozen=True, slots=True)
class EventRecord:
    """One per-minute telemetry row for a single room."""

    timestamp: datetime
    airflow_actual: float
    airflow_setpoint: float
    cooling_setpoint: float
    heating_setpoint: float
    damper_position_command: float
    discharge_temperature: float
    hw_valve_command: float
    space_temperature_actual: float
    occupancy: int

    def __post_init__(self):
        if self.occupancy not in (0, 1):
            raise DomainError(f"occupancy must be 0 or 1, got {self.occupancy!r}")


class Dataset:
    """An ordered, immutable sequence of records for one room.

    Timestamps must be strictly increasing; construction rejects duplicates
    and out-of-order rows rather than re-sorting.
    """

    __slots__ = ("room_id", "records")

    def __init__(self, room_id: str, records: Sequence[EventRecord]):
        records = tuple(records)
        for i in range(1, len(records)):
            if records[i].timestamp <= records[i - 1].timestamp:
                raise OrderingError(
                    f"timestamps must strictly increase: record {i} "
                    f"({records[i].timestamp.isoformat()}) does not follow "
                    f"{records[i - 1].timestamp.isoformat()}"
                )
        self.room_id = room_id
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def __getitem__(self, i: int) -> EventRecord:
        return self.records[i]

    def occupancy(self) -> np.ndarray:
        """Occupancy column as an int array of shape (T,)."""
        return np.fromiter((r.occupancy for r in self.records), dtype=np.int64, count=len(self.records))


class FeatureVector(NamedTuple):
    """One engineered feature row plus its column names."""

    values: np.ndarray
    names: tuple[str, ...]


class FeatureMatrix:
    """Engineered features for a whole dataset: values (T, n) plus column names."""

    __slots__ = ("values", "names")

    def __init__(self, values: np.ndarray, names: tuple[str, ...]):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise ShapeError(
                f"feature values of shape {values.shape} do not match {len(names)} column names"
            )
        self.values = values
        self.names = tuple(names)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i], self.names)


def _parse_timestamp(text: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"line {line_no}: bad timestamp {text!r}") from None
    if ts.tzinfo is not None:
        raise ParseError(f"line {line_no}: timestamp {text!r} must be timezone-naive")
    if ts.second or ts.microsecond:
        raise ParseError(f"line {line_no}: timestamp {text!r} is finer than minute resolution")
    return ts


def _parse_real(text: str, column: str, line_no: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {line_no}: column {column!r} has non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"line {line_no}: column {column!r} has non-finite value {text!r}")
    return value


def parse_csv_rows(lines: Iterable[str], room_id: str, source: str = "<memory>") -> Dataset:
    """Parse telemetry CSV lines (header included) into a Dataset."""
    it = iter(lines)
    try:
        header_line = next(it).strip()
    except StopIteration:
        raise SchemaError(f"{source}: empty file") from None
    header = tuple(name.strip() for name in header_line.split(","))
    if header != CSV_HEADER:
        raise SchemaError(
            f"{source}: header {header} does not match expected {CSV_HEADER}"
        )

    records = []
    prev_ts: datetime | None = None
    for line_no, line in enumerate(it, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_HEADER):
            raise ParseError(
                f"line {line_no}: expected {len(CSV_HEADER)} fields, got {len(parts)}"
            )
        ts = _parse_timestamp(parts[0], line_no)
        if prev_ts is not None and ts <= prev_ts:
            raise OrderingError(
                f"line {line_no}: timestamp {parts[0]} does not follow {prev_ts.isoformat()}"
            )
        sensors = [_parse_real(parts[k + 1], SENSOR_COLUMNS[k], line_no) for k in range(8)]
        occ_raw = _parse_real(parts[9], "occupancy", line_no)
        if occ_raw not in (0.0, 1.0):
            raise DomainError(f"line {line_no}: occupancy must be 0 or 1, got {parts[9]!r}")
        records.append(EventRecord(ts, *sensors, occupancy=int(occ_raw)))
        prev_ts = ts
    return Dataset(room_id, records)


def load_csv(path: str | Path, room_id: str) -> Dataset:
    """Load one room's telemetry CSV (schema per :data:`CSV_HEADER`)."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return parse_csv_rows(fh, room_id, source=str(path))


def engineer_features(dataset: Dataset, include_occupancy: bool = False) -> FeatureMatrix:
    """Build the model input matrix: sensor channels plus calendar features.

    Calendar columns: day_of_week (Monday=0), hour (0-23), month (1-12),
    is_weekend (1 iff Saturday/Sunday). With ``include_occupancy`` the
    record's own occupancy is appended as a lagged binary input (it is in
    the past relative to every prediction target).
    """
    names = SENSOR_COLUMNS + CALENDAR_COLUMNS
    if include_occupancy:
        names = names + ("occupancy",)
    out = np.empty((len(dataset), len(names)), dtype=np.float64)
    for i, r in enumerate(dataset):
        ts = r.timestamp
        dow = ts.weekday()
        out[i, 0] = r.airflow_actual
        out[i, 1] = r.airflow_setpoint
        out[i, 2] = r.cooling_setpoint
        out[i, 3] = r.heating_setpoint
        out[i, 4] = r.damper_position_command
        out[i, 5] = r.discharge_temperature
        out[i, 6] = r.hw_valve_command
        out[i, 7] = r.space_temperature_actual
        out[i, 8] = dow
        out[i, 9] = ts.hour
        out[i, 10] = ts.month
        out[i, 11] = 1.0 if dow >= 5 else 0.0
        if include_occupancy:
            out[i, 12] = r.occupancy
    return FeatureMatrix(out, names)


def split_train_test(dataset: Dataset, fraction: float) -> tuple[Dataset, Dataset]:
    """Chronological split: first floor(fraction*T) records train, rest test."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    if n < 2:
        raise DegenerateSplitError(f"need at least 2 records to split, got {n}")
    cut = int(math.floor(fraction * n))
    if cut == 0 or cut == n:
        raise DegenerateSplitError(
            f"fraction {fraction} leaves an empty side for {n} records"
        )
    return (
        Dataset(dataset.room_id, dataset.records[:cut]),
        Dataset(dataset.room_id, dataset.records[cut:]),
    )


@dataclass(frozen=True)
class NormStats:
    """Per-feature z-scoring statistics fitted on a train split."""

    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    fitted_on: str = ""

    def save(self, path: str | Path) -> None:
        """Write a plain-text key-value sidecar (full float precision)."""
        lines = [f"fitted_on={self.fitted_on}"]
        for name, m, s in zip(self.feature_names, self.mean, self.std):
            lines.append(f"{name}.mean={float(m)!r}")
            lines.append(f"{name}.std={float(s)!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NormStats":
        names: list[str] = []
        means: list[float] = []
        stds: list[float] = []
        fitted_on = ""
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            if key == "fitted_on":
                fitted_on = value
            elif key.endswith(".mean"):
                names.append(key[: -len(".mean")])
                means.append(float(value))
            elif key.endswith(".std"):
                stds.append(float(value))
            else:
                raise ParseError(f"{path}: unrecognized line {line!r}")
        if len(means) != len(stds):
            raise ParseError(f"{path}: mean/std lines do not pair up")
        return cls(tuple(names), np.array(means), np.array(stds), fitted_on)


def fit_normalizer(features: FeatureMatrix, fitted_on: str = "") -> NormStats:
    """Fit per-feature mean/std on train features.

    Binary indicator columns keep (mean 0, std 1) so they pass through
    unchanged. Zero-variance columns get their std floored to 1.0 with a
    warning so constant channels stay harmless.
    """
    if len(features) == 0:
        raise ShapeError("cannot fit normalizer on empty features")
    values = features.values
    mean = values.mean(axis=0)
    if len(features) > 1:
        std = values.std(axis=0, ddof=1)
    else:
        std = np.zeros(values.shape[1])
    for j, name in enumerate(features.names):
        if name in BINARY_FEATURES:
            mean[j] = 0.0
            std[j] = 1.0
        elif std[j] < 1e-12:
            warnings.warn(
                f"feature {name!r} has zero variance on the train split; std floored to 1.0",
                RuntimeWarning,
                stacklevel=2,
            )
            std[j] = 1.0
    return NormStats(features.names, mean, std, fitted_on)


def apply_normalizer(stats: NormStats, features: FeatureMatrix) -> FeatureMatrix:
    """Z-score features with train-time statistics; binary columns pass through."""
    if features.names != stats.feature_names:
        raise ShapeError(
            f"feature layout {features.names} does not match fitted layout {stats.feature_names}"
        )
    return FeatureMatrix((features.values - stats.mean) / stats.std, features.names)


def invert_normalizer(stats: NormStats, features: FeatureMatrix) -> FeatureMatrix:
    """Undo :func:`apply_normalizer` (z * std + mean)."""
    if features.names != stats.feature_names:
        raise ShapeError(
            f"feature layout {features.names} does not match fitted layout {stats.feature_names}"
        )
    return FeatureMatrix(features.values * stats.std + stats.mean, features.names)


def aggregate_target(dataset: Dataset, index: int, window: int) -> int:
    """Binary target for one time step: 1 iff the room is occupied at any
    point in the next ``window`` minutes.

    ``index`` is 0-based; valid for 0 <= index <= T-2. Windows reaching past
    the series end aggregate over the available suffix only.
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    n = len(dataset)
    if not 0 <= index <= n - 2:
        raise IndexError(f"index {index} out of range for {n} records (need 0..{n - 2})")
    stop = min(index + window, n - 1)
    return int(any(dataset.records[k].occupancy for k in range(index + 1, stop + 1)))


def aggregate_targets(dataset: Dataset, window: int) -> np.ndarray:
    """Vector of :func:`aggregate_target` for indices 0..T-2, as int array."""
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    n = len(dataset)
    if n < 2:
        raise ShapeError(f"need at least 2 records, got {n}")
    occ = dataset.occupancy()
    # next_one[t] = smallest k >= t with occ[k] == 1, or n if none
    idx = np.arange(n, dtype=np.int64)
    pos = np.where(occ == 1, idx, n)
    next_one = np.minimum.accumulate(pos[::-1])[::-1]
    upper = np.minimum(idx[:-1] + window, n - 1)
    return (next_one[1:] <= upper).astype(np.int64)
