import os

# The recurrence is sequential; small-matrix BLAS threading only adds
# overhead. Must be set before numpy loads.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from datetime import datetime, timedelta

from occucast.timeseries import Dataset, EventRecord

BASE_SENSORS = dict(
    airflow_actual=60.0,
    airflow_setpoint=70.0,
    cooling_setpoint=74.8,
    heating_setpoint=67.4,
    damper_position_command=45.0,
    discharge_temperature=62.0,
    hw_valve_command=1.0,
    space_temperature_actual=71.0,
)


def make_records(occupancy, start=datetime(2021, 7, 5, 8, 0), **overrides):
    """EventRecords with the given occupancy sequence and defaulted sensors."""
    fields = dict(BASE_SENSORS)
    fields.update(overrides)
    return [
        EventRecord(timestamp=start + timedelta(minutes=k), occupancy=int(o), **fields)
        for k, o in enumerate(occupancy)
    ]


def make_dataset(occupancy, room_id="roomX", start=datetime(2021, 7, 5, 8, 0), **overrides):
    return Dataset(room_id, make_records(occupancy, start=start, **overrides))


def csv_text(rows, header="timestamp,airflow_actual,airflow_setpoint,cooling_setpoint,"
                          "heating_setpoint,damper_position_command,discharge_temperature,"
                          "hw_valve_command,space_temperature_actual,occupancy"):
    return "\n".join([header] + list(rows)) + "\n"


def csv_row(minute, occupancy=0, timestamp=None, airflow="60.0", space_temp="71.0"):
    ts = timestamp or (datetime(2021, 7, 5, 8, 0) + timedelta(minutes=minute)).isoformat(timespec="minutes")
    return f"{ts},{airflow},70.0,74.8,67.4,45.0,62.0,1.0,{space_temp},{occupancy}"


def run_cli(argv):
    """Invoke the CLI in-process; argparse usage errors become exit codes."""
    from occucast.cli import main

    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return int(exc.code)


def write_vacant_csv(path, days=3, start=datetime(2021, 9, 6)):
    """A room that is never occupied; sensors vary deterministically."""
    header = ("timestamp,airflow_actual,airflow_setpoint,cooling_setpoint,heating_setpoint,"
              "damper_position_command,discharge_temperature,hw_valve_command,"
              "space_temperature_actual,occupancy")
    lines = [header]
    ts = start
    for k in range(days * 1440):
        wobble = 0.3 * (k % 11)
        lines.append(
            f"{ts.isoformat(timespec='minutes')},{30 + wobble:.2f},{65 + wobble:.2f},"
            f"{74.8 + 0.01 * (k % 5):.2f},{67.4 + 0.01 * (k % 3):.2f},{25 + wobble:.2f},"
            f"{62.0 + wobble:.2f},{0.5 + 0.1 * (k % 4):.2f},{70.0 + 0.02 * (k % 7):.2f},0"
        )
        ts += timedelta(minutes=1)
    path.write_text("\n".join(lines) + "\n")
