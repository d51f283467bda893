"""Command-line entry point: data generation, training, the prediction-window
sweep, and the energy-savings report.

Subcommands
-----------
gen       write synthetic per-room telemetry CSVs
train     fit one model per requested (room, window) pair
evaluate  score trained models over the window sweep -> metrics.csv
savings   baseline-vs-predicted energy report -> savings.csv

Configuration precedence: command-line flags override values from a JSON
``--config`` file, which override built-in defaults. Outputs are written
atomically (temp file + rename), so a failed run leaves no truncated files.

Artifact layout under ``--out``:
    <room>/model_w<W>.npz        trained model container
    <room>/model_w<W>.norm.txt   normalization sidecar
    loss_<room>_w<W>.csv         per-epoch training loss
    metrics.csv                  one row per (room, window)
    savings.csv                  per-room rows plus AVERAGE
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from ._fsio import atomic_write_text
from .energy import EnergyConfig, estimate_savings, format_savings_csv, savings_report, simulate_rbc
from .errors import ConfigError
from .lstm import TrainConfig, load_model, predict_series, save_model, train
from .metrics import MetricsReport, evaluate, format_metrics_csv
from .synthgen import GenConfig, generate
from .timeseries import (
    SUPPORTED_WINDOWS,
    Dataset,
    NormStats,
    aggregate_targets,
    apply_normalizer,
    engineer_features,
    fit_normalizer,
    load_csv,
    split_train_test,
)

DEFAULT_SWEEP = ",".join(str(w) for w in SUPPORTED_WINDOWS)


# ---------------------------------------------------------------------------
# pipeline steps (also usable as library functions)


def train_room_model(
    csv_path: Path,
    room_id: str,
    out_dir: Path,
    cfg: TrainConfig,
    train_fraction: float = 0.7,
    include_occupancy: bool = False,
) -> list[float]:
    """Train one (room, window) model and write its artifacts.

    Returns the per-epoch loss log. Fitting statistics come from the train
    split only; the model container records the feature layout and the
    sidecar file name so inference is self-contained.
    """
    dataset = load_csv(csv_path, room_id)
    train_ds, _ = split_train_test(dataset, train_fraction)
    features = engineer_features(train_ds, include_occupancy)
    stats = fit_normalizer(features, fitted_on=f"{room_id}/train")
    normalized = apply_normalizer(stats, features)
    targets = aggregate_targets(train_ds, cfg.window)
    params, losses = train(normalized.values[:-1], targets, cfg)

    room_dir = out_dir / room_id
    room_dir.mkdir(parents=True, exist_ok=True)
    norm_name = f"model_w{cfg.window}.norm.txt"
    stats.save(room_dir / norm_name)
    save_model(room_dir / f"model_w{cfg.window}.npz", params, normalized.names, cfg, norm_name)
    loss_lines = ["epoch,mean_bce"] + [f"{e + 1},{float(loss)!r}" for e, loss in enumerate(losses)]
    atomic_write_text(out_dir / f"loss_{room_id}_w{cfg.window}.csv", "\n".join(loss_lines) + "\n")
    return losses


def _model_predictions(test_ds: Dataset, out_dir: Path, room_id: str, window: int) -> np.ndarray:
    """Next-window probabilities for test steps 0..T-2 from a saved model."""
    model_path = out_dir / room_id / f"model_w{window}.npz"
    if not model_path.exists():
        raise FileNotFoundError(f"no trained model for room {room_id!r}, window {window}: {model_path}")
    saved = load_model(model_path)
    stats = NormStats.load(out_dir / room_id / saved.norm_stats_file)
    features = engineer_features(test_ds, include_occupancy="occupancy" in saved.feature_names)
    normalized = apply_normalizer(stats, features)
    return predict_series(saved.params, normalized.values[:-1])


def evaluate_room(
    csv_path: Path,
    room_id: str,
    out_dir: Path,
    windows: list[int],
    train_fraction: float = 0.7,
    oracle: bool = False,
) -> list[MetricsReport]:
    """Metrics rows for one room across the requested windows.

    With ``oracle`` the model is bypassed and predictions are the true
    windowed targets pushed to near-certainty, which pins the best achievable
    scores for the split.
    """
    dataset = load_csv(csv_path, room_id)
    _, test_ds = split_train_test(dataset, train_fraction)
    reports = []
    for window in sorted(windows):
        if oracle:
            targets = aggregate_targets(test_ds, window)
            preds = np.where(targets == 1, 1.0 - 1e-6, 1e-6)
        else:
            preds = _model_predictions(test_ds, out_dir, room_id, window)
        reports.append(evaluate(preds, test_ds, window))
    return reports


def savings_for_room(
    csv_path: Path,
    room_id: str,
    out_dir: Path,
    ecfg: EnergyConfig,
    train_fraction: float = 0.7,
) -> tuple[str, float, float]:
    """(room, baseline energy, saved energy) over the room's test range.

    The prediction made at minute t-1 (for the window starting at t) governs
    minute t; the first test minute has no prediction yet and is treated as
    occupied, so it is never claimed as savings.
    """
    dataset = load_csv(csv_path, room_id)
    _, test_ds = split_train_test(dataset, train_fraction)
    preds = _model_predictions(test_ds, out_dir, room_id, ecfg.control_window)
    governing = np.concatenate(([1.0], preds))
    series = simulate_rbc(test_ds, ecfg)
    saved, _ = estimate_savings(series, governing, ecfg)
    return room_id, series.total, saved


# ---------------------------------------------------------------------------
# argument handling


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {text!r}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occucast",
        description="Occupancy forecasting and HVAC savings simulation on room telemetry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; flags override it")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=_seed, help="PRNG seed")
    common.add_argument("--jobs", type=_positive_int, help="parallel (room, window) workers")

    gen = sub.add_parser("gen", parents=[common], help="generate synthetic telemetry CSVs")
    gen.add_argument("--rooms", type=_positive_int, help="number of rooms")
    gen.add_argument("--weeks", type=_positive_int, help="span per room")
    gen.add_argument("--start", help="ISO start timestamp (minute resolution)")
    gen.add_argument("--flip-noise", dest="flip_noise", type=float, help="per-minute occupancy glitch probability")
    gen.add_argument(
        "--weekend-occupancy", dest="weekend_occupancy", type=float, help="probability of a weekend visit"
    )

    def add_data_args(p, windows_flag=True):
        p.add_argument("--data", type=Path, help="directory of <room>.csv files")
        p.add_argument("--rooms", dest="room_list", help="comma-separated room ids (default: all CSVs)")
        p.add_argument("--train-fraction", dest="train_fraction", type=float, help="chronological split point")
        if windows_flag:
            p.add_argument("--windows", help=f"comma-separated window minutes (subset of {DEFAULT_SWEEP})")

    tr = sub.add_parser("train", parents=[common], help="train per-(room, window) models")
    add_data_args(tr)
    tr.add_argument("--hidden", type=_positive_int, help="hidden state size")
    tr.add_argument("--epochs", type=_positive_int, help="training epochs")
    tr.add_argument("--lr", dest="learning_rate", type=float, help="Adam learning rate")
    tr.add_argument("--segment", dest="tbptt_segment", type=_positive_int, help="steps between gradient updates")
    tr.add_argument(
        "--occupancy-feature",
        dest="occupancy_feature",
        action="store_const",
        const=True,
        help="append lagged occupancy to the inputs",
    )

    ev = sub.add_parser("evaluate", parents=[common], help="score models over the window sweep")
    add_data_args(ev)
    ev.add_argument("--oracle", action="store_const", const=True, help="score perfect predictions instead of models")
    ev.add_argument("--plot", action="store_const", const=True, help="also write metric-vs-window charts")

    sv = sub.add_parser("savings", parents=[common], help="energy savings report vs the RBC baseline")
    add_data_args(sv, windows_flag=False)
    sv.add_argument("--window", type=_positive_int, help="control prediction window (minutes)")
    sv.add_argument("--threshold", type=float, help="predicted-unoccupied probability threshold")
    sv.add_argument(
        "--replay-table2",
        dest="replay",
        type=Path,
        help="CSV of room,actual_energy,saved_energy rows; report their percentages directly",
    )

    return parser


_DEFAULTS: dict[str, dict] = {
    "gen": {
        "out": Path("data"),
        "seed": 0,
        "jobs": 1,
        "rooms": 5,
        "weeks": 8,
        "start": "2021-09-06T00:00",
        "flip_noise": 0.001,
        "weekend_occupancy": 0.2,
    },
    "train": {
        "out": Path("out"),
        "seed": 0,
        "jobs": 1,
        "data": None,
        "room_list": None,
        "train_fraction": 0.7,
        "windows": "30",
        "hidden": 256,
        "epochs": 10,
        "learning_rate": 0.001,
        "tbptt_segment": 100,
        "occupancy_feature": False,
    },
    "evaluate": {
        "out": Path("out"),
        "seed": 0,
        "jobs": 1,
        "data": None,
        "room_list": None,
        "train_fraction": 0.7,
        "windows": DEFAULT_SWEEP,
        "oracle": False,
        "plot": False,
    },
    "savings": {
        "out": Path("out"),
        "seed": 0,
        "jobs": 1,
        "data": None,
        "room_list": None,
        "train_fraction": 0.7,
        "window": 30,
        "threshold": 0.5,
        "replay": None,
    },
}


def _resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config file, and explicit flags."""
    options = dict(_DEFAULTS[args.command])
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(loaded) - set(options)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        for key, value in loaded.items():
            if key in ("out", "data", "replay") and value is not None:
                value = Path(value)
            options[key] = value
    for key in options:
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    return options


def _parse_windows(text: str) -> list[int]:
    try:
        windows = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"bad window list {text!r}") from None
    if not windows:
        raise ConfigError("window list is empty")
    bad = [w for w in windows if w not in SUPPORTED_WINDOWS]
    if bad:
        raise ConfigError(f"unsupported windows {bad}; supported sweep is {SUPPORTED_WINDOWS}")
    return sorted(set(windows))


def _discover_rooms(options: dict) -> tuple[Path, list[str]]:
    data_dir = options["data"]
    if data_dir is None:
        raise ConfigError("--data is required")
    data_dir = Path(data_dir)
    if options["room_list"]:
        rooms = [r.strip() for r in str(options["room_list"]).split(",") if r.strip()]
    else:
        if not data_dir.is_dir():
            raise ConfigError(f"data directory {data_dir} does not exist")
        rooms = sorted(p.stem for p in data_dir.glob("*.csv"))
        if not rooms:
            raise ConfigError(f"no CSV files found in {data_dir}")
    for room in rooms:
        csv_path = data_dir / f"{room}.csv"
        if not csv_path.is_file():
            raise FileNotFoundError(f"missing input file {csv_path}")
    return data_dir, rooms


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(options: dict) -> int:
    try:
        start = datetime.fromisoformat(str(options["start"]))
    except ValueError:
        raise ConfigError(f"bad --start timestamp {options['start']!r}") from None
    if int(options["weeks"]) < 1 or int(options["rooms"]) < 1:
        raise ConfigError("--weeks and --rooms must be positive")
    cfg = GenConfig(
        seed=int(options["seed"]),
        start=start,
        end=start + timedelta(weeks=int(options["weeks"])),
        rooms=int(options["rooms"]),
        flip_noise=float(options["flip_noise"]),
        weekend_occupancy=float(options["weekend_occupancy"]),
    )
    out_dir = Path(options["out"])
    datasets = generate(cfg, out_dir)
    for room_id in datasets:
        print(f"wrote {out_dir / (room_id + '.csv')}")
    return 0


def _train_job(job: tuple) -> tuple[str, int, float]:
    csv_path, room_id, out_dir, cfg, fraction, include_occupancy = job
    losses = train_room_model(csv_path, room_id, out_dir, cfg, fraction, include_occupancy)
    return room_id, cfg.window, losses[-1]


def cmd_train(options: dict) -> int:
    data_dir, rooms = _discover_rooms(options)
    windows = _parse_windows(options["windows"])
    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for room_id in rooms:
        for window in windows:
            cfg = TrainConfig(
                hidden=int(options["hidden"]),
                epochs=int(options["epochs"]),
                learning_rate=float(options["learning_rate"]),
                tbptt_segment=int(options["tbptt_segment"]),
                window=window,
                seed=int(options["seed"]),
            )
            jobs.append(
                (data_dir / f"{room_id}.csv", room_id, out_dir, cfg,
                 float(options["train_fraction"]), bool(options["occupancy_feature"]))
            )
    workers = int(options["jobs"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = [_train_job(job) for job in jobs]
    for room_id, window, final_loss in results:
        print(f"trained {room_id} w{window}: final mean loss {final_loss:.6f}")
    return 0


def _write_plots(reports: list[MetricsReport], out_dir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rooms = sorted({r.room_id for r in reports})
    for metric in ("bce", "auroc", "avg_precision"):
        fig, ax = plt.subplots(figsize=(6, 4))
        for room in rooms:
            pts = [(r.window_minutes, getattr(r, metric)) for r in reports if r.room_id == room]
            pts = [(w, v) for w, v in sorted(pts) if v is not None]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=room)
        ax.set_xscale("log")
        ax.set_xlabel("prediction window (minutes)")
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out_dir / f"metrics_{metric}.png")
        plt.close(fig)
        print(f"wrote {out_dir / f'metrics_{metric}.png'}")


def cmd_evaluate(options: dict) -> int:
    data_dir, rooms = _discover_rooms(options)
    windows = _parse_windows(options["windows"])
    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[MetricsReport] = []
    for room_id in rooms:
        reports.extend(
            evaluate_room(
                data_dir / f"{room_id}.csv",
                room_id,
                out_dir,
                windows,
                float(options["train_fraction"]),
                oracle=bool(options["oracle"]),
            )
        )
    atomic_write_text(out_dir / "metrics.csv", format_metrics_csv(reports))
    print(f"wrote {out_dir / 'metrics.csv'} ({len(reports)} rows)")
    if options["plot"]:
        _write_plots(reports, out_dir)
    return 0


def _read_replay_rows(path: Path) -> list[tuple[str, float, float]]:
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("room,"):
        raise ConfigError(f"{path}: expected header 'room,actual_energy,saved_energy'")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ConfigError(f"{path}: bad row {ln!r}")
        rows.append((parts[0], float(parts[1]), float(parts[2])))
    return rows


def cmd_savings(options: dict) -> int:
    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if options["replay"] is not None:
        results = _read_replay_rows(Path(options["replay"]))
    else:
        data_dir, rooms = _discover_rooms(options)
        ecfg = EnergyConfig(
            unoccupied_threshold=float(options["threshold"]),
            control_window=int(options["window"]),
        )
        results = [
            savings_for_room(data_dir / f"{room_id}.csv", room_id, out_dir, ecfg,
                             float(options["train_fraction"]))
            for room_id in rooms
        ]
    report = savings_report(results)
    text = format_savings_csv(report)
    atomic_write_text(out_dir / "savings.csv", text)
    print(text, end="")
    print(f"wrote {out_dir / 'savings.csv'}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "savings": cmd_savings,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        options = _resolve_options(args)
        return _COMMANDS[args.command](options)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
