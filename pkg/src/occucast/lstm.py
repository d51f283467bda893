"""From-scratch LSTM for next-window occupancy probability.

Single recurrent layer with forget/input/output gates and a sigmoid output
head, trained by truncated backpropagation through time: the forward pass
runs chronologically over one long series, and every ``tbptt_segment`` steps
the exact segment gradient is computed and applied with Adam. Recurrent state
carries across segment boundaries numerically, but gradient flow is cut there.

The four gate weight matrices are stored stacked row-wise in the order
[forget, input, output, candidate]; per-gate matrices are views into the
stack. Everything runs in float64.
"""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericError, ShapeError, TrainingDivergedError
from .timeseries import SUPPORTED_WINDOWS

PROB_CLAMP = 1e-7


class LstmParams:
    """All trainable tensors of the model.

    w_gates: (4H, H + n_features) stacked gate weights, rows ordered
             [forget, input, output, candidate], each applied to the
             concatenation [h_prev, x].
    b_gates: (4H,) stacked gate biases.
    w_out:   (H,) output-head weights.
    b_out:   (1,) output-head bias.
    """

    __slots__ = ("w_gates", "b_gates", "w_out", "b_out")

    def __init__(self, w_gates, b_gates, w_out, b_out):
        w_gates = np.asarray(w_gates, dtype=np.float64)
        b_gates = np.asarray(b_gates, dtype=np.float64)
        w_out = np.asarray(w_out, dtype=np.float64)
        b_out = np.asarray(b_out, dtype=np.float64).reshape(1)
        if w_gates.ndim != 2 or w_gates.shape[0] % 4 != 0:
            raise ShapeError(f"w_gates must be (4H, H+n), got {w_gates.shape}")
        hidden = w_gates.shape[0] // 4
        if w_gates.shape[1] <= hidden:
            raise ShapeError(f"w_gates must be (4H, H+n) with n >= 1, got {w_gates.shape}")
        if b_gates.shape != (4 * hidden,) or w_out.shape != (hidden,):
            raise ShapeError("parameter shapes are inconsistent")
        for arr in (w_gates, b_gates, w_out, b_out):
            if not np.isfinite(arr).all():
                raise NumericError("parameters must be finite")
        self.w_gates = w_gates
        self.b_gates = b_gates
        self.w_out = w_out
        self.b_out = b_out

    @property
    def hidden_size(self) -> int:
        return self.w_gates.shape[0] // 4

    @property
    def n_features(self) -> int:
        return self.w_gates.shape[1] - self.hidden_size

    # per-gate views into the stacked tensors
    @property
    def w_forget(self):
        return self.w_gates[: self.hidden_size]

    @property
    def w_input(self):
        return self.w_gates[self.hidden_size : 2 * self.hidden_size]

    @property
    def w_output(self):
        return self.w_gates[2 * self.hidden_size : 3 * self.hidden_size]

    @property
    def w_candidate(self):
        return self.w_gates[3 * self.hidden_size :]

    @property
    def b_forget(self):
        return self.b_gates[: self.hidden_size]

    @property
    def b_input(self):
        return self.b_gates[self.hidden_size : 2 * self.hidden_size]

    @property
    def b_output(self):
        return self.b_gates[2 * self.hidden_size : 3 * self.hidden_size]

    @property
    def b_candidate(self):
        return self.b_gates[3 * self.hidden_size :]

    def tensors(self) -> dict[str, np.ndarray]:
        """Named trainable tensors, in a fixed order."""
        return {
            "w_gates": self.w_gates,
            "b_gates": self.b_gates,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "LstmParams":
        return cls(tensors["w_gates"], tensors["b_gates"], tensors["w_out"], tensors["b_out"])

    def copy(self) -> "LstmParams":
        return LstmParams.from_tensors({k: a.copy() for k, a in self.tensors().items()})


def init_params(hidden_size: int, n_features: int, rng: np.random.Generator) -> LstmParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases."""
    if hidden_size < 1 or n_features < 1:
        raise ConfigError("hidden_size and n_features must be >= 1")
    bound = 1.0 / math.sqrt(hidden_size)
    return LstmParams(
        rng.uniform(-bound, bound, (4 * hidden_size, hidden_size + n_features)),
        np.zeros(4 * hidden_size),
        rng.uniform(-bound, bound, hidden_size),
        np.zeros(1),
    )


class LstmState(NamedTuple):
    """Recurrent state after a step: hidden output h and cell memory."""

    hidden: np.ndarray
    cell: np.ndarray


def zero_state(hidden_size: int) -> LstmState:
    return LstmState(np.zeros(hidden_size), np.zeros(hidden_size))


class StepCache(NamedTuple):
    """Everything the backward pass needs from one forward step."""

    joint: np.ndarray  # [h_prev, x]
    gates: np.ndarray  # activated [forget, input, output, candidate]
    cell_prev: np.ndarray
    cell: np.ndarray
    cell_tanh: np.ndarray
    hidden: np.ndarray

    @property
    def hidden_prev(self):
        return self.joint[: self.hidden.size]

    @property
    def x(self):
        return self.joint[self.hidden.size :]

    @property
    def forget_gate(self):
        return self.gates[: self.hidden.size]

    @property
    def input_gate(self):
        return self.gates[self.hidden.size : 2 * self.hidden.size]

    @property
    def output_gate(self):
        return self.gates[2 * self.hidden.size : 3 * self.hidden.size]

    @property
    def candidate(self):
        return self.gates[3 * self.hidden.size :]


def lstm_step(params: LstmParams, state: LstmState, x) -> tuple[LstmState, StepCache]:
    """One recurrence step.

    f = sigmoid(Wf [h, x] + bf), i, o likewise; cand = tanh(Wc [h, x] + bc);
    cell = f * cell_prev + i * cand; h = o * tanh(cell).
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise NumericError("non-finite input vector")
    hidden_size = params.hidden_size
    if x.shape != (params.n_features,):
        raise ShapeError(f"input has shape {x.shape}, expected ({params.n_features},)")
    joint = np.concatenate((state.hidden, x))
    pre = params.w_gates @ joint
    pre += params.b_gates
    gates = np.empty_like(pre)
    expit(pre[: 3 * hidden_size], out=gates[: 3 * hidden_size])
    np.tanh(pre[3 * hidden_size :], out=gates[3 * hidden_size :])
    f = gates[:hidden_size]
    i = gates[hidden_size : 2 * hidden_size]
    o = gates[2 * hidden_size : 3 * hidden_size]
    cand = gates[3 * hidden_size :]
    cell = f * state.cell + i * cand
    cell_tanh = np.tanh(cell)
    hidden = o * cell_tanh
    cache = StepCache(joint, gates, state.cell, cell, cell_tanh, hidden)
    return LstmState(hidden, cell), cache


def predict_head(params: LstmParams, hidden) -> float:
    """Occupancy probability from the hidden state: sigmoid(w . h + b)."""
    return float(expit(params.w_out @ np.asarray(hidden) + params.b_out[0]))


def bce_loss(yhat: float, y) -> float:
    """Binary cross-entropy of one prediction, clamped away from {0, 1}."""
    p = min(max(yhat, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -(math.log(p) if y else math.log1p(-p))


def backward_segment(
    params: LstmParams,
    caches: Sequence[StepCache],
    targets,
    preds,
) -> dict[str, np.ndarray]:
    """Exact gradients of the mean per-step BCE over one forward segment.

    Gradient flow stops at the oldest step (incoming dh = dcell = 0), which
    is what makes the per-segment updates *truncated* BPTT.
    """
    n_steps = len(caches)
    targets = np.asarray(targets, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if targets.shape != (n_steps,) or preds.shape != (n_steps,):
        raise ShapeError(
            f"{n_steps} caches but {targets.shape} targets / {preds.shape} predictions"
        )
    grads = {name: np.zeros_like(arr) for name, arr in params.tensors().items()}
    if n_steps == 0:
        return grads

    hidden_size = params.hidden_size
    # mean loss over the segment: d loss / d logit_t = (yhat_t - y_t) / n
    dlogit = (preds - targets) / n_steps
    w_out = params.w_out
    w_gates_hT = np.ascontiguousarray(params.w_gates[:, :hidden_size].T)

    d_pre = np.empty((n_steps, 4 * hidden_size))
    dh_carry = np.zeros(hidden_size)
    dc_carry = np.zeros(hidden_size)
    for t in range(n_steps - 1, -1, -1):
        c = caches[t]
        gates = c.gates
        f = gates[:hidden_size]
        i = gates[hidden_size : 2 * hidden_size]
        o = gates[2 * hidden_size : 3 * hidden_size]
        cand = gates[3 * hidden_size :]
        dh = dlogit[t] * w_out + dh_carry
        do = dh * c.cell_tanh
        dc = dc_carry + dh * o * (1.0 - c.cell_tanh * c.cell_tanh)
        row = d_pre[t]
        np.multiply(dc * c.cell_prev, f * (1.0 - f), out=row[:hidden_size])
        np.multiply(dc * cand, i * (1.0 - i), out=row[hidden_size : 2 * hidden_size])
        np.multiply(do, o * (1.0 - o), out=row[2 * hidden_size : 3 * hidden_size])
        np.multiply(dc * i, 1.0 - cand * cand, out=row[3 * hidden_size :])
        dc_carry = dc * f
        dh_carry = w_gates_hT @ row

    joint = np.array([c.joint for c in caches])
    hidden = np.array([c.hidden for c in caches])
    grads["w_gates"] = d_pre.T @ joint
    grads["b_gates"] = d_pre.sum(axis=0)
    grads["w_out"] = dlogit @ hidden
    grads["b_out"] = np.array([dlogit.sum()])
    return grads


@dataclass
class AdamState:
    """First/second-moment accumulators per parameter tensor plus step count."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: LstmParams, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(a) for k, a in params.tensors().items()},
        v={k: np.zeros_like(a) for k, a in params.tensors().items()},
        step=0,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_update(
    params: LstmParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[LstmParams, AdamState]:
    """One bias-corrected Adam step; returns fresh params and state."""
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_tensors = {}
    new_m = {}
    new_v = {}
    for name, theta in params.tensors().items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}, expected {theta.shape}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        new_tensors[name] = theta - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return (
        LstmParams.from_tensors(new_tensors),
        AdamState(new_m, new_v, t, state.beta1, state.beta2, state.eps),
    )


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the experiment setup."""

    hidden: int = 256
    epochs: int = 10
    learning_rate: float = 0.001
    tbptt_segment: int = 100
    window: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.epochs < 1 or self.tbptt_segment < 1:
            raise ConfigError("hidden, epochs, and tbptt_segment must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.window not in SUPPORTED_WINDOWS:
            raise ConfigError(
                f"window {self.window} not in supported sweep {SUPPORTED_WINDOWS}"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


def train(features, targets, cfg: TrainConfig) -> tuple[LstmParams, list[float]]:
    """Fit the model on one chronological series.

    ``features`` is the normalized (N, n_features) matrix (or a FeatureMatrix),
    ``targets`` the aligned windowed binary targets. Returns the trained
    parameters and the per-epoch mean loss log. Fully deterministic for a
    fixed ``cfg.seed``.
    """
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError(f"features {X.shape} and targets {y.shape} do not align")
    if X.shape[0] == 0:
        raise ShapeError("training series is empty")
    if not np.isfinite(X).all():
        raise NumericError("training features contain non-finite values")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ShapeError("targets must be binary")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.hidden, X.shape[1], rng)
    adam = init_adam(params)
    n = X.shape[0]
    losses: list[float] = []
    global_step = 0
    for _ in range(cfg.epochs):
        state = zero_state(cfg.hidden)
        epoch_loss = 0.0
        seg_caches: list[StepCache] = []
        seg_preds: list[float] = []
        seg_start = 0
        for t in range(n):
            state, cache = lstm_step(params, state, X[t])
            p = predict_head(params, cache.hidden)
            if not math.isfinite(p):
                raise TrainingDivergedError(global_step, p)
            loss = bce_loss(p, y[t])
            if not math.isfinite(loss):
                raise TrainingDivergedError(global_step, loss)
            epoch_loss += loss
            seg_caches.append(cache)
            seg_preds.append(p)
            global_step += 1
            if len(seg_caches) == cfg.tbptt_segment or t == n - 1:
                grads = backward_segment(params, seg_caches, y[seg_start : t + 1], seg_preds)
                params, adam = adam_update(params, grads, adam, cfg.learning_rate)
                seg_caches = []
                seg_preds = []
                seg_start = t + 1
        losses.append(epoch_loss / n)
    return params, losses


def predict_series(
    params: LstmParams,
    features,
    initial_state: LstmState | None = None,
    return_state: bool = False,
):
    """One chronological inference pass; one probability per time step."""
    X = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_features:
        raise ShapeError(
            f"features {X.shape} do not match model input size {params.n_features}"
        )
    state = zero_state(params.hidden_size) if initial_state is None else initial_state
    out = np.empty(X.shape[0])
    for t in range(X.shape[0]):
        state, cache = lstm_step(params, state, X[t])
        out[t] = predict_head(params, cache.hidden)
    if return_state:
        return out, state
    return out


@dataclass(frozen=True)
class SavedModel:
    """A trained model plus the metadata needed to run it on raw telemetry."""

    params: LstmParams
    feature_names: tuple[str, ...]
    norm_stats_file: str
    config: TrainConfig


MODEL_FORMAT = "occucast-lstm-v1"


def _write_npz_deterministic(path: Path, arrays: dict[str, np.ndarray]) -> None:
    # np.savez embeds file mtimes in the zip; write entries with a fixed
    # timestamp instead so identical models are byte-identical on disk.
    members = []
    for name, arr in arrays.items():
        buf = io.BytesIO()
        np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
        members.append((name + ".npy", buf.getvalue()))
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            with zipfile.ZipFile(fh, "w", zipfile.ZIP_STORED) as zf:
                for name, data in members:
                    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                    zf.writestr(info, data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(
    path: str | Path,
    params: LstmParams,
    feature_names: Sequence[str],
    config: TrainConfig,
    norm_stats_file: str = "",
) -> None:
    """Write a self-describing model container (loadable with np.load)."""
    if len(feature_names) != params.n_features:
        raise ShapeError(
            f"{len(feature_names)} feature names for {params.n_features} model inputs"
        )
    meta = {
        "format": MODEL_FORMAT,
        "hidden_size": params.hidden_size,
        "n_features": params.n_features,
        "feature_names": list(feature_names),
        "norm_stats_file": norm_stats_file,
        "train_config": asdict(config),
    }
    arrays = dict(params.tensors())
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    _write_npz_deterministic(Path(path), arrays)


def load_model(path: str | Path) -> SavedModel:
    """Read a model container written by :func:`save_model`."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != MODEL_FORMAT:
            raise ConfigError(f"{path}: unrecognized model format {meta.get('format')!r}")
        params = LstmParams(data["w_gates"], data["b_gates"], data["w_out"], data["b_out"])
    return SavedModel(
        params=params,
        feature_names=tuple(meta["feature_names"]),
        norm_stats_file=meta["norm_stats_file"],
        config=TrainConfig(**meta["train_config"]),
    )
