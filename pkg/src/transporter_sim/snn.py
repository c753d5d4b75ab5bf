"""Leaky integrate-and-fire network for lifetime regression, trained with
backpropagation through time and a fast-sigmoid surrogate gradient.

Architecture: one input node driving a hidden LIF layer through per-neuron
weights, and a non-spiking leaky integrator output node reading the hidden
spikes. The prediction is a sigmoid map of the final output membrane onto the
lifetime range. The backward pass is written out by hand and differentiates
every path of the unrolled recurrence, including the membrane reset; with the
spike nonlinearity replaced by its smooth surrogate the analytic gradients
match finite differences (see smooth=True), which is how they are verified.

All randomness is seed-controlled; a fixed seed reproduces trained weights
bit for bit on a fixed thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .spike_train import SpikeTrain

__all__ = [
    "LifParams",
    "SnnModel",
    "TrainConfig",
    "TrainingDiverged",
    "lif_step",
    "surrogate_grad",
    "forward",
    "forward_batch",
    "init_model",
    "train_bptt",
    "evaluate_mape",
    "save_model",
    "load_model",
]

_MODEL_FORMAT = "snn-model"
_MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class LifParams:
    """Discrete-time LIF neuron: per-step decay, threshold, reset rule."""

    beta: float = 0.9
    v_thre: float = 1.0
    reset: str = "to_zero"  # or "subtract"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0,1), got {self.beta}")
        if self.v_thre <= 0:
            raise ValueError(f"v_thre must be > 0, got {self.v_thre}")
        if self.reset not in ("to_zero", "subtract"):
            raise ValueError(f"unknown reset rule {self.reset!r}")


@dataclass
class SnnModel:
    """Weights plus neuron parameters for the 1 -> n_hidden -> 1 network."""

    w_in: np.ndarray
    w_out: np.ndarray
    b_out: float
    lif: LifParams = field(default_factory=LifParams)
    n_steps: int = 128
    out_beta: float = 0.99  # decay of the non-spiking output integrator
    output_range: tuple[float, float] = (5.0, 20.0)

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=np.float64)
        self.w_out = np.asarray(self.w_out, dtype=np.float64)
        if self.w_in.ndim != 1 or self.w_in.shape != self.w_out.shape:
            raise ValueError("w_in and w_out must be 1-D and the same shape")
        if not (np.isfinite(self.w_in).all() and np.isfinite(self.w_out).all()):
            raise ValueError("weights must be finite")
        if not 0.0 < self.out_beta <= 1.0:
            raise ValueError("out_beta must be in (0,1]")
        lo, hi = self.output_range
        if not lo < hi:
            raise ValueError("output_range must satisfy lo < hi")

    @property
    def n_hidden(self) -> int:
        return int(self.w_in.size)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 200
    surrogate_slope: float = 25.0
    seed: int = 0
    loss: str = "mse_normalized"
    patience: int = 20  # early-stopping patience on validation MAPE
    lr_decay: float = 0.99  # per-epoch multiplicative learning-rate decay
    dtype: str = "float32"  # training arithmetic; weights are kept float64

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "surrogate_slope", "lr_decay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.loss != "mse_normalized":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


def lif_step(v: np.ndarray, input_current: np.ndarray, p: LifParams):
    """One membrane update: u = beta*v + I, spike where u >= threshold, reset.

    Returns (v_next, spikes) as float arrays of the input shape.
    """
    v = np.asarray(v, dtype=float)
    i = np.asarray(input_current, dtype=float)
    if v.shape != i.shape:
        raise ValueError(f"shape mismatch: v {v.shape} vs input {i.shape}")
    u = p.beta * v + i
    spikes = (u >= p.v_thre).astype(float)
    if p.reset == "to_zero":
        v_next = u * (1.0 - spikes)
    else:
        v_next = u - p.v_thre * spikes
    return v_next, spikes


def surrogate_grad(u_minus_thre, slope: float):
    """Fast-sigmoid surrogate derivative: 1 / (slope*|u - thre| + 1)^2."""
    x = np.asarray(u_minus_thre, dtype=float)
    out = 1.0 / (slope * np.abs(x) + 1.0) ** 2
    return out if out.ndim else float(out)


def _smooth_spike(x: np.ndarray, slope: float) -> np.ndarray:
    # Antiderivative of the surrogate, shifted to 0.5 at threshold. Used only
    # to build the differentiable graph the gradient check runs on.
    return 0.5 + x / (1.0 + slope * np.abs(x))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _run_batch(
    w_in: np.ndarray,
    w_out: np.ndarray,
    b_out: float,
    lif: LifParams,
    out_beta: float,
    X: np.ndarray,
    y_norm: np.ndarray | None,
    slope: float,
    smooth: bool = False,
    want_grads: bool = False,
):
    """Shared forward/backward over a (B, T) batch of binary inputs.

    Returns (logits, loss, grads); loss/grads are None unless requested.
    Gradients differentiate the full unrolled graph; in smooth mode the spike
    is the surrogate's antiderivative so the graph is exactly differentiable.
    """
    dtype = w_in.dtype
    B, T = X.shape
    H = w_in.size
    beta = dtype.type(lif.beta)
    theta = dtype.type(lif.v_thre)
    lam = dtype.type(out_beta)

    Xd = np.ascontiguousarray(X, dtype=dtype)
    drive = Xd[:, :, None] * w_in  # (B, T, H), input current per step
    v = np.zeros((B, H), dtype=dtype)
    o = np.zeros(B, dtype=dtype)
    if want_grads:
        U = np.empty((T, B, H), dtype=dtype)
        S = np.empty((T, B, H), dtype=dtype)

    for t in range(T):
        u = beta * v + drive[:, t]
        if smooth:
            s = _smooth_spike(u - theta, slope)
        else:
            s = (u >= theta).astype(dtype)
        if lif.reset == "to_zero":
            v = u * (1.0 - s)
        else:
            v = u - theta * s
        o = lam * o + s @ w_out + dtype.type(b_out)
        if want_grads:
            U[t] = u
            S[t] = s

    logits = o
    if y_norm is None:
        return logits, None, None

    q = _sigmoid(logits.astype(np.float64)).astype(dtype)
    err = q - y_norm.astype(dtype)
    loss = float(np.mean(err.astype(np.float64) ** 2))
    if not want_grads:
        return logits, loss, None

    # dL/dlogit through the sigmoid output map
    d_o = (2.0 / B) * err * q * (1.0 - q)

    # surrogate derivative at every stored membrane, one vectorized pass
    G = U - theta
    np.abs(G, out=G)
    G *= dtype.type(slope)
    G += dtype.type(1.0)
    np.square(G, out=G)
    np.reciprocal(G, out=G)

    g_win = np.zeros(H, dtype=dtype)
    g_wout = np.zeros(H, dtype=dtype)
    g_bout = dtype.type(0.0)
    d_v = np.zeros((B, H), dtype=dtype)
    for t in range(T - 1, -1, -1):
        u, s = U[t], S[t]
        g_wout += s.T @ d_o
        g_bout += d_o.sum()
        d_s = d_o[:, None] * w_out
        if lif.reset == "to_zero":
            d_s -= d_v * u
            d_u = d_v * (1.0 - s)
        else:
            d_s -= d_v * theta
            d_u = d_v.copy()
        d_u += d_s * G[t]
        d_v = beta * d_u
        g_win += Xd[:, t] @ d_u
        d_o = lam * d_o

    grads = {"w_in": g_win, "w_out": g_wout, "b_out": float(g_bout)}
    return logits, loss, grads


def _predict_from_logits(logits: np.ndarray, output_range) -> np.ndarray:
    lo, hi = output_range
    return lo + (hi - lo) * _sigmoid(np.asarray(logits, dtype=np.float64))


def forward_batch(model: SnnModel, X: np.ndarray) -> np.ndarray:
    """Predict lifetimes (ns) for a (N, n_steps) array of binary trains."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != model.n_steps:
        raise ValueError(
            f"input must be (N, {model.n_steps}), got {X.shape}"
        )
    logits, _, _ = _run_batch(
        model.w_in,
        model.w_out,
        model.b_out,
        model.lif,
        model.out_beta,
        X.astype(np.float64),
        None,
        slope=25.0,
    )
    return _predict_from_logits(logits, model.output_range)


def forward(model: SnnModel, x) -> float:
    """Predict the lifetime (ns) for one spike train."""
    bits = x.bits if isinstance(x, SpikeTrain) else np.asarray(x)
    if bits.ndim != 1 or bits.size != model.n_steps:
        raise ValueError(
            f"spike train length {bits.size} != model n_steps {model.n_steps}"
        )
    return float(forward_batch(model, bits[None, :])[0])


def init_model(
    n_hidden: int = 512,
    n_steps: int = 128,
    lif: LifParams | None = None,
    out_beta: float = 0.99,
    output_range: tuple[float, float] = (5.0, 20.0),
    seed: int = 0,
) -> SnnModel:
    """Seed-controlled init: weights uniform in +-1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-1.0, 1.0, size=n_hidden)  # fan_in = 1
    bound = 1.0 / np.sqrt(n_hidden)
    w_out = rng.uniform(-bound, bound, size=n_hidden)
    return SnnModel(
        w_in=w_in,
        w_out=w_out,
        b_out=0.0,
        lif=lif or LifParams(),
        n_steps=n_steps,
        out_beta=out_beta,
        output_range=output_range,
    )


def evaluate_mape(model: SnnModel, test_set) -> float:
    """Mean absolute percentage error over (X, y) in percent."""
    X, y = _as_arrays(test_set, model.n_steps)
    if len(y) == 0:
        raise ValueError("test set is empty")
    if np.any(y <= 0):
        raise ValueError("true lifetimes must be > 0 for MAPE")
    preds = _eval_in_chunks(model, X)
    return float(np.mean(np.abs(preds - y) / y) * 100.0)


def _eval_in_chunks(model: SnnModel, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
    parts = [forward_batch(model, X[i : i + chunk]) for i in range(0, len(X), chunk)]
    return np.concatenate(parts) if parts else np.empty(0)


def _as_arrays(dataset, n_steps: int):
    """Accept (X, y) arrays or a sequence of objects with .spikes/.lifetime."""
    if isinstance(dataset, tuple) and len(dataset) == 2:
        X, y = dataset
        X = np.asarray(X)
        y = np.asarray(y, dtype=np.float64)
    else:
        X = np.stack([np.asarray(s.spikes.bits if isinstance(s.spikes, SpikeTrain) else s.spikes) for s in dataset])
        y = np.array([s.lifetime for s in dataset], dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_steps:
        raise ValueError(f"dataset spike trains must be (N, {n_steps}), got {X.shape}")
    return X, y


def train_bptt(
    train_set,
    val_set,
    cfg: TrainConfig,
    model: SnnModel | None = None,
    epoch_callback: Callable[[dict], None] | None = None,
) -> SnnModel:
    """Minibatch Adam over the unrolled recurrence; returns the weights with
    the best validation MAPE seen.

    Deterministic given cfg.seed (init, shuffling, and update order are all
    derived from it). Raises TrainingDiverged on a non-finite loss.
    """
    if model is None:
        model = init_model(seed=cfg.seed)
    dtype = np.dtype(cfg.dtype)
    Xtr, ytr = _as_arrays(train_set, model.n_steps)
    Xva, yva = _as_arrays(val_set, model.n_steps)
    if len(ytr) == 0 or len(yva) == 0:
        raise ValueError("train and validation sets must be non-empty")
    lo, hi = model.output_range
    ytr_norm = ((ytr - lo) / (hi - lo)).astype(dtype)
    Xtr = Xtr.astype(dtype)

    rng = np.random.default_rng(cfg.seed)
    params = {
        "w_in": model.w_in.astype(dtype),
        "w_out": model.w_out.astype(dtype),
        "b_out": np.array([model.b_out], dtype=dtype),
    }
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    adam_t = 0

    def current_model() -> SnnModel:
        return SnnModel(
            w_in=params["w_in"].astype(np.float64),
            w_out=params["w_out"].astype(np.float64),
            b_out=float(params["b_out"][0]),
            lif=model.lif,
            n_steps=model.n_steps,
            out_beta=model.out_beta,
            output_range=model.output_range,
        )

    best = current_model()
    best_mape = evaluate_mape(best, (Xva, yva))
    best_epoch = 0
    since_best = 0

    n = len(ytr)
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.learning_rate * cfg.lr_decay ** (epoch - 1)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, loss, grads = _run_batch(
                params["w_in"],
                params["w_out"],
                float(params["b_out"][0]),
                model.lif,
                model.out_beta,
                Xtr[idx],
                ytr_norm[idx],
                slope=cfg.surrogate_slope,
                want_grads=True,
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch start {start}"
                )
            epoch_loss += loss * len(idx)
            adam_t += 1
            gvals = {
                "w_in": grads["w_in"],
                "w_out": grads["w_out"],
                "b_out": np.array([grads["b_out"]], dtype=dtype),
            }
            for k in params:
                g = gvals[k]
                adam_m[k] = b1 * adam_m[k] + (1 - b1) * g
                adam_v[k] = b2 * adam_v[k] + (1 - b2) * g * g
                mhat = adam_m[k] / (1 - b1**adam_t)
                vhat = adam_v[k] / (1 - b2**adam_t)
                params[k] = params[k] - dtype.type(lr) * mhat / (
                    np.sqrt(vhat) + dtype.type(eps)
                )

        cand = current_model()
        val_mape = evaluate_mape(cand, (Xva, yva))
        train_loss = epoch_loss / n
        if val_mape < best_mape:
            best, best_mape, best_epoch = cand, val_mape, epoch
            since_best = 0
        else:
            since_best += 1
        if epoch_callback is not None:
            epoch_callback(
                {
                    "epoch": epoch,
                    "train_loss": train_loss,
                    "val_mape": val_mape,
                    "best_val_mape": best_mape,
                    "best_epoch": best_epoch,
                    "learning_rate": lr,
                }
            )
        if since_best >= cfg.patience:
            break
    return best


def save_model(model: SnnModel, path) -> None:
    """Versioned text format: JSON header, then one decimal weight per line
    (w_in block, w_out block, b_out)."""
    header = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "n_hidden": model.n_hidden,
        "n_steps": model.n_steps,
        "beta": model.lif.beta,
        "v_thre": model.lif.v_thre,
        "reset": model.lif.reset,
        "out_beta": model.out_beta,
        "output_range": list(model.output_range),
    }
    lines = [json.dumps(header)]
    lines += [repr(float(w)) for w in model.w_in]
    lines += [repr(float(w)) for w in model.w_out]
    lines.append(repr(float(model.b_out)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> SnnModel:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty model file")
    header = json.loads(lines[0])
    if header.get("format") != _MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    if header.get("version") != _MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {header.get('version')}")
    h = int(header["n_hidden"])
    expected = 1 + 2 * h + 1
    if len(lines) < expected:
        raise ValueError(
            f"{path}: truncated model file, expected {expected} lines, got {len(lines)}"
        )
    vals = [float(s) for s in lines[1 : expected]]
    return SnnModel(
        w_in=np.array(vals[:h]),
        w_out=np.array(vals[h : 2 * h]),
        b_out=vals[2 * h],
        lif=LifParams(
            beta=header["beta"], v_thre=header["v_thre"], reset=header["reset"]
        ),
        n_steps=int(header["n_steps"]),
        out_beta=float(header["out_beta"]),
        output_range=tuple(header["output_range"]),
    )
