"""Command-line front end.

Every command resolves its full configuration first (config file, flags, the
TRANSPORTER_SEED override), runs a pure function of that resolved config, and
writes a manifest recording the config, tool version, and SHA-256 of every
output file. `rerun` replays a manifest's command from its recorded config,
which must reproduce the outputs bit for bit.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dataset, oracle, ring_encoder, snn
from .photon_sim import DetectionEvent, LaserConfig, SpadModel, gen_periodic_arrivals
from .spike_train import format_spike_train, rotate

PROG = "transporter-sim"
SEED_ENV = "TRANSPORTER_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Bad config file, bad flag combination, or missing input."""


# ---------------------------------------------------------------- config I/O


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _check_keys(cfg: dict, allowed: set[str], where: str) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown config keys: {sorted(unknown)}")


def _resolve_seed(flag_seed: int | None, cfg_seed, default: int = 0) -> int:
    # precedence: explicit --seed flag, then TRANSPORTER_SEED, then config
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from e
    if cfg_seed is not None:
        return int(cfg_seed)
    return default


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(
    out_dir: Path, command: str, config: dict, outputs: list[Path], t0: float, threads: int
) -> Path:
    manifest = {
        "format": "run-manifest",
        "version": 1,
        "command": command,
        "tool_version": __version__,
        "config": config,
        "threads": threads,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "wall_clock_s": round(time.time() - t0, 3),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    # plain decimal formatting, no locale dependence
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _stopper_from_str(s: str) -> int | None:
    if s == "off":
        return None
    if s in ("128", "256"):
        return int(s)
    raise ConfigError(f"stopper must be 128, 256 or off, got {s!r}")


# ---------------------------------------------------------------- gen-dataset

_DATASET_KEYS = {
    "n_train",
    "n_val",
    "n_test",
    "photons_per_sample",
    "background_fraction",
    "lifetime_range",
    "encoder_path",
    "seed",
    "n_bins",
    "laser_period_ns",
    "detector",
}


def _dataset_spec_from_config(cfg: dict) -> dataset.DatasetSpec:
    _check_keys(cfg, _DATASET_KEYS, "dataset config")
    kwargs = dict(cfg)
    det = kwargs.pop("detector", None)
    rate = None
    if det is not None:
        _check_keys(det, {"pdp", "dead_time", "rate"}, "dataset config detector")
        rate = det.pop("rate", None)
        kwargs["detector"] = SpadModel(**det)
    if "lifetime_range" in kwargs:
        kwargs["lifetime_range"] = tuple(kwargs["lifetime_range"])
    if rate is not None:
        kwargs["detector_rate"] = float(rate)
    try:
        return dataset.DatasetSpec(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid dataset config: {e}") from e


def run_gen_dataset(config: dict, out_dir: Path, threads: int = 1) -> list[Path]:
    spec = _dataset_spec_from_config(config)
    outputs = []
    for split in ("train", "val", "test"):
        ds = dataset.generate_split(spec, split, workers=threads)
        path = out_dir / f"{split}.txt"
        dataset.save(ds, path)
        outputs.append(path)
        print(f"wrote {path} ({len(ds)} samples)")
    return outputs


def cmd_gen_dataset(args) -> int:
    cfg = _load_config(args.config)
    cfg["seed"] = _resolve_seed(args.seed, cfg.get("seed"))
    if args.encoder is not None:
        cfg["encoder_path"] = args.encoder
    out_dir = _prep_out_dir(args.out_dir)
    t0 = time.time()
    outputs = run_gen_dataset(cfg, out_dir, threads=args.threads)
    _write_manifest(out_dir, "gen-dataset", cfg, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- ring-demo

_RING_DEMO_KEYS = {
    "source_period_ns",
    "laser_period_ns",
    "n_periods",
    "ring_clock_hz",
    "stopper",
    "readout_clock_hz",
    "n_stages",
}


def run_ring_demo(config: dict, out_dir: Path) -> list[Path]:
    _check_keys(config, _RING_DEMO_KEYS, "ring-demo config")
    laser = LaserConfig(
        period=config["laser_period_ns"], n_periods=config["n_periods"]
    )
    cfg = ring_encoder.EncoderConfig(
        laser=laser,
        n_stages=config["n_stages"],
        ring_clock_hz=config["ring_clock_hz"],
        stopper_threshold=config["stopper"],
    )
    events = gen_periodic_arrivals(config["source_period_ns"], laser, laser.exposure)
    dets = [DetectionEvent(e.t_abs, e.t_abs % laser.period) for e in events]

    rows = []
    state = None
    for tick, t_ns, state in ring_encoder.encode_trace(dets, cfg):
        rows.append(
            (
                tick,
                t_ns,
                state.set_bit_count,
                state.photon_count,
                state.injection_enabled,
                "".join("1" if b else "0" for b in state.bit_array()),
            )
        )
    csv_path = out_dir / "ring_demo.csv"
    _write_csv(
        csv_path,
        ["tick", "time_ns", "set_bit_count", "photon_count", "injection_enabled", "stage_bits"],
        rows,
    )

    if state is None:
        state = ring_encoder.RingState(n_stages=cfg.n_stages)
    train = ring_encoder.readout(state, config["readout_clock_hz"])
    offset = ring_encoder.phase_offset(state, cfg)
    readout_path = out_dir / "ring_readout.txt"
    readout_path.write_text(
        format_spike_train(
            train,
            laser_period_ns=laser.period,
            ring_clock_hz=cfg.ring_clock_hz,
            stopper="off" if cfg.stopper_threshold is None else str(cfg.stopper_threshold),
            photon_count=state.photon_count,
            phase_offset=offset,
        )
    )
    set_idx = np.flatnonzero(train.bits)
    print(f"encoded {state.photon_count} photons over {state.ticks_elapsed} ticks")
    print(f"readout set bits at: {list(map(int, set_idx))}")
    print(f"serial readout takes {train.readout_duration_ns} ns")
    return [csv_path, readout_path]


def cmd_ring_demo(args) -> int:
    config = {
        "source_period_ns": args.source_period,
        "laser_period_ns": args.laser_period,
        "n_periods": args.n_periods,
        "ring_clock_hz": args.freq,
        "stopper": _stopper_from_str(args.stopper),
        "readout_clock_hz": args.readout_clock,
        "n_stages": args.n_stages,
    }
    out_dir = _prep_out_dir(args.out_dir)
    t0 = time.time()
    outputs = run_ring_demo(config, out_dir)
    _write_manifest(out_dir, "ring-demo", config, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- train

_TRAIN_KEYS = {
    "train_path",
    "val_path",
    "learning_rate",
    "batch_size",
    "epochs",
    "patience",
    "lr_decay",
    "surrogate_slope",
    "seed",
    "loss",
    "dtype",
    "n_hidden",
    "beta",
    "v_thre",
    "reset",
    "out_beta",
}


def run_train(config: dict, out_dir: Path) -> list[Path]:
    _check_keys(config, _TRAIN_KEYS, "train config")
    for key in ("train_path", "val_path"):
        if key not in config:
            raise ConfigError(f"train config must set {key}")
        if not Path(config[key]).exists():
            raise ConfigError(f"{key} does not exist: {config[key]}")
    train_ds = dataset.load(config["train_path"])
    val_ds = dataset.load(config["val_path"])

    lif = snn.LifParams(
        beta=config.get("beta", 0.9),
        v_thre=config.get("v_thre", 1.0),
        reset=config.get("reset", "to_zero"),
    )
    lo, hi = train_ds.meta["lifetime_range"]
    model = snn.init_model(
        n_hidden=config.get("n_hidden", 512),
        n_steps=train_ds.meta["n_bins"],
        lif=lif,
        out_beta=config.get("out_beta", 0.99),
        output_range=(lo, hi),
        seed=config["seed"],
    )
    tc_kwargs = {
        k: config[k]
        for k in (
            "learning_rate",
            "batch_size",
            "epochs",
            "patience",
            "lr_decay",
            "surrogate_slope",
            "loss",
            "dtype",
        )
        if k in config
    }
    try:
        train_cfg = snn.TrainConfig(seed=config["seed"], **tc_kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid train config: {e}") from e

    history: list[dict] = []

    def on_epoch(rec: dict) -> None:
        history.append(rec)
        print(
            f"epoch {rec['epoch']:3d}  train_loss {rec['train_loss']:.6f}  "
            f"val_mape {rec['val_mape']:.3f}%  best {rec['best_val_mape']:.3f}% "
            f"(epoch {rec['best_epoch']})",
            flush=True,
        )

    best = snn.train_bptt(
        train_ds.to_arrays(), val_ds.to_arrays(), train_cfg, model=model,
        epoch_callback=on_epoch,
    )

    model_path = out_dir / "model.txt"
    snn.save_model(best, model_path)
    curve_path = out_dir / "training_curve.csv"
    _write_csv(
        curve_path,
        ["epoch", "train_loss", "val_mape", "best_val_mape", "learning_rate"],
        [
            (r["epoch"], r["train_loss"], r["val_mape"], r["best_val_mape"], r["learning_rate"])
            for r in history
        ],
    )
    print(f"wrote {model_path}")
    return [model_path, curve_path]


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    cfg["seed"] = _resolve_seed(args.seed, cfg.get("seed"))
    if args.dataset_dir is not None:
        cfg.setdefault("train_path", str(Path(args.dataset_dir) / "train.txt"))
        cfg.setdefault("val_path", str(Path(args.dataset_dir) / "val.txt"))
    out_dir = _prep_out_dir(args.out_dir)
    t0 = time.time()
    outputs = run_train(cfg, out_dir)
    _write_manifest(out_dir, "train", cfg, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- eval

_EVAL_KEYS = {"model_path", "dataset_path"}


def run_eval(config: dict, out_dir: Path) -> list[Path]:
    _check_keys(config, _EVAL_KEYS, "eval config")
    for key in ("model_path", "dataset_path"):
        if key not in config:
            raise ConfigError(f"eval config must set {key}")
        if not Path(config[key]).exists():
            raise ConfigError(f"{key} does not exist: {config[key]}")
    model = snn.load_model(config["model_path"])
    ds = dataset.load(config["dataset_path"])
    X, y = ds.to_arrays()
    if X.shape[1] != model.n_steps:
        raise ConfigError(
            f"dataset trains have {X.shape[1]} steps but model expects {model.n_steps}"
        )
    preds = snn.forward_batch(model, X)
    mape = float(np.mean(np.abs(preds - y) / y) * 100.0)
    path = out_dir / "predictions.csv"
    _write_csv(path, ["true_ns", "predicted_ns"], zip(y.tolist(), preds.tolist()))
    print(f"MAPE {mape:.4f}% over {len(y)} samples")
    print(f"wrote {path}")
    return [path]


def cmd_eval(args) -> int:
    config = {"model_path": args.model, "dataset_path": args.dataset}
    out_dir = _prep_out_dir(args.out_dir)
    t0 = time.time()
    outputs = run_eval(config, out_dir)
    _write_manifest(out_dir, "eval", config, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- corners

_CORNERS_KEYS = {
    "frequencies_hz",
    "laser_period_ns",
    "n_periods",
    "n_stages",
    "model_path",
    "dataset_path",
}


def _ring_encode_phases(
    phases: np.ndarray, laser_period: float, n_bins: int, freq: float
) -> np.ndarray:
    laser = LaserConfig(period=laser_period, n_periods=max(len(phases), 1))
    cfg = ring_encoder.EncoderConfig(
        laser=laser, n_stages=n_bins, ring_clock_hz=freq
    )
    dets = [
        DetectionEvent(i * laser_period + float(p), float(p))
        for i, p in enumerate(phases)
    ]
    state = ring_encoder.encode(dets, cfg)
    train = rotate(
        ring_encoder.readout(state, 200e6), ring_encoder.phase_offset(state, cfg)
    )
    return train.bits


def run_corners(config: dict, out_dir: Path) -> list[Path]:
    _check_keys(config, _CORNERS_KEYS, "corners config")
    freqs = config["frequencies_hz"]
    laser = LaserConfig(
        period=config["laser_period_ns"], n_periods=config["n_periods"]
    )

    model = None
    eval_spec = None
    eval_meta = None
    base_mape = None
    if config.get("model_path") is not None:
        if config.get("dataset_path") is None:
            raise ConfigError("corners: model_path requires dataset_path")
        model = snn.load_model(config["model_path"])
        ds = dataset.load(config["dataset_path"])
        eval_spec = _dataset_spec_from_header(ds.meta)
        eval_meta = ds.meta
        base_mape = snn.evaluate_mape(model, ds.to_arrays())

    rows = []
    for freq in freqs:
        cfg = ring_encoder.EncoderConfig(
            laser=laser, n_stages=config["n_stages"], ring_clock_hz=freq
        )
        row = [
            freq,
            cfg.ticks_per_period,
            cfg.deficient,
            cfg.suppressed_ns_per_period,
        ]
        if model is not None:
            mape = _corner_mape(model, eval_spec, eval_meta, freq)
            row += [mape, mape - base_mape]
        rows.append(row)
        print(
            f"{freq/1e9:.3f} GHz: {cfg.ticks_per_period} ticks/period"
            + (" (deficient)" if cfg.deficient else "")
            + f", {cfg.suppressed_ns_per_period:.3f} ns suppressed"
            + (f", MAPE {row[4]:.3f}%" if model is not None else "")
        )

    header = ["freq_hz", "ticks_per_period", "deficient", "suppressed_ns_per_period"]
    if model is not None:
        header += ["mape_pct", "mape_delta_pct"]
    path = out_dir / "corners.csv"
    _write_csv(path, header, rows)
    print(f"wrote {path}")
    return [path]


def _dataset_spec_from_header(meta: dict) -> dataset.DatasetSpec:
    det = meta.get("detector")
    return dataset.DatasetSpec(
        n_train=max(meta["n_samples"], 1),
        n_val=max(meta["n_samples"], 1),
        n_test=max(meta["n_samples"], 1),
        photons_per_sample=meta["photons_per_sample"],
        background_fraction=meta["background_fraction"],
        lifetime_range=tuple(meta["lifetime_range"]),
        encoder_path=meta["encoder_path"],
        seed=meta["seed"],
        n_bins=meta["n_bins"],
        laser_period_ns=meta["laser_period_ns"],
        detector=None if det is None else SpadModel(det["pdp"], det["dead_time"]),
        detector_rate=4.0 if det is None else det["rate"],
    )


def _corner_mape(
    model: snn.SnnModel, spec: dataset.DatasetSpec, meta: dict, freq: float
) -> float:
    # regenerate the split's phases from its seed stream, re-encode at freq
    tag = dataset._SPLIT_TAGS[meta["split"]]
    n = int(meta["n_samples"])
    truths = np.empty(n)
    X = np.empty((n, spec.n_bins), dtype=np.uint8)
    for i in range(n):
        tau, phases = dataset.sample_phases(spec, tag, i)
        truths[i] = tau
        X[i] = _ring_encode_phases(phases, spec.laser_period_ns, spec.n_bins, freq)
    preds = snn.forward_batch(model, X)
    return float(np.mean(np.abs(preds - truths) / truths) * 100.0)


def cmd_corners(args) -> int:
    config = {
        "frequencies_hz": args.freq or [0.77e9, 1.068e9, 1.28e9, 1.346e9],
        "laser_period_ns": args.laser_period,
        "n_periods": args.n_periods,
        "n_stages": args.n_stages,
        "model_path": args.model,
        "dataset_path": args.dataset,
    }
    out_dir = _prep_out_dir(args.out_dir)
    t0 = time.time()
    outputs = run_corners(config, out_dir)
    _write_manifest(out_dir, "corners", config, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- encode

_ENCODE_KEYS = {
    "lifetime_ns",
    "photons",
    "background_fraction",
    "seed",
    "encoder_path",
    "stopper",
    "ring_clock_hz",
    "laser_period_ns",
    "n_bins",
}


def run_encode(config: dict, out_dir: Path | None) -> tuple[str, list[Path]]:
    _check_keys(config, _ENCODE_KEYS, "encode config")
    tau = float(config["lifetime_ns"])
    if tau <= 0:
        raise ConfigError(f"lifetime must be > 0, got {tau}")
    spec = dataset.DatasetSpec(
        photons_per_sample=config["photons"],
        background_fraction=config["background_fraction"],
        seed=config["seed"],
        n_bins=config["n_bins"],
        laser_period_ns=config["laser_period_ns"],
    )
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config["seed"], spawn_key=(9,))
    )
    phases = dataset._draw_phases(rng, spec, tau)

    laser_period = config["laser_period_ns"]
    n_bins = config["n_bins"]
    if config["encoder_path"] == "oracle":
        train = oracle.binarize(
            oracle.histogram(phases, n_bins, laser_period / n_bins)
        )
        text = format_spike_train(
            train,
            laser_period_ns=laser_period,
            ring_clock_hz=ring_encoder.ideal_clock_hz(n_bins, laser_period),
            stopper="off",
            photon_count=len(phases),
            phase_offset=0,
        )
    else:
        laser = LaserConfig(period=laser_period, n_periods=max(len(phases), 1))
        cfg = ring_encoder.EncoderConfig(
            laser=laser,
            n_stages=n_bins,
            ring_clock_hz=config["ring_clock_hz"],
            stopper_threshold=config["stopper"],
        )
        dets = [
            DetectionEvent(i * laser_period + float(p), float(p))
            for i, p in enumerate(phases)
        ]
        state = ring_encoder.encode(dets, cfg)
        train = ring_encoder.readout(state, 200e6)
        text = format_spike_train(
            train,
            laser_period_ns=laser_period,
            ring_clock_hz=cfg.ring_clock_hz,
            stopper="off" if cfg.stopper_threshold is None else str(cfg.stopper_threshold),
            photon_count=state.photon_count,
            phase_offset=ring_encoder.phase_offset(state, cfg),
        )

    outputs: list[Path] = []
    if out_dir is not None:
        path = out_dir / "spike_train.txt"
        path.write_text(text)
        outputs.append(path)
        print(f"wrote {path}")
    return text, outputs


def cmd_encode(args) -> int:
    encoder = "oracle" if args.oracle else args.encoder
    config = {
        "lifetime_ns": args.lifetime,
        "photons": args.photons,
        "background_fraction": args.background,
        "seed": _resolve_seed(args.seed, None),
        "encoder_path": encoder,
        "stopper": _stopper_from_str(args.stopper),
        "ring_clock_hz": args.freq
        if args.freq is not None
        else ring_encoder.ideal_clock_hz(args.n_bins, args.laser_period),
        "laser_period_ns": args.laser_period,
        "n_bins": args.n_bins,
    }
    t0 = time.time()
    if args.out_dir is None:
        text, _ = run_encode(config, None)
        sys.stdout.write(text)
    else:
        out_dir = _prep_out_dir(args.out_dir)
        _, outputs = run_encode(config, out_dir)
        _write_manifest(out_dir, "encode", config, outputs, t0, args.threads)
    return EXIT_OK


# ---------------------------------------------------------------- rerun

_RUNNERS = {
    "gen-dataset": lambda cfg, out, threads: run_gen_dataset(cfg, out, threads),
    "ring-demo": lambda cfg, out, threads: run_ring_demo(cfg, out),
    "train": lambda cfg, out, threads: run_train(cfg, out),
    "eval": lambda cfg, out, threads: run_eval(cfg, out),
    "corners": lambda cfg, out, threads: run_corners(cfg, out),
    "encode": lambda cfg, out, threads: run_encode(cfg, out)[1],
}


def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != "run-manifest":
        raise ConfigError(f"{path}: not a run manifest")
    command = manifest["command"]
    if command not in _RUNNERS:
        raise ConfigError(f"{path}: cannot rerun command {command!r}")
    out_dir = _prep_out_dir(args.out_dir)
    threads = manifest.get("threads", 1)
    t0 = time.time()
    outputs = _RUNNERS[command](manifest["config"], out_dir, threads)
    _write_manifest(out_dir, command, manifest["config"], outputs, t0, threads)
    return EXIT_OK


# ---------------------------------------------------------------- plumbing


def _prep_out_dir(out_dir: str) -> Path:
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--threads", type=int, default=1, help="worker count where supported")
    if out_required:
        p.add_argument("--out-dir", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog=PROG,
        description="SPAD imaging pipeline simulator: photon arrivals, "
        "flip-flop-ring spike encoder, LIF network lifetime estimation.",
    )
    ap.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="generate train/val/test spike-train datasets")
    p.add_argument("--config", help="JSON dataset config")
    p.add_argument("--encoder", choices=["ring", "oracle"], default=None)
    _add_common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("ring-demo", help="periodic-source ring encoding demo, CSV trace")
    p.add_argument("--source-period", type=float, default=130.0, help="source period ns")
    p.add_argument("--laser-period", type=float, default=128.0, help="laser period ns")
    p.add_argument("--freq", type=float, default=1e9, help="ring clock Hz")
    p.add_argument("--n-periods", type=int, default=16, help="exposure length in laser periods")
    p.add_argument("--n-stages", type=int, default=128)
    p.add_argument("--stopper", default="off", help="128, 256 or off")
    p.add_argument("--readout-clock", type=float, default=200e6, help="readout clock Hz")
    _add_common(p)
    p.set_defaults(func=cmd_ring_demo)

    p = sub.add_parser("train", help="train the LIF network on a dataset")
    p.add_argument("--config", help="JSON training config")
    p.add_argument("--dataset-dir", help="directory containing train.txt and val.txt")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model, print MAPE, write predictions CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corners", help="clock-corner gating statistics (and MAPE deltas)")
    p.add_argument("--freq", type=float, action="append", help="ring clock Hz (repeatable)")
    p.add_argument("--laser-period", type=float, default=100.0)
    p.add_argument("--n-periods", type=int, default=100)
    p.add_argument("--n-stages", type=int, default=128)
    p.add_argument("--model", default=None, help="model for the MAPE column")
    p.add_argument("--dataset", default=None, help="dataset whose test phases are re-encoded")
    _add_common(p)
    p.set_defaults(func=cmd_corners)

    p = sub.add_parser("encode", help="encode one synthetic exposure to a spike train")
    p.add_argument("--lifetime", type=float, required=True, help="true lifetime ns")
    p.add_argument("--photons", type=int, default=256)
    p.add_argument("--background", type=float, default=0.0)
    p.add_argument("--encoder", choices=["ring", "oracle"], default="ring")
    p.add_argument("--oracle", action="store_true", help="shorthand for --encoder oracle")
    p.add_argument("--stopper", default="off")
    p.add_argument("--freq", type=float, default=None, help="ring clock Hz")
    p.add_argument("--laser-period", type=float, default=128.0)
    p.add_argument("--n-bins", type=int, default=128)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=None, help="write file + manifest instead of stdout")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("rerun", help="replay a command from its manifest")
    p.add_argument("--manifest", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_rerun)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"{PROG}: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (dataset.DatasetFormatError, ValueError, OSError) as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except snn.TrainingDiverged as e:
        print(f"{PROG}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
