"""Command-line orchestration: train, ternarize, eval, bench, hwmodel.

Every command resolves its settings as flags > config file > defaults,
writes CSV reports carrying a schema-version comment line, and drops a run
manifest that hashes every artifact it read or produced.  With fixed seeds
and inputs all artifact outputs are bit-reproducible; wall-clock data lives
in the manifest's separate "timestamps" field.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import multiprocessing
import os
import sys
import time

import numpy as np

from ternnet import data as dta
from ternnet import hwmodel, runtime, teacher, ternarize

USAGE_ERROR = 2
NUMERIC_ERROR = 3


class UsageError(ValueError):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(path, text: str) -> None:
    with open(path, "w") as f:
        f.write(text)


def _fmt(x) -> str:
    return f"{x:.10g}" if isinstance(x, float) else str(x)


def write_manifest(out_dir, command: str, config: dict, inputs: list, outputs: list, started: float, durations: dict) -> str:
    manifest = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seed": config.get("seed"),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "timestamps": {
            "started_unix": started,
            "finished_unix": time.time(),
            "durations_s": durations,
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Config resolution: flags > config file > defaults.
# ---------------------------------------------------------------------------

def _parse_config_file(path) -> dict:
    values = {}
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e
    return values


def _coerce(value, like):
    if isinstance(like, bool):
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"expected a boolean, got {value!r}")
    if like is None or isinstance(like, str):
        return str(value)
    try:
        return type(like)(value)
    except ValueError as e:
        raise UsageError(f"bad value {value!r}: {e}") from e


def resolve_config(defaults: dict, args: argparse.Namespace) -> dict:
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _parse_config_file(config_path).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = _coerce(raw, defaults[key])
    merged.update(given)
    return merged


def _workers(cfg) -> int:
    w = cfg.get("workers", 0)
    if w and w > 0:
        return w
    env = os.environ.get("TNN_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"TNN_WORKERS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Dataset plumbing shared by the commands.
# ---------------------------------------------------------------------------

DATASET_DEFAULTS = {
    "dataset": "digits",
    "data_dir": "",
    "binarize_threshold": 127.0,
    "digits_train": 12000,
    "digits_test": 2000,
    "digits_seed": 9,
    "blobs_n": 2000,
    "blobs_dim": 32,
    "blobs_classes": 4,
    "blobs_seed": 5,
}

_MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def _find_idx(data_dir, name):
    for candidate in (name, name + ".gz"):
        path = os.path.join(data_dir, candidate)
        if os.path.exists(path):
            return path
    raise UsageError(f"missing IDX file {name} (or {name}.gz) in {data_dir}")


def load_datasets(cfg: dict):
    """Returns (train Dataset, test Dataset, list of input files for the manifest)."""
    kind = cfg["dataset"]
    if kind == "mnist":
        data_dir = cfg["data_dir"] or os.environ.get("TNN_MNIST_DIR", "")
        if not data_dir:
            raise UsageError("--dataset mnist needs --data-dir (or TNN_MNIST_DIR)")
        paths = [_find_idx(data_dir, n) for n in _MNIST_FILES]
        train_raw = dta.load_mnist_idx(paths[0], paths[1])
        test_raw = dta.load_mnist_idx(paths[2], paths[3])
        t = cfg["binarize_threshold"]
        return dta.binarize_threshold(train_raw, t), dta.binarize_threshold(test_raw, t), paths
    if kind == "digits":
        data_dir = cfg["data_dir"] or os.path.join(
            "data", f"digits-s{cfg['digits_seed']}-{cfg['digits_train']}x{cfg['digits_test']}"
        )
        expected = [os.path.join(data_dir, n) for n in _MNIST_FILES]
        if not all(os.path.exists(p) for p in expected):
            dta.synth_digits_idx(cfg["digits_seed"], cfg["digits_train"], cfg["digits_test"], data_dir)
        train_raw = dta.load_mnist_idx(expected[0], expected[1])
        test_raw = dta.load_mnist_idx(expected[2], expected[3])
        t = cfg["binarize_threshold"]
        return dta.binarize_threshold(train_raw, t), dta.binarize_threshold(test_raw, t), expected
    if kind == "blobs":
        from ternnet.linalg import Rng

        rng = Rng(cfg["blobs_seed"])
        n = cfg["blobs_n"]
        ds = dta.synth_blobs(rng, n + max(1, n // 5), cfg["blobs_dim"], cfg["blobs_classes"])
        return ds.take(slice(0, n)), ds.take(slice(n, len(ds))), []
    raise UsageError(f"unknown dataset {kind!r}")


def _apply_subset(ds, subset: int):
    if subset and subset > 0:
        if subset > len(ds):
            raise UsageError(f"--subset {subset} exceeds the {len(ds)}-sample training set")
        return ds.take(slice(0, subset))
    return ds


def _carve_validation(ds, val: int):
    n_val = val if val and val > 0 else max(1, len(ds) // 6)
    if n_val >= len(ds):
        raise UsageError("validation size leaves no training data")
    return dta.split(ds, len(ds) - n_val, n_val)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

TRAIN_DEFAULTS = {
    **DATASET_DEFAULTS,
    "arch": "784x64x64x10",
    "subset": 0,
    "val": 0,
    "epochs": 80,
    "batch_size": 100,
    "lr": 0.1,
    "seed": 7,
    "patience": 20,
    "dropout": 0.0,
    "activation": "tanh",
    "out_dir": "runs/teacher",
}


def _parse_arch(text: str) -> list:
    try:
        dims = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise UsageError(f"bad --arch {text!r}; expected e.g. 784x64x64x10") from None
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise UsageError(f"bad --arch {text!r}; need at least input and output dims")
    return dims


def metrics_csv(history: list) -> str:
    lines = ["# tnn-csv-v1 train-metrics", "epoch,train_loss,train_acc,val_acc"]
    for row in history:
        lines.append(f"{row['epoch']},{_fmt(row['train_loss'])},{_fmt(row['train_acc'])},{_fmt(row['val_acc'])}")
    return "\n".join(lines) + "\n"


def cmd_train(cfg: dict) -> int:
    started = time.time()
    train_full, test_ds, input_files = load_datasets(cfg)
    train_full = _apply_subset(train_full, cfg["subset"])
    train_ds, val_ds = _carve_validation(train_full, cfg["val"])
    arch = _parse_arch(cfg["arch"])

    tcfg = teacher.TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["lr"],
        seed=cfg["seed"],
        early_stop_patience=cfg["patience"],
        dropout_rate=cfg["dropout"] or None,
        activation=cfg["activation"],
    )
    t0 = time.time()
    result = teacher.train_teacher(train_ds, arch, tcfg, val=val_ds)
    train_s = time.time() - t0

    os.makedirs(cfg["out_dir"], exist_ok=True)
    ckpt = os.path.join(cfg["out_dir"], "teacher.tnn")
    teacher.save_teacher(
        result.model,
        ckpt,
        meta={
            "seed": cfg["seed"],
            "epochs_run": len(result.history),
            "best_epoch": result.best_epoch,
            "arch": arch,
            "train_config": {
                "epochs": cfg["epochs"],
                "batch_size": cfg["batch_size"],
                "learning_rate": cfg["lr"],
                "patience": cfg["patience"],
                "activation": cfg["activation"],
            },
        },
    )
    metrics_path = os.path.join(cfg["out_dir"], "train_metrics.csv")
    _write(metrics_path, metrics_csv(result.history))

    test_acc = teacher.expected_accuracy(result.model, test_ds.inputs, test_ds.labels)
    val_acc = result.best_val_acc
    write_manifest(cfg["out_dir"], "train", cfg, input_files, [ckpt, metrics_path], started, {"train": train_s})
    print(f"teacher checkpoint: {ckpt}")
    print(f"best validation accuracy: {val_acc:.4f} (epoch {result.best_epoch})")
    print(f"test error rate: {100.0 * (1.0 - test_acc):.2f}%")
    return 0


# ---------------------------------------------------------------------------
# ternarize
# ---------------------------------------------------------------------------

TERNARIZE_DEFAULTS = {
    **DATASET_DEFAULTS,
    "teacher": "",
    "subset": 0,
    "val": 0,
    "epsilon": 0.95,
    "probes": 5000,
    "grid": "128",
    "retrain": True,
    "seed": 7,
    "workers": 0,
    "epochs": 50,
    "batch_size": 100,
    "lr": 0.1,
    "patience": 10,
    "out_dir": "runs/student",
}


def gap_csv(epsilon: float, t_train, s_train, t_test, s_test) -> str:
    lines = [
        "# tnn-csv-v1 gap-report",
        "epsilon,teacher_train_acc,student_train_acc,train_gap_points,teacher_test_acc,student_test_acc,test_gap_points",
        ",".join(
            _fmt(v)
            for v in (
                epsilon,
                t_train,
                s_train,
                100.0 * (t_train - s_train),
                t_test,
                s_test,
                100.0 * (t_test - s_test),
            )
        ),
    ]
    return "\n".join(lines) + "\n"


def _grid_cap(text: str):
    if str(text).lower() in ("full", "none", "0"):
        return None
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--grid wants an integer cap or 'full', got {text!r}") from None


def cmd_ternarize(cfg: dict) -> int:
    started = time.time()
    if not cfg["teacher"]:
        raise UsageError("--teacher checkpoint path is required")
    model, tmeta = teacher.load_teacher(cfg["teacher"])
    train_full, test_ds, input_files = load_datasets(cfg)
    train_full = _apply_subset(train_full, cfg["subset"])
    train_ds, val_ds = _carve_validation(train_full, cfg["val"])

    tern_cfg = ternarize.TernarizeConfig(
        epsilon=cfg["epsilon"],
        probe_count=cfg["probes"],
        grid_cap=_grid_cap(cfg["grid"]),
        rng_seed=cfg["seed"],
        retrain=cfg["retrain"],
    )
    train_cfg = teacher.TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["lr"],
        seed=cfg["seed"],
        early_stop_patience=cfg["patience"],
        activation=tmeta.get("activations", ["tanh"])[0] if tmeta.get("activations") else "tanh",
    )
    t0 = time.time()
    result = ternarize.ternarize_network(
        model,
        train_ds,
        tern_cfg,
        train_cfg=train_cfg,
        val=val_ds,
        workers=_workers(cfg),
        teacher_hash=_sha256(cfg["teacher"]),
    )
    tern_s = time.time() - t0

    os.makedirs(cfg["out_dir"], exist_ok=True)
    model_path = os.path.join(cfg["out_dir"], "student.tnn")
    runtime.save_model(result.model, model_path)
    diag_path = os.path.join(cfg["out_dir"], "diagnostics.csv")
    _write(diag_path, ternarize.diagnostics_csv(result.diagnostics))

    t_train = teacher.expected_accuracy(model, train_full.inputs, train_full.labels)
    s_train = float(np.mean(runtime.batch_predict(result.model, train_full.inputs) == train_full.labels))
    t_test = teacher.expected_accuracy(model, test_ds.inputs, test_ds.labels)
    s_test = float(np.mean(runtime.batch_predict(result.model, test_ds.inputs) == test_ds.labels))
    gap_path = os.path.join(cfg["out_dir"], "gap_report.csv")
    _write(gap_path, gap_csv(cfg["epsilon"], t_train, s_train, t_test, s_test))

    write_manifest(
        cfg["out_dir"],
        "ternarize",
        cfg,
        [cfg["teacher"], *input_files],
        [model_path, diag_path, gap_path],
        started,
        {"ternarize": tern_s},
    )
    frac = ternarize.exhaustive_fraction(result.diagnostics)
    print(f"student model: {model_path} (sparsity {100.0 * result.model.sparsity():.1f}%)")
    print(f"exhaustive-search fraction: {frac:.3f}; output sweeps: {result.output_sweeps} (converged: {result.output_converged})")
    print(f"teacher/student test acc: {t_test:.4f} / {s_test:.4f} (gap {100.0 * (t_test - s_test):+.2f} points)")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

EVAL_DEFAULTS = {
    **DATASET_DEFAULTS,
    "model": "",
    "engine": "packed",
    "limit": -1,  # negative = whole test set
    "out_dir": "runs/eval",
    "seed": 0,
}


def confusion_csv(cm: np.ndarray) -> str:
    k = cm.shape[0]
    lines = ["# tnn-csv-v1 confusion", "true\\pred," + ",".join(str(j) for j in range(k))]
    for i in range(k):
        lines.append(f"{i}," + ",".join(str(int(v)) for v in cm[i]))
    return "\n".join(lines) + "\n"


def predictions_csv(pred: np.ndarray, labels: np.ndarray) -> str:
    lines = ["# tnn-csv-v1 predictions", "index,predicted,label"]
    for i, (p, l) in enumerate(zip(pred, labels)):
        lines.append(f"{i},{int(p)},{int(l)}")
    return "\n".join(lines) + "\n"


def cmd_eval(cfg: dict) -> int:
    started = time.time()
    if not cfg["model"]:
        raise UsageError("--model path is required")
    model = runtime.load_model(cfg["model"])
    _, test_ds, input_files = load_datasets(cfg)
    if cfg["limit"] >= 0:
        test_ds = test_ds.take(slice(0, cfg["limit"]))
    if len(test_ds) == 0:
        raise UsageError("test set is empty")

    t0 = time.time()
    if cfg["engine"] == "packed":
        pred = np.array([runtime.infer(model, runtime.pack(x)) for x in test_ds.inputs], dtype=np.int32)
    elif cfg["engine"] == "naive":
        pred = np.array([runtime.predict_naive(model, x) for x in test_ds.inputs], dtype=np.int32)
    else:
        raise UsageError(f"unknown engine {cfg['engine']!r}; choose packed or naive")
    eval_s = time.time() - t0

    labels = test_ds.labels
    err = 100.0 * float(np.mean(pred != labels))
    k = model.num_classes
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (labels, pred), 1)

    alu = runtime.OpCounter()
    attested = min(len(test_ds), 32)
    for x in test_ds.inputs[:attested]:
        runtime.infer_instrumented(model, runtime.pack(x), alu)
    assert alu.counts["mul"] == 0

    os.makedirs(cfg["out_dir"], exist_ok=True)
    pred_path = os.path.join(cfg["out_dir"], "predictions.csv")
    _write(pred_path, predictions_csv(pred, labels))
    cm_path = os.path.join(cfg["out_dir"], "confusion.csv")
    _write(cm_path, confusion_csv(cm))
    write_manifest(
        cfg["out_dir"], "eval", cfg, [cfg["model"], *input_files], [pred_path, cm_path], started, {"eval": eval_s}
    )
    print(f"error rate: {err:.2f}% over {len(test_ds)} samples ({cfg['engine']} engine)")
    print(
        f"attestation: {attested} instrumented inferences executed "
        f"{alu.total()} integer ops ({alu.counts['popcount']} popcounts) and 0 multiplications"
    )
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

BENCH_DEFAULTS = {
    **DATASET_DEFAULTS,
    "model": "",
    "reps": 3,
    "limit": 512,
    "naive_limit": 40,
    "workers": 0,
    "out_dir": "",
    "seed": 0,
}

_BENCH_MODEL = None


def _bench_init(path):
    global _BENCH_MODEL
    _BENCH_MODEL = runtime.load_model(path)


def _bench_chunk(args):
    lo, hi, raw = args
    inputs = np.frombuffer(raw, dtype=np.int8).reshape(hi - lo, -1)
    return [runtime.infer(_BENCH_MODEL, runtime.pack(x)) for x in inputs]


def _median_rate(fn, n_items: int, reps: int) -> tuple:
    fn()  # warmup, excluded from the timings
    rates = []
    outputs = None
    for _ in range(max(3, reps)):
        t0 = time.perf_counter()
        outputs = fn()
        dt = time.perf_counter() - t0
        rates.append(n_items / dt if dt > 0 else float("inf"))
    return float(np.median(rates)), outputs


def cmd_bench(cfg: dict) -> int:
    if not cfg["model"]:
        raise UsageError("--model path is required")
    model = runtime.load_model(cfg["model"])
    _, test_ds, _ = load_datasets(cfg)
    n = min(cfg["limit"], len(test_ds)) or len(test_ds)
    inputs = test_ds.inputs[:n]
    packed_inputs = [runtime.pack(x) for x in inputs]

    packed_rate, packed_out = _median_rate(
        lambda: [runtime.infer(model, p) for p in packed_inputs], n, cfg["reps"]
    )

    workers = _workers(cfg)
    multi_rate = None
    if workers > 1:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        chunks = [
            (int(lo), int(hi), inputs[lo:hi].tobytes()) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
        ]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers, initializer=_bench_init, initargs=(cfg["model"],)) as pool:
            def run_multi():
                out = []
                for part in pool.map(_bench_chunk, chunks):
                    out.extend(part)
                return out

            multi_rate, multi_out = _median_rate(run_multi, n, cfg["reps"])
        if list(multi_out) != list(packed_out):
            raise RuntimeError("multi-worker predictions diverged from single-worker predictions")

    n_naive = min(cfg["naive_limit"], n)
    naive_rate, naive_out = _median_rate(
        lambda: [runtime.predict_naive(model, x) for x in inputs[:n_naive]], n_naive, cfg["reps"]
    )
    if list(naive_out) != list(packed_out[:n_naive]):
        raise RuntimeError("naive engine disagrees with the packed engine")

    report_lines = [
        "# tnn-csv-v1 bench-report",
        "engine,workers,images_per_s,samples",
        f"packed,1,{packed_rate:.6g},{n}",
    ]
    if multi_rate is not None:
        report_lines.append(f"packed,{workers},{multi_rate:.6g},{n}")
    report_lines.append(f"naive,1,{naive_rate:.6g},{n_naive}")
    report_lines.append(f"# sparsity_percent {100.0 * model.sparsity():.4g}")
    report_lines.append(f"# packed_vs_naive_speedup { packed_rate / naive_rate:.4g}")
    report = "\n".join(report_lines) + "\n"
    print(report, end="")
    if cfg["out_dir"]:
        os.makedirs(cfg["out_dir"], exist_ok=True)
        _write(os.path.join(cfg["out_dir"], "bench.csv"), report)
    return 0


# ---------------------------------------------------------------------------
# hwmodel
# ---------------------------------------------------------------------------

HWMODEL_DEFAULTS = {"table5": False, "spec": "", "out": "", "seed": 0}

_HW_SPEC_KEYS = {"input_dim", "layers", "clock_mhz", "per_layer_overhead", "pipeline_fill_overhead"}


def _load_hw_spec(path) -> hwmodel.PipelineSpec:
    values = _parse_config_file(path)
    unknown = set(values) - _HW_SPEC_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown spec keys {sorted(unknown)}")
    try:
        layers = [int(p) for p in values.get("layers", "").split(",") if p.strip()]
        return hwmodel.PipelineSpec(
            input_dim=int(values["input_dim"]),
            layer_sizes=layers,
            clock_hz=float(values["clock_mhz"]) * 1e6,
            per_layer_overhead=float(values.get("per_layer_overhead", 0.0)),
            pipeline_fill_overhead=float(values.get("pipeline_fill_overhead", 0.0)),
        )
    except (KeyError, ValueError) as e:
        raise UsageError(f"{path}: malformed hardware spec: {e}") from e


def cmd_hwmodel(cfg: dict) -> int:
    specs = []
    if cfg["table5"]:
        specs.extend(hwmodel.reference_sweep())
    if cfg["spec"]:
        specs.append(_load_hw_spec(cfg["spec"]))
    text = hwmodel.report(specs)
    if cfg["out"]:
        _write(cfg["out"], text)
        print(f"wrote {cfg['out']}")
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring.
# ---------------------------------------------------------------------------

def _add_opts(parser: argparse.ArgumentParser, defaults: dict) -> None:
    parser.add_argument("--config", help="flat key = value config file; flags take precedence")
    for key, default in defaults.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(default, bool):
            parser.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS)
        else:
            parser.add_argument(flag, dest=key, type=type(default), default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults, help_text in (
        ("train", TRAIN_DEFAULTS, "train a stochastically-firing ternary teacher MLP"),
        ("ternarize", TERNARIZE_DEFAULTS, "compile a teacher checkpoint into a ternary student"),
        ("eval", EVAL_DEFAULTS, "evaluate a student model and attest the mult-free contract"),
        ("bench", BENCH_DEFAULTS, "software throughput of the packed engine"),
        ("hwmodel", HWMODEL_DEFAULTS, "hardware pipeline cost reports"),
    ):
        _add_opts(sub.add_parser(name, help=help_text), defaults)
    return parser


COMMANDS = {
    "train": (cmd_train, TRAIN_DEFAULTS),
    "ternarize": (cmd_ternarize, TERNARIZE_DEFAULTS),
    "eval": (cmd_eval, EVAL_DEFAULTS),
    "bench": (cmd_bench, BENCH_DEFAULTS),
    "hwmodel": (cmd_hwmodel, HWMODEL_DEFAULTS),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    fn, defaults = COMMANDS[args.command]
    try:
        cfg = resolve_config(defaults, args)
        return fn(cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (dta.IdxError, runtime.ContainerError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except teacher.TrainingDivergedError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
