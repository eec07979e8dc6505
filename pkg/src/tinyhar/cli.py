"""Command-line frontend wiring the pipeline end to end.

Exit codes: 0 success, 1 budget violation, 2 usage error.
Report-producing subcommands write a rendered figure next to each
delimited artifact.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .config import PipelineConfig, load_config
from .dataset import (
    default_synth_spec,
    kfold_stratified,
    load_csv,
    save_csv,
    split_stratified,
)
from .errors import PipelineError
from .evaluation import evaluate
from .features import FEATURE_NAMES, FeatureMask, N_FEATURES, select_top_features
from .gbdt import Forest, GbdtConfig, feature_importance, gbdt_train
from .inference import Engine, duty_cycle
from .injection import run_injection
from .mlp import MlpModel, TrainConfig, mlp_train
from .modelio import load_model, save_model
from .modelpack import (
    AccountingModel,
    Budget,
    audit,
    decode,
    describe,
    encode,
    footprint,
)
from .pipeline import feature_table, preprocess_recording, windows_from_recordings
from .scenario import build_injection_scenario
from .signal_core import CleansePolicy, segment

EXIT_OK = 0
EXIT_BUDGET = 1
EXIT_USAGE = 2


def _cleanse_policy(cfg: PipelineConfig) -> CleansePolicy:
    return CleansePolicy(cfg.outlier_sigma, cfg.trim_rms_window_s, cfg.trim_rms_ratio)


def _input_csvs(path: Path):
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise PipelineError(f"no .csv files in {path}")
        return files
    return [path]


def _write_feature_table(X, y, class_names, path: Path) -> None:
    lines = ["label," + ",".join(FEATURE_NAMES)]
    for label, row in zip(y, X):
        lines.append(class_names[label] + "," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _read_feature_table(path: Path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    if header[0] != "label" or tuple(header[1:]) != FEATURE_NAMES:
        raise PipelineError(f"{path}: not a canonical feature table")
    labels, rows = [], []
    for line in lines[1:]:
        cells = line.split(",")
        labels.append(cells[0])
        rows.append([float(v) for v in cells[1:]])
    class_names = tuple(sorted(set(labels)))
    index = {c: i for i, c in enumerate(class_names)}
    return np.array(rows), np.array([index[l] for l in labels]), class_names


def cmd_synth(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = default_synth_spec(
        n_classes=args.classes,
        duration_s=args.duration,
        rate_hz=cfg.raw_rate_hz,
        noise_std=args.noise,
    )
    from .dataset import synth_dataset

    for rec in synth_dataset(spec, cfg.seed):
        name = rec.source_id.replace("/", "_") + ".csv"
        save_csv(rec, out / name)
    print(f"wrote {len(list(out.glob('*.csv')))} recordings to {out}")
    return EXIT_OK


def cmd_preprocess(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trim_dir = out / "trimmings"
    trim_dir.mkdir(exist_ok=True)
    policy = _cleanse_policy(cfg)
    n_trim = 0
    for path in _input_csvs(Path(args.input)):
        rec = load_csv(path)
        processed, trimmings = preprocess_recording(
            rec, cfg.decimation_factor, policy
        )
        save_csv(processed, out / path.name)
        for i, tr in enumerate(trimmings):
            n_trim += 1
            save_csv(tr.samples, trim_dir / f"{path.stem}_trim{i:03d}.csv")
    print(f"preprocessed to {out} ({n_trim} trimmings)")
    return EXIT_OK


def cmd_featurize(args, cfg: PipelineConfig) -> int:
    windows = []
    for path in _input_csvs(Path(args.input)):
        rec = load_csv(path)
        windows.extend(segment(rec, cfg.window_len, cfg.stride))
    if not windows:
        raise PipelineError("no full windows in the input")
    X, y, class_names = feature_table(windows, ma_width=cfg.ma_width)
    _write_feature_table(X, y, class_names, Path(args.out))
    print(f"wrote {len(X)} feature vectors ({len(class_names)} classes) to {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: PipelineConfig) -> int:
    X, y, class_names = _read_feature_table(Path(args.features))
    mask = FeatureMask.full()
    if cfg.mask_fraction < 1.0:
        probe = gbdt_train(
            (X, y),
            hyper=GbdtConfig(cfg.n_rounds, cfg.max_depth, cfg.min_leaf, cfg.shrinkage, cfg.seed),
            class_names=class_names,
        )
        mask = select_top_features(feature_importance(probe), cfg.mask_fraction)
        X = X[:, list(mask.kept)]
    windows_split = split_stratified_features(X, y, cfg)
    (Xt, yt), (Xv, yv) = windows_split
    out = Path(args.out)
    if cfg.model_kind == "mlp":
        tc = TrainConfig(
            cfg.initial_lr,
            cfg.lr_decay,
            cfg.lr_decay_every,
            cfg.batch_size,
            cfg.patience,
            cfg.dropout,
            max_epochs=cfg.max_epochs,
            seed=cfg.seed,
        )
        model, history = mlp_train(
            (Xt, yt),
            (Xv, yv),
            tc,
            dims=(X.shape[1], 64, 32, len(class_names)),
            feature_mask=mask,
            class_names=class_names,
        )
        hist_path = out.with_suffix(".history.csv")
        hist_path.write_text(
            "epoch,train_loss,val_accuracy\n"
            + "\n".join(f"{h.epoch},{h.train_loss!r},{h.val_accuracy!r}" for h in history)
            + "\n"
        )
        plots.plot_history(history, out.with_suffix(".history.png"))
    else:
        model = gbdt_train(
            (Xt, yt),
            hyper=GbdtConfig(cfg.n_rounds, cfg.max_depth, cfg.min_leaf, cfg.shrinkage, cfg.seed),
            feature_mask=mask,
            class_names=class_names,
        )
        imp = feature_importance(model)
        imp_path = out.with_suffix(".importance.csv")
        imp_path.write_text(
            "feature,importance\n"
            + "\n".join(f"{n},{float(v)!r}" for n, v in zip(FEATURE_NAMES, imp))
            + "\n"
        )
    acc, _ = evaluate(model, Xv, yv, class_names)
    save_model(model, out)
    print(f"trained {cfg.model_kind} (val accuracy {acc:.4f}) -> {out}")
    return EXIT_OK


def split_stratified_features(X, y, cfg: PipelineConfig):
    """Stratified train/val row split mirroring the window-level splitter."""
    rng = np.random.default_rng(cfg.seed)
    val_rows = []
    for c in np.unique(y):
        rows = rng.permutation(np.nonzero(y == c)[0])
        n_val = max(1, int(round(len(rows) * cfg.val_ratio / (cfg.train_ratio + cfg.val_ratio))))
        val_rows.extend(rows[:n_val])
    val = np.zeros(len(y), dtype=bool)
    val[val_rows] = True
    return (X[~val], y[~val]), (X[val], y[val])


def cmd_pack(args, cfg: PipelineConfig) -> int:
    model = load_model(Path(args.model))
    raw = encode(model)
    Path(args.out).write_bytes(raw)
    if model.class_names:
        Path(args.out).with_suffix(".classes.txt").write_text(
            "\n".join(model.class_names) + "\n"
        )
    print(f"packed {len(raw)} bytes -> {args.out}")
    return EXIT_OK


def cmd_audit(args, cfg: PipelineConfig) -> int:
    raw = Path(args.pack).read_bytes()
    model = decode(raw)
    accounting = AccountingModel(window_len=cfg.window_len)
    report = footprint(model, accounting)
    budget = Budget(cfg.max_stack_bytes, cfg.max_program_bytes, cfg.max_data_bytes)
    result = audit(report, budget)
    out = Path(args.out) if args.out else Path(args.pack).with_suffix(".footprint.tsv")
    rows = [("region", "used_bytes", "budget_bytes", "status")]
    for name, used, limit in (
        ("stack", report.stack_bytes, budget.max_stack),
        ("program", report.program_bytes, budget.max_program),
        ("data", report.data_bytes, budget.max_data),
    ):
        status = f"over by {result.violations[name]}" if name in result.violations else "ok"
        rows.append((name, str(used), str(limit), status))
    out.write_text("\n".join("\t".join(r) for r in rows) + "\n")
    plots.plot_footprint(report, budget, out.with_suffix(".png"))
    sys.stdout.write(describe(raw))
    if not result.passed:
        for name, over in result.violations.items():
            print(f"BUDGET VIOLATION: {name} over by {over} bytes")
        return EXIT_BUDGET
    print("audit: pass")
    return EXIT_OK


def cmd_infer(args, cfg: PipelineConfig) -> int:
    raw = Path(args.pack).read_bytes()
    engine = Engine(raw, cfg.window_len, stride=cfg.stride)
    classes_path = Path(args.pack).with_suffix(".classes.txt")
    names = (
        classes_path.read_text().splitlines() if classes_path.exists() else None
    )
    rec = load_csv(Path(args.input))
    if args.raw:
        rec, _ = preprocess_recording(rec, cfg.decimation_factor, _cleanse_policy(cfg))
    t0 = time.perf_counter()
    events = engine.push_samples(rec.data)
    elapsed_ms = (time.perf_counter() - t0) * 1000
    out = Path(args.out)
    lines = ["window_index\tlabel\ttop_score"]
    for e in events:
        label = names[e.label] if names else str(e.label)
        lines.append(f"{e.window_index}\t{label}\t{float(max(e.scores))!r}")
    out.write_text("\n".join(lines) + "\n")
    window_ms = 1000.0 * cfg.window_len / cfg.target_rate_hz
    per_window_ms = elapsed_ms / max(1, len(events))
    duty_path = out.with_suffix(".duty.txt")
    if per_window_ms < window_ms:
        dc = duty_cycle(per_window_ms, window_ms)
        duty_path.write_text(
            f"t_inference_ms = {dc.t_inference_ms:.3f}\n"
            f"t_window_ms = {dc.t_window_ms:.3f}\n"
            f"idle_fraction = {dc.idle_fraction:.4f}\n"
        )
    else:
        duty_path.write_text("inference slower than window on this host\n")
    print(f"{len(events)} events -> {out}")
    return EXIT_OK


def cmd_eval(args, cfg: PipelineConfig) -> int:
    path = Path(args.model)
    model = decode(path.read_bytes()) if path.suffix == ".ispm" else load_model(path)
    X, y, class_names = _read_feature_table(Path(args.features))
    if model.class_names and tuple(model.class_names) != class_names:
        raise PipelineError("model/table class sets differ")
    mask = model.feature_mask
    if len(mask) != N_FEATURES:
        X = X[:, list(mask.kept)]
    acc, cm = evaluate(model, X, y, class_names)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "confusion.csv").write_text(
        "," + ",".join(class_names) + "\n"
        + "\n".join(
            class_names[i] + "," + ",".join(str(v) for v in row)
            for i, row in enumerate(cm.counts)
        )
        + "\n"
    )
    plots.plot_confusion(cm, out / "confusion.png")
    (out / "accuracy.txt").write_text(f"{acc:.6f}\n")
    print(f"accuracy {acc:.4f} -> {out}")
    return EXIT_OK


def cmd_inject(args, cfg: PipelineConfig) -> int:
    scenario = build_injection_scenario(seed=cfg.seed)
    report = run_injection(
        scenario.seed_classes,
        scenario.candidates,
        scenario.policy,
        scenario.train_fn,
        tau=cfg.tau,
        seed=cfg.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "injection_report.txt").write_text(report.to_text())
    plots.plot_injection(report.steps, out / "injection.png")
    print(
        f"final classes: {len(report.final_classes)} "
        f"(accuracy {report.final_accuracy:.4f}) -> {out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tinyhar", description=__doc__)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="emit a synthetic CSV corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--classes", type=int, default=24)
    sp.add_argument("--duration", type=float, default=120.0)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("preprocess", help="cleanse and decimate recordings")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_preprocess)

    sp = sub.add_parser("featurize", help="windows -> canonical feature table")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_featurize)

    sp = sub.add_parser("train", help="feature table -> model + history")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("pack", help="model JSON -> .ispm binary")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_pack)

    sp = sub.add_parser("audit", help=".ispm -> footprint report vs budget")
    sp.add_argument("--pack", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_audit)

    sp = sub.add_parser("infer", help=".ispm + CSV stream -> event log")
    sp.add_argument("--pack", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--raw", action="store_true", help="preprocess the input first")
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("eval", help="model + feature table -> accuracy + confusion")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("inject", help="run the incremental class-injection loop")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_inject)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    cfg = PipelineConfig()
    try:
        if args.config:
            cfg = load_config(args.config, cfg)
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, seed=args.seed)
        return args.fn(args, cfg)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
