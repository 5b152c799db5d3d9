"""Command-line front end: synth, ingest, featurize, train, evaluate, pfi, predict.

Every command writes its artifacts plus a ``<command>.manifest.json`` holding
the effective config hash, seed, and input checksums.  All randomness flows
from explicit seeds, so identical invocations produce byte-identical outputs.
Errors exit with code 2 and a machine-readable ``error: <Type>: <message>``
line on stderr.
"""

from __future__ import annotations

import functools
import json
import logging
import shutil
import sys
from pathlib import Path
from types import SimpleNamespace

import click
import numpy as np

from . import manifest as run_manifest
from .errors import ConfigError, MissingArtifactError, UroeventError
from .events import (
    build_events,
    events_from_csv,
    events_in,
    events_to_csv,
    split_by_trace,
    split_from_csv,
    split_to_csv,
)
from .dwt import dwt5_db2
from .features import FEATURE_NAMES, balance_none, extract_all
from .metrics import (
    confusion_to_csv,
    evaluate,
    metrics_to_csv,
    permutation_importance,
    pfi_to_csv,
    roc_to_csv,
)
from .nn import TrainConfig, load_model, save_model
from .pipeline import (
    SINGLE_CLASSES,
    STAGE1_NONVOID,
    STAGE1_VOID,
    load_two_stage,
    predict_cascaded,
    predictions_to_csv,
    propose_events,
    save_two_stage,
    train_single_stage,
    train_two_stage,
    write_overlay,
)
from .synth import SynthConfig, generate
from .trace_io import (
    EventLabel,
    load_corpus,
    load_dataset_tags,
    load_trace,
    resample_to_10hz,
    save_dataset_tags,
    save_trace,
)

logger = logging.getLogger("uroevent")


def _fail_on_error(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UroeventError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return data


def _opt(flag, cfg: dict, key: str, default=None):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def parse_split(text: str) -> dict:
    """Parse ``60/40``, ``60%``, ``0.6``, or ``manifest:A+B->C``."""
    text = text.strip()
    if text.startswith("manifest:"):
        body = text[len("manifest:") :]
        if "->" not in body:
            raise ConfigError(f"manifest split {text!r} must look like manifest:A+B->C")
        train_part, test_part = body.split("->", 1)
        train_tags = tuple(t for t in train_part.split("+") if t)
        test_tags = tuple(t for t in test_part.split("+") if t)
        if not train_tags or not test_tags:
            raise ConfigError(f"manifest split {text!r} needs tags on both sides")
        return {"train_tags": train_tags, "test_tags": test_tags}
    try:
        if "/" in text:
            a, b = text.split("/", 1)
            fraction = float(a) / (float(a) + float(b))
        elif text.endswith("%"):
            fraction = float(text[:-1]) / 100.0
        else:
            fraction = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse split spec {text!r}") from exc
    return {"fraction": fraction}


def _train_config(cfg: dict, seed: int, learning_rate, epochs, batch_size) -> TrainConfig:
    section = dict(cfg.get("train", {}))
    if learning_rate is not None:
        section["learning_rate"] = learning_rate
    if epochs is not None:
        section["epochs"] = epochs
    if batch_size is not None:
        section["batch_size"] = batch_size
    section["seed"] = seed
    try:
        return TrainConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"invalid train config: {exc}") from exc


@click.group()
@click.option(
    "--log-level",
    envvar="UROEVENT_LOG",
    default="WARNING",
    show_default=True,
    help="Logging level (also via the UROEVENT_LOG environment variable).",
)
def main(log_level: str) -> None:
    """Event classification for single-channel bladder-pressure traces."""
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.WARNING))


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Corpus output directory.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--n-traces", type=int, default=None)
@click.option("--duration", type=float, default=None, help="Trace duration in seconds.")
@click.option("--noise", type=float, default=None, help="Additive Gaussian noise sigma.")
@click.option("--abd", type=int, default=None, help="ABD events per trace.")
@click.option("--do", "do_", type=int, default=None, help="DO events per trace.")
@click.option("--void", type=int, default=None, help="VOID events per trace.")
@click.option("--abd-in-void", is_flag=True, default=False)
@click.option("--fs", type=float, default=None, help="Sampling rate (10 or 100 Hz).")
@click.option("--tags", default=None, help="Comma-separated dataset tags, assigned cyclically.")
@_fail_on_error
def synth(out, config_path, seed, n_traces, duration, noise, abd, do_, void, abd_in_void, fs, tags):
    """Generate a seeded synthetic corpus with ground-truth annotations."""
    cfg = _load_config(config_path)
    section = dict(cfg.get("synth", {}))
    if seed is not None:
        section["seed"] = seed
    if n_traces is not None:
        section["n_traces"] = n_traces
    if duration is not None:
        section["duration_s"] = duration
    if noise is not None:
        section["noise_sigma"] = noise
    if fs is not None:
        section["fs"] = fs
    if abd_in_void:
        section["abd_in_void"] = True
    counts = dict(section.get("events_per_trace", {"ABD": 3, "DO": 2, "VOID": 1}))
    for key, value in (("ABD", abd), ("DO", do_), ("VOID", void)):
        if value is not None:
            counts[key] = value
    section["events_per_trace"] = counts
    config = SynthConfig.from_dict(section)

    out_dir = Path(out)
    traces = generate(config)
    for trace in traces:
        save_trace(trace, out_dir)
    tag_list = (_opt(tags, cfg, "tags", "A") or "A").split(",")
    tag_map = {t.trace_id: tag_list[i % len(tag_list)] for i, t in enumerate(traces)}
    save_dataset_tags(tag_map, out_dir / "datasets.csv")
    run_manifest.write_manifest(out_dir, "synth", config.to_dict(), config.seed, [])
    click.echo(f"wrote {len(traces)} traces to {out_dir}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@_fail_on_error
def ingest(corpus, out):
    """Validate and resample a corpus to 10 Hz."""
    corpus_dir = Path(corpus)
    out_dir = Path(out)
    traces = load_corpus(corpus_dir)
    if not traces:
        raise MissingArtifactError(f"no *.pves.csv traces found in {corpus_dir}")
    for trace in traces:
        save_trace(resample_to_10hz(trace), out_dir)
    datasets = corpus_dir / "datasets.csv"
    if datasets.exists():
        shutil.copyfile(datasets, out_dir / "datasets.csv")
    inputs = sorted(corpus_dir.glob("*.csv"))
    run_manifest.write_manifest(out_dir, "ingest", {"corpus": str(corpus)}, None, inputs)
    click.echo(f"ingested {len(traces)} traces into {out_dir}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--balance-none", "balance", is_flag=True, default=False,
              help="Subsample NONE segments to the combined event-segment count.")
@click.option("--dump-coefficients", is_flag=True, default=False,
              help="Write per-trace wavelet coefficient series for inspection.")
@_fail_on_error
def featurize(corpus, out, config_path, seed, balance, dump_coefficients):
    """Extract segment features and aggregate events from a corpus."""
    cfg = _load_config(config_path)
    seed = _opt(seed, cfg, "seed", 0)
    corpus_dir = Path(corpus)
    out_dir = Path(out)
    traces = [resample_to_10hz(t) for t in load_corpus(corpus_dir)]
    if not traces:
        raise MissingArtifactError(f"no *.pves.csv traces found in {corpus_dir}")
    matrix = extract_all(traces)
    if balance:
        matrix = balance_none(matrix, seed)
    matrix.to_csv(out_dir / "segments.csv")
    events_to_csv(build_events(matrix), out_dir / "events.csv")
    datasets = corpus_dir / "datasets.csv"
    if datasets.exists():
        shutil.copyfile(datasets, out_dir / "datasets.csv")
    if dump_coefficients:
        for trace in traces:
            decomp = dwt5_db2(trace.samples)
            with open(out_dir / f"{trace.trace_id}.coeffs.csv", "w", newline="\n",
                      encoding="utf-8") as fh:
                fh.write("level,index,value\n")
                for k in range(5):
                    for name, series in ((f"cA{k+1}", decomp.approx[k]), (f"cD{k+1}", decomp.detail[k])):
                        for i, v in enumerate(series):
                            fh.write(f"{name},{i},{float(v)!r}\n")
    inputs = sorted(corpus_dir.glob("*.csv"))
    config = {"corpus": str(corpus), "balance_none": balance}
    run_manifest.write_manifest(out_dir, "featurize", config, seed, inputs)
    click.echo(f"featurized {len(traces)} traces: {matrix.n_rows} segments")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True),
              help="Featurize output directory (holds events.csv).")
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["single", "two-stage", "cascaded"]), default=None)
@click.option("--split", "split_spec", default=None,
              help="F%% / A/B fraction or manifest:<trainTags>-><testTags>.")
@click.option("--seed", type=int, default=None)
@click.option("--datasets", type=click.Path(), default=None,
              help="trace_id,tag manifest for named splits (default: <data>/datasets.csv).")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@_fail_on_error
def train(data, out, mode, split_spec, seed, datasets, config_path, learning_rate, epochs, batch_size):
    """Split by trace and train the selected classifier configuration."""
    cfg = _load_config(config_path)
    mode = _opt(mode, cfg, "mode", "two-stage")
    split_spec = _opt(split_spec, cfg, "split", "60/40")
    seed = _opt(seed, cfg, "seed", 0)
    data_dir = Path(data)
    out_dir = Path(out)
    events_path = data_dir / "events.csv"
    if not events_path.exists():
        raise MissingArtifactError(f"{events_path} not found; run featurize first")
    events = events_from_csv(events_path)

    split_args = parse_split(split_spec)
    inputs = [events_path]
    if "train_tags" in split_args:
        tags_path = Path(_opt(datasets, cfg, "datasets", data_dir / "datasets.csv"))
        if not tags_path.exists():
            raise MissingArtifactError(f"dataset manifest {tags_path} not found")
        plan = split_by_trace(
            events,
            seed=seed,
            dataset_tags=load_dataset_tags(tags_path),
            train_tags=split_args["train_tags"],
            test_tags=split_args["test_tags"],
        )
        inputs.append(tags_path)
    else:
        plan = split_by_trace(events, train_fraction=split_args["fraction"], seed=seed)
    split_to_csv(plan, out_dir / "split.csv")

    train_cfg = _train_config(cfg, seed, learning_rate, epochs, batch_size)
    if mode == "single":
        model = train_single_stage(events, plan, train_cfg)
        save_model(model, out_dir / "single.model")
    else:
        model = train_two_stage(events, plan, train_cfg)
        save_two_stage(model, out_dir)
    config = {
        "mode": mode,
        "split": split_spec,
        "train": train_cfg.to_dict(),
        "data": str(data),
    }
    run_manifest.write_manifest(out_dir, "train", config, seed, inputs)
    n_train = len(events_in(events, plan.train_trace_ids))
    click.echo(f"trained {mode} model on {n_train} events -> {out_dir}")


def _load_events_and_split(data_dir: Path, model_dir: Path):
    events_path = data_dir / "events.csv"
    split_path = model_dir / "split.csv"
    for p in (events_path, split_path):
        if not p.exists():
            raise MissingArtifactError(f"{p} not found")
    return events_from_csv(events_path), split_from_csv(split_path), [events_path, split_path]


def _load_model_for_mode(model_dir: Path, mode: str):
    if mode == "single":
        path = model_dir / "single.model"
        if not path.exists():
            raise MissingArtifactError(f"{path} not found; train with --mode single first")
        return load_model(path), [path]
    paths = [model_dir / "stage1.model", model_dir / "stage2.model"]
    for p in paths:
        if not p.exists():
            raise MissingArtifactError(f"{p} not found; train with --mode two-stage first")
    return load_two_stage(model_dir), paths


@main.command(name="evaluate")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["single", "two-stage", "cascaded"]),
              default="two-stage", show_default=True)
@click.option("--corpus", type=click.Path(exists=True), default=None,
              help="Trace directory; when given, per-trace overlay files are written.")
@_fail_on_error
def evaluate_cmd(data, model_dir, out, mode, corpus):
    """Score the test side of the split and write metric/ROC/confusion tables."""
    data_dir = Path(data)
    model_dir = Path(model_dir)
    out_dir = Path(out)
    events, plan, inputs = _load_events_and_split(data_dir, model_dir)
    model, model_paths = _load_model_for_mode(model_dir, mode)
    inputs.extend(model_paths)
    test_events = events_in(events, plan.test_trace_ids)
    if not test_events:
        raise MissingArtifactError("split has no test events to evaluate")
    X = np.vstack([e.features for e in test_events])
    y = np.asarray([e.label.value for e in test_events])

    if mode == "single":
        probs = model.predict_proba(X)
        report = evaluate(model.predict(X), y, SINGLE_CLASSES, scores=probs)
        metrics_to_csv(report, out_dir / "metrics_single.csv")
        confusion_to_csv(report, out_dir / "confusion_single.csv")
        roc_to_csv(report.roc_points, out_dir / "roc_single.csv")
        with open(out_dir / "predictions_single.csv", "w", newline="\n", encoding="utf-8") as fh:
            fh.write("trace_id,first_segment,last_segment,predicted,p_abd,p_do,p_void\n")
            for e, lbl, p in zip(test_events, model.predict(X), probs):
                fh.write(
                    f"{e.trace_id},{e.first_segment},{e.last_segment},{lbl},"
                    f"{float(p[0])!r},{float(p[1])!r},{float(p[2])!r}\n"
                )
        predicted_labels = [EventLabel(str(v)) for v in model.predict(X)]
    else:
        p1, p2 = model.stage_probas(X)
        y1 = np.where(y == STAGE1_VOID, STAGE1_VOID, STAGE1_NONVOID)
        s1_classes = (STAGE1_VOID, STAGE1_NONVOID)
        s1_scores = np.column_stack(
            [p1[:, model.stage1_.classes_ == c].ravel() for c in s1_classes]
        )
        report1 = evaluate(model.predict_stage1(X), y1, s1_classes, scores=s1_scores)
        metrics_to_csv(report1, out_dir / "metrics_stage1.csv")
        confusion_to_csv(report1, out_dir / "confusion_stage1.csv")
        roc_to_csv(report1.roc_points, out_dir / "roc_stage1.csv")

        nonvoid = np.flatnonzero(y != STAGE1_VOID)
        s2_classes = ("ABD", "DO")
        if nonvoid.size:
            _, p2_sub = model.stage_probas(X[nonvoid])
            s2_scores = np.column_stack(
                [p2_sub[:, model.stage2_.classes_ == c].ravel() for c in s2_classes]
            )
            report2 = evaluate(
                model.predict_stage2(X[nonvoid]), y[nonvoid], s2_classes, scores=s2_scores
            )
            metrics_to_csv(report2, out_dir / "metrics_stage2.csv")
            confusion_to_csv(report2, out_dir / "confusion_stage2.csv")
            roc_to_csv(report2.roc_points, out_dir / "roc_stage2.csv")

        records = predict_cascaded(model, test_events)
        cascaded = [r.cascaded_label.value for r in records]
        report3 = evaluate(cascaded, y, SINGLE_CLASSES, scores=model.predict_proba(X))
        metrics_to_csv(report3, out_dir / "metrics_cascaded.csv")
        confusion_to_csv(report3, out_dir / "confusion_cascaded.csv")
        roc_to_csv(report3.roc_points, out_dir / "roc_cascaded.csv")
        predictions_to_csv(records, out_dir / "predictions.csv")
        predicted_labels = [r.cascaded_label for r in records]

    if corpus is not None:
        corpus_dir = Path(corpus)
        by_trace: dict[str, list] = {}
        for e, lbl in zip(test_events, predicted_labels):
            by_trace.setdefault(e.trace_id, []).append((e.first_segment, e.last_segment, lbl))
        for trace_id in plan.test_trace_ids:
            pves = corpus_dir / f"{trace_id}.pves.csv"
            if not pves.exists():
                continue
            trace = resample_to_10hz(load_trace(pves))
            write_overlay(trace, by_trace.get(trace_id, []), out_dir / f"{trace_id}.overlay.csv")

    config = {"mode": mode, "data": str(data), "model": str(model_dir)}
    run_manifest.write_manifest(out_dir, "evaluate", config, None, inputs)
    click.echo(f"evaluated {len(test_events)} test events -> {out_dir}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["single", "two-stage", "cascaded"]),
              default="two-stage", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--repeats", type=int, default=5, show_default=True)
@_fail_on_error
def pfi(data, model_dir, out, mode, seed, repeats):
    """Permutation feature importance on the test events."""
    data_dir = Path(data)
    model_dir = Path(model_dir)
    out_dir = Path(out)
    events, plan, inputs = _load_events_and_split(data_dir, model_dir)
    model, model_paths = _load_model_for_mode(model_dir, mode)
    inputs.extend(model_paths)
    test_events = events_in(events, plan.test_trace_ids)
    X = np.vstack([e.features for e in test_events]) if test_events else np.empty((0, 55))
    y = np.asarray([e.label.value for e in test_events])

    if mode == "single":
        report = permutation_importance(model, X, y, seed, repeats, FEATURE_NAMES)
        pfi_to_csv(report, out_dir / "pfi_single.csv")
    else:
        y1 = np.where(y == STAGE1_VOID, STAGE1_VOID, STAGE1_NONVOID)
        stage1_view = SimpleNamespace(predict=model.predict_stage1)
        report1 = permutation_importance(stage1_view, X, y1, seed, repeats, FEATURE_NAMES)
        pfi_to_csv(report1, out_dir / "pfi_stage1.csv")
        nonvoid = np.flatnonzero(y != STAGE1_VOID)
        stage2_view = SimpleNamespace(predict=model.predict_stage2)
        report2 = permutation_importance(
            stage2_view, X[nonvoid], y[nonvoid], seed, repeats, FEATURE_NAMES
        )
        pfi_to_csv(report2, out_dir / "pfi_stage2.csv")

    config = {"mode": mode, "repeats": repeats}
    run_manifest.write_manifest(out_dir, "pfi", config, seed, inputs)
    click.echo(f"permutation importance written to {out_dir}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--baseline-window", type=float, default=60.0, show_default=True,
              help="Rolling-median baseline window in seconds.")
@click.option("--threshold", type=float, default=5.0, show_default=True,
              help="Pressure rise over baseline (cmH2O) marking active segments.")
@_fail_on_error
def predict(corpus, model_dir, out, baseline_window, threshold):
    """Propose candidate events on unannotated traces and classify them."""
    corpus_dir = Path(corpus)
    model_dir = Path(model_dir)
    out_dir = Path(out)
    model, model_paths = _load_model_for_mode(model_dir, "two-stage")
    traces = [resample_to_10hz(t) for t in load_corpus(corpus_dir)]
    if not traces:
        raise MissingArtifactError(f"no *.pves.csv traces found in {corpus_dir}")
    all_records = []
    for trace in traces:
        candidates = propose_events(trace, baseline_window, threshold)
        records = predict_cascaded(model, candidates)
        all_records.extend(records)
        spans = [(r.first_segment, r.last_segment, r.cascaded_label) for r in records]
        write_overlay(trace, spans, out_dir / f"{trace.trace_id}.overlay.csv")
    predictions_to_csv(all_records, out_dir / "predictions.csv")
    inputs = sorted(corpus_dir.glob("*.csv")) + model_paths
    config = {"baseline_window": baseline_window, "threshold": threshold}
    run_manifest.write_manifest(out_dir, "predict", config, None, inputs)
    click.echo(f"proposed and classified {len(all_records)} events -> {out_dir}")


if __name__ == "__main__":
    main()
