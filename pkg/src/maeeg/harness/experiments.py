"""Experiment commands: pretrain, probe, fine-tune, sweeps, attention, report.

Each ``cmd_*`` takes a resolved config dict (see :mod:`maeeg.harness.config`),
writes its artifacts plus ``config.resolved`` to the output directory and
returns a small dict describing what it produced.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from maeeg.checkpoint import load_model
from maeeg.core import Rng, Tensor, cross_entropy, derive_seed, make_optimizer, no_grad
from maeeg.data import Dataset, SynthSpec, load_dataset, split_dataset, stack, synth_dataset
from maeeg.downstream import DownstreamConfig, DownstreamModel, finetune_train, probe_train
from maeeg.encoder import SAMPLE_RATE, token_length
from maeeg.errors import ConfigError, ContractError, DataError, MaeegError
from maeeg.harness import svg
from maeeg.harness.config import config_hash, output_dir, read_resolved_hash, write_resolved
from maeeg.masking import MaskSpec
from maeeg.model import ModelConfig, build_model, tiny_config
from maeeg.objectives import ContrastiveConfig, PretrainConfig, pretrain_run
from maeeg.report import read_rows, write_rows
from maeeg.transformer import TransformerConfig, attention_maps

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["rate", "chunks", "label_fraction", "seed", "cell_seed", "ssl_loss", "accuracy",
                 "best_epoch", "n_train", "status"]
SPAN_COLUMNS = ["span", "rate", "mode", "seed", "cell_seed", "ssl_loss", "label_fraction", "accuracy",
                "best_epoch", "n_train", "status"]


# ----------------------------------------------------------------------
# config -> library objects


def model_config(cfg: dict, mode: str | None = None) -> ModelConfig:
    mode = mode or cfg["mode"]
    if cfg["model"] == "tiny":
        return tiny_config(mode, tap_layer=cfg["tap_layer"])
    if cfg["model"] != "full":
        raise ConfigError(f"model must be full or tiny, got {cfg['model']!r}")
    return ModelConfig(mode, transformer=TransformerConfig(tap_layer=cfg["tap_layer"]))


def mask_spec(cfg: dict) -> MaskSpec:
    rate, chunks, span = cfg["mask_rate"], cfg["mask_chunks"], cfg["mask_span"]
    if span is not None:
        if rate is not None or chunks is not None:
            raise ConfigError("mask_span cannot be combined with mask_rate/mask_chunks")
        return MaskSpec.single_span(span)
    if rate is not None or chunks is not None:
        if rate is None or chunks is None:
            raise ConfigError("systematic masking needs both mask_rate and mask_chunks")
        return MaskSpec.systematic(rate, chunks)
    return MaskSpec.probabilistic(cfg["mask_p"], cfg["mask_len"])


def pretrain_config(cfg: dict, mode: str | None = None, mask: MaskSpec | None = None,
                    seed: int | None = None) -> PretrainConfig:
    return PretrainConfig(
        mode=mode or cfg["mode"],
        sample_length=cfg["sample_length"],
        mask=mask if mask is not None else mask_spec(cfg),
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        optimizer=cfg["optimizer"],
        grad_clip=cfg["grad_clip"] or None,
        seed=cfg["seed"] if seed is None else seed,
        contrastive=ContrastiveConfig(cfg["temperature"], cfg["negatives"]),
    )


def downstream_config(cfg: dict, regime: str, seed: int | None = None,
                      label_fraction: float | None = None, epochs: int | None = None) -> DownstreamConfig:
    lr = cfg["probe_lr"] if regime == "frozen-probe-t" else cfg["finetune_lr"]
    fraction = cfg["label_fraction"] if label_fraction is None else label_fraction
    return DownstreamConfig(
        regime=regime,
        tap_layer=cfg["tap_layer"],
        epochs=epochs or cfg["downstream_epochs"],
        validate_every=cfg["validate_every"],
        batch_size=cfg["downstream_batch_size"],
        lr=lr,
        label_fraction=fraction,
        n_subjects=cfg["n_subjects"] if fraction is None else None,
        seed=cfg["seed"] if seed is None else seed,
    )


def get_dataset(cfg: dict) -> Dataset:
    if cfg["data"]:
        return load_dataset(cfg["data"])
    spec = SynthSpec(
        records_per_class=cfg["synth_records_per_class"],
        subjects=cfg["synth_subjects"],
        sessions_per_subject=cfg["synth_sessions"],
        length=cfg["sample_length"] * SAMPLE_RATE,
        noise=cfg["synth_noise"],
        seed=cfg["synth_seed"],
    )
    return synth_dataset(spec)


def get_splits(ds: Dataset, seed: int):
    train, val, test = split_dataset(ds, Rng(seed).child("split"))
    for name, part in (("train", train), ("validation", val), ("test", test)):
        part.require_nonempty(f"{name} split")
    return train, val, test


def load_bundle(cfg: dict, path=None):
    path = path or cfg["checkpoint"]
    if not path:
        raise ConfigError("this command needs a checkpoint (--checkpoint PATH)")
    model, meta = load_model(path)
    return model, meta


def _prepare(cfg: dict, command: str) -> Path:
    out = output_dir(cfg, command)
    write_resolved(cfg, out, command)
    return out


# ----------------------------------------------------------------------
# pretrain / probe / finetune


def cmd_pretrain(cfg: dict) -> dict:
    pcfg = pretrain_config(cfg)
    ds = get_dataset(cfg)
    out = _prepare(cfg, "pretrain")
    model, report = pretrain_run(ds, pcfg, model_config(cfg), out_dir=out)
    report.write(out, "pretrain_")
    return {"out": out, "checkpoint": out / "final.maec", "best": out / "best.maec",
            "final_loss": report.metric_rows[-1]["mean_loss"]}


def _state_bytes(module) -> dict:
    return {k: v.tobytes() for k, v in module.state_dict().items()}


def cmd_probe(cfg: dict) -> dict:
    bundle, _ = load_bundle(cfg)
    ds = get_dataset(cfg)
    train, val, test = get_splits(ds, cfg["seed"])
    out = _prepare(cfg, "probe")
    dcfg = downstream_config(cfg, "frozen-probe-t")
    inits = [("pretrained", bundle)]
    if cfg["with_baseline"]:
        inits.append(("random-init", build_model(bundle.config, cfg["seed"])))
    metric_rows, validation_rows = [], []
    for name, model in inits:
        before = _state_bytes(model.encoder)
        _, metrics, report = probe_train(model, train, val, test, dcfg)
        frozen = before == _state_bytes(model.encoder)
        if not frozen:
            raise ContractError("frozen probe modified encoder parameters")
        log.info("probe %s: accuracy %.4f (encoder frozen: %s)", name, metrics.accuracy, frozen)
        metric_rows += [{"init": name, "encoder_frozen": frozen, **row} for row in report.metric_rows]
        validation_rows += [{"init": name, **row} for row in report.validation_rows]
        _write_confusion(out / f"probe_{name}_confusion.csv", metrics.confusion)
    write_rows(out / "probe_metrics.csv", metric_rows)
    write_rows(out / "probe_validation.csv", validation_rows)
    return {"out": out, "rows": metric_rows}


def _write_confusion(path, confusion):
    rows = [{"true": i, **{f"pred_{j}": int(v) for j, v in enumerate(row)}} for i, row in enumerate(confusion)]
    write_rows(path, rows)


def cmd_finetune(cfg: dict) -> dict:
    paths = list(cfg["checkpoints"] or ([] if cfg["checkpoint"] is None else [cfg["checkpoint"]]))
    if not paths and not cfg["with_baseline"]:
        raise ConfigError("finetune needs --checkpoint and/or --with-baseline")
    ds = get_dataset(cfg)
    train, val, test = get_splits(ds, cfg["seed"])
    out = _prepare(cfg, "finetune")
    runs = []
    for path in paths:
        bundle, meta = load_bundle(cfg, path)
        runs.append((f"{bundle.mode}-init", "finetune-c", bundle))
    if cfg["with_baseline"]:
        base_cfg = runs[0][2].config if runs else model_config(cfg)
        runs.append(("baseline", "supervised-baseline", build_model(base_cfg.with_mode("supervised-baseline"),
                                                                    cfg["seed"])))
    metric_rows, validation_rows = [], []
    for name, regime, bundle in runs:
        _, metrics, report = finetune_train(bundle, train, val, test, downstream_config(cfg, regime))
        log.info("finetune %s: accuracy %.4f", name, metrics.accuracy)
        metric_rows += [{"init": name, **row} for row in report.metric_rows]
        validation_rows += [{"init": name, **row} for row in report.validation_rows]
        _write_confusion(out / f"finetune_{name}_confusion.csv", metrics.confusion)
    write_rows(out / "finetune_metrics.csv", metric_rows)
    write_rows(out / "finetune_validation.csv", validation_rows)
    return {"out": out, "rows": metric_rows, "validation_rows": validation_rows}


# ----------------------------------------------------------------------
# sweeps


def _pretrain_and_finetune(cfg: dict, pretrain_ds: Dataset, splits, mode: str, mask: MaskSpec,
                           cell_seed: int, fractions: list):
    """Pretrain one cell, then fine-tune at each label fraction.

    Returns ``(ssl_loss, loss_rows, [(fraction, metrics_row) ...])``.
    """
    pcfg = pretrain_config(cfg, mode=mode, mask=mask, seed=cell_seed)
    mcfg = model_config(cfg, mode)
    model, report = pretrain_run(pretrain_ds, pcfg, mcfg)
    ssl_loss = report.metric_rows[-1]["mean_loss"]
    state = model.state_dict()
    results = []
    train, val, test = splits
    for fraction in fractions:
        model.load_state_dict(state)
        dcfg = downstream_config(cfg, "finetune-c", seed=cell_seed,
                                 label_fraction=None if fraction is None or fraction >= 1.0 else fraction)
        _, metrics, rep = finetune_train(model, train, val, test, dcfg)
        results.append((fraction, rep.metric_rows[-1]))
    return ssl_loss, report.metric_rows, results


def _mask_cell(job):
    cfg, pretrain_ds, splits, rate, chunks, seed = job
    cell_seed = derive_seed(seed, "mask-sweep", rate, chunks)
    fractions = cfg["label_fractions"]
    base = {"rate": rate, "chunks": chunks, "seed": seed, "cell_seed": cell_seed}
    try:
        mask = MaskSpec.systematic(rate, chunks)
        mask.check_feasible(token_length(cfg["sample_length"] * SAMPLE_RATE, model_config(cfg).encoder))
        ssl_loss, loss_rows, results = _pretrain_and_finetune(cfg, pretrain_ds, splits, cfg["mode"], mask,
                                                              cell_seed, fractions)
    except MaeegError as exc:
        status = f"failed: {exc}"
        log.warning("mask-sweep cell rate=%s chunks=%s seed=%s %s", rate, chunks, seed, status)
        rows = [{**base, "label_fraction": f, "ssl_loss": "", "accuracy": "", "best_epoch": "",
                 "n_train": "", "status": status} for f in fractions]
        return rows, []
    rows = [{**base, "label_fraction": f, "ssl_loss": ssl_loss, "accuracy": m["accuracy"],
             "best_epoch": m["best_epoch"], "n_train": m["n_train"], "status": "ok"} for f, m in results]
    loss_rows = [{**base, **r} for r in loss_rows]
    return rows, loss_rows


def _run_jobs(fn, jobs, workers: int):
    """Run ``fn`` over ``jobs``; results come back in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _require_100s(cfg: dict, mask: MaskSpec):
    # PretrainConfig refuses 30 s data for systematic and span masks
    PretrainConfig(mode=cfg["mode"], sample_length=cfg["sample_length"], mask=mask)


def _sweep_data(cfg: dict):
    ds = get_dataset(cfg)
    train, val, test = get_splits(ds, cfg["seed"])
    return Dataset(train.records + val.records), (train, val, test)


def _order_fraction_first(rows: list, fractions: list) -> list:
    """Group rows by (label_fraction, seed) keeping grid order inside each group."""
    order = {f: i for i, f in enumerate(fractions)}
    return sorted(rows, key=lambda r: (order[r["label_fraction"]], r["seed"]))


def cmd_mask_sweep(cfg: dict) -> dict:
    rates = [float(r) for r in cfg["sweep_rates"]]
    chunks = [int(k) for k in cfg["sweep_chunks"]]
    _require_100s(cfg, MaskSpec.systematic(rates[0], chunks[0]))
    pretrain_ds, splits = _sweep_data(cfg)
    out = _prepare(cfg, "mask-sweep")
    jobs = [(cfg, pretrain_ds, splits, r, k, int(s)) for s in cfg["seeds"] for r in rates for k in chunks]
    results = _run_jobs(_mask_cell, jobs, cfg["workers"])
    rows = _order_fraction_first([row for cell_rows, _ in results for row in cell_rows], cfg["label_fractions"])
    loss_rows = [row for _, cell_loss in results for row in cell_loss]
    write_rows(out / "mask_sweep.csv", rows, SWEEP_COLUMNS)
    if loss_rows:
        write_rows(out / "mask_sweep_loss.csv", loss_rows)
    for fraction in cfg["label_fractions"]:
        svg.write_svg(out / f"mask_sweep_f{fraction}.svg", sweep_heatmap(rows, fraction, rates, chunks))
    return {"out": out, "rows": rows}


def sweep_heatmap(rows: list, fraction, rates: list, chunks: list, key: str = "accuracy") -> str:
    grid = []
    for r in rates:
        line = []
        for k in chunks:
            vals = [float(row[key]) for row in rows
                    if float(row["rate"]) == r and int(row["chunks"]) == k
                    and float(row["label_fraction"]) == float(fraction) and row[key] not in ("", None)]
            line.append(float(np.mean(vals)) if vals else math.nan)
        grid.append(line)
    return svg.heatmap(grid, [f"rate {r}" for r in rates], [f"{k} chunks" for k in chunks],
                       title=f"{key}, label fraction {fraction}")


def _span_cell(job):
    cfg, pretrain_ds, splits, span, mode, seed, n_tokens = job
    cell_seed = derive_seed(seed, "span-sweep", span, mode)
    fraction = cfg["label_fraction"]
    base = {"span": span, "rate": span / n_tokens, "mode": mode, "seed": seed, "cell_seed": cell_seed,
            "label_fraction": 1.0 if fraction is None else fraction}
    try:
        ssl_loss, loss_rows, results = _pretrain_and_finetune(cfg, pretrain_ds, splits, mode,
                                                              MaskSpec.single_span(span), cell_seed, [fraction])
    except MaeegError as exc:
        status = f"failed: {exc}"
        log.warning("span-sweep cell span=%s mode=%s seed=%s %s", span, mode, seed, status)
        return {**base, "ssl_loss": "", "accuracy": "", "best_epoch": "", "n_train": "", "status": status}, []
    m = results[0][1]
    return ({**base, "ssl_loss": ssl_loss, "accuracy": m["accuracy"], "best_epoch": m["best_epoch"],
             "n_train": m["n_train"], "status": "ok"}, [{**base, **r} for r in loss_rows])


def cmd_span_sweep(cfg: dict) -> dict:
    spans = [int(s) for s in cfg["sweep_spans"]]
    modes = [str(m) for m in cfg["sweep_modes"]]
    for mode in modes:
        if mode not in ("maeeg", "bendr"):
            raise ConfigError(f"span-sweep modes must be maeeg or bendr, got {mode!r}")
    _require_100s(cfg, MaskSpec.single_span(spans[0]))
    n_tokens = token_length(cfg["sample_length"] * SAMPLE_RATE, model_config(cfg).encoder)
    too_long = [s for s in spans if s > n_tokens]
    if too_long:
        raise ConfigError(f"spans {too_long} exceed the {n_tokens} tokens of a {cfg['sample_length']} s sample")
    pretrain_ds, splits = _sweep_data(cfg)
    out = _prepare(cfg, "span-sweep")
    jobs = [(cfg, pretrain_ds, splits, span, mode, int(seed), n_tokens)
            for seed in cfg["seeds"] for mode in modes for span in spans]
    results = _run_jobs(_span_cell, jobs, cfg["workers"])
    rows = [row for row, _ in results]
    loss_rows = [r for _, lr in results for r in lr]
    write_rows(out / "span_sweep.csv", rows, SPAN_COLUMNS)
    if loss_rows:
        write_rows(out / "span_sweep_loss.csv", loss_rows)
    svg.write_svg(out / "span_sweep.svg", span_chart(rows))
    return {"out": out, "rows": rows}


def span_chart(rows: list) -> str:
    series = {}
    for mode in sorted({r["mode"] for r in rows}):
        spans = sorted({int(r["span"]) for r in rows if r["mode"] == mode})
        ys = []
        for s in spans:
            vals = [float(r["accuracy"]) for r in rows
                    if r["mode"] == mode and int(r["span"]) == s and r["accuracy"] not in ("", None)]
            ys.append(float(np.mean(vals)) if vals else math.nan)
        series[mode] = (spans, ys)
    return svg.line_chart(series, "accuracy vs mask span", "span (tokens)", "accuracy")


# ----------------------------------------------------------------------
# attention


def stabilize(bundle, ds: Dataset, cfg: dict, subject: int | None = None) -> int:
    """One epoch of supervised fine-tuning on a single subject's records.

    Returns the subject id used.  The classifier reads the tap layer; only
    parameters up to that layer move.
    """
    subjects = sorted({r.subject_id for r in ds})
    subject = subjects[0] if subject is None else subject
    records = Dataset([r for r in ds if r.subject_id == subject])
    records.require_nonempty(f"records of subject {subject}")
    rng = Rng(cfg["seed"]).child("stabilize")
    model = DownstreamModel(bundle, "finetune-c", cfg["tap_layer"], rng.child("classifier"))
    params = model.trainable_parameters()
    opt = make_optimizer(cfg["optimizer"], params, cfg["finetune_lr"] or 3e-4)
    signals, labels = stack(records.records)
    order = rng.child("order").permutation(len(records))
    bs = cfg["downstream_batch_size"]
    for step, start in enumerate(range(0, len(order), bs)):
        idx = order[start : start + bs]
        model.train(rng.child("step", step))
        loss = cross_entropy(model(signals[idx]), labels[idx])
        opt.zero_grad()
        loss.backward()
        opt.step()
    bundle.eval()
    return subject


def attention_matrix(bundle, signal: np.ndarray, layer: int) -> np.ndarray:
    """Head-averaged attention of ``layer`` (1-based) for one record."""
    n_layers = bundle.config.transformer.layers
    if not 1 <= layer <= n_layers:
        raise ConfigError(f"layer must lie in [1, {n_layers}], got {layer}")
    bundle.eval()
    with no_grad():
        t = bundle.encoder(Tensor(np.asarray(signal)[None]))
        ctx = bundle.transformer(t, keep_attention=True, upto=layer)
    return attention_maps(ctx, layer).mean.astype(np.float64)


def cmd_attention(cfg: dict) -> dict:
    if cfg["checkpoint"]:
        bundle, _ = load_bundle(cfg)
        source = "checkpoint"
    else:
        bundle = build_model(model_config(cfg), cfg["seed"])
        source = "random-init"
    ds = get_dataset(cfg)
    if not 0 <= cfg["record_index"] < len(ds):
        raise DataError(f"record_index {cfg['record_index']} outside dataset of {len(ds)} records")
    out = _prepare(cfg, "attention")
    subject = ""
    if cfg["stabilize"]:
        subject = stabilize(bundle, ds, cfg, cfg["stabilize_subject"])
    layer = cfg["layer"]
    amap = attention_matrix(bundle, ds[cfg["record_index"]].signal, layer)
    path = out / f"attention_layer{layer}.csv"
    np.savetxt(path, amap, delimiter=",", fmt="%.9g")
    spread = amap.max(axis=1) - amap.min(axis=1)
    rows = [{"row": i, "row_sum": float(amap[i].sum()), "max_minus_min": float(spread[i])}
            for i in range(amap.shape[0])]
    write_rows(out / f"attention_layer{layer}_rows.csv", rows)
    write_rows(out / "attention_summary.csv", [{
        "source": source, "layer": layer, "n_tokens": amap.shape[0], "record_index": cfg["record_index"],
        "stabilized_subject": subject, "max_row_sum_error": float(np.max(np.abs(amap.sum(axis=1) - 1.0))),
        "mean_spread": float(spread.mean()), "frac_rows_spread_gt_0.15": float(np.mean(spread > 0.15)),
    }])
    svg.write_svg(out / f"attention_layer{layer}.svg",
                  svg.heatmap(amap.tolist(), title=f"layer {layer} attention ({source})", annotate=False))
    return {"out": out, "matrix": amap, "csv": path}


# ----------------------------------------------------------------------
# report


def _mean(values):
    vals = [float(v) for v in values if v not in ("", None)]
    return float(np.mean(vals)) if vals else math.nan


def emit_report(cfg: dict) -> dict:
    """Render SVGs for whatever artifacts exist under the output directory.

    Missing artifacts are listed in ``summary.csv`` rather than failing.
    """
    root = output_dir(cfg, "report")
    root.mkdir(parents=True, exist_ok=True)
    digest = read_resolved_hash(root)
    if digest is None:
        write_resolved(cfg, root, "report")
        digest = config_hash(cfg)
    summary = []

    def find(name):
        hits = sorted(root.rglob(name))
        return hits[0] if hits else None

    def note(artifact, path, produced):
        summary.append({"artifact": artifact, "status": "present" if path else "missing",
                        "source": "" if path is None else str(path.relative_to(root)),
                        "outputs": ";".join(produced), "config_hash": digest})

    path = find("pretrain_loss.csv")
    produced = []
    if path:
        rows = read_rows(path)
        series = {"loss": ([int(r["step"]) for r in rows], [float(r["loss"]) for r in rows])}
        svg.write_svg(root / "report_loss.svg", svg.line_chart(series, "pretraining loss", "step", "loss"))
        produced.append("report_loss.svg")
    note("pretrain_loss.csv", path, produced)

    for name, out_name, title in (("probe_metrics.csv", "report_probe.svg", "frozen probe accuracy"),
                                  ("finetune_metrics.csv", "report_finetune.svg", "fine-tune accuracy")):
        path = find(name)
        produced = []
        if path:
            rows = read_rows(path)
            svg.write_svg(root / out_name, svg.bar_chart([r["init"] for r in rows],
                                                         [float(r["accuracy"]) for r in rows], title, "accuracy"))
            produced.append(out_name)
        note(name, path, produced)

    path = find("mask_sweep.csv")
    produced = []
    if path:
        rows = read_rows(path)
        rates = sorted({float(r["rate"]) for r in rows})
        chunks = sorted({int(r["chunks"]) for r in rows})
        fractions = sorted({float(r["label_fraction"]) for r in rows})
        for f in fractions:
            name = f"report_mask_sweep_f{f}.svg"
            svg.write_svg(root / name, sweep_heatmap(rows, f, rates, chunks))
            produced.append(name)
        loss_name = "report_mask_sweep_ssl_loss.svg"
        svg.write_svg(root / loss_name, sweep_heatmap(rows, fractions[0], rates, chunks, key="ssl_loss"))
        budget = [_mean(r["accuracy"] for r in rows if float(r["label_fraction"]) == f) for f in fractions]
        svg.write_svg(root / "report_label_budget.svg",
                      svg.bar_chart([f"{f:g}" for f in fractions], budget, "accuracy vs label budget", "accuracy"))
        produced += [loss_name, "report_label_budget.svg"]
    note("mask_sweep.csv", path, produced)

    path = find("span_sweep.csv")
    produced = []
    if path:
        svg.write_svg(root / "report_span_sweep.svg", span_chart(read_rows(path)))
        produced.append("report_span_sweep.svg")
    note("span_sweep.csv", path, produced)

    hits = sorted(p for p in root.rglob("attention_layer*.csv") if not p.name.endswith("_rows.csv"))
    if not hits:
        note("attention_layer*.csv", None, [])
    for path in hits:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2)
        tag = "_".join(path.relative_to(root).with_suffix("").parts)
        name = f"report_{tag}.svg"
        svg.write_svg(root / name, svg.heatmap(matrix.tolist(), title=path.stem, annotate=False))
        note(path.name, path, [name])

    write_rows(root / "summary.csv", summary)
    return {"out": root, "rows": summary}


COMMANDS = {
    "pretrain": cmd_pretrain,
    "probe": cmd_probe,
    "finetune": cmd_finetune,
    "mask-sweep": cmd_mask_sweep,
    "span-sweep": cmd_span_sweep,
    "attention": cmd_attention,
    "report": emit_report,
}
