"""Subcommand implementations. Each reads declared inputs and writes only
under the configured output directory.

Output layout::

    <out>/cleaned.csv            preprocess
    <out>/preprocess_stats.json  preprocess
    <out>/embeddings.emb         embed (+ embeddings.json metadata)
    <out>/split.csv, test.emb    train
    <out>/models/<arch>.ckpt     train (+ <arch>_history.csv)
    <out>/eval/...               evaluate
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .config import PipelineConfig, load_config, merge
from .corpus import (
    DatasetSplit,
    LabeledRecord,
    RacismType,
    load_dataset,
    read_split_manifest,
    split_train_test,
    write_split_manifest,
)
from .embeddings import (
    build_cache,
    check_fresh,
    embed_text,
    read_cache,
    stale_rows,
    write_cache,
)
from .ensemble import EnsemblePrediction, ensemble_dataset, ensemble_proba
from .errors import CacheSpecError, ConfigError, EmptyTextError, InputError, SchemaError, StaleCacheError
from .metrics import MetricsReport, evaluate, plot_confusion, plot_history, read_report, report_table, write_report
from .models import (
    Architecture,
    Prediction,
    TrainedModel,
    build_model,
    load_checkpoint,
    predict_batch,
    predict_proba,
    save_checkpoint,
    train,
)
from .preprocess import STAGES, clean

log = logging.getLogger(__name__)

__all__ = [
    "cmd_preprocess",
    "cmd_embed",
    "cmd_train",
    "cmd_evaluate",
    "cmd_ensemble",
    "cmd_predict",
    "cmd_report",
    "run_grid",
    "read_cleaned",
    "checkpoint_path",
]

CLEANED_FIELDS = ["id", "text", "label", "stages", "removed_tokens"]


def _out(cfg: PipelineConfig, *parts: str) -> Path:
    path = cfg.out_dir.joinpath(*parts)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def checkpoint_path(cfg: PipelineConfig, arch: Architecture) -> Path:
    return cfg.out_dir / "models" / f"{arch.value}.ckpt"


def cmd_preprocess(cfg: PipelineConfig) -> Path:
    if not cfg.dataset:
        raise ConfigError("no dataset given (--dataset or 'dataset' in the config)")
    records = load_dataset(cfg.dataset)
    ccfg = cfg.preprocess.clean_config()
    changed = {s: 0 for s in STAGES}
    dropped: list[int] = []
    removed_total = 0
    out_path = _out(cfg, "cleaned.csv")
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLEANED_FIELDS)
        for r in records:
            ct = clean(r.text, ccfg)
            for s in ct.changed_by:
                changed[s] += 1
            removed_total += ct.removed_token_count
            if ct.is_empty and not cfg.preprocess.keep_empty:
                dropped.append(r.id)
                log.warning("row %d is empty after cleaning; dropped", r.id)
                continue
            w.writerow([r.id, ct.cleaned, r.racism_type.value, "|".join(ct.stages_applied), ct.removed_token_count])
    stats = {
        "rows_in": len(records),
        "rows_out": len(records) - len(dropped),
        "dropped_ids": dropped,
        "stages": list(ccfg.enabled_stages()),
        "rows_changed_by_stage": changed,
        "removed_tokens": removed_total,
    }
    _out(cfg, "preprocess_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("cleaned %d rows (%d dropped) -> %s", stats["rows_out"], len(dropped), out_path)
    return out_path


def read_cleaned(path: str | Path) -> tuple[list[LabeledRecord], list[str]]:
    """Records (ids as written) and the parallel list of cleaned texts.

    A file written with ``keep_empty`` may hold empty texts; those are
    rejected here because they cannot be embedded.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path} not found; run 'preprocess' first")
    records, texts = [], []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CLEANED_FIELDS:
            raise SchemaError(f"{path}: expected header {','.join(CLEANED_FIELDS)}")
        for row in reader:
            texts.append(row["text"])
            if row["text"].strip():
                records.append(LabeledRecord(int(row["id"]), row["text"], RacismType.parse(row["label"])))
    if len(records) != len(texts):
        raise InputError(f"{path}: contains rows that are empty after cleaning; embeddings need text")
    return records, texts


def cmd_embed(cfg: PipelineConfig, force: bool = False) -> Path:
    _, texts = read_cleaned(cfg.out_dir / "cleaned.csv")
    path = _out(cfg, "embeddings.emb")
    dim = cfg.embedding.dimension
    if path.exists() and not force:
        cache = read_cache(path)
        if cache.spec.dimension != dim:
            raise CacheSpecError(f"{path} has dimension {cache.spec.dimension}, config wants {dim}; use --force")
        bad = stale_rows(cache, texts)
        if bad:
            raise StaleCacheError(bad, f"{path} is stale at row(s) {bad[:10]} (cleaned text changed); use --force to re-embed")
        log.info("%s is up to date", path)
        return path
    provider = cfg.embedding.make_provider()
    cache = build_cache(texts, provider, cfg.embedding.batch_size, cfg.embedding.workers)
    write_cache(cache, path)
    meta = {**provider.metadata, "count": len(cache)}
    _out(cfg, "embeddings.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _load_inputs(cfg: PipelineConfig, arch: Architecture, texts: list[str]) -> np.ndarray:
    dim = cfg.embedding.dimension
    path = cfg.out_dir / "embeddings.emb"
    if not path.exists():
        raise ConfigError(f"{path} not found; run 'embed' first")
    cache = read_cache(path)
    if cache.spec.dimension != dim:
        raise ConfigError(f"embedding cache has dimension {cache.spec.dimension} but the models expect {dim}")
    check_fresh(cache, texts)
    if arch is Architecture.MCNN_LSTM and cfg.mcnn_channel_caches:
        if len(cfg.mcnn_channel_caches) != 3:
            raise ConfigError("mcnn_channel_caches needs exactly three cache files")
        chans = []
        for p in cfg.mcnn_channel_caches:
            c = read_cache(p)
            if c.spec.dimension != dim:
                raise ConfigError(f"channel cache {p} has dimension {c.spec.dimension}, expected {dim}")
            check_fresh(c, texts)
            chans.append(c.vectors)
        return np.stack(chans, axis=1)
    return cache.vectors


def _split_positions(cfg: PipelineConfig, records: list[LabeledRecord]) -> tuple[np.ndarray, np.ndarray, DatasetSplit]:
    split = split_train_test(records, cfg.split_ratio, cfg.seed, cfg.stratify)
    pos = {r.id: i for i, r in enumerate(records)}
    return np.array([pos[r.id] for r in split.train]), np.array([pos[r.id] for r in split.test]), split


def _labels(records: list[LabeledRecord]) -> np.ndarray:
    return np.array([int(r.binary_label) for r in records], dtype=np.int64)


def cmd_train(cfg: PipelineConfig, arch: Architecture | str) -> Path:
    arch = Architecture.parse(arch) if isinstance(arch, str) else arch
    mcfg, tcfg = cfg.model_config(arch), cfg.train_config(arch)
    records, texts = read_cleaned(cfg.out_dir / "cleaned.csv")
    x = _load_inputs(cfg, arch, texts)
    y = _labels(records)
    tr, te, split = _split_positions(cfg, records)
    write_split_manifest(split, _out(cfg, "split.csv"))
    full = read_cache(cfg.out_dir / "embeddings.emb")
    write_cache(full.subset(te), _out(cfg, "test.emb"))

    model = build_model(mcfg, seed=tcfg.seed)
    trained = train(model, x[tr], y[tr], x[te], y[te], tcfg)
    ckpt = checkpoint_path(cfg, arch)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(trained, ckpt)
    _write_history(trained, ckpt.with_name(f"{arch.value}_history.csv"))
    log.info("%s: final val_acc=%.4f -> %s", arch.display_name, trained.history[-1].val_acc, ckpt)
    return ckpt


def _write_history(model: TrainedModel, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for i, h in enumerate(model.history, 1):
            w.writerow([i, repr(h.train_loss), repr(h.train_acc), repr(h.val_loss), repr(h.val_acc)])


def _load_checkpoints(paths: Sequence[str | Path], flag: str = "--checkpoints") -> list[TrainedModel]:
    if not paths:
        raise ConfigError(f"{flag}: at least one checkpoint is required")
    models = []
    for p in paths:
        if not Path(p).exists():
            raise ConfigError(f"{flag}: checkpoint {p} does not exist")
        models.append(load_checkpoint(p))
    return models


def _slug(name: str) -> str:
    return name.lower().replace("-", "_").replace(" ", "_")


def cmd_evaluate(cfg: PipelineConfig, checkpoints: Sequence[str | Path]) -> list[MetricsReport]:
    """Score each checkpoint on the test partition, plus the ensemble of three."""
    models = _load_checkpoints(checkpoints)
    order = list(Architecture)
    models.sort(key=lambda m: order.index(m.config.architecture))
    records, texts = read_cleaned(cfg.out_dir / "cleaned.csv")
    _, te, _ = _split_positions(cfg, records)
    y = _labels(records)[te]
    emb_name = cfg.embedding.provider
    eval_dir = cfg.out_dir / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)

    reports, member_probs, member_inputs = [], [], []
    for m in models:
        x = _load_inputs(cfg, m.config.architecture, texts)[te]
        if m.config.input_dim != x.shape[-1]:
            raise ConfigError(f"{m.name} expects {m.config.input_dim}-dim inputs, cache has {x.shape[-1]}")
        probs = predict_batch(m, x)
        member_probs.append(probs)
        member_inputs.append(x)
        echo = {"model": m.config.to_dict(), "train": vars(m.train_config) if m.train_config else None, "seed": cfg.seed}
        reports.append(evaluate(y, (probs >= 0.5).astype(int), m.name, emb_name, echo))
        if m.history:
            plot_history(m.history, eval_dir / f"history_{_slug(m.name)}.png", f"{m.name} ({emb_name})")

    ens = None
    if len(models) == 3:
        ens = ensemble_dataset(models, member_inputs, hard_vote=cfg.hard_vote)
        echo = {"members": [m.name for m in models], "hard_vote": cfg.hard_vote, "seed": cfg.seed}
        reports.append(evaluate(y, [int(e.label) for e in ens], "Ensemble", emb_name, echo))

    for r in reports:
        write_report(r, eval_dir / f"{_slug(r.model_name)}.json")
        plot_confusion(r.confusion, eval_dir / f"confusion_{_slug(r.model_name)}.png", f"{r.model_name} ({emb_name})")
    report_table(reports, eval_dir)

    ids = [records[i].id for i in te]
    with (eval_dir / "predictions.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "true", *[_slug(m.name) for m in models], *(["ensemble", "ensemble_label"] if ens else [])])
        for k, rid in enumerate(ids):
            extra = [repr(ens[k].mean_probability), int(ens[k].label)] if ens else []
            w.writerow([rid, int(y[k]), *[repr(float(p[k])) for p in member_probs], *extra])
    return reports


def cmd_ensemble(
    checkpoints: Sequence[str | Path],
    cache_path: str | Path,
    output: str | Path,
    hard_vote: bool = False,
    split_manifest: str | Path | None = None,
) -> Path:
    """Write ``id,probability,label`` rows for every row of ``cache_path``.

    Ids come from the test partition of ``split_manifest`` when given,
    otherwise they are row positions in the cache.
    """
    models = _load_checkpoints(checkpoints)
    if len(models) != 3:
        raise ConfigError(f"--checkpoints: the ensemble needs exactly 3 checkpoints, got {len(models)}")
    if not Path(cache_path).exists():
        raise ConfigError(f"--cache: {cache_path} does not exist")
    cache = read_cache(cache_path, expected_dim=models[0].config.input_dim)
    ids: list[int] = list(range(len(cache)))
    if split_manifest is not None:
        ids = [i for i, part in sorted(read_split_manifest(split_manifest).items()) if part == "test"]
        if len(ids) != len(cache):
            raise InputError(f"--split lists {len(ids)} test ids but the cache has {len(cache)} rows")
    preds = ensemble_dataset(models, cache.vectors, hard_vote=hard_vote)
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "probability", "label"])
        for i, p in zip(ids, preds):
            w.writerow([i, repr(p.mean_probability), int(p.label)])
    return output


def cmd_predict(cfg: PipelineConfig, checkpoints: Sequence[str | Path], text: str) -> Prediction | EnsemblePrediction:
    if not text or not text.strip():
        raise EmptyTextError("refusing to predict: input text is empty")
    models = _load_checkpoints(checkpoints)
    if len(models) not in (1, 3):
        raise ConfigError(f"--checkpoints: give 1 checkpoint or 3 for the ensemble, got {len(models)}")
    ct = clean(text, cfg.preprocess.clean_config())
    if ct.is_empty:
        raise EmptyTextError(f"refusing to predict: nothing left after cleaning (stages: {', '.join(ct.stages_applied)})")
    v = embed_text(ct.cleaned, cfg.embedding.make_provider())
    for m in models:
        if m.config.input_dim != len(v):
            raise ConfigError(f"{m.name} expects {m.config.input_dim}-dim embeddings, provider gives {len(v)}")
    preds = [predict_proba(m, v.values) for m in models]
    if len(preds) == 1:
        return preds[0]
    order = list(Architecture)
    ranked = [p for _, p in sorted(zip(models, preds), key=lambda mp: order.index(mp[0].config.architecture))]
    return ensemble_proba(*ranked, hard_vote=cfg.hard_vote)


def cmd_report(report_files: Sequence[str | Path], out_dir: str | Path) -> str:
    reports = [read_report(p) for p in report_files]
    if not reports:
        raise ConfigError("report: give report files or --manifest")
    return report_table(reports, out_dir)


def run_grid(manifest: str | Path, out_dir: str | Path) -> tuple[str, list[MetricsReport]]:
    """Run the full pipeline once per manifest entry and tabulate all of it.

    Manifest (YAML)::

        base_config: desk.yaml        # optional, relative to the manifest
        runs:
          - name: sahaj-bert
            overrides: {embedding: {provider: sahaj-bert}}
    """
    manifest = Path(manifest)
    try:
        spec = yaml.safe_load(manifest.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"--manifest: {manifest} does not exist") from None
    base = spec.get("base_config")
    base_path = (manifest.parent / base) if base else None
    runs = spec.get("runs") or []
    if not runs:
        raise ConfigError(f"{manifest}: no runs listed")
    all_reports: list[MetricsReport] = []
    for run in runs:
        name = run.get("name")
        if not name:
            raise ConfigError(f"{manifest}: every run needs a name")
        over = merge(run.get("overrides") or {}, {"out": str(Path(out_dir) / name)})
        cfg = load_config(base_path, over)
        if cfg.dataset and not Path(cfg.dataset).is_absolute() and base_path is not None:
            cfg.dataset = str((base_path.parent / cfg.dataset).resolve())
        log.info("grid run %s", name)
        cmd_preprocess(cfg)
        cmd_embed(cfg)
        ckpts = [cmd_train(cfg, a) for a in Architecture]
        all_reports.extend(cmd_evaluate(cfg, ckpts))
    return report_table(all_reports, out_dir), all_reports
