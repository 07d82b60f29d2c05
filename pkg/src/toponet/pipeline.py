"""Experiment stages: generate, train, trace, analyze, isomap, report.

Stages communicate only through files in the output directory, so
``run`` is exactly the stages executed in order.  Layout::

    config.yaml            resolved config (copied in by ``generate``)
    dataset.csv
    network.txt            checkpoint
    training.json          loss history, accuracy
    trace/                 layer_XX.csv + manifest.json
    analysis/              moves.json, separation.json, separability.json,
                           components.json, cells.csv
    isomap/                layer_XX.csv + manifest.json
    report.json            aggregate, byte-identical for identical configs
    metadata.json          timestamps and library versions
"""

from __future__ import annotations

import datetime
import json
import logging
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .data import LabeledPointSet, generate
from .embedding import DisconnectedGraphError, default_eps, epsilon_components, isomap
from .io import read_dataset, read_network, read_trace, write_dataset, write_network, write_points, write_trace
from .moves import move_reports
from .network import forward, trace_activations, train
from .separator import disc_separability_check, kernel_collision_witness
from .simplex import verdict_from_outputs

log = logging.getLogger(__name__)

STAGES = ("generate", "train", "trace", "analyze", "isomap", "report")


class StageError(RuntimeError):
    """A stage cannot run, typically because an upstream artifact is missing."""


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageError(f"missing upstream artifact {path} (produced by the '{producer}' stage)")
    return path


def _claim(path: Path, force: bool):
    if path.exists() and not force:
        raise StageError(f"{path} already exists; output directories are append-only (use --force)")


def resolve_config(out: Path, cfg: ExperimentConfig | None) -> ExperimentConfig:
    stored = out / "config.yaml"
    if cfg is None:
        if not stored.exists():
            raise StageError(f"no --config given and {stored} does not exist")
        return load_config(stored)
    if stored.exists() and stored.read_text() != cfg.to_yaml():
        raise ConfigError(f"{stored} holds a different config; use a fresh output directory")
    return cfg


def stage_generate(cfg: ExperimentConfig, out, force=False) -> LabeledPointSet:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _claim(out / "dataset.csv", force)
    (out / "config.yaml").write_text(cfg.to_yaml())
    data = generate(cfg.dataset)
    write_dataset(out / "dataset.csv", data)
    return data


def stage_train(cfg: ExperimentConfig, out, force=False):
    out = Path(out)
    data = read_dataset(_require(out / "dataset.csv", "generate"))
    _claim(out / "network.txt", force)
    net, history = train(cfg.network.spec(), data, cfg.hyperparams())
    pred = np.argmax(forward(net, data.points), axis=1)
    write_network(out / "network.txt", net)
    summary = {
        "seed": cfg.seed,
        "epochs": net.epochs,
        "final_loss": history[-1],
        "train_accuracy": float(np.mean(pred == data.labels)),
        "loss_history": history,
    }
    (out / "training.json").write_text(_dump(summary))
    return net, history


def stage_trace(cfg: ExperimentConfig, out, force=False, network_path=None, data_path=None):
    out = Path(out)
    data = read_dataset(_require(Path(data_path) if data_path else out / "dataset.csv", "generate"))
    net = read_network(_require(Path(network_path) if network_path else out / "network.txt", "train"))
    _claim(out / "trace" / "manifest.json", force)
    trace = trace_activations(net, data)
    write_trace(out / "trace", trace, data.num_classes)
    return trace


def _witness_radii(cfg):
    ds = cfg.dataset
    if ds.kind == "BallShell":
        return ds.inner_radius, (ds.shell_inner, ds.shell_outer)
    return 0.9, (1.0, 2.0)


def stage_analyze(cfg: ExperimentConfig, out, force=False):
    out = Path(out)
    net = read_network(_require(out / "network.txt", "train"))
    trace, n_classes = read_trace(_require(out / "trace", "trace"))
    adir = out / "analysis"
    adir.mkdir(exist_ok=True)
    an = cfg.analyses
    labels = trace.labels
    results = {}

    if an.moves:
        _claim(adir / "moves.json", force)
        reports = [r.to_dict() for r in move_reports(net, trace)]
        (adir / "moves.json").write_text(_dump(reports))
        results["moves"] = reports

    if an.separation:
        _claim(adir / "separation.json", force)
        outputs, sep_labels = trace.clouds[-1], labels
        witness = None
        if an.witness_injection:
            inner, shell = _witness_radii(cfg)
            p1, p2 = kernel_collision_witness(net.layers[0].W, inner, shell)
            extra = forward(net, np.stack([p1, p2]))
            n = len(labels)
            outputs = np.vstack([outputs, extra])
            sep_labels = np.concatenate([labels, [0, 1]])
            witness = {
                "indices": [n, n + 1],
                "labels": [0, 1],
                "points": [p1.tolist(), p2.tolist()],
                "outputs": extra.tolist(),
                "output_max_abs_difference": float(np.abs(extra[0] - extra[1]).max()),
                "first_layer_residual": float(np.linalg.norm(net.layers[0].W @ (p1 - p2))),
            }
        verdict = verdict_from_outputs(outputs, sep_labels, n_classes)
        sep = verdict.to_dict()
        sep["witness"] = witness
        (adir / "separation.json").write_text(_dump(sep))
        write_points(adir / "cells.csv", verdict.cells[:, None].astype(float), sep_labels, n_classes,
                     {"columns": "cell (-1 = tie)"})
        results["separation"] = sep

    if an.separability:
        _claim(adir / "separability.json", force)
        per_layer = []
        for i, cloud in enumerate(trace.clouds):
            v = disc_separability_check([cloud[labels == j] for j in range(n_classes)])
            per_layer.append({"layer": i, **v.to_dict()})
        (adir / "separability.json").write_text(_dump(per_layer))
        results["separability"] = per_layer

    if an.components is not None:
        _claim(adir / "components.json", force)
        cc = an.components
        rows = []
        for i, cloud in enumerate(trace.clouds):
            eps = cc.eps if cc.eps is not None else default_eps(cloud, cc.rule, cc.factor)
            per_class = [epsilon_components(cloud[labels == j], eps).count for j in range(n_classes)]
            rows.append({"layer": i, "eps": eps, "per_class": per_class,
                         "whole": epsilon_components(cloud, eps).count})
        (adir / "components.json").write_text(_dump(rows))
        results["components"] = rows
    return results


def stage_isomap(cfg: ExperimentConfig, out, force=False):
    out = Path(out)
    iso = cfg.analyses.isomap
    if iso is None:
        raise StageError("analyses.isomap is not configured")
    trace, n_classes = read_trace(_require(out / "trace", "trace"))
    idir = out / "isomap"
    _claim(idir / "manifest.json", force)
    idir.mkdir(exist_ok=True)
    n = len(trace.labels)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    idx = np.sort(rng.choice(n, iso.max_points, replace=False)) if n > iso.max_points else np.arange(n)
    entries = []
    for i, cloud in enumerate(trace.clouds):
        entry = {"layer": i, "k": iso.k, "target_dim": iso.target_dim}
        try:
            res = isomap(cloud[idx], iso.k, iso.target_dim)
        except (DisconnectedGraphError, ValueError) as exc:
            entry["error"] = str(exc)
            log.warning("isomap on layer %d skipped: %s", i, exc)
        else:
            name = f"layer_{i:02d}.csv"
            write_points(idir / name, res.coords, trace.labels[idx], n_classes, {
                "source_layer": i, "k": iso.k, "target_dim": iso.target_dim,
                "residual_variance": repr(res.residual_variance),
            })
            entry.update(file=name, eigenvalues=res.eigenvalues.tolist(),
                         residual_variance=res.residual_variance)
        entries.append(entry)
    manifest = {"indices": idx.tolist(), "layers": entries}
    (idir / "manifest.json").write_text(_dump(manifest))
    return manifest


def _load_json(path):
    return json.loads(path.read_text()) if path.exists() else None


def stage_report(cfg: ExperimentConfig, out, force=False):
    out = Path(out)
    data = read_dataset(_require(out / "dataset.csv", "generate"))
    training = _load_json(_require(out / "training.json", "train"))
    trace_manifest = _load_json(_require(out / "trace" / "manifest.json", "trace"))
    _claim(out / "report.json", force)
    adir = out / "analysis"
    training = {k: v for k, v in training.items() if k != "loss_history"}
    report = {
        "name": cfg.name,
        "config": cfg.model_dump(mode="json"),
        "dataset": {
            "count": len(data),
            "dim": data.dim,
            "num_classes": data.num_classes,
            "shape_tag": data.shape_tag,
            "min_interclass_distance": data.min_interclass_distance(),
        },
        "training": training,
        "trace": {
            "clouds": len(trace_manifest["clouds"]),
            "dims": [c["dim"] for c in trace_manifest["clouds"]],
        },
        "moves": _load_json(adir / "moves.json"),
        "separation": _load_json(adir / "separation.json"),
        "separability": _load_json(adir / "separability.json"),
        "components": _load_json(adir / "components.json"),
        "isomap": _load_json(out / "isomap" / "manifest.json"),
    }
    if report["isomap"] is not None:
        report["isomap"] = report["isomap"]["layers"]
    (out / "report.json").write_text(_dump(report))
    meta = {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "toponet": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "metadata.json").write_text(_dump(meta))
    return report


_STAGE_FUNCS = {
    "generate": stage_generate,
    "train": stage_train,
    "trace": stage_trace,
    "analyze": stage_analyze,
    "isomap": stage_isomap,
    "report": stage_report,
}


def run_stage(name: str, cfg: ExperimentConfig, out, force=False, **kw):
    if name not in _STAGE_FUNCS:
        raise ConfigError(f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    return _STAGE_FUNCS[name](cfg, out, force, **kw)


def run(cfg: ExperimentConfig, out) -> dict:
    """Full pipeline into a fresh directory; returns the report."""
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        raise ConfigError(f"output directory {out} is not empty")
    for name in STAGES:
        if name == "isomap" and cfg.analyses.isomap is None:
            continue
        log.info("stage %s", name)
        result = run_stage(name, cfg, out)
    return result
