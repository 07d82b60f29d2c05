"""Text formats for datasets, network checkpoints and activation traces.

Dataset / point cloud (``.csv``)::

    # optional provenance lines, "# key=value"
    dim,n_classes,count
    x_1,...,x_d,label
    ...

Network checkpoint (``.txt``)::

    toponet-network 1
    seed <int or none>
    epochs <int>
    layers <L>
    layer <i> <in_dim> <out_dim> <activation>
    <out_dim rows of W, in_dim values each>
    <b, out_dim values>
    ...

Floats are written with ``repr`` so every value round-trips exactly.
A trace directory holds ``layer_XX.csv`` per cloud and ``manifest.json``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import LabeledPointSet
from .network import Activation, ActivationTrace, Layer, Network

NETWORK_MAGIC = "toponet-network"
NETWORK_VERSION = 1


class FormatError(ValueError):
    pass


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_points(path, points, labels, num_classes: int, provenance: dict | None = None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    labels = np.asarray(labels, dtype=int)
    lines = [f"# {k}={v}" for k, v in (provenance or {}).items()]
    lines.append(f"{points.shape[1]},{num_classes},{len(points)}")
    for x, lab in zip(points, labels):
        lines.append(f"{_fmt(x)},{int(lab)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_dataset(path, data: LabeledPointSet, provenance: dict | None = None):
    prov = {"shape_tag": data.shape_tag} if data.shape_tag else {}
    prov.update(provenance or {})
    write_points(path, data.points, data.labels, data.num_classes, prov)


def read_points(path):
    """Returns ``(points, labels, num_classes, provenance)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing point file {path}")
    prov, header, rows = {}, None, []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            prov[key.strip()] = val.strip()
            continue
        fields = line.split(",")
        if header is None:
            try:
                header = tuple(int(f) for f in fields)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: header must be 'dim,n_classes,count'") from None
            if len(header) != 3:
                raise FormatError(f"{path}:{lineno}: header must have three fields")
            continue
        if len(fields) != header[0] + 1:
            raise FormatError(f"{path}:{lineno}: expected {header[0] + 1} fields, got {len(fields)}")
        rows.append(fields)
    if header is None:
        raise FormatError(f"{path}: no header line")
    dim, n_classes, count = header
    if len(rows) != count:
        raise FormatError(f"{path}: header announces {count} rows, found {len(rows)}")
    arr = np.array([[float(v) for v in r[:-1]] for r in rows]).reshape(count, dim)
    labels = np.array([int(r[-1]) for r in rows], dtype=int)
    return arr, labels, n_classes, prov


def read_dataset(path) -> LabeledPointSet:
    pts, labels, n, prov = read_points(path)
    return LabeledPointSet(pts, labels, n, prov.get("shape_tag", ""))


def write_network(path, net: Network):
    out = [
        f"{NETWORK_MAGIC} {NETWORK_VERSION}",
        f"seed {'none' if net.seed is None else net.seed}",
        f"epochs {net.epochs}",
        f"layers {net.depth}",
    ]
    for i, layer in enumerate(net.layers, 1):
        out.append(f"layer {i} {layer.in_dim} {layer.out_dim} {layer.activation.value}")
        out.extend(" ".join(repr(float(v)) for v in row) for row in layer.W)
        out.append(" ".join(repr(float(v)) for v in layer.b))
    Path(path).write_text("\n".join(out) + "\n")


def read_network(path) -> Network:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing network checkpoint {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    try:
        magic, version = lines[0].split()
        if magic != NETWORK_MAGIC or int(version) != NETWORK_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint header {lines[0]!r}")
        seed = lines[1].split()[1]
        epochs = int(lines[2].split()[1])
        depth = int(lines[3].split()[1])
        pos, layers = 4, []
        for i in range(1, depth + 1):
            tag, idx, n_in, n_out, act = lines[pos].split()
            if tag != "layer" or int(idx) != i:
                raise FormatError(f"{path}: expected 'layer {i}', got {lines[pos]!r}")
            n_in, n_out = int(n_in), int(n_out)
            W = np.array([[float(v) for v in lines[pos + 1 + r].split()] for r in range(n_out)])
            b = np.array([float(v) for v in lines[pos + 1 + n_out].split()])
            if W.shape != (n_out, n_in) or b.shape != (n_out,):
                raise FormatError(f"{path}: layer {i} has wrong weight shapes")
            layers.append(Layer(W, b, Activation(act)))
            pos += n_out + 2
    except (IndexError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
    return Network(layers, None if seed == "none" else int(seed), epochs)


def write_trace(directory, trace: ActivationTrace, num_classes: int):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, cloud in enumerate(trace.clouds):
        name = f"layer_{i:02d}.csv"
        write_points(d / name, cloud, trace.labels, num_classes, {"layer": i})
        files.append({"layer": i, "dim": int(cloud.shape[1]), "file": name})
    manifest = {"count": int(len(trace.labels)), "num_classes": num_classes, "clouds": files}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_trace(directory) -> tuple[ActivationTrace, int]:
    d = Path(directory)
    mf = d / "manifest.json"
    if not mf.exists():
        raise FileNotFoundError(f"missing trace manifest {mf}")
    manifest = json.loads(mf.read_text())
    clouds, labels = [], None
    for entry in manifest["clouds"]:
        pts, lab, _, _ = read_points(d / entry["file"])
        if labels is not None and not np.array_equal(lab, labels):
            raise FormatError(f"{entry['file']}: labels do not align with layer 0")
        labels = lab
        clouds.append(pts)
    return ActivationTrace(clouds, labels), int(manifest["num_classes"])
