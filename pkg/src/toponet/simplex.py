"""Softmax geometry on the probability simplex.

Softmax maps R^n into the open simplex.  Class ``i`` owns the Voronoi
cell of vertex ``e_i``; on the simplex ``|p - e_i|^2 = |p|^2 - 2 p_i + 1``,
so the nearest vertex is simply the largest coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Activation, forward
from .network import softmax as _softmax

TIE = -1
TIE_TOL = 1e-9


def softmax_map(x) -> np.ndarray:
    """``D o Exp`` computed as ``exp(x - max x) / sum``; works row-wise on batches."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    return _softmax(x)


def is_simplex_point(p, tol: float = 1e-9) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(p.shape[-1] >= 2 and np.all(p >= -1e-12) and np.all(np.abs(p.sum(-1) - 1) <= tol))


def _top_two(P):
    srt = np.sort(P, axis=-1)
    return srt[..., -1], srt[..., -2]


def voronoi_cells(P, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Vertex cell of each row of ``P``, or ``TIE`` when the top two coordinates differ by less than ``tie_tol``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    top, second = _top_two(P)
    cells = np.argmax(P, axis=-1)
    cells[top - second < tie_tol] = TIE
    return cells


def voronoi_cell_of(p, tie_tol: float = TIE_TOL) -> int:
    return int(voronoi_cells(p, tie_tol)[0])


def nearest_vertex(P) -> np.ndarray:
    """Index of the Euclidean-nearest simplex vertex, by explicit distances."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    V = np.eye(P.shape[1])
    d = ((P[:, None, :] - V[None, :, :]) ** 2).sum(-1)
    return np.argmin(d, axis=1)


def predicted_labels(P, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Total labeling: lowest index among coordinates within ``tie_tol`` of the maximum."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    near_top = P >= P.max(axis=1, keepdims=True) - tie_tol
    return np.argmax(near_top, axis=1)


@dataclass
class SeparationVerdict:
    """Whether each class image lies strictly inside its own vertex cell.

    ``per_class[i]`` is true iff every point of class ``i`` lands in the
    interior of the cell of vertex ``i`` (ties count as failures).
    ``accuracy`` uses the lowest-index tie-break; tied points are listed
    in ``boundary_points``.
    """

    per_class: list[bool]
    accuracy: float
    boundary_points: list[int] = field(default_factory=list)
    cells: np.ndarray | None = None

    @property
    def separated(self) -> bool:
        return all(self.per_class)

    def to_dict(self, include_cells: bool = False):
        out = {
            "per_class": [bool(b) for b in self.per_class],
            "separated": self.separated,
            "accuracy": self.accuracy,
            "boundary_points": [int(i) for i in self.boundary_points],
        }
        if include_cells and self.cells is not None:
            out["cells"] = self.cells.tolist()
        return out


def verdict_from_outputs(P, labels, num_classes: int, tie_tol: float = TIE_TOL) -> SeparationVerdict:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    labels = np.asarray(labels)
    if P.shape[1] != num_classes:
        raise ValueError(f"outputs have {P.shape[1]} coordinates, expected {num_classes}")
    if len(labels) != len(P):
        raise ValueError("one label per output row is required")
    cells = voronoi_cells(P, tie_tol)
    per_class = [bool(np.all(cells[labels == i] == i)) for i in range(num_classes)]
    pred = predicted_labels(P, tie_tol)
    acc = float(np.mean(pred == labels)) if len(labels) else 0.0
    return SeparationVerdict(per_class, acc, np.flatnonzero(cells == TIE).tolist(), cells)


def separation_verdict(net, data, tie_tol: float = TIE_TOL) -> SeparationVerdict:
    """Check ``Net(class i) subset Int(VC(v_i))`` for every class of ``data``."""
    if net.layers[-1].activation is not Activation.SOFTMAX:
        raise ValueError("separation is defined for networks ending in softmax")
    if net.out_dim != data.num_classes:
        raise ValueError(f"network has {net.out_dim} outputs but data has {data.num_classes} classes")
    return verdict_from_outputs(forward(net, data.points), data.labels, data.num_classes, tie_tol)
