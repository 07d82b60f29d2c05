"""Per-layer topological moves, read off from weights and sampled activations.

A layer ``relu(W x + b)`` acts on its input cloud by the moves visible in
the SVD of ``W`` (scaling, rotation, reflection, and quotienting when
``W`` has a kernel), a translation by ``b``, and the ReLU action, which
is one of identity, bending or quotienting.  ReLU labels are evidence on
the sampled points only: a finite cloud can miss a collision that the
underlying continuum has.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .network import Activation

COLLISION_TOL = 1e-9
MAX_WITNESSES = 10


class ReluAction(str, Enum):
    IDENTITY = "IdentityAction"
    BENDING = "Bending"
    QUOTIENTING = "Quotienting"


@dataclass
class LinearMoveReport:
    rank: int
    singular_values: np.ndarray
    null_basis: np.ndarray
    orthogonal_factor_dets: tuple[float, float]
    rank_tolerance: float
    shape: tuple[int, int]
    rotation: bool = False

    @property
    def is_full_rank(self) -> bool:
        return self.rank == min(self.shape)

    @property
    def quotienting(self) -> bool:
        """Nontrivial kernel: distinct inputs differing by a null vector are identified."""
        return self.null_basis.shape[0] > 0

    @property
    def reflection(self) -> bool:
        # only meaningful for invertible square maps, where det(W) = det(U) det(V)
        m, n = self.shape
        return m == n and self.is_full_rank and self.orthogonal_factor_dets[0] * self.orthogonal_factor_dets[1] < 0

    @property
    def scaling(self) -> bool:
        s = self.singular_values[: self.rank]
        return bool(np.any(np.abs(s - 1.0) > 1e-9))

    def to_dict(self):
        return {
            "shape": list(self.shape),
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
            "null_basis": self.null_basis.tolist(),
            "orthogonal_factor_dets": list(self.orthogonal_factor_dets),
            "rank_tolerance": self.rank_tolerance,
            "is_full_rank": self.is_full_rank,
            "scaling": self.scaling,
            "rotation": self.rotation,
            "reflection": self.reflection,
            "quotienting": self.quotienting,
        }


def _is_signed_permutation(Q, tol=1e-12):
    A = np.abs(Q)
    return bool(np.all((A < tol) | (np.abs(A - 1) < tol)) and np.allclose(A.sum(0), 1) and np.allclose(A.sum(1), 1))


def decompose_linear(W, rtol: float | None = None) -> LinearMoveReport:
    """SVD-based reading of ``W`` as scaling, rotation, reflection and projection.

    The rank counts singular values above ``max(m, n) * s_max * eps`` by
    default; pass ``rtol`` to replace the ``max(m, n) * eps`` factor.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or not np.all(np.isfinite(W)):
        raise ValueError("W must be a finite matrix")
    m, n = W.shape
    U, s, Vt = np.linalg.svd(W, full_matrices=True)
    smax = float(s[0]) if s.size else 0.0
    factor = rtol if rtol is not None else max(m, n) * np.finfo(float).eps
    tol = factor * smax
    rank = int(np.sum(s > tol)) if smax > 0 else 0
    dets = (float(np.sign(np.linalg.det(U))), float(np.sign(np.linalg.det(Vt))))
    rotation = not (_is_signed_permutation(U) and _is_signed_permutation(Vt))
    return LinearMoveReport(rank, s, Vt[rank:], dets, tol, (m, n), rotation)


@dataclass
class ReluActionReport:
    """ReLU behaviour on a sampled cloud.

    ``witnesses`` are index pairs ``(p, q)`` with ``|relu(p) - relu(q)| <= tol``
    but ``|p - q| > tol``; ``orthant_census[k]`` counts the negative
    coordinates of point ``k``.
    """

    action: ReluAction
    collision_pair_count: int
    witnesses: list[tuple[int, int]]
    orthant_census: np.ndarray
    collision_tol: float = COLLISION_TOL
    evidence: str = "sampled points"

    @property
    def has_negatives(self) -> bool:
        return bool(np.any(self.orthant_census > 0))

    def to_dict(self):
        census = np.bincount(self.orthant_census) if self.orthant_census.size else np.zeros(0, int)
        return {
            "action": self.action.value,
            "collision_pair_count": self.collision_pair_count,
            "witnesses": [list(p) for p in self.witnesses],
            "negative_coordinate_histogram": census.tolist(),
            "collision_tol": self.collision_tol,
            "evidence": self.evidence,
        }


def relu(X):
    return np.maximum(X, 0.0)


def _pairs_within(tree, r):
    # unordered pairs of distinct indices at distance <= r
    n = tree.n
    return (int(tree.count_neighbors(tree, r)) - n) // 2


def classify_relu_action(cloud, collision_tol: float = COLLISION_TOL,
                         max_witnesses: int = MAX_WITNESSES) -> ReluActionReport:
    """Classify how ReLU acts on ``cloud``: Quotienting > Bending > IdentityAction.

    Since ReLU is 1-Lipschitz, pairs close before clamping stay close
    after, so the collision count is the number of pairs within
    ``collision_tol`` after clamping minus the number within it before.
    """
    X = np.atleast_2d(np.asarray(cloud, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cloud must be nonempty")
    census = (X < 0).sum(axis=1)
    if not census.any():
        return ReluActionReport(ReluAction.IDENTITY, 0, [], census, collision_tol)
    Y = relu(X)
    tree_y = cKDTree(Y)
    count = _pairs_within(tree_y, collision_tol) - _pairs_within(cKDTree(X), collision_tol)
    if count == 0:
        return ReluActionReport(ReluAction.BENDING, 0, [], census, collision_tol)
    witnesses = []
    candidates = np.flatnonzero(census > 0)
    for start in range(0, len(candidates), 256):
        chunk = candidates[start:start + 256]
        for p, nbrs in zip(chunk, tree_y.query_ball_point(Y[chunk], collision_tol)):
            for q in sorted(nbrs):
                if q != p and np.linalg.norm(X[p] - X[q]) > collision_tol:
                    pair = (int(min(p, q)), int(max(p, q)))
                    if pair not in witnesses:
                        witnesses.append(pair)
                    break
            if len(witnesses) >= max_witnesses:
                break
        if len(witnesses) >= max_witnesses:
            break
    return ReluActionReport(ReluAction.QUOTIENTING, count, witnesses, census, collision_tol)


@dataclass
class MoveReport:
    layer: int
    activation: Activation
    linear: LinearMoveReport
    translation_norm: float
    relu: ReluActionReport | None = None

    @property
    def moves(self) -> list[str]:
        """Moves with evidence, in the order they are applied."""
        out = []
        if self.linear.scaling:
            out.append("scaling")
        if self.linear.rotation:
            out.append("rotation")
        if self.linear.reflection:
            out.append("reflection")
        if self.linear.quotienting:
            out.append("quotienting")
        if self.translation_norm > 0:
            out.append("translation")
        if self.relu is not None:
            if self.relu.action is ReluAction.IDENTITY:
                out.append("identity")
            else:
                out.append("bending")
                if self.relu.action is ReluAction.QUOTIENTING and "quotienting" not in out:
                    out.append("quotienting")
        return out

    @property
    def quotienting(self) -> bool:
        return self.linear.quotienting or (
            self.relu is not None and self.relu.action is ReluAction.QUOTIENTING
        )

    def to_dict(self):
        return {
            "layer": self.layer,
            "activation": self.activation.value,
            "linear": self.linear.to_dict(),
            "translation_norm": self.translation_norm,
            "relu": None if self.relu is None else self.relu.to_dict(),
            "moves": self.moves,
            "quotienting": self.quotienting,
        }


class TraceMismatchError(ValueError):
    pass


def layer_move_summary(net, layer_index: int, trace, collision_tol: float = COLLISION_TOL) -> MoveReport:
    """Moves performed by layer ``layer_index`` (1-based) on its traced input cloud."""
    if not 1 <= layer_index <= net.depth:
        raise IndexError(f"layer index {layer_index} outside 1..{net.depth}")
    if len(trace.clouds) != net.depth + 1:
        raise TraceMismatchError(f"trace has {len(trace.clouds)} clouds, network has {net.depth} layers")
    layer = net.layers[layer_index - 1]
    X = trace.clouds[layer_index - 1]
    if X.shape[1] != layer.in_dim or trace.clouds[layer_index].shape[1] != layer.out_dim:
        raise TraceMismatchError(f"trace dimensions do not match layer {layer_index}")
    Z = layer.affine(X)
    if not np.allclose(layer(X), trace.clouds[layer_index], rtol=1e-9, atol=1e-12):
        raise TraceMismatchError(f"trace cloud {layer_index} was not produced by this network")
    relu_report = None
    if layer.activation is Activation.RELU:
        relu_report = classify_relu_action(Z, collision_tol)
    return MoveReport(layer_index, layer.activation, decompose_linear(layer.W),
                      float(np.linalg.norm(layer.b)), relu_report)


def move_reports(net, trace, collision_tol: float = COLLISION_TOL) -> list[MoveReport]:
    return [layer_move_summary(net, i, trace, collision_tol) for i in range(1, net.depth + 1)]
