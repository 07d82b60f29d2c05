"""Explicit separating maps for labeled point sets.

The Urysohn function of two disjoint closed sets ``A`` and ``B``,

    f(x) = d(x, A) / (d(x, A) + d(x, B)),

is continuous on all of R^d, vanishes on ``A`` and equals one on ``B``.
Summing such functions over the nested splits ``A_1..A_{i-1} | A_i..A_n``
gives a map sending class ``j`` to exactly ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

SET_TOL = 1e-12
WITNESS_TOL = 1e-9


class CollisionError(ValueError):
    """Two sets that must be disjoint share a point (within tolerance)."""

    def __init__(self, msg, pair):
        super().__init__(msg)
        self.pair = pair


def _as_points(S):
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or len(S) == 0:
        raise ValueError("point sets must be nonempty (N, d) arrays")
    return S


def _closest_pair(A, B):
    d, j = cKDTree(B).query(A)
    i = int(np.argmin(d))
    return float(d[i]), (A[i], B[j[i]])


@dataclass
class UrysohnTerm:
    A: np.ndarray
    B: np.ndarray
    _trees: tuple = field(default=None, repr=False, compare=False)

    def __call__(self, X):
        if self._trees is None:
            self._trees = (cKDTree(self.A), cKDTree(self.B))
        dA, _ = self._trees[0].query(X)
        dB, _ = self._trees[1].query(X)
        return dA / (dA + dB)


@dataclass
class ScalarField:
    """``offset + sum of d(x, A_i) / (d(x, A_i) + d(x, B_i))`` over stored terms.

    ``classes`` records the point sets the field was built from.
    """

    dim: int
    terms: list[UrysohnTerm]
    offset: float = 0.0
    classes: list[np.ndarray] = field(default_factory=list)

    def __call__(self, x):
        X = np.asarray(x, dtype=float)
        # (d,) is one point, (N, d) a batch; in R^1 a flat array is a batch
        single = X.ndim == 0 or (X.ndim == 1 and self.dim > 1)
        if X.ndim == 1 and self.dim > 1 and X.shape[0] != self.dim:
            raise ValueError(f"expected a point of dimension {self.dim}, got {X.shape[0]}")
        if X.ndim < 2:
            X = X.reshape(-1, self.dim)
        if X.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        out = np.full(len(X), float(self.offset))
        for term in self.terms:
            out += term(X)
        return out[0] if single else out


def urysohn_pair(A, B, tol: float = SET_TOL) -> ScalarField:
    """Continuous ``f`` with ``f = 0`` on ``A``, ``f = 1`` on ``B`` and values in [0, 1]."""
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("A and B live in different dimensions")
    d, pair = _closest_pair(A, B)
    if d <= tol:
        raise CollisionError(f"sets are not disjoint: points {pair[0]} and {pair[1]} coincide", pair)
    return ScalarField(A.shape[1], [UrysohnTerm(A, B)], 0.0, [A, B])


def urysohn_multiclass(classes, tol: float = SET_TOL) -> ScalarField:
    """Continuous ``f`` with ``f(A_j) = j`` for classes numbered ``1..n``.

    ``f = 1 + sum_{i=2..n} u_i`` where ``u_i`` is the Urysohn function of
    ``A_1 u ... u A_{i-1}`` versus ``A_i u ... u A_n``.  Note that
    ``classes[0]`` is sent to 1, ``classes[1]`` to 2, and so on.
    """
    sets = [_as_points(S) for S in classes]
    if len(sets) < 2:
        raise ValueError("need at least two classes")
    dim = sets[0].shape[1]
    if any(S.shape[1] != dim for S in sets):
        raise ValueError("classes live in different dimensions")
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            d, pair = _closest_pair(sets[i], sets[j])
            if d <= tol:
                raise CollisionError(
                    f"classes {i + 1} and {j + 1} share a point: {pair[0]} ~ {pair[1]}", pair
                )
    terms = [
        UrysohnTerm(np.concatenate(sets[:i]), np.concatenate(sets[i:])) for i in range(1, len(sets))
    ]
    return ScalarField(dim, terms, 1.0, sets)


@dataclass
class LiftedField:
    """``x -> (f(x), 0, ..., 0)`` in R^k."""

    field: ScalarField
    k: int

    def __call__(self, x):
        v = np.atleast_1d(self.field(x))
        out = np.zeros((v.shape[0], self.k))
        out[:, 0] = v
        return out


def lift_to_rk(f: ScalarField, k: int) -> LiftedField:
    if k < 1:
        raise ValueError("k must be >= 1")
    return LiftedField(f, k)


class Separability(str, Enum):
    SEPARABLE = "SeparableByConvexDiscs"
    COLLISION = "Collision"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class SeparabilityVerdict:
    """Outcome of :func:`disc_separability_check`.

    For ``COLLISION`` the witness holds two coinciding points of different
    classes; for ``SEPARABLE`` it lists a strictly separating hyperplane
    ``(i, j, w, c)`` for every class pair (``w.x > c`` on class ``i``);
    for ``INCONCLUSIVE`` it names the first pair whose hulls meet.
    """

    status: Separability
    witness: dict | None = None

    def to_dict(self):
        return {"status": self.status.value, "witness": _jsonable(self.witness)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _separating_hyperplane(A, B):
    """Strict separator ``(w, c)`` of two finite sets, or None if their hulls meet."""
    X = np.concatenate([A, B])
    center = X.mean(axis=0)
    scale = max(float(np.abs(X - center).max()), 1e-300)
    As, Bs = (A - center) / scale, (B - center) / scale
    k = A.shape[1]
    # w.a - c >= 1 on A and w.b - c <= -1 on B, as A_ub z <= b_ub with z = (w, c)
    A_ub = np.concatenate([
        np.hstack([-As, np.ones((len(As), 1))]),
        np.hstack([Bs, -np.ones((len(Bs), 1))]),
    ])
    b_ub = -np.ones(len(A_ub))
    res = linprog(np.zeros(k + 1), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (k + 1),
                  method="highs")
    if res.status != 0:
        return None
    w, c = res.x[:k] / scale, res.x[k] + res.x[:k] @ center / scale
    if (A @ w).min() - c > 0 and (B @ w).max() - c < 0:
        return w, float(c)
    return None


def disc_separability_check(class_images, collision_tol: float = WITNESS_TOL) -> SeparabilityVerdict:
    """Decide whether class images sit in pairwise disjoint convex hulls.

    Disjoint hulls can be thickened into disjoint discs, so
    ``SEPARABLE`` is a certificate.  ``COLLISION`` means two points of
    different classes coincide within ``collision_tol``, which rules out
    any separation.  Everything else is ``INCONCLUSIVE``.
    """
    sets = [_as_points(S) for S in class_images]
    dims = {S.shape[1] for S in sets}
    if len(dims) != 1:
        raise ValueError(f"class images have mismatched dimensions {sorted(dims)}")
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            d, jdx = cKDTree(sets[j]).query(sets[i])
            a = int(np.argmin(d))
            if d[a] <= collision_tol:
                return SeparabilityVerdict(Separability.COLLISION, {
                    "classes": [i, j], "indices": [a, int(jdx[a])],
                    "points": [sets[i][a], sets[j][jdx[a]]], "distance": float(d[a]),
                })
    planes = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            sep = _separating_hyperplane(sets[i], sets[j])
            if sep is None:
                return SeparabilityVerdict(Separability.INCONCLUSIVE, {"classes": [i, j]})
            planes.append({"classes": [i, j], "normal": sep[0], "offset": sep[1]})
    return SeparabilityVerdict(Separability.SEPARABLE, {"hyperplanes": planes})


def kernel_collision_witness(W, inner_radius: float = 0.9, shell=(1.0, 2.0),
                             inner_scale: float = 0.5, outer_scale: float = 1.5,
                             tol: float = WITNESS_TOL):
    """Two points, one in the ball and one in the shell, with ``W p1 = W p2``.

    Both points lie on the line through the origin along a unit null
    vector of ``W`` (the last right singular vector), at distances
    ``inner_scale`` and ``outer_scale``.  Any layer ``act(W x + b)`` maps
    them to the same value.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    k, n = W.shape
    if k >= n:
        raise ValueError(f"W is {k}x{n}; a guaranteed kernel needs fewer rows than columns")
    if not np.all(np.isfinite(W)):
        raise ValueError("W has non-finite entries")
    if not (0 <= inner_scale <= inner_radius and shell[0] <= outer_scale <= shell[1]):
        raise ValueError("witness scales fall outside the ball/shell")
    _, _, Vt = np.linalg.svd(W)
    v = Vt[-1]
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    p1, p2 = inner_scale * v, outer_scale * v
    resid = float(np.linalg.norm(W @ p1 - W @ p2))
    if resid > tol * max(1.0, float(np.linalg.norm(W, 2))):
        raise ArithmeticError(f"null vector residual {resid:g} exceeds {tol:g}")
    return p1, p2
