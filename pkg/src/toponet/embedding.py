"""Isomap projections and epsilon-graph components of activation clouds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist, squareform

DIAMETER_FRACTION = 0.05
MEDIAN_NN_FACTOR = 3.0


class DisconnectedGraphError(ValueError):
    def __init__(self, sizes, k):
        sizes = sorted(sizes, reverse=True)
        super().__init__(
            f"k-NN graph with k={k} has {len(sizes)} components of sizes {sizes}; "
            "increase k_neighbors"
        )
        self.sizes = sizes


@dataclass
class GeodesicDistances:
    matrix: np.ndarray
    connected: bool


@dataclass
class IsomapResult:
    """Projected cloud plus diagnostics.

    ``eigenvalues`` are the leading eigenvalues of the double-centered
    Gram matrix in nonincreasing order, unclamped; coordinates use
    ``sqrt(max(eigenvalue, 0))``.  ``residual_variance`` is
    ``1 - r^2`` between geodesic and embedded distances.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    residual_variance: float
    k_neighbors: int
    target_dim: int


def knn_graph(cloud, k: int):
    X = np.asarray(cloud, dtype=float)
    d, idx = cKDTree(X).query(X, k=k + 1)
    n = len(X)
    rows = np.repeat(np.arange(n), k)
    cols, vals = idx[:, 1:].ravel(), d[:, 1:].ravel()
    G = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return G.maximum(G.T)


def geodesic_distances(cloud, k: int) -> GeodesicDistances:
    """All-pairs shortest paths over the symmetrized k-NN graph (Dijkstra from every node)."""
    G = knn_graph(cloud, k)
    D = dijkstra(G, directed=False)
    return GeodesicDistances(D, bool(np.all(np.isfinite(D))))


def classical_mds(D, target_dim: int):
    """Coordinates from the top eigenpairs of ``-1/2 J D^2 J``; returns ``(coords, eigenvalues)``."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if not 1 <= target_dim <= n:
        raise ValueError(f"target_dim must be in 1..{n}")
    D2 = D ** 2
    B = -0.5 * (D2 - D2.mean(0) - D2.mean(1)[:, None] + D2.mean())
    B = 0.5 * (B + B.T)
    w, V = scipy.linalg.eigh(B, subset_by_index=[n - target_dim, n - 1])
    w, V = w[::-1], V[:, ::-1]
    # fix the eigenvector sign so output does not depend on the solver
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(target_dim)])
    V = V * np.where(flip == 0, 1, flip)
    Y = V * np.sqrt(np.clip(w, 0, None))
    return Y - Y.mean(0), w


def _dedupe(X):
    U, inverse = np.unique(X, axis=0, return_inverse=True)
    return U, inverse.ravel()


def isomap(cloud, k_neighbors: int = 10, target_dim: int = 2) -> IsomapResult:
    """Isomap: k-NN graph, graph geodesics, then classical MDS.

    Duplicate points (common after ReLU collapses a region) are merged
    before the graph is built and share coordinates in the output.
    """
    X = np.asarray(cloud, dtype=float)
    if k_neighbors < 1 or target_dim < 1:
        raise ValueError("k_neighbors and target_dim must be >= 1")
    U, inverse = _dedupe(X)
    if len(U) <= k_neighbors:
        raise ValueError(f"need more than k_neighbors={k_neighbors} distinct points, got {len(U)}")
    geo = geodesic_distances(U, k_neighbors)
    if not geo.connected:
        _, lab = connected_components(knn_graph(U, k_neighbors), directed=False)
        raise DisconnectedGraphError(np.bincount(lab).tolist(), k_neighbors)
    td = min(target_dim, len(U))
    Y, w = classical_mds(geo.matrix, td)
    if td < target_dim:
        Y = np.hstack([Y, np.zeros((len(U), target_dim - td))])
    rv = _residual_variance(squareform(geo.matrix, checks=False), pdist(Y))
    out = Y[inverse]
    return IsomapResult(out - out.mean(0), w, rv, k_neighbors, target_dim)


def _residual_variance(a, b) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0 if np.allclose(a, b) else 1.0
    r = np.corrcoef(a, b)[0, 1]
    return float(1.0 - r * r)


def residual_variance(reference_distances, coords) -> float:
    """``1 - r^2`` between a condensed reference distance vector and distances of ``coords``."""
    return _residual_variance(np.asarray(reference_distances, dtype=float), pdist(coords))


@dataclass
class ComponentAssignment:
    ids: np.ndarray
    count: int
    eps: float


def epsilon_components(cloud, eps: float) -> ComponentAssignment:
    """Connected components of the graph joining points at distance <= ``eps``.

    Equivalent to union-find over all such pairs.  Ids are contiguous from
    0 in order of first appearance.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    X = np.atleast_2d(np.asarray(cloud, dtype=float))
    U, inverse = _dedupe(X)
    pairs = cKDTree(U).query_pairs(eps, output_type="ndarray")
    n = len(U)
    G = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) \
        else coo_matrix((n, n))
    _, lab = connected_components(G, directed=False)
    raw = lab[inverse]
    _, first, inv = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=int)
    rank[np.argsort(first)] = np.arange(len(first))
    ids = rank[inv.ravel()]
    return ComponentAssignment(ids, int(ids.max()) + 1 if len(ids) else 0, float(eps))


def cloud_diameter(cloud, block: int = 1024) -> float:
    X = np.unique(np.atleast_2d(np.asarray(cloud, dtype=float)), axis=0)
    best = 0.0
    for s in range(0, len(X), block):
        A = X[s:s + block]
        best = max(best, float(cdist(A, X, "sqeuclidean").max()))
    return float(np.sqrt(best))


def default_eps(cloud, rule: str = "diameter", factor: float | None = None) -> float:
    """Component scale for a cloud.

    ``rule="diameter"`` (default) gives ``0.05 * diameter``; it is scale
    free and survives clouds where ReLU stacked most points on top of each
    other.  ``rule="median_nn"`` gives three times the median
    nearest-neighbour distance.
    """
    X = np.atleast_2d(np.asarray(cloud, dtype=float))
    if rule == "diameter":
        eps = (DIAMETER_FRACTION if factor is None else factor) * cloud_diameter(X)
    elif rule == "median_nn":
        d, _ = cKDTree(X).query(X, k=2)
        eps = (MEDIAN_NN_FACTOR if factor is None else factor) * float(np.median(d[:, 1]))
    else:
        raise ValueError(f"unknown eps rule {rule!r}")
    # a cloud collapsed to a single point still needs a positive scale
    return eps if eps > 0 else np.finfo(float).tiny
