"""Seeded samplers for labeled manifold datasets.

Every sampler draws from ``numpy.random.Generator(PCG64(seed))``, so a
given spec reproduces the same points bit for bit on any platform that
ships the same NumPy bit generator.  Sampling is uniform in parameter
space (angles, radii), not uniform in surface area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator


class ShapeError(ValueError):
    """Raised when a shape spec cannot produce disjoint labeled classes."""


@dataclass
class LabeledPointSet:
    """Finite labeled sample of a union of manifolds.

    Attributes
    ----------
    points : (N, d) float array
    labels : (N,) int array with values in ``0..num_classes-1``
    num_classes : int
    shape_tag : str
        Free-form provenance string.
    """

    points: np.ndarray
    labels: np.ndarray
    num_classes: int
    shape_tag: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.points.ndim != 2 or self.points.shape[1] < 1:
            raise ValueError("points must be an (N, d) array with d >= 1")
        if self.labels.shape != (self.points.shape[0],):
            raise ValueError("labels must have one entry per point")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in 0..num_classes-1")
        missing = set(range(self.num_classes)) - set(np.unique(self.labels).tolist())
        if missing:
            raise ValueError(f"classes without points: {sorted(missing)}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def class_points(self, j: int) -> np.ndarray:
        return self.points[self.labels == j]

    def min_interclass_distance(self) -> float:
        from scipy.spatial import cKDTree

        best = math.inf
        for j in range(self.num_classes):
            tree = cKDTree(self.points[self.labels != j])
            d, _ = tree.query(self.class_points(j))
            best = min(best, float(d.min()))
        return best


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    points_per_class: int = Field(2000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)

    @property
    def ambient_dim(self) -> int:
        return 3

    @property
    def num_classes(self) -> int:
        return 2


class Annulus2D(_Spec):
    """Planar annulus cut into concentric radial bands.

    ``band_labels`` gives the class of each band from the inside out; the
    default ``[0, 1, 0]`` puts class 1 between two class-0 rings.  Bands
    have equal width and are separated by ``gap``.
    """

    kind: Literal["Annulus2D"] = "Annulus2D"
    inner_radius: float = Field(1.0, gt=0)
    outer_radius: float = Field(3.0, gt=0)
    band_labels: list[int] = [0, 1, 0]
    gap: float = Field(0.1, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if self.outer_radius <= self.inner_radius:
            raise ShapeError("outer_radius must exceed inner_radius")
        _check_label_cover(self.band_labels)
        if self.band_width() <= 0:
            raise ShapeError("gaps consume the whole annulus; bands would overlap or vanish")
        return self

    @property
    def ambient_dim(self) -> int:
        return 2

    @property
    def num_classes(self) -> int:
        return max(self.band_labels) + 1

    def band_width(self) -> float:
        nb = len(self.band_labels)
        return (self.outer_radius - self.inner_radius - self.gap * (nb - 1)) / nb

    def bands(self) -> list[tuple[float, float]]:
        w = self.band_width()
        return [
            (self.inner_radius + i * (w + self.gap), self.inner_radius + i * (w + self.gap) + w)
            for i in range(len(self.band_labels))
        ]


class Torus3D(_Spec):
    """Torus surface in R^3 labeled by arcs of the major angle.

    The major circle is split into ``len(arc_labels)`` equal arcs; each
    arc keeps a margin of ``gap`` radians at both ends.  The default
    ``[0, 1, 0, 2]`` sandwiches a class-1 ring between two class-0 rings
    and gives the remaining half of the torus to class 2.
    """

    kind: Literal["Torus3D"] = "Torus3D"
    major_radius: float = Field(2.0, gt=0)
    minor_radius: float = Field(0.75, gt=0)
    arc_labels: list[int] = [0, 1, 0, 2]
    gap: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if self.minor_radius >= self.major_radius:
            raise ShapeError("minor_radius must be smaller than major_radius")
        _check_label_cover(self.arc_labels)
        if 2 * self.gap >= 2 * math.pi / len(self.arc_labels):
            raise ShapeError("gap margins swallow the arcs")
        return self

    @property
    def num_classes(self) -> int:
        return max(self.arc_labels) + 1

    def arcs(self) -> list[tuple[float, float]]:
        step = 2 * math.pi / len(self.arc_labels)
        return [(i * step + self.gap, (i + 1) * step - self.gap) for i in range(len(self.arc_labels))]


class BallShell(_Spec):
    """Solid ball (class 0) inside a concentric shell (class 1) in R^dim."""

    kind: Literal["BallShell"] = "BallShell"
    dim: int = Field(3, ge=1)
    inner_radius: float = Field(0.9, gt=0)
    shell_inner: float = Field(1.0, gt=0)
    shell_outer: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if not self.inner_radius < self.shell_inner < self.shell_outer:
            raise ShapeError(
                "need inner_radius < shell_inner < shell_outer, got "
                f"{self.inner_radius}, {self.shell_inner}, {self.shell_outer}"
            )
        return self

    @property
    def ambient_dim(self) -> int:
        return self.dim


class LinkedTori(_Spec):
    """Two torus surfaces in R^3 forming a Hopf link.

    Torus 0 has its core circle in the xy-plane about the origin; torus 1
    has its core in the xz-plane about ``(major_radius, 0, 0)``.  Each
    core passes through the center of the other.
    """

    kind: Literal["LinkedTori"] = "LinkedTori"
    major_radius: float = Field(1.0, gt=0)
    minor_radius: float = Field(0.25, gt=0)

    @model_validator(mode="after")
    def _check(self):
        # each core passes through the other's center, so the cores come
        # no closer than major_radius
        if 2 * self.minor_radius >= core_circle_distance(self.major_radius):
            raise ShapeError("tubes of the linked tori intersect; reduce minor_radius")
        return self


ShapeSpec = Annotated[
    Union[Annulus2D, Torus3D, BallShell, LinkedTori], Field(discriminator="kind")
]
_shape_adapter = TypeAdapter(ShapeSpec)


def parse_shape(obj) -> Annulus2D | Torus3D | BallShell | LinkedTori:
    """Build a shape spec from a plain mapping (``kind`` selects the type)."""
    return _shape_adapter.validate_python(obj)


def _check_label_cover(labels):
    if len(labels) < 2:
        raise ShapeError("need at least two labeled regions")
    if min(labels) < 0:
        raise ShapeError("labels must be nonnegative")
    n = max(labels) + 1
    if set(labels) != set(range(n)):
        raise ShapeError(f"labels {labels} do not cover 0..{n - 1}")
    if n < 2:
        raise ShapeError("need at least two classes")


def core_circle_distance(major_radius: float) -> float:
    """Minimum distance between the two Hopf-linked core circles."""
    return major_radius


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _per_region_counts(region_labels, points_per_class):
    counts = [0] * len(region_labels)
    for c in set(region_labels):
        idx = [i for i, lab in enumerate(region_labels) if lab == c]
        for i, k in zip(idx, _split(points_per_class, len(idx))):
            counts[i] = k
    return counts


def _torus_points(phi, theta, R, r):
    rho = R + r * np.cos(theta)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), r * np.sin(theta)], 1)


def _sample_annulus(spec: Annulus2D, rng):
    pts, labs = [], []
    counts = _per_region_counts(spec.band_labels, spec.points_per_class)
    for (lo, hi), lab, k in zip(spec.bands(), spec.band_labels, counts):
        theta = rng.uniform(0.0, 2 * np.pi, k)
        rad = rng.uniform(lo, hi, k)
        pts.append(np.stack([rad * np.cos(theta), rad * np.sin(theta)], 1))
        labs.append(np.full(k, lab))
    return np.concatenate(pts), np.concatenate(labs)


def _sample_torus(spec: Torus3D, rng):
    pts, labs = [], []
    counts = _per_region_counts(spec.arc_labels, spec.points_per_class)
    for (lo, hi), lab, k in zip(spec.arcs(), spec.arc_labels, counts):
        phi = rng.uniform(lo, hi, k)
        theta = rng.uniform(0.0, 2 * np.pi, k)
        pts.append(_torus_points(phi, theta, spec.major_radius, spec.minor_radius))
        labs.append(np.full(k, lab))
    return np.concatenate(pts), np.concatenate(labs)


def _sample_ballshell(spec: BallShell, rng):
    k = spec.points_per_class

    def directions():
        g = rng.standard_normal((k, spec.dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    inner = directions() * rng.uniform(0.0, spec.inner_radius, (k, 1))
    shell = directions() * rng.uniform(spec.shell_inner, spec.shell_outer, (k, 1))
    # clamp against rounding so the region predicates hold exactly
    inner = _clip_norm(inner, 0.0, spec.inner_radius)
    shell = _clip_norm(shell, spec.shell_inner, spec.shell_outer)
    return np.concatenate([inner, shell]), np.repeat([0, 1], k)


def _clip_norm(x, lo, hi):
    n = np.linalg.norm(x, axis=1)
    bad = (n > hi) | (n < lo)
    if bad.any():
        target = np.clip(n[bad], lo, hi)
        x[bad] *= (target / n[bad])[:, None]
        # nudge strictly inside if rescaling still rounds outside
        n2 = np.linalg.norm(x[bad], axis=1)
        x[bad] *= np.where(n2 > hi, np.nextafter(hi, 0) / n2, 1.0)[:, None]
        n2 = np.linalg.norm(x[bad], axis=1)
        x[bad] *= np.where(n2 < lo, np.nextafter(lo, np.inf) / np.maximum(n2, 1e-300), 1.0)[:, None]
    return x


def _sample_linked(spec: LinkedTori, rng):
    k = spec.points_per_class
    R, r = spec.major_radius, spec.minor_radius
    a = _torus_points(rng.uniform(0, 2 * np.pi, k), rng.uniform(0, 2 * np.pi, k), R, r)
    b = _torus_points(rng.uniform(0, 2 * np.pi, k), rng.uniform(0, 2 * np.pi, k), R, r)
    # rotate torus 1 so its axis is y, then shift by R along x
    b = np.stack([b[:, 0] + R, b[:, 2], b[:, 1]], 1)
    return np.concatenate([a, b]), np.repeat([0, 1], k)


_SAMPLERS = {
    "Annulus2D": _sample_annulus,
    "Torus3D": _sample_torus,
    "BallShell": _sample_ballshell,
    "LinkedTori": _sample_linked,
}


def generate(spec) -> LabeledPointSet:
    """Sample a labeled point set from ``spec``.

    Deterministic in ``spec.seed``; each class receives exactly
    ``spec.points_per_class`` points.
    """
    if isinstance(spec, dict):
        spec = parse_shape(spec)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    pts, labs = _SAMPLERS[spec.kind](spec, rng)
    n = int(labs.max()) + 1
    return LabeledPointSet(pts, labs, n, shape_tag=f"{spec.kind}:seed={spec.seed}")


def region_label(spec, points: np.ndarray) -> np.ndarray:
    """Class whose region predicate each point satisfies, or -1 for none.

    Predicates are closed regions; the sampler's output satisfies its own
    class predicate for every point.
    """
    x = np.asarray(points, dtype=float)
    out = np.full(len(x), -1)
    if spec.kind == "Annulus2D":
        r = np.hypot(x[:, 0], x[:, 1])
        for (lo, hi), lab in zip(spec.bands(), spec.band_labels):
            out[(r >= lo) & (r <= hi)] = lab
    elif spec.kind == "Torus3D":
        phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        tol = 1e-12
        for (lo, hi), lab in zip(spec.arcs(), spec.arc_labels):
            out[(phi >= lo - tol) & (phi <= hi + tol)] = lab
    elif spec.kind == "BallShell":
        n = np.linalg.norm(x, axis=1)
        out[n <= spec.inner_radius] = 0
        out[(n >= spec.shell_inner) & (n <= spec.shell_outer)] = 1
    elif spec.kind == "LinkedTori":
        R, r = spec.major_radius, spec.minor_radius
        tol = 1e-9
        d0 = (np.hypot(x[:, 0], x[:, 1]) - R) ** 2 + x[:, 2] ** 2
        d1 = (np.hypot(x[:, 0] - R, x[:, 2]) - R) ** 2 + x[:, 1] ** 2
        out[np.abs(d0 - r * r) <= tol] = 0
        out[np.abs(d1 - r * r) <= tol] = 1
    else:
        raise ShapeError(f"unknown shape kind {spec.kind!r}")
    return out
