"""Discrete measures on the plane and couplings between them.

Everything downstream (transport solves, trajectory bookkeeping, boundary
data) consumes the types defined here.  A measure is a weighted planar point
cloud; a coupling is a sparse transference plan between two such clouds.
All instances are immutable after construction and safe to share.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInputError

MASS_ATOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or infinite coordinates")
    return pts


@dataclass(frozen=True)
class Ball:
    """Open ball of given radius centered at the origin."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict membership mask (open ball)."""
        pts = np.asarray(points, dtype=float)
        return np.hypot(pts[..., 0], pts[..., 1]) < self.radius


class DiscreteMeasure:
    """Non-negative weighted point cloud in the plane.

    Zero-weight atoms are dropped on construction; the total mass is cached.
    """

    __slots__ = ("points", "weights", "total_mass")

    def __init__(self, points, weights):
        pts = _as_points(points)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ValueError(f"{len(pts)} points but {len(w)} weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain NaN or infinite values")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        keep = w > 0
        if not keep.all():
            pts = pts[keep]
            w = w[keep]
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.total_mass = float(w.sum())

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n={len(self)}, mass={self.total_mass:.6g})"

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def same_atoms(self, other: "DiscreteMeasure") -> bool:
        """Atom-wise equality (same points in the same order, same weights)."""
        return (
            len(self) == len(other)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    @staticmethod
    def empty() -> "DiscreteMeasure":
        return DiscreteMeasure(np.zeros((0, 2)), np.zeros(0))


def restrict(m: DiscreteMeasure, b: Ball) -> DiscreteMeasure:
    """Sub-measure of atoms strictly inside the open ball.

    Atoms sitting exactly on the boundary circle are excluded; they belong to
    the boundary measures built by the trajectories module.
    """
    mask = b.contains(m.points)
    return DiscreteMeasure(m.points[mask], m.weights[mask])


def restrict_mask(m: DiscreteMeasure, b: Ball) -> np.ndarray:
    """Mask of atoms strictly inside the open ball (same convention as restrict)."""
    return b.contains(m.points)


def uniform_disc(b: Ball, spacing: float, target_mass: float) -> DiscreteMeasure:
    """Uniform discretization of the disc on a square grid of cell centers.

    Atoms sit at cell centers strictly inside the ball, with equal weights
    rescaled so the total mass equals target_mass exactly (the rounding
    residual is folded into the first largest atom).
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if spacing >= b.radius:
        raise ValueError(f"spacing {spacing} must be smaller than radius {b.radius}")
    if not target_mass > 0:
        raise ValueError("target_mass must be positive")
    k = int(math.ceil(b.radius / spacing)) + 1
    centers = (np.arange(-k, k) + 0.5) * spacing
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[b.contains(pts)]
    n = len(pts)
    if n == 0:
        raise ValueError("spacing too coarse: no cell center falls inside the ball")
    w = np.full(n, target_mass / n)
    w[int(np.argmax(w))] += target_mass - w.sum()
    return DiscreteMeasure(pts, w)


class Coupling:
    """Sparse transference plan between two discrete measures.

    Entries are (source index, target index, mass) triples; admissibility
    (marginals equal to the declared measures) is validated at construction.
    """

    __slots__ = ("source", "target", "i", "j", "mass")

    def __init__(self, source: DiscreteMeasure, target: DiscreteMeasure,
                 i, j, mass, validate: bool = True, atol: float = 1e-9):
        self.source = source
        self.target = target
        i = np.asarray(i, dtype=np.intp).reshape(-1)
        j = np.asarray(j, dtype=np.intp).reshape(-1)
        m = np.asarray(mass, dtype=float).reshape(-1)
        if not (len(i) == len(j) == len(m)):
            raise ValueError("entry arrays must have equal length")
        if np.any(m < 0):
            raise ValueError("entry masses must be non-negative")
        keep = m > 0
        if not keep.all():
            i, j, m = i[keep], j[keep], m[keep]
        for arr in (i, j, m):
            arr.setflags(write=False)
        self.i, self.j, self.mass = i, j, m
        if len(i) and (i.max() >= len(source) or j.max() >= len(target)):
            raise ValueError("entry index out of range")
        if validate:
            row, col = self.accumulated_marginals()
            scale = max(source.total_mass, 1.0)
            err_r = np.abs(row - source.weights).max() if len(source) else 0.0
            err_c = np.abs(col - target.weights).max() if len(target) else 0.0
            if max(err_r, err_c) > atol * scale:
                raise InfeasibleInputError(
                    f"coupling is not admissible: marginal error {max(err_r, err_c):.3e}"
                )

    def __len__(self) -> int:
        return len(self.mass)

    def accumulated_marginals(self) -> tuple[np.ndarray, np.ndarray]:
        row = np.zeros(len(self.source))
        col = np.zeros(len(self.target))
        np.add.at(row, self.i, self.mass)
        np.add.at(col, self.j, self.mass)
        return row, col

    @property
    def x(self) -> np.ndarray:
        """Source points of the support entries, shape (k, 2)."""
        return self.source.points[self.i]

    @property
    def y(self) -> np.ndarray:
        """Target points of the support entries, shape (k, 2)."""
        return self.target.points[self.j]

    def cost(self) -> float:
        """Total quadratic transport cost of the plan."""
        d = self.x - self.y
        return float((self.mass * (d * d).sum(axis=1)).sum())


def marginals(c: Coupling) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Marginal measures accumulated from the coupling entries."""
    row, col = c.accumulated_marginals()
    return (
        DiscreteMeasure(c.source.points, row),
        DiscreteMeasure(c.target.points, col),
    )


def identity_coupling(m: DiscreteMeasure) -> Coupling:
    idx = np.arange(len(m))
    return Coupling(m, m, idx, idx, m.weights)


def product_coupling(a: DiscreteMeasure, b: DiscreteMeasure) -> Coupling:
    """Independent coupling a x b / mass; requires equal total masses."""
    if abs(a.total_mass - b.total_mass) > 1e-9 * max(a.total_mass, 1.0):
        raise InfeasibleInputError("product coupling needs equal total masses")
    i = np.repeat(np.arange(len(a)), len(b))
    j = np.tile(np.arange(len(b)), len(a))
    m = (a.weights[:, None] * b.weights[None, :]).ravel() / a.total_mass
    return Coupling(a, b, i, j, m)


def concat(a: DiscreteMeasure, b: DiscreteMeasure) -> DiscreteMeasure:
    """Sum measure with a's atoms first, then b's (order preserved)."""
    return DiscreteMeasure(
        np.vstack([a.points, b.points]),
        np.concatenate([a.weights, b.weights]),
    )


def load_measure(obj) -> DiscreteMeasure:
    """Load a measure from the JSON dict format {"points": [[x,y],...], "weights": [...]}."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    points = obj["points"]
    weights = obj["weights"]
    if len(points) != len(weights):
        raise ValueError(f"{len(points)} points but {len(weights)} weights in JSON measure")
    return DiscreteMeasure(points, weights)


def dump_measure(m: DiscreteMeasure) -> dict:
    return {"points": m.points.tolist(), "weights": m.weights.tolist()}
