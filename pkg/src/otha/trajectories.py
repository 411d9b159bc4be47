"""Dynamical view of a transport plan.

Each matched pair (x, y) carries the straight trajectory X(t) = x + t(y-x).
This module computes entry/exit times of trajectories with respect to a
centered closed ball, the localized pair set Omega (pairs anchored in B_4
whose trajectory meets the ball), the boundary entry/exit measures, crossing
statistics, and the localized transport energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import Coupling, DiscreteMeasure

ANCHOR_RADIUS = 4.0  # pair-set anchoring ball
ENERGY_RADIUS = 5.0  # localization ball for the energy
BOUNDARY_ATOL = 1e-9
TANGENT_DISC = 1e-12


@dataclass(frozen=True)
class CrossingInfo:
    sigma: float
    tau: float
    entry_on_boundary: bool
    exit_on_boundary: bool
    entry_point: tuple
    exit_point: tuple


@dataclass(frozen=True)
class LocalStats:
    crossing_mass: float
    crossing_cost: float
    omega_cost: float


def _entry_exit_arrays(x: np.ndarray, y: np.ndarray, R: float):
    """Vectorized entry/exit solve for segments x->y against the closed ball.

    Returns (present, sigma, tau, entry_pts, exit_pts, entry_flag, exit_flag).
    """
    d = y - x
    A = (d * d).sum(axis=1)
    B = 2.0 * (x * d).sum(axis=1)
    C = (x * x).sum(axis=1) - R * R
    n = len(x)
    sigma = np.zeros(n)
    tau = np.ones(n)
    present = np.zeros(n, dtype=bool)

    stat = A <= 0.0
    # stationary trajectories: in the ball for all time or never
    present[stat] = C[stat] <= BOUNDARY_ATOL * max(R, 1.0)

    mov = ~stat
    disc = B * B - 4.0 * A * C
    scale = np.maximum(1.0, B * B + 4.0 * np.abs(A * C))
    hit = mov & (disc > -TANGENT_DISC * scale)
    dsq = np.sqrt(np.clip(disc, 0.0, None))
    # citardauq form keeps the small root accurate when B dominates
    q = -0.5 * (B + np.sign(np.where(B == 0.0, 1.0, B)) * dsq)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(hit, q / A, 0.0)
        r2 = np.where(hit & (q != 0.0), C / q, r1)
    tmin = np.minimum(r1, r2)
    tmax = np.maximum(r1, r2)
    inside = hit & (tmax >= 0.0) & (tmin <= 1.0)
    present |= inside
    sigma[inside] = np.clip(tmin[inside], 0.0, 1.0)
    tau[inside] = np.clip(tmax[inside], 0.0, 1.0)

    entry = x + sigma[:, None] * d
    exit_ = x + tau[:, None] * d
    er = np.hypot(entry[:, 0], entry[:, 1])
    xr = np.hypot(exit_[:, 0], exit_[:, 1])
    tol = BOUNDARY_ATOL * max(R, 1.0)
    entry_flag = present & (np.abs(er - R) <= tol)
    exit_flag = present & (np.abs(xr - R) <= tol)
    return present, sigma, tau, entry, exit_, entry_flag, exit_flag


def entry_exit(x, y, R: float) -> CrossingInfo | None:
    """Entry/exit data of the segment x->y against the closed ball of radius R.

    Returns None when the segment never meets the closed ball.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    xa = np.asarray(x, dtype=float).reshape(1, 2)
    ya = np.asarray(y, dtype=float).reshape(1, 2)
    present, s, t, ep, xp, ef, xf = _entry_exit_arrays(xa, ya, R)
    if not present[0]:
        return None
    return CrossingInfo(
        sigma=float(s[0]), tau=float(t[0]),
        entry_on_boundary=bool(ef[0]), exit_on_boundary=bool(xf[0]),
        entry_point=(float(ep[0, 0]), float(ep[0, 1])),
        exit_point=(float(xp[0, 0]), float(xp[0, 1])),
    )


def _anchored(x: np.ndarray, y: np.ndarray, radius: float) -> np.ndarray:
    rx = np.hypot(x[:, 0], x[:, 1])
    ry = np.hypot(y[:, 0], y[:, 1])
    return (rx < radius) | (ry < radius)


def omega_mask(c: Coupling, R: float):
    """Masks and crossing arrays for the coupling's support entries.

    Returns (omega, present, sigma, tau, entry, exit, entry_flag, exit_flag)
    where omega selects pairs anchored in B_4 whose trajectory meets the ball.
    """
    x, y = c.x, c.y
    present, s, t, ep, xp, ef, xf = _entry_exit_arrays(x, y, R)
    omega = present & _anchored(x, y, ANCHOR_RADIUS)
    return omega, present, s, t, ep, xp, ef, xf


def omega_member(x, y, R: float) -> bool:
    """Pair belongs to the localized set: anchored in B_4, trajectory meets the ball."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if not (np.hypot(*xa) < ANCHOR_RADIUS or np.hypot(*ya) < ANCHOR_RADIUS):
        return False
    return entry_exit(xa, ya, R) is not None


def boundary_measures(c: Coupling, R: float) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Entry measure f and exit measure g of the plan on the circle of radius R."""
    omega, _, _, _, ep, xp, ef, xf = omega_mask(c, R)
    fm = omega & ef
    gm = omega & xf
    f = DiscreteMeasure(ep[fm], c.mass[fm])
    g = DiscreteMeasure(xp[gm], c.mass[gm])
    return f, g


def crossing_stats(c: Coupling, R: float) -> LocalStats:
    """Mass and cost of boundary-crossing pairs, and total cost over the localized set."""
    omega, _, _, _, _, _, ef, xf = omega_mask(c, R)
    d = c.x - c.y
    cost = c.mass * (d * d).sum(axis=1)
    # |X(t)|^2 is convex in t, so boundary contact implies contact at sigma or tau
    crossing = omega & (ef | xf)
    return LocalStats(
        crossing_mass=float(c.mass[crossing].sum()),
        crossing_cost=float(cost[crossing].sum()),
        omega_cost=float(cost[omega].sum()),
    )


def local_energy(c: Coupling) -> float:
    """Transport cost over pairs with an endpoint in B_5."""
    sel = _anchored(c.x, c.y, ENERGY_RADIUS)
    d = c.x - c.y
    return float((c.mass * (d * d).sum(axis=1))[sel].sum())


def max_displacement(c: Coupling) -> float:
    """Largest |x - y| over pairs with an endpoint in B_4."""
    sel = _anchored(c.x, c.y, ANCHOR_RADIUS)
    if not sel.any():
        return 0.0
    d = c.x[sel] - c.y[sel]
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def _gauss_legendre_01(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _segment_integrals(c: Coupling, R: float, field, quadrature_points: int):
    """Per-entry Gauss-Legendre integrals over [sigma, tau] of |Xdot|^2, |grad|^2
    and the cross term Xdot·grad, restricted to the localized pair set."""
    omega, _, s, t, _, _, _, _ = omega_mask(c, R)
    idx = np.nonzero(omega)[0]
    nodes, weights = _gauss_legendre_01(quadrature_points)
    x, y = c.x[idx], c.y[idx]
    d = y - x
    span = (t - s)[idx]
    # quadrature points X(s + span*node) for all entries at once
    tt = s[idx][:, None] + span[:, None] * nodes[None, :]
    pts = x[:, None, :] + tt[..., None] * d[:, None, :]
    flat = pts.reshape(-1, 2)
    grad = field.gradient(flat).reshape(len(idx), quadrature_points, 2)
    g2 = (grad * grad).sum(axis=2)
    cross = (grad * d[:, None, :]).sum(axis=2)
    int_g2 = span * (g2 * weights[None, :]).sum(axis=1)
    int_cross = span * (cross * weights[None, :]).sum(axis=1)
    speed2 = (d * d).sum(axis=1)
    int_speed2 = span * speed2
    m = c.mass[idx]
    return float((m * int_speed2).sum()), float((m * int_g2).sum()), float((m * int_cross).sum())


def verify_orthogonality(c: Coupling, R: float, field, quadrature_points: int = 16) -> float:
    """Residual of the energy orthogonality identity for the given scalar field.

    The identity states that the time-integrated |Xdot - grad phi(X)|^2 over
    localized trajectories splits into the two pure terms minus interior and
    boundary pairings of phi; the residual is |LHS - RHS| and should vanish up
    to quadrature error.
    """
    speed2, grad2, cross = _segment_integrals(c, R, field, quadrature_points)
    lhs = speed2 - 2.0 * cross + grad2

    ball = R
    rx = np.hypot(c.source.points[:, 0], c.source.points[:, 1]) < ball
    ry = np.hypot(c.target.points[:, 0], c.target.points[:, 1]) < ball
    phi_l = field.value(c.source.points[rx])
    phi_m = field.value(c.target.points[ry])
    interior = float((c.target.weights[ry] * phi_m).sum()
                     - (c.source.weights[rx] * phi_l).sum())

    f, g = boundary_measures(c, R)
    bnd = 0.0
    if len(g):
        bnd += float((g.weights * field.value(g.points)).sum())
    if len(f):
        bnd -= float((f.weights * field.value(f.points)).sum())

    rhs = speed2 + grad2 - 2.0 * interior - 2.0 * bnd
    return abs(lhs - rhs)
