"""Regularized boundary data via composite trajectories.

The raw exit measure g of a plan is atomic and rough.  Following each exit
trajectory by a second leg (an auxiliary plan toward a uniform grid) yields
the endpoint distribution g', whose radial projection onto the circle is the
regularized measure gbar.  The entry-side fbar is built by the mirror
construction on the reversed plan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InfeasibleInputError
from .measures import Ball, Coupling, DiscreteMeasure, concat, restrict, uniform_disc
from .ot import solve_quadratic
from .trajectories import ENERGY_RADIUS, _entry_exit_arrays, _anchored, ANCHOR_RADIUS


class TriplePlan:
    """Plan over triples (x, y, z): a first leg x->y carrying a second leg y->z."""

    __slots__ = ("x", "y", "z", "mass")

    def __init__(self, x, y, z, mass):
        self.x = np.asarray(x, dtype=float).reshape(-1, 2)
        self.y = np.asarray(y, dtype=float).reshape(-1, 2)
        self.z = np.asarray(z, dtype=float).reshape(-1, 2)
        self.mass = np.asarray(mass, dtype=float).reshape(-1)
        if not (len(self.x) == len(self.y) == len(self.z) == len(self.mass)):
            raise ValueError("triple arrays must have equal length")

    def __len__(self) -> int:
        return len(self.mass)


def compose_triple(pi_c: Coupling, pi_bar: Coupling) -> TriplePlan:
    """Compose two plans sharing the middle measure into a plan over triples.

    For every middle atom the second-leg mass is distributed conditionally,
    so the (x,y)-marginal is pi_c and the (y,z)-marginal is pi_bar.
    """
    mid = pi_c.target
    if not pi_bar.source.same_atoms(mid):
        raise InfeasibleInputError("middle measures of the two plans differ")
    # group pi_bar entries by middle atom
    order = np.argsort(pi_bar.i, kind="stable")
    bi, bj, bm = pi_bar.i[order], pi_bar.j[order], pi_bar.mass[order]
    starts = np.searchsorted(bi, np.arange(len(mid)))
    ends = np.searchsorted(bi, np.arange(len(mid)) + 1)
    counts = ends - starts

    k = counts[pi_c.j]
    reps = np.repeat(np.arange(len(pi_c)), k)
    offs = np.concatenate([np.arange(c) for c in k]) if len(k) else np.zeros(0, np.intp)
    bar_rows = starts[pi_c.j][reps] + offs
    mass = pi_c.mass[reps] * bm[bar_rows] / mid.weights[pi_c.j[reps]]
    return TriplePlan(
        pi_c.x[reps], pi_c.y[reps], pi_bar.target.points[bj[bar_rows]], mass
    )


def _exit_selection(t: TriplePlan, R: float):
    """Entries of the triple plan whose first leg is localized and exits on the circle."""
    present, _, _, _, xp, _, xf = _entry_exit_arrays(t.x, t.y, R)
    omega = present & _anchored(t.x, t.y, ANCHOR_RADIUS)
    sel = omega & xf
    return sel, xp


def build_gbar(t: TriplePlan, R: float) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Regularized exit measure: endpoint distribution g' radially projected onto the circle."""
    sel, _ = _exit_selection(t, R)
    z = t.z[sel]
    m = t.mass[sel]
    r = np.hypot(z[:, 0], z[:, 1])
    if len(r) and r.min() <= 1e-12:
        raise DegenerateInputError("second-leg endpoint at the origin cannot be projected")
    gprime = DiscreteMeasure(z, m)
    gbar = DiscreteMeasure(z * (R / r)[:, None] if len(r) else z, m)
    return gbar, gprime


def projection_distance_check(t: TriplePlan, R: float) -> float:
    """Worst ratio |X(tau) - proj(z)| / |X(tau) - z| over projected entries; at most 2."""
    sel, xp = _exit_selection(t, R)
    z = t.z[sel]
    e = xp[sel]
    r = np.hypot(z[:, 0], z[:, 1])
    ok = (r > 1e-12) & (np.hypot(*(e - z).T) > 1e-12)
    z, e, r = z[ok], e[ok], r[ok]
    if len(z) == 0:
        return 0.0
    proj = z * (R / r)[:, None]
    return float((np.hypot(*(e - proj).T) / np.hypot(*(e - z).T)).max())


def auxiliary_plan(m: DiscreteMeasure, h: float) -> Coupling:
    """Second-leg plan: optimal transport of m|B_5 to the uniform grid, identity outside."""
    ball = Ball(ENERGY_RADIUS)
    inside = ball.contains(m.points)
    ids_in = np.nonzero(inside)[0]
    ids_out = np.nonzero(~inside)[0]
    if len(ids_in) == 0:
        raise DegenerateInputError("measure has no mass inside B_5")
    m_in = DiscreteMeasure(m.points[inside], m.weights[inside])
    grid = uniform_disc(ball, h, m_in.total_mass)
    sol = solve_quadratic(m_in, grid)
    target = concat(grid, DiscreteMeasure(m.points[~inside], m.weights[~inside]))
    i = np.concatenate([ids_in[sol.coupling.i], ids_out])
    j = np.concatenate([sol.coupling.j, len(grid) + np.arange(len(ids_out))])
    mass = np.concatenate([sol.coupling.mass, m.weights[~inside]])
    return Coupling(m, target, i, j, mass, atol=1e-12)


def _reverse(c: Coupling) -> Coupling:
    return Coupling(c.target, c.source, c.j, c.i, c.mass, validate=False)


def regularized_pair(pi_c: Coupling, R: float, h: float):
    """(gbar, fbar) for the plan: exit side directly, entry side by mirror symmetry."""
    t_g = compose_triple(pi_c, auxiliary_plan(pi_c.target, h))
    gbar, _ = build_gbar(t_g, R)
    t_f = compose_triple(_reverse(pi_c), auxiliary_plan(pi_c.source, h))
    fbar, _ = build_gbar(t_f, R)
    return gbar, fbar


@dataclass(frozen=True)
class ApproxQualityReport:
    w2_g_gbar: float
    bound_ao97: float
    l2_density_proxy: float
    bound_ao96: float


def approx_quality(pi_c: Coupling, R: float, h: float,
                   mollify_r: float = 0.2, fourier_N: int = 128) -> ApproxQualityReport:
    """Quality of the regularized exit measure against its two theoretical bounds.

    The transport distance between g and gbar is bounded by 8 x (crossing
    cost + data term); the squared circle density of the mollified gbar is
    measured against 5 kappa_mu (3E + D).
    """
    from .localization import data_term
    from .poisson2d import density_l2, fourier_from_measures, mollify
    from .trajectories import boundary_measures, crossing_stats, local_energy

    lam, mu = pi_c.source, pi_c.target
    D = data_term(lam, mu, h).D
    E = local_energy(pi_c)
    stats = crossing_stats(pi_c, R)
    _, g = boundary_measures(pi_c, R)
    t = compose_triple(pi_c, auxiliary_plan(mu, h))
    gbar, _ = build_gbar(t, R)
    if len(g) == 0 and len(gbar) == 0:
        w2 = 0.0
        l2 = 0.0
    else:
        w2 = solve_quadratic(g, gbar).cost if len(g) and len(gbar) else float("nan")
        data = mollify(fourier_from_measures(gbar, DiscreteMeasure.empty(),
                                             R, fourier_N), mollify_r)
        l2 = density_l2(data, gbar.total_mass)
    kappa_mu = restrict(mu, Ball(ENERGY_RADIUS)).total_mass / (np.pi * ENERGY_RADIUS ** 2)
    return ApproxQualityReport(
        w2_g_gbar=w2,
        bound_ao97=8.0 * (stats.crossing_cost + D),
        l2_density_proxy=l2,
        bound_ao96=5.0 * kappa_mu * (3.0 * E + D),
    )


def rearrangement_oracle(m: float, sup_bound: float) -> float:
    """Minimum of the first-moment functional over densities of mass m capped at sup_bound."""
    if m < 0:
        raise ValueError("mass must be non-negative")
    if not sup_bound > 0:
        raise ValueError("sup bound must be positive")
    return m * m / (2.0 * sup_bound)
