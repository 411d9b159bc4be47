"""Localized comparison machinery: the data term, the glued competitor plan,
and the localized optimality inequality.

The data term D measures how far each input measure is from a constant
multiple of Lebesgue on B_5 (quadratic transport distance to a uniform grid
plus squared density deviation).  The glued competitor splices an optimal
plan for the localized problem (interior atoms plus boundary entry/exit
atoms) back into the global plan, which yields the localized optimality
inequality for optimal plans.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt

import numpy as np

from .errors import DegenerateInputError, InfeasibleInputError
from .measures import Ball, Coupling, DiscreteMeasure, concat, restrict, uniform_disc
from .ot import solve_quadratic
from .trajectories import ENERGY_RADIUS, boundary_measures, crossing_stats, omega_mask


@dataclass(frozen=True)
class DataTermReport:
    kappa_lambda: float
    kappa_mu: float
    w2_lambda: float
    w2_mu: float
    D: float
    discretization_bound: float


def kappa(m: DiscreteMeasure, R: float) -> float:
    """Average density of the measure on the centered ball of radius R."""
    if not R > 0:
        raise ValueError("R must be positive")
    return restrict(m, Ball(R)).total_mass / (pi * R * R)


def _data_term_on_ball(lam: DiscreteMeasure, mu: DiscreteMeasure,
                       R: float, h: float) -> DataTermReport:
    ball = Ball(R)
    lam_r = restrict(lam, ball)
    mu_r = restrict(mu, ball)
    if lam_r.total_mass <= 0 or mu_r.total_mass <= 0:
        raise DegenerateInputError(f"a measure has no mass inside B_{R:g}")
    area = pi * R * R
    k_lam = lam_r.total_mass / area
    k_mu = mu_r.total_mass / area
    w2l = solve_quadratic(lam_r, uniform_disc(ball, h, lam_r.total_mass)).cost
    w2m = solve_quadratic(mu_r, uniform_disc(ball, h, mu_r.total_mass)).cost
    D = w2l + (k_lam - 1.0) ** 2 + w2m + (k_mu - 1.0) ** 2
    # in-cell transport bound for replacing Lebesgue by the grid, both measures
    bound = 2.0 * (h * h / 2.0) * 0.5 * (lam_r.total_mass + mu_r.total_mass)
    return DataTermReport(k_lam, k_mu, w2l, w2m, D, bound)


def data_term(lam: DiscreteMeasure, mu: DiscreteMeasure, h: float) -> DataTermReport:
    """Data term on B_5: transport distance to the uniform grid plus density deviation."""
    return _data_term_on_ball(lam, mu, ENERGY_RADIUS, h)


def restricted_data_term(lam: DiscreteMeasure, mu: DiscreteMeasure,
                         R: float, h: float) -> DataTermReport:
    """Data term measured on B_R instead of B_5."""
    return _data_term_on_ball(lam, mu, R, h)


def _omega_partition(pi_c: Coupling, R: float):
    """Index bookkeeping for splitting a plan at the ball of radius R.

    Returns (omega, entry_sel, exit_sel, f, g) where entry_sel/exit_sel are
    entry indices of pi_c whose trajectory enters/exits on the boundary, in
    the same order as the atoms of f and g.
    """
    omega, _, _, _, ep, xp, ef, xf = omega_mask(pi_c, R)
    fm = omega & ef
    gm = omega & xf
    f = DiscreteMeasure(ep[fm], pi_c.mass[fm])
    g = DiscreteMeasure(xp[gm], pi_c.mass[gm])
    return omega, np.nonzero(fm)[0], np.nonzero(gm)[0], f, g


def localized_pair(pi_c: Coupling, R: float):
    """The localized OT instance (lambda|B_R + f, mu|B_R + g) for the plan."""
    lam, mu = pi_c.source, pi_c.target
    _, _, _, f, g = _omega_partition(pi_c, R)
    return concat(restrict(lam, Ball(R)), f), concat(restrict(mu, Ball(R)), g)


def glue_competitor(pi_c: Coupling, pi_bar: Coupling, R: float) -> Coupling:
    """Splice the localized plan pi_bar into pi_c, producing a competitor for
    the global problem.

    pi_bar must be admissible for (lambda|B_R + f, mu|B_R + g) with atoms in
    the canonical order produced by localized_pair.  Boundary atoms of f and g
    correspond one-to-one to crossing entries of pi_c, so the disintegration
    of mass over trajectories through each boundary atom is a point mass.
    """
    lam, mu = pi_c.source, pi_c.target
    ball = Ball(R)
    omega, entry_sel, exit_sel, f, g = _omega_partition(pi_c, R)
    src_expected = concat(restrict(lam, ball), f)
    tgt_expected = concat(restrict(mu, ball), g)
    if not (pi_bar.source.same_atoms(src_expected)
            and pi_bar.target.same_atoms(tgt_expected)):
        raise InfeasibleInputError(
            "pi_bar is not a plan for the canonical localized pair at this R"
        )
    lam_in = np.nonzero(ball.contains(lam.points))[0]
    mu_in = np.nonzero(ball.contains(mu.points))[0]
    n_lam_in = len(lam_in)
    n_mu_in = len(mu_in)

    out_i = [pi_c.i[~omega]]
    out_j = [pi_c.j[~omega]]
    out_m = [pi_c.mass[~omega]]

    bi, bj, bm = pi_bar.i, pi_bar.j, pi_bar.mass
    src_interior = bi < n_lam_in
    tgt_interior = bj < n_mu_in
    # map localized atom indices back to global atom indices; boundary atoms
    # route through the pi_c entry that generated them
    def back_map(idx, interior, inside_ids, boundary_sel, entry_side):
        out = np.empty(len(idx), dtype=np.intp)
        out[interior] = inside_ids[idx[interior]]
        bnd = ~interior
        out[bnd] = entry_side[boundary_sel[idx[bnd] - len(inside_ids)]]
        return out

    src_global = back_map(bi, src_interior, lam_in, entry_sel, pi_c.i)
    tgt_global = back_map(bj, tgt_interior, mu_in, exit_sel, pi_c.j)
    out_i.append(src_global)
    out_j.append(tgt_global)
    out_m.append(bm)

    return Coupling(lam, mu,
                    np.concatenate(out_i), np.concatenate(out_j),
                    np.concatenate(out_m), atol=1e-12)


@dataclass(frozen=True)
class OptimalityGapReport:
    lhs: float
    w_local: float
    crossing_term: float
    slack: float


def local_optimality_gap(pi_c: Coupling, R: float) -> OptimalityGapReport:
    """Localized optimality inequality for an optimal plan.

    sqrt(cost over the localized pair set) is at most the localized transport
    distance plus sqrt(2 x crossing cost); returns the measured slack.
    """
    stats = crossing_stats(pi_c, R)
    src, tgt = localized_pair(pi_c, R)
    if len(src) == 0 and len(tgt) == 0:
        return OptimalityGapReport(0.0, 0.0, 0.0, 0.0)
    w_local = sqrt(solve_quadratic(src, tgt).cost)
    lhs = sqrt(stats.omega_cost)
    crossing_term = sqrt(2.0 * stats.crossing_cost)
    return OptimalityGapReport(lhs, w_local, crossing_term,
                               w_local + crossing_term - lhs)
