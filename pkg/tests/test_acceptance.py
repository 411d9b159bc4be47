"""Acceptance suite: one test per headline criterion, each printing a
single PASS/FAIL line with its runtime against the stated budget."""

import itertools
import json
import time

import numpy as np
import pytest

from otha.boundary_approx import (approx_quality, rearrangement_oracle,
                                  TriplePlan, projection_distance_check)
from otha.cli import main
from otha.experiment import (ExperimentConfig, generate,
                             run_harmonic_approximation)
from otha.localization import glue_competitor, local_optimality_gap, localized_pair
from otha.measures import Ball, DiscreteMeasure, concat
from otha.ot import check_monotone, solve_quadratic, w2_sorted_1d, wasserstein2
from otha.poisson2d import (FourierBoundaryData, density_l2, density_values,
                            dirichlet_energy, solve_neumann)
from otha.trajectories import boundary_measures, verify_orthogonality

from conftest import (ball_mass, gradient_lattice, poly_fields,
                      random_admissible_coupling, random_measure)


def _finish(name, ok, elapsed, budget):
    status = "PASS" if ok and elapsed < budget else "FAIL"
    print(f"[ACCEPTANCE] criterion {name}: {status} "
          f"({elapsed:.2f}s, budget {budget:g}s)")
    assert ok, f"criterion {name} failed"
    assert elapsed < budget, f"criterion {name} exceeded {budget}s ({elapsed:.2f}s)"


@pytest.fixture(scope="module")
def random_corpus():
    rng = np.random.default_rng(101)
    return [random_admissible_coupling(rng, int(rng.integers(5, 51)))
            for _ in range(20)]


@pytest.fixture(scope="module")
def lattice_corpus():
    """20 perturbed-lattice instances with their exact optimal plans."""
    rng = np.random.default_rng(202)
    out = []
    for _ in range(20):
        ang = rng.uniform(0, np.pi)
        ev = rng.uniform(0.5, 2.0, 2)
        rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
        matrix = rot @ np.diag(ev) @ rot.T
        eps = float(rng.uniform(0.05, 0.25))
        lam, mu = gradient_lattice(eps, spacing=0.4, matrix=matrix)
        out.append((lam, mu, solve_quadratic(lam, mu).coupling))
    return out


def test_criterion_1_orthogonality(random_corpus):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    ok = True
    for c in random_corpus:
        R = float(rng.uniform(2.0, 3.0))
        scale = max(1.0, c.source.total_mass)
        for fld in poly_fields(rng):
            ok &= verify_orthogonality(c, R, fld) <= 1e-9 * scale
    _finish("1 (orthogonality identity)", ok, time.perf_counter() - start, 5.0)


def test_criterion_2_mass_balance(random_corpus):
    start = time.perf_counter()
    ok = True
    for c in random_corpus:
        lam, mu = c.source, c.target
        for R in np.linspace(2.0, 3.0, 9):
            f, g = boundary_measures(c, R)
            bal = abs(ball_mass(lam, R) + f.total_mass
                      - ball_mass(mu, R) - g.total_mass)
            ok &= bal <= 1e-12 * max(1.0, lam.total_mass)
    _finish("2 (mass balance)", ok, time.perf_counter() - start, 1.0)


def test_criterion_3_solver_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(33)
    ok = True
    # 1-D oracle equivalence on collinear instances
    for _ in range(50):
        n = int(rng.integers(2, 201))
        d = rng.normal(size=2)
        d /= np.hypot(*d)
        base = rng.normal(size=2)
        tx = np.sort(rng.uniform(-5, 5, n))
        ty = np.sort(rng.uniform(-5, 5, n))
        a = DiscreteMeasure(base + tx[:, None] * d, np.full(n, 1.0 / n))
        b = DiscreteMeasure(base + ty[:, None] * d, np.full(n, 1.0 / n))
        sol = solve_quadratic(a, b)
        want = w2_sorted_1d(tx, ty)
        ok &= abs(sol.cost - want) <= 1e-9 * max(1.0, want)
        ok &= check_monotone(sol.coupling)[1] >= -1e-9
    # triangle and scaling inequalities on random instances
    for _ in range(50):
        lam = random_measure(rng, int(rng.integers(4, 14)))
        mu = random_measure(rng, int(rng.integers(4, 14)))
        nu = random_measure(rng, int(rng.integers(4, 14)))
        sol = solve_quadratic(lam, mu)
        ok &= check_monotone(sol.coupling)[1] >= -1e-9
        wlm = np.sqrt(sol.cost)
        ok &= (np.sqrt(wasserstein2(lam, nu)) + np.sqrt(wasserstein2(nu, mu))
               - wlm) >= -1e-9
        for M in (0, 1, 4):
            mixed = (concat(lam, DiscreteMeasure(mu.points, M * mu.weights))
                     if M else lam)
            scaled = DiscreteMeasure(mu.points, (1 + M) * mu.weights)
            rhs = (np.sqrt(wasserstein2(mixed, scaled))
                   / (np.sqrt(1.0 + M) - np.sqrt(M)))
            ok &= (rhs - wlm) >= -1e-9
    _finish("3 (solver exactness)", ok, time.perf_counter() - start, 60.0)


def test_criterion_4_localized_optimality(lattice_corpus):
    start = time.perf_counter()
    ok = True
    grid = np.linspace(2.0, 3.0, 8)
    for _, _, pi in lattice_corpus:
        cost = pi.cost()
        for R in grid:
            ok &= local_optimality_gap(pi, R).slack >= -1e-9
            src, tgt = localized_pair(pi, R)
            if len(src) == 0:
                continue
            pi_bar = solve_quadratic(src, tgt).coupling
            glued = glue_competitor(pi, pi_bar, R)  # admissible at 1e-12
            ok &= glued.cost() >= cost - 1e-9 * max(1.0, cost)
    _finish("4 (localized optimality)", ok, time.perf_counter() - start, 180.0)


def test_criterion_5_neumann_poisson():
    start = time.perf_counter()
    rng = np.random.default_rng(55)
    ok = True
    for _ in range(5):
        R = float(rng.uniform(2.0, 3.0))
        N = 12
        n = np.arange(1, N + 1)
        data = FourierBoundaryData(R, rng.normal(size=N) / n ** 2,
                                   rng.normal(size=N) / n ** 2)
        c = float(rng.normal())
        sol = solve_neumann(c, data)
        # interior equation at 100 random points
        rad = np.sqrt(rng.uniform(0, 1, 100)) * R * 0.999
        ang = rng.uniform(0, 2 * np.pi, 100)
        pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        hess = sol.hessian(pts)
        ok &= np.abs(hess[:, 0, 0] + hess[:, 1, 1] + c).max() <= 1e-9
        # Neumann trace reproduction at 256 angles
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        want = density_values(data, -c * R / 2.0, th)
        ok &= np.abs(sol.neumann_trace(th) - want).max() <= 1e-9
        # Parseval energy vs tensor quadrature
        gx, gw = np.polynomial.legendre.leggauss(48)
        r = 0.5 * R * (gx + 1.0)
        wr = 0.5 * R * gw * r
        tq = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        rr, tt = np.meshgrid(r, tq, indexing="ij")
        qp = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], 1)
        qw = (wr[:, None] * (2 * np.pi / 256) * np.ones(256)[None, :]).ravel()
        grad = sol.gradient(qp)
        quad = float((grad * grad).sum(axis=1) @ qw)
        exact = dirichlet_energy(sol)
        ok &= abs(exact - quad) <= 1e-4 * max(1.0, exact)
        # trace inequality (mean-free data, no source)
        flat = solve_neumann(0.0, data)
        ok &= dirichlet_energy(flat) <= R * density_l2(data, 0.0) + 1e-12
        mode1 = solve_neumann(0.0, FourierBoundaryData(
            R, np.r_[1.0, np.zeros(3)], np.r_[0.5, np.zeros(3)]))
        ratio = dirichlet_energy(mode1) / density_l2(mode1.boundary, 0.0)
        ok &= ratio >= 0.99 * R
    _finish("5 (disk Neumann problem)", ok, time.perf_counter() - start, 10.0)


def test_criterion_6_boundary_approximation(lattice_corpus):
    start = time.perf_counter()
    ok = True
    # transport bound on the regularized exit measure over the corpus
    for lam, mu, pi in lattice_corpus[:8]:
        for R in (2.0, 2.5, 3.0):
            rep = approx_quality(pi, R, 0.25)
            w2 = 0.0 if np.isnan(rep.w2_g_gbar) else rep.w2_g_gbar
            ok &= w2 <= rep.bound_ao97 + 1e-9
    # radial projection ratio on randomized geometric samples
    rng = np.random.default_rng(66)
    n = 100_000
    R = 2.5
    x = rng.normal(size=(n, 2)) * 0.5
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rng.uniform(R + 0.01, 3.9, n)
    y = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    zr, za = rng.uniform(0.02, 4.9, n), rng.uniform(0, 2 * np.pi, n)
    z = np.stack([zr * np.cos(za), zr * np.sin(za)], axis=1)
    t = TriplePlan(x, y, z, np.ones(n))
    ok &= projection_distance_check(t, R) <= 2.0 + 1e-9
    # rearrangement oracle vs exhaustive 3^12 profile enumeration
    width = 0.5
    edges = np.arange(13) * width
    cell_moment = (edges[1:] ** 2 - edges[:-1] ** 2) / 2.0
    digits = np.array(list(itertools.product(range(3), repeat=12)))
    v = np.array([0.0, 0.5, 1.0])[digits]
    feasible = np.abs(v.sum(axis=1) * width - 1.0) <= 1e-12
    best = float((v[feasible] @ cell_moment).min())
    ok &= abs(best - rearrangement_oracle(1.0, 1.0)) <= width
    _finish("6 (boundary approximation)", ok, time.perf_counter() - start, 120.0)


def test_criterion_7_harmonic_approximation_sweep():
    start = time.perf_counter()
    ok = True
    reports = []
    for eps in (0.2, 0.1, 0.05):
        config = ExperimentConfig(epsilon=eps, grid_h=0.25, fourier_N=128,
                                  mollify_r=0.2)
        lam, mu = generate(config)
        reports.append(run_harmonic_approximation(lam, mu, config))
    ratios = [r.ratio for r in reports]
    ok &= all(r is not None for r in ratios)
    ok &= ratios[0] > ratios[1] > ratios[2]  # strictly decreasing with epsilon
    ok &= ratios[2] < 1.0
    ok &= all((r.energy_ratio or 0.0) <= 10.0 for r in reports)
    disp = [r.max_displacement for r in reports]
    ok &= disp[0] > disp[1] > disp[2]
    cc = [r.crossing_cost / (r.E + r.D) for r in reports]
    ok &= cc[0] >= cc[1] >= cc[2]
    energies = [r.E for r in reports]
    ok &= energies[0] >= energies[1] >= energies[2]
    lhs = [r.lhs_ao89 for r in reports]
    ok &= lhs[0] >= lhs[1] >= lhs[2]
    smallest = reports[-1]
    c_emp = max(0.0, (smallest.ratio - 0.5) * smallest.E / smallest.D)
    print(f"[ACCEPTANCE] sweep ratios {ratios}, empirical C = {c_emp:.4f}")
    ok &= smallest.ratio <= 0.5 + c_emp * smallest.D / smallest.E + 1e-12
    _finish("7 (harmonic approximation sweep)", ok,
            time.perf_counter() - start, 600.0)


def test_criterion_8_determinism(tmp_path):
    start = time.perf_counter()
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 0, "generator": "perturbed_lattice",
                                  "grid_h": 0.25, "fourier_N": 128,
                                  "mollify_r": 0.2}))
    payloads = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["sweep", "--config", str(config),
                     "--epsilons", "0.2,0.1,0.05", "--out", str(out)]) == 0
        payloads.append((out / "sweep.csv").read_bytes())
    ok = payloads[0] == payloads[1]
    _finish("8 (byte-identical sweep CSV)", ok, time.perf_counter() - start,
            1200.0)
