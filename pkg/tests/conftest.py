"""Shared builders for the test suite.

Instance builders return deterministic data from explicit seeds so every
test is reproducible in isolation.  The lattice builders produce instances
whose optimal plan is known in closed form (identity matching), which gives
the inequality tests an exact reference point.
"""

import numpy as np
import pytest

from otha.measures import Ball, Coupling, DiscreteMeasure
from otha.ot import solve_quadratic


def random_measure(rng, n, scale=4.0, equal_weights=False, mass=1.0):
    pts = rng.uniform(-scale, scale, (n, 2))
    if equal_weights:
        w = np.full(n, mass / n)
    else:
        w = rng.uniform(0.2, 1.0, n)
        w *= mass / w.sum()
    return DiscreteMeasure(pts, w)


def nwc_coupling(a: DiscreteMeasure, b: DiscreteMeasure) -> Coupling:
    """Admissible (generally non-optimal) coupling by northwest-corner filling."""
    i = j = 0
    ra, rb = a.weights[0], b.weights[0]
    ii, jj, mm = [], [], []
    while True:
        t = min(ra, rb)
        ii.append(i)
        jj.append(j)
        mm.append(t)
        ra -= t
        rb -= t
        if ra <= rb:
            i += 1
            if i == len(a):
                break
            ra = a.weights[i]
        else:
            j += 1
            if j == len(b):
                break
            rb = b.weights[j]
    return Coupling(a, b, ii, jj, mm, atol=1e-9)


def random_admissible_coupling(rng, n, scale=4.0):
    """Random admissible coupling: northwest-corner plan on shuffled atoms."""
    a = random_measure(rng, n, scale)
    b = random_measure(rng, rng.integers(max(2, n // 2), n + 1), scale)
    return nwc_coupling(a, b)


def gradient_lattice(eps, spacing=0.4, matrix=((1.3, 0.0), (0.0, 0.7)), radius=6.0):
    """Perturbed lattice whose optimal plan is the identity matching.

    The displacement is eps * A p / 8 with A symmetric positive definite, so
    the map p -> p + eps*A p/8 is the gradient of a convex quadratic and the
    support of the identity matching is cyclically monotone, hence optimal.
    """
    A = np.asarray(matrix, dtype=float) / 8.0
    k = int(np.ceil(radius / spacing)) + 1
    c = np.arange(-k, k + 1) * spacing
    gx, gy = np.meshgrid(c, c, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < radius]
    w = np.full(len(pts), spacing * spacing)
    mu = DiscreteMeasure(pts, w)
    lam = DiscreteMeasure(pts + eps * pts @ A.T, w)
    return lam, mu


def identity_plan(lam: DiscreteMeasure, mu: DiscreteMeasure) -> Coupling:
    assert len(lam) == len(mu)
    idx = np.arange(len(lam))
    return Coupling(lam, mu, idx, idx, mu.weights)


@pytest.fixture(scope="session")
def lattice_instance():
    """One crossing-rich optimal instance shared by the slower suites."""
    lam, mu = gradient_lattice(0.12, spacing=0.4)
    pi = solve_quadratic(lam, mu).coupling
    return lam, mu, pi


@pytest.fixture(scope="session")
def coupling_corpus():
    """Couplings of varied provenance for identity/balance checks."""
    rng = np.random.default_rng(7)
    corpus = []
    for n in (6, 17, 33, 50):
        corpus.append(random_admissible_coupling(rng, n))
    m = random_measure(rng, 24, scale=3.0)
    idx = np.arange(len(m))
    corpus.append(Coupling(m, m, idx, idx, m.weights))
    lam, mu = gradient_lattice(0.15, spacing=0.6)
    corpus.append(solve_quadratic(lam, mu).coupling)
    return corpus


class PolyField:
    """Polynomial test field of degree <= 2 with exact gradient."""

    def __init__(self, c0=0.0, cx=0.0, cy=0.0, cxx=0.0, cyy=0.0, cxy=0.0):
        self.k = (c0, cx, cy, cxx, cyy, cxy)

    def value(self, p):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        c0, cx, cy, cxx, cyy, cxy = self.k
        x, y = p[:, 0], p[:, 1]
        return c0 + cx * x + cy * y + cxx * x * x + cyy * y * y + cxy * x * y

    def gradient(self, p):
        p = np.asarray(p, dtype=float).reshape(-1, 2)
        c0, cx, cy, cxx, cyy, cxy = self.k
        x, y = p[:, 0], p[:, 1]
        return np.stack([cx + 2 * cxx * x + cxy * y,
                         cy + 2 * cyy * y + cxy * x], axis=1)


def poly_fields(rng=None):
    fields = [
        PolyField(c0=2.0),
        PolyField(cx=1.0),
        PolyField(cxx=1.0, cyy=-1.0),
        PolyField(cxy=1.0),
    ]
    if rng is not None:
        for _ in range(2):
            fields.append(PolyField(*rng.uniform(-1, 1, 6)))
    return fields


def ball_mass(m: DiscreteMeasure, R: float) -> float:
    return float(m.weights[Ball(R).contains(m.points)].sum())
