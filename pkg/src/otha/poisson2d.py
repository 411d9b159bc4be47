"""Spectral solution of the Neumann-Poisson problem on a centered disk.

The problem is -laplacian(phi) = c in B_R with prescribed normal derivative
on the boundary circle and zero-mean normalization.  Boundary data live as a
truncated Fourier series of a density on the circle (with respect to arc
length); the interior constant c carries the zeroth mode through the
compatibility condition.  The solution is

    phi(r, theta) = -c r^2/4 + c R^2/8
                    + sum_n (R/n) (r/R)^n (a_n cos n theta + b_n sin n theta)

which reproduces the Neumann trace -cR/2 + sum_n (a_n cos + b_n sin)
exactly and satisfies the interior equation termwise.  Evaluation is done in
Cartesian form through the analytic function F(z) = sum_n (R^{1-n}/n)
(a_n - i b_n) z^n, so gradients and Hessians come from F' and F''.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInputError, OutOfDomainError
from .measures import DiscreteMeasure

COMPAT_ATOL = 1e-9
CIRCLE_ATOL = 1e-9


@dataclass(frozen=True)
class FourierBoundaryData:
    """Mean-free truncated Fourier series of a signed circle density.

    Coefficients are normalized so the density with respect to arc length is
    mean + sum_n (a_n cos n theta + b_n sin n theta); the mean (zeroth mode)
    is carried separately by the interior constant.
    """

    R: float
    a: np.ndarray  # cosine coefficients, index n = 1..N
    b: np.ndarray  # sine coefficients

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if len(a) != len(b):
            raise ValueError("coefficient arrays must have equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        if not self.R > 0:
            raise ValueError("R must be positive")
        a = a.copy()
        b = b.copy()
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return len(self.a)


def fourier_from_measures(g: DiscreteMeasure, f: DiscreteMeasure,
                          R: float, N: int) -> FourierBoundaryData:
    """Fourier coefficients of the signed measure g - f on the circle of radius R."""
    if N < 1:
        raise ValueError("N must be positive")
    a = np.zeros(N)
    b = np.zeros(N)
    for m, sign in ((g, 1.0), (f, -1.0)):
        if len(m) == 0:
            continue
        r = m.radii
        if np.abs(r - R).max() > CIRCLE_ATOL * max(R, 1.0):
            raise ValueError("measure has atoms off the circle of radius R")
        theta = np.arctan2(m.points[:, 1], m.points[:, 0])
        n = np.arange(1, N + 1)
        ang = n[:, None] * theta[None, :]
        a += sign * (np.cos(ang) @ m.weights) / (np.pi * R)
        b += sign * (np.sin(ang) @ m.weights) / (np.pi * R)
    return FourierBoundaryData(R, a, b)


def boundary_data_from_measures(g: DiscreteMeasure, f: DiscreteMeasure,
                                R: float, N: int,
                                c: float | None = None):
    """Boundary flux data for the disk problem from entry/exit measures.

    Returns (data, c).  When c is not supplied it is derived from the net
    boundary flux; when it is, the zeroth flux mode must balance the interior
    source (the discrete mass-balance guarantee), else the input is rejected.
    """
    data = fourier_from_measures(g, f, R, N)
    mean_flux = (g.total_mass - f.total_mass) / (2.0 * np.pi * R)
    if c is None:
        c = -2.0 * mean_flux / R
    else:
        scale = max(1.0, abs(mean_flux), abs(c) * R / 2.0)
        if abs(mean_flux + c * R / 2.0) > COMPAT_ATOL * scale:
            raise InfeasibleInputError(
                f"boundary flux {mean_flux:.3e} incompatible with source c={c:.3e}"
            )
    return data, float(c)


class PoissonSolution:
    """Evaluable solution phi of the disk Neumann problem with constant source."""

    __slots__ = ("R", "c", "boundary", "_fc")

    def __init__(self, R: float, c: float, boundary: FourierBoundaryData):
        if boundary.R != R:
            raise ValueError("boundary data radius does not match R")
        self.R = float(R)
        self.c = float(c)
        self.boundary = boundary
        n = np.arange(1, boundary.N + 1)
        # coefficients of F(z) = sum_n fc_n z^n with phi_series = Re F
        self._fc = (R ** (1.0 - n) / n) * (boundary.a - 1j * boundary.b)

    def _check_domain(self, pts: np.ndarray):
        r = np.hypot(pts[:, 0], pts[:, 1])
        if len(r) and r.max() > self.R + 1e-9 * max(self.R, 1.0):
            raise OutOfDomainError(f"point at radius {r.max():.6g} outside the disk")

    def _series(self, z: np.ndarray, shift: int) -> np.ndarray:
        """Horner evaluation of the shift-th derivative of F at complex z."""
        fc = self._fc
        out = np.zeros_like(z)
        lowest = max(shift, 1)
        for n in range(len(fc), lowest - 1, -1):
            coef = fc[n - 1]
            for k in range(shift):
                coef *= n - k
            out = out * z + coef
        if shift == 0:
            out = out * z
        return out

    def value(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        self._check_domain(pts)
        z = pts[:, 0] + 1j * pts[:, 1]
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        return (-self.c * r2 / 4.0 + self.c * self.R ** 2 / 8.0
                + self._series(z, 0).real)

    def gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        self._check_domain(pts)
        z = pts[:, 0] + 1j * pts[:, 1]
        # F'(z) = sum n fc_n z^(n-1)
        fp = self._series(z, 1)
        g = np.stack([fp.real, -fp.imag], axis=1)
        g += (-self.c / 2.0) * pts
        return g

    def hessian(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        self._check_domain(pts)
        z = pts[:, 0] + 1j * pts[:, 1]
        fpp = self._series(z, 2)
        h = np.empty((len(pts), 2, 2))
        h[:, 0, 0] = fpp.real - self.c / 2.0
        h[:, 0, 1] = h[:, 1, 0] = -fpp.imag
        h[:, 1, 1] = -fpp.real - self.c / 2.0
        return h

    def laplacian(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        self._check_domain(pts)
        return np.full(len(pts), -self.c)

    def neumann_trace(self, thetas) -> np.ndarray:
        """Radial derivative at boundary angles; equals the flux series exactly."""
        thetas = np.asarray(thetas, dtype=float)
        n = np.arange(1, self.boundary.N + 1)
        ang = n[:, None] * thetas[None, :]
        return (-self.c * self.R / 2.0
                + self.boundary.a @ np.cos(ang) + self.boundary.b @ np.sin(ang))


def solve_neumann(c: float, data: FourierBoundaryData) -> PoissonSolution:
    if not np.isfinite(c):
        raise InfeasibleInputError("source constant must be finite")
    return PoissonSolution(data.R, c, data)


def eval_solution(sol: PoissonSolution, p):
    """Value, gradient and Hessian of phi at a single point."""
    pts = np.asarray(p, dtype=float).reshape(1, 2)
    return (
        float(sol.value(pts)[0]),
        sol.gradient(pts)[0],
        sol.hessian(pts)[0],
    )


def energy_on_ball(sol: PoissonSolution, rho: float) -> float:
    """Exact Dirichlet energy of phi over the centered sub-ball of radius rho."""
    if rho > sol.R + 1e-9 * max(sol.R, 1.0):
        raise OutOfDomainError("sub-ball exceeds the solution domain")
    rho = min(rho, sol.R)
    R, c = sol.R, sol.c
    n = np.arange(1, sol.boundary.N + 1)
    amp2 = sol.boundary.a ** 2 + sol.boundary.b ** 2
    mode = np.pi * (R ** 2 / n) * (rho / R) ** (2 * n)
    return float(np.pi * rho ** 4 * c ** 2 / 8.0 + (mode * amp2).sum())


def dirichlet_energy(sol: PoissonSolution) -> float:
    """Exact Parseval value of the full-disk Dirichlet energy."""
    return energy_on_ball(sol, sol.R)


def mollify(data: FourierBoundaryData, r: float) -> FourierBoundaryData:
    """Periodic heat-kernel mollification: mode n damped by exp(-n^2 r^2 / 2)."""
    if not r > 0:
        raise ValueError("mollification scale must be positive")
    n = np.arange(1, data.N + 1)
    damp = np.exp(-0.5 * (n * r) ** 2)
    return FourierBoundaryData(data.R, data.a * damp, data.b * damp)


def sup_bounds(sol: PoissonSolution) -> tuple[float, float]:
    """Rigorous coefficient-series majorants for sup|grad phi| and sup|hess phi|."""
    n = np.arange(1, sol.boundary.N + 1)
    asum = np.abs(sol.boundary.a) + np.abs(sol.boundary.b)
    sup_grad = abs(sol.c) * sol.R / 2.0 + float((asum * np.sqrt(2.0)).sum())
    sup_hess = abs(sol.c) + float((n / sol.R * asum * 2.0).sum())
    return sup_grad, sup_hess


def density_values(data: FourierBoundaryData, mean: float, thetas) -> np.ndarray:
    """Circle density (per arc length) mean + series at the given angles."""
    thetas = np.asarray(thetas, dtype=float)
    n = np.arange(1, data.N + 1)
    ang = n[:, None] * thetas[None, :]
    return mean + data.a @ np.cos(ang) + data.b @ np.sin(ang)


def density_l2(data: FourierBoundaryData, total_mass: float) -> float:
    """Exact integral of the squared circle density over the circle (arc length)."""
    amp2 = (data.a ** 2 + data.b ** 2).sum()
    return float(total_mass ** 2 / (2.0 * np.pi * data.R)
                 + np.pi * data.R * amp2)
