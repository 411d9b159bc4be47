"""Exact discrete quadratic optimal transport.

Two solve paths, both exact:
  * equal-size clouds with identical atom weights reduce to the assignment
    problem (scipy's linear_sum_assignment);
  * the general case runs an LP column generation loop on the transportation
    polytope with HiGHS, pricing arcs by reduced cost until none is violated.

The LP flows are then repaired on their support forest so the coupling
marginals match the declared weights to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .errors import InfeasibleInputError
from .measures import Coupling, DiscreteMeasure

MASS_RTOL = 1e-9


@dataclass(frozen=True)
class OtSolution:
    coupling: Coupling
    cost: float


def _cost_matrix(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    d0 = xs[:, 0][:, None] - ys[:, 0][None, :]
    d1 = xs[:, 1][:, None] - ys[:, 1][None, :]
    return d0 * d0 + d1 * d1


def _nwc_arcs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Northwest-corner feasible arc set; guarantees the restricted LP is feasible."""
    i = j = 0
    ra, rb = a[0], b[0]
    n, m = len(a), len(b)
    out = []
    while True:
        out.append((i, j))
        t = min(ra, rb)
        ra -= t
        rb -= t
        if ra <= rb:
            i += 1
            if i == n:
                break
            ra = a[i]
        else:
            j += 1
            if j == m:
                break
            rb = b[j]
    while out[-1][0] < n - 1:
        out.append((out[-1][0] + 1, m - 1))
    while out[-1][1] < m - 1:
        out.append((n - 1, out[-1][1] + 1))
    return np.array(out, dtype=np.intp)


def _solve_lp_cg(M: np.ndarray, a: np.ndarray, b: np.ndarray, k: int = 12):
    """Column generation on the transportation LP; returns (arcs, flows)."""
    n, m = M.shape
    kk = min(k, m)
    rows = np.repeat(np.arange(n), kk)
    cols = np.argpartition(M, kk - 1, axis=1)[:, :kk].ravel()
    kk2 = min(k, n)
    rows = np.concatenate([rows, np.argpartition(M, kk2 - 1, axis=0)[:kk2, :].ravel()])
    cols = np.concatenate([cols, np.tile(np.arange(m), kk2)])
    nw = _nwc_arcs(a, b)
    rows = np.concatenate([rows, nw[:, 0]])
    cols = np.concatenate([cols, nw[:, 1]])
    arcs = np.unique(np.stack([rows, cols], axis=1), axis=0)
    beq = np.concatenate([a, b])
    tol = 1e-9 * max(1.0, float(M.max()))
    in_set = np.zeros((n, m), dtype=bool)
    in_set[arcs[:, 0], arcs[:, 1]] = True
    for _ in range(500):
        na = len(arcs)
        A = sparse.csc_matrix(
            (np.ones(2 * na),
             (np.concatenate([arcs[:, 0], n + arcs[:, 1]]), np.tile(np.arange(na), 2))),
            shape=(n + m, na),
        )
        c = M[arcs[:, 0], arcs[:, 1]]
        res = linprog(c, A_eq=A, b_eq=beq, method="highs")
        if res.status != 0:
            raise InfeasibleInputError(f"transport LP failed: {res.message}")
        y = res.eqlin.marginals
        red = M - y[:n][:, None] - y[n:][None, :]
        viol = (red < -tol) & ~in_set
        if not viol.any():
            return arcs, res.x
        vi, vj = np.nonzero(viol)
        # cap the batch at the most negative reduced costs
        order = np.argsort(red[vi, vj])[: 5 * max(n, m)]
        vi, vj = vi[order], vj[order]
        in_set[vi, vj] = True
        arcs = np.vstack([arcs, np.stack([vi, vj], axis=1)])
    raise RuntimeError("column generation did not converge")


def _repair_flows(i: np.ndarray, j: np.ndarray, n: int, m: int,
                  a: np.ndarray, b: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Recompute flows on the support forest so marginals are machine-exact.

    Leaf peeling: a degree-1 node pins its incident arc to the node's
    remaining weight.  If a cycle blocks peeling (degenerate support), the
    smallest-flow arc on it is dropped.
    """
    na = len(i)
    node_j = n + j
    adj = [[] for _ in range(n + m)]
    for e in range(na):
        adj[i[e]].append(e)
        adj[node_j[e]].append(e)
    deg = np.array([len(x) for x in adj])
    rem = np.concatenate([a, b]).astype(float)
    out = np.zeros(na)
    alive = np.ones(na, dtype=bool)
    stack = [v for v in range(n + m) if deg[v] == 1]
    done = 0
    while done < na:
        if not stack:
            # all remaining nodes have degree >= 2: drop the weakest live arc
            live = np.nonzero(alive)[0]
            e = live[np.argmin(flow[live])]
            alive[e] = False
            done += 1
            for v in (i[e], node_j[e]):
                deg[v] -= 1
                if deg[v] == 1:
                    stack.append(v)
            continue
        v = stack.pop()
        if deg[v] != 1:
            continue
        e = next(k for k in adj[v] if alive[k])
        w = rem[v]
        out[e] = w
        alive[e] = False
        done += 1
        u = node_j[e] if v == i[e] else i[e]
        rem[v] = 0.0
        rem[u] -= w
        deg[v] -= 1
        deg[u] -= 1
        if deg[u] == 1:
            stack.append(u)
        elif deg[u] == 0 and abs(rem[u]) > 1e-9 * max(1.0, a.sum()):
            raise InfeasibleInputError("flow repair left unbalanced mass")
    if out.min() < -1e-9 * max(1.0, a.sum()):
        raise InfeasibleInputError("flow repair produced negative mass")
    np.clip(out, 0.0, None, out=out)
    return out


def solve_quadratic(source: DiscreteMeasure, target: DiscreteMeasure) -> OtSolution:
    """Optimal plan for the squared-distance cost; exact up to LP degeneracy ties."""
    if len(source) == 0 or len(target) == 0:
        raise ValueError("measures must be non-empty")
    if abs(source.total_mass - target.total_mass) > MASS_RTOL * source.total_mass:
        raise InfeasibleInputError(
            f"mass mismatch: {source.total_mass} vs {target.total_mass}"
        )
    a, b = source.weights, target.weights
    M = _cost_matrix(source.points, target.points)
    if len(a) == len(b) and a[0] == b[0] and np.all(a == a[0]) and np.all(b == b[0]):
        # equal-size, equal-weight clouds: assignment problem is exact
        ri, cj = linear_sum_assignment(M)
        coupling = Coupling(source, target, ri, cj, np.full(len(ri), a[0]),
                            validate=False)
        return OtSolution(coupling, coupling.cost())
    arcs, flow = _solve_lp_cg(M, a, b)
    keep = flow > 1e-14 * max(1.0, source.total_mass)
    # keep zero-flow basic arcs too if dropping them disconnects a node
    row_cov = np.zeros(len(a), dtype=bool)
    col_cov = np.zeros(len(b), dtype=bool)
    row_cov[arcs[keep, 0]] = True
    col_cov[arcs[keep, 1]] = True
    need = (~row_cov[arcs[:, 0]]) | (~col_cov[arcs[:, 1]])
    keep |= need
    i, j, fl = arcs[keep, 0], arcs[keep, 1], flow[keep]
    fl = _repair_flows(i, j, len(a), len(b), a, b, fl)
    coupling = Coupling(source, target, i, j, fl, atol=1e-12)
    return OtSolution(coupling, coupling.cost())


def wasserstein2(source: DiscreteMeasure, target: DiscreteMeasure) -> float:
    return solve_quadratic(source, target).cost


def w2_sorted_1d(xs, ys) -> float:
    """Oracle: squared cost of the sorted matching for equal-weight 1-D clouds."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) == 0:
        return 0.0
    d = xs - ys
    return float((d * d).mean())


def check_monotone(c: Coupling, tol: float = 1e-9):
    """Plain monotonicity of the support: (x-x')·(y-y') >= -tol for all pairs.

    Returns (ok, worst_value, (p, q)) with p, q indices into the entry list.
    """
    k = len(c)
    if k < 2:
        return True, 0.0, (0, 0)
    X, Y = c.x, c.y
    G = X @ Y.T
    dg = np.diag(G)
    inner = dg[:, None] + dg[None, :] - G - G.T
    np.fill_diagonal(inner, np.inf)
    flat = int(np.argmin(inner))
    p, q = divmod(flat, k)
    worst = float(inner[p, q])
    return worst >= -tol, worst, (p, q)
