"""Exact transport by linear programming (HiGHS through scipy)."""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..ctransform import SampledPotential
from ..errors import InternalError, MarginalMismatch, TooLarge
from ..symmetry import symmetry_residual
from .measures import DiscreteMeasure
from .problem import (
    ReducedProblem,
    TransportSolution,
    default_normalization_point,
    finish,
    marginal_error,
    slackness_violation,
)

DEFAULT_CAP = 3000


def transport_lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maximize ``<W, cost>`` over couplings of ``a`` and ``b``.

    Returns the coupling and dual vectors ``(u, v)`` with ``u_i + v_j >= cost_ij``.
    """
    m, n = cost.shape
    rows = sparse.kron(sparse.eye(m), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, m)), sparse.eye(n))
    A = sparse.vstack([rows, cols]).tocsr()
    res = linprog(-cost.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    if res.status == 2:
        raise MarginalMismatch("transport problem is infeasible")
    if res.status != 0:
        raise InternalError(f"LP solver failed: {res.message}")
    # eqlin marginals are sensitivities of the minimized objective -<W, cost>
    y = -res.eqlin.marginals
    W = np.maximum(res.x.reshape(m, n), 0.0)
    return W, y[:m], y[m:]


def solve_exact(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cap: int = DEFAULT_CAP,
    reduce: bool = True,
    symmetrize: bool = True,
) -> TransportSolution:
    """Optimal coupling and canonical potentials.

    With ``reduce`` the LP runs on orbit pairs.  Without it the full
    point-to-point LP is solved; its duals are then orbit-averaged (which keeps
    them optimal, the problem being invariant) unless ``symmetrize`` is off,
    in which case they are only made c-conjugate and normalized.
    """
    problem = ReducedProblem(mu, nu)
    if reduce:
        na, nb = problem.cost.shape
        if max(na, nb) > cap:
            raise TooLarge(f"{max(na, nb)} orbits exceed the cap of {cap}; use solve_scaled")
        W, u, v = transport_lp(problem.cost, problem.mu_o, problem.nu_o)
        return finish(problem, u, v, W, "exact-reduced")

    n_a, n_b = len(mu.grid), len(nu.grid)
    if max(n_a, n_b) > cap:
        raise TooLarge(f"{max(n_a, n_b)} points exceed the cap of {cap}; use solve_scaled")
    cost = 1.0 - (mu.grid.d + 2) * (mu.grid.bary @ nu.grid.bary.T)
    P, u, v = transport_lp(cost, mu.weights, nu.weights)
    coupling = sparse.csr_matrix(P)
    ia, ib = mu.grid.orbit_ids, nu.grid.orbit_ids
    if not symmetrize:
        return _finish_full(problem, cost, P, u, v, coupling)
    # orbit averages of the duals, and the coupling aggregated to orbit pairs
    phi_o = np.bincount(ia, weights=u) / mu.grid.orbit_sizes
    W = np.zeros(problem.cost.shape)
    np.add.at(W, (ia[:, None].repeat(n_b, 1), ib[None, :].repeat(n_a, 0)), P)
    return finish(problem, phi_o, None, W, "exact-full", coupling=coupling)


def _finish_full(problem, cost, P, u, v, coupling) -> TransportSolution:
    """Raw point duals: c-conjugate on the supports and normalized, nothing else."""
    psi = (cost - u[:, None]).max(axis=0)
    phi = (cost - psi[None, :]).max(axis=1)
    k = problem.mu.grid.index_of(default_normalization_point(problem.d))
    phi, psi = phi - phi[k], psi + phi[k]
    mu, nu = problem.mu, problem.nu
    phi_s, psi_s = SampledPotential(mu.grid, phi), SampledPotential(nu.grid, psi)
    primal = float((P * cost).sum())
    dual = float(mu.weights @ phi + nu.weights @ psi)
    diag = {
        "primal_value": primal,
        "dual_value": dual,
        "duality_gap": dual - primal,
        "relative_gap": (dual - primal) / problem.scale,
        "scale": problem.scale,
        "symmetry_residual": max(symmetry_residual(phi, mu.grid), symmetry_residual(psi, nu.grid)),
        "marginal_error": marginal_error(coupling, mu, nu),
        "slackness_violation": slackness_violation(coupling, phi_s, psi_s),
        "normalization_point": list(map(str, default_normalization_point(problem.d).bary)),
    }
    return TransportSolution(phi_s, psi_s, coupling, mu, nu, "exact-full-raw", diag)
