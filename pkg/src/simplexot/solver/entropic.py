"""Entropic relaxation with epsilon scaling.

The coupling is ``pi = exp((c - phi - psi) / eps) mu (x) nu``; alternating
updates make either marginal exact.  Potentials are orbit-averaged after each
sweep.  Iterations start in the scaling domain and move to log-sum-exp
updates as soon as a kernel entry or scaling factor leaves the float range.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from ..ctransform import SampledPotential
from ..errors import InvalidDensity
from ..symmetry import orbit_average, symmetry_residual
from .measures import DiscreteMeasure
from .problem import ReducedProblem, TransportSolution, default_normalization_point, distance_to_face, marginal_error


def _sweep_log(C, phi, psi, la, lb, eps):
    phi = eps * logsumexp((C - psi[None, :]) / eps + lb[None, :], axis=1)
    psi = eps * logsumexp((C - phi[:, None]) / eps + la[:, None], axis=0)
    return phi, psi


def _sweep_scaling(K, a, b, u, v):
    """Scaling-domain update; ``u = exp(-phi/eps)``, ``v = exp(-psi/eps)`` up to the kernel shift."""
    u = 1.0 / (K @ (b * v))
    v = 1.0 / (K.T @ (a * u))
    return u, v


def _coupling(C, phi, psi, a, b, eps):
    return np.exp((C - phi[:, None] - psi[None, :]) / eps) * a[:, None] * b[None, :]


def _decreasing(values, floor: float = 1e-9) -> bool:
    """Nonincreasing, strictly so while above ``floor``, and overall decreasing."""
    pairs = list(zip(values, values[1:]))
    return bool(pairs) and all(y < x or (y <= floor and x <= floor) for x, y in pairs) and values[-1] < values[0]


def oscillation(values: np.ndarray) -> float:
    """Half the range: the sup-distance to the nearest constant."""
    return 0.5 * float(np.ptp(values)) if len(values) else 0.0


def solve_scaled(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    eps_schedule=(0.2, 0.1, 0.05, 0.02, 0.01),
    max_iter: int = 20000,
    tol: float = 1e-9,
    reference: TransportSolution | None = None,
) -> TransportSolution:
    """Entropic potentials along a decreasing schedule.

    With a ``reference`` (exact) solution the report records, for each
    ``eps``, the distance ``osc(phi_eps - phi_ref)``, which is the sup-norm of
    the difference after the best constant shift.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(e <= 0 for e in eps_schedule) or any(
        b >= a for a, b in zip(eps_schedule, eps_schedule[1:])
    ):
        raise InvalidDensity("eps schedule must be positive and strictly decreasing")
    problem = ReducedProblem(mu, nu)
    ga, gb = mu.grid, nu.grid
    a, b = mu.weights, nu.weights
    la, lb = np.log(a), np.log(b)
    C = 1.0 - (ga.d + 2) * (ga.bary @ gb.bary.T)
    cmax = C.max()
    phi = np.zeros(len(ga))
    psi = np.zeros(len(gb))
    log_mode = False
    stages = []
    for eps in eps_schedule:
        mode_here = "log" if log_mode else "scaling"
        it = 0
        err = np.inf
        if not log_mode:
            with np.errstate(over="ignore", under="ignore", divide="ignore"):
                K = np.exp((C - cmax) / eps)
                u = np.exp(-(phi - cmax / 2) / eps)
                v = np.exp(-(psi - cmax / 2) / eps)
            ok = np.all(K > 0) and np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(u > 0) and np.all(v > 0)
            if not ok:
                log_mode, mode_here = True, "log"
        while it < max_iter:
            it += 1
            if log_mode:
                phi, psi = _sweep_log(C, phi, psi, la, lb, eps)
            else:
                with np.errstate(over="ignore", under="ignore", divide="ignore"):
                    u, v = _sweep_scaling(K, a, b, u, v)
                    phi_new = -eps * np.log(u) + cmax / 2
                    psi_new = -eps * np.log(v) + cmax / 2
                if not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(psi_new))):
                    log_mode, mode_here = True, "log"
                    continue
                phi, psi = phi_new, psi_new
            phi = orbit_average(phi, ga.orbit_ids)
            psi = orbit_average(psi, gb.orbit_ids)
            if not log_mode:
                u = np.exp(-(phi - cmax / 2) / eps)
                v = np.exp(-(psi - cmax / 2) / eps)
            if it % 10 == 0 or it == max_iter:
                P = _coupling(C, phi, psi, a, b, eps)
                err = max(np.abs(P.sum(axis=1) - a).max(), np.abs(P.sum(axis=0) - b).max())
                if err < tol:
                    break
        stage = {
            "eps": eps,
            "iterations": it,
            "mode": mode_here,
            "marginal_error": float(err),
            "symmetry_residual": max(symmetry_residual(phi, ga), symmetry_residual(psi, gb)),
        }
        if reference is not None:
            stage["distance_to_reference"] = oscillation(phi - reference.phi.values)
            if reference.face is not None:
                reps = ga.orbit_representatives
                stage["distance_to_optimal_face"] = distance_to_face(reference.face, phi[reps])
        stages.append(stage)
    k = ga.index_of(default_normalization_point(ga.d))
    phi, psi = phi - phi[k], psi + phi[k]
    P = _coupling(C, phi, psi, a, b, eps_schedule[-1])
    coupling = sparse.csr_matrix(P)
    primal = float((P * C).sum())
    dual = float(a @ phi + b @ psi)
    diag = {
        "primal_value": primal,
        "dual_value": dual,
        "duality_gap": dual - primal,
        "relative_gap": (dual - primal) / problem.scale,
        "scale": problem.scale,
        "symmetry_residual": max(symmetry_residual(phi, ga), symmetry_residual(psi, gb)),
        "marginal_error": marginal_error(coupling, mu, nu),
        "normalization_point": list(map(str, default_normalization_point(ga.d).bary)),
        "stages": stages,
        "product_distance": float(np.abs(P - np.outer(a, b)).max()),
    }
    if reference is not None:
        key = "distance_to_optimal_face" if reference.face is not None else "distance_to_reference"
        dist = [s[key] for s in stages]
        diag["distance_trend"] = dist
        diag["distance_decreasing"] = _decreasing(dist)
    return TransportSolution(
        SampledPotential(ga, phi), SampledPotential(gb, psi), coupling, mu, nu, "entropic", diag
    )
