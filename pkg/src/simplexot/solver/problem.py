"""Orbit-reduced transport problems and the solution record shared by all solvers.

For symmetric measures the dual problem can be restricted to symmetric
potentials, which are functions of orbits.  Feasibility
``phi(x) + psi(y) >= c(x, y)`` for all sample pairs then reads
``phi_O + psi_Q >= C(O, Q) = max_{y in Q} c(x_O, y)`` for any representative
``x_O`` of the A-orbit ``O``.  The reduced problem is a small transportation
problem with the same optimal value.

Discrete optimal duals are generally not unique up to a constant: the
optimal face splits into blocks that can be shifted against each other.
:func:`canonical_duals` picks the midpoint of every block's admissible shift
range, which depends only on the optimal face, so different solvers return the
same potentials.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, dijkstra

from ..ctransform import SampledPotential
from ..errors import MarginalMismatch, ShapeError
from ..geometry import Side, SimplexPoint
from ..grid import Grid
from ..symmetry import symmetry_residual
from .measures import DiscreteMeasure

#: Coupling entries at or below this are treated as zero.
SUPPORT_TOL = 1e-13


def default_normalization_point(d: int) -> SimplexPoint:
    """Lexicographically least point of the vertex orbit, ``(0, ..., 0, 1)``."""
    return SimplexPoint.vertex(Side.A, d, d + 1)


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    mu: DiscreteMeasure
    nu: DiscreteMeasure

    def __post_init__(self):
        if self.mu.side is not Side.A or self.nu.side is not Side.B:
            raise ShapeError("expected a measure on A and a measure on B")
        if self.mu.grid.d != self.nu.grid.d:
            raise ShapeError("measures live in different dimensions")
        if abs(self.mu.weights.sum() - self.nu.weights.sum()) > 1e-12:
            raise MarginalMismatch("measures have different total mass")

    @property
    def d(self) -> int:
        return self.mu.grid.d

    @cached_property
    def mu_o(self) -> np.ndarray:
        return self.mu.orbit_masses

    @cached_property
    def nu_o(self) -> np.ndarray:
        return self.nu.orbit_masses

    @cached_property
    def _b_order(self) -> tuple[np.ndarray, np.ndarray]:
        ids = self.nu.grid.orbit_ids
        order = np.argsort(ids, kind="stable")
        starts = np.searchsorted(ids[order], np.arange(self.nu.grid.n_orbits))
        return order, starts

    @cached_property
    def min_dots(self) -> np.ndarray:
        """Exact ``min_{y in Q} <num(x_O), num(y)>`` as integers."""
        a = self.mu.grid.numerators[self.mu.grid.orbit_representatives]
        order, starts = self._b_order
        dots = a @ self.nu.grid.numerators[order].T
        return np.minimum.reduceat(dots, starts, axis=1)

    @cached_property
    def cost(self) -> np.ndarray:
        n = self.d + 2
        den = self.mu.grid.denominator * self.nu.grid.denominator
        return 1.0 - n * self.min_dots / den

    @property
    def scale(self) -> float:
        return max(1.0, float(np.abs(self.cost).max()))

    @cached_property
    def normalization_orbit(self) -> int:
        return self.orbit_of(default_normalization_point(self.d))

    def orbit_of(self, p: SimplexPoint) -> int:
        k = self.mu.grid.index_of(p)
        if k < 0:
            raise ShapeError(f"normalization point {p.bary} is not a sample point")
        return int(self.mu.grid.orbit_ids[k])

    def conjugate(self, phi: np.ndarray) -> np.ndarray:
        """``psi_Q = max_O C(O, Q) - phi_O``."""
        return (self.cost - phi[:, None]).max(axis=0)

    def conjugate_back(self, psi: np.ndarray) -> np.ndarray:
        return (self.cost - psi[None, :]).max(axis=1)

    def functional(self, phi: np.ndarray) -> float:
        """``F(phi) = <mu, phi> + <nu, phi^c>`` on orbit values."""
        return float(self.mu_o @ phi + self.nu_o @ self.conjugate(phi))

    def lift_coupling(self, W: np.ndarray) -> sparse.csr_matrix:
        """Spread orbit-pair masses evenly over the best pairs of the full grids.

        For ``x`` in ``O`` the mass ``W[O, Q] / |O|`` goes to the ``y`` in ``Q``
        maximizing ``c(x, y)``, split evenly among ties.  The construction is
        permutation-equivariant, so the marginals are the symmetric measures.
        """
        ga, gb = self.mu.grid, self.nu.grid
        order, starts = self._b_order
        ends = np.append(starts[1:], len(order))
        rows, cols, vals = [], [], []
        size_a = ga.orbit_sizes
        members = np.argsort(ga.orbit_ids, kind="stable")
        bounds = np.append(np.searchsorted(ga.orbit_ids[members], np.arange(ga.n_orbits)), len(members))
        for o, q in zip(*np.nonzero(W > SUPPORT_TOL)):
            xs = members[bounds[o] : bounds[o + 1]]
            ys = order[starts[q] : ends[q]]
            dots = ga.numerators[xs] @ gb.numerators[ys].T
            best = dots == dots.min(axis=1, keepdims=True)
            share = W[o, q] / size_a[o] / best.sum(axis=1)
            r, c = np.nonzero(best)
            rows.append(xs[r])
            cols.append(ys[c])
            vals.append(share[r])
        if not rows:
            return sparse.csr_matrix((len(ga), len(gb)))
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(ga), len(gb))
        )


@dataclass(frozen=True)
class DualFace:
    """The optimal dual face around one optimal pair ``(phi, psi)``.

    ``block_a`` and ``block_b`` give the block of every A- and B-orbit, and
    ``bound[a, b]`` the largest admissible ``s_b - s_a`` for block shifts.
    """

    phi: np.ndarray
    psi: np.ndarray
    block_a: np.ndarray
    block_b: np.ndarray
    bound: np.ndarray

    @property
    def n_blocks(self) -> int:
        return len(self.bound)


def dual_face(problem: ReducedProblem, phi: np.ndarray, psi: np.ndarray, W: np.ndarray) -> DualFace:
    """Blocks are the connected components of the support of the optimal ``W``.

    Shifting a block by ``s`` adds ``s`` to its A-values and subtracts it from
    its B-values, which keeps every supported pair tight.  Feasibility
    elsewhere gives difference constraints ``s_b - s_a <= slack(O in a, Q in b)``.
    By complementary slackness these shifts sweep out the whole optimal face.
    """
    C = problem.cost
    na, nb = C.shape
    support = W > SUPPORT_TOL
    adj = sparse.bmat([[None, sparse.csr_matrix(support)], [sparse.csr_matrix(support.T), None]])
    k, labels = connected_components(adj, directed=False)
    ua, ub = labels[:na], labels[na:]
    slack = np.maximum(phi[:, None] + psi[None, :] - C, 0.0)
    bound = np.full((k, k), np.inf)
    np.minimum.at(bound, (ua[:, None].repeat(nb, 1), ub[None, :].repeat(na, 0)), slack)
    np.fill_diagonal(bound, np.inf)
    return DualFace(phi, psi, ua, ub, bound)


def canonical_duals(
    problem: ReducedProblem,
    phi: np.ndarray,
    psi: np.ndarray,
    W: np.ndarray,
    ref_orbit: int | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Midpoint of the optimal dual face, normalized at ``ref_orbit``.

    The admissible shift of each block relative to the reference block is
    ``[-dist(b -> ref), dist(ref -> b)]`` in the graph with edge lengths
    ``DualFace.bound``; both ends are feasible, hence so is the midpoint.
    The range of ``phi_O - phi_ref`` over the optimal face is intrinsic, so the
    result does not depend on which optimal pair or coupling was given.

    Returns the canonical ``(phi, psi)`` and the largest range width, which
    is zero exactly when the optimal dual is unique up to a constant.
    """
    ref_orbit = problem.normalization_orbit if ref_orbit is None else ref_orbit
    face = dual_face(problem, phi, psi, W)
    ref = face.block_a[ref_orbit]
    graph = csgraph_from_dense(face.bound, null_value=np.inf)
    upper = dijkstra(graph, indices=ref)
    lower = -dijkstra(graph.T.tocsr(), indices=ref)
    s = 0.5 * (upper + lower)
    width = float(np.max(upper - lower)) if face.n_blocks > 1 else 0.0
    phi = phi + s[face.block_a]
    psi = psi - s[face.block_b]
    shift = phi[ref_orbit]
    return phi - shift, psi + shift, width


def distance_to_face(face: DualFace, phi_orbits: np.ndarray) -> float:
    """Sup-distance from orbit values ``phi_orbits`` to ``{phi : (phi, psi) optimal}`` modulo constants.

    Solves ``min t`` over block shifts ``s`` with ``|phi_orbits - face.phi - s[block]| <= t``
    and the face's difference constraints.
    """
    k = face.n_blocks
    na = len(face.phi)
    diff = np.asarray(phi_orbits, dtype=float) - face.phi
    # variables: s_0..s_{k-1}, t
    pick = sparse.csr_matrix((np.ones(na), (np.arange(na), face.block_a)), shape=(na, k))
    ones = sparse.csr_matrix(np.ones((na, 1)))
    rows = [sparse.hstack([-pick, -ones]), sparse.hstack([pick, -ones])]
    rhs = [-diff, diff]
    a, b = np.nonzero(np.isfinite(face.bound))
    if len(a):
        m = len(a)
        D = sparse.csr_matrix(
            (np.concatenate([np.ones(m), -np.ones(m)]), (np.tile(np.arange(m), 2), np.concatenate([b, a]))),
            shape=(m, k),
        )
        rows.append(sparse.hstack([D, sparse.csr_matrix((m, 1))]))
        rhs.append(face.bound[a, b])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = linprog(
        cost,
        A_ub=sparse.vstack(rows).tocsr(),
        b_ub=np.concatenate(rhs),
        bounds=[(None, None)] * k + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        raise ShapeError(f"face distance LP failed: {res.message}")
    return float(res.x[-1])


def conjugate_pair(problem: ReducedProblem, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(psi^c, psi)`` with ``psi = phi^c``: a c-conjugate pair below ``phi``."""
    psi = problem.conjugate(phi)
    return problem.conjugate_back(psi), psi


@dataclass(frozen=True, eq=False)
class TransportSolution:
    """Dual potentials, a coupling and diagnostics.

    ``phi`` and ``psi`` are sampled on the supports of ``mu`` and ``nu``;
    ``orbit_coupling`` is the reduced coupling when one is available.
    """

    phi: SampledPotential
    psi: SampledPotential
    coupling: sparse.csr_matrix
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    method: str
    diagnostics: dict = field(default_factory=dict)
    orbit_phi: np.ndarray | None = None
    orbit_psi: np.ndarray | None = None
    orbit_coupling: np.ndarray | None = None
    face: DualFace | None = None

    @property
    def d(self) -> int:
        return self.mu.grid.d

    @property
    def spacing(self) -> float:
        return max(self.mu.grid.spacing, self.nu.grid.spacing)

    @property
    def value(self) -> float:
        return self.diagnostics["dual_value"]

    def swapped(self) -> "TransportSolution":
        """The same solution with the roles of A and B exchanged.

        The pairing is symmetric in barycentric coordinates, so the mirrored
        problem from ``nu`` to ``mu`` has potentials ``(psi, phi)``.
        """
        mu = DiscreteMeasure(self.nu.grid.mirror(), self.nu.weights, self.nu.provenance)
        nu = DiscreteMeasure(self.mu.grid.mirror(), self.mu.weights, self.mu.provenance)
        return TransportSolution(
            SampledPotential(mu.grid, self.psi.values),
            SampledPotential(nu.grid, self.phi.values),
            self.coupling.T.tocsr(),
            mu,
            nu,
            self.method + "-swapped",
            dict(self.diagnostics),
            self.orbit_psi,
            self.orbit_phi,
            None if self.orbit_coupling is None else self.orbit_coupling.T,
        )

    def report(self) -> dict:
        keys = (
            "method",
            "duality_gap",
            "relative_gap",
            "primal_value",
            "dual_value",
            "symmetry_residual",
            "marginal_error",
            "slackness_violation",
            "dual_nonuniqueness",
            "normalization_point",
        )
        out = {"method": self.method}
        out.update({k: self.diagnostics[k] for k in keys[1:] if k in self.diagnostics})
        return out


def finish(
    problem: ReducedProblem,
    phi_o: np.ndarray,
    psi_o: np.ndarray,
    W: np.ndarray,
    method: str,
    coupling: sparse.csr_matrix | None = None,
    extra: dict | None = None,
    canonical: bool = True,
) -> TransportSolution:
    """Canonicalize orbit duals, lift them and the coupling, and collect diagnostics."""
    phi_o, psi_o = conjugate_pair(problem, phi_o)
    width = float("nan")
    face = None
    if canonical:
        phi_o, psi_o, width = canonical_duals(problem, phi_o, psi_o, W)
        phi_o, psi_o = problem.conjugate_back(psi_o), psi_o
        face = dual_face(problem, phi_o, psi_o, W)
    else:
        shift = phi_o[problem.normalization_orbit]
        phi_o, psi_o = phi_o - shift, psi_o + shift
    mu, nu = problem.mu, problem.nu
    phi = SampledPotential(mu.grid, phi_o[mu.grid.orbit_ids])
    psi = SampledPotential(nu.grid, psi_o[nu.grid.orbit_ids])
    if coupling is None:
        coupling = problem.lift_coupling(W)
    primal = float((W * problem.cost).sum())
    dual = float(problem.mu_o @ phi_o + problem.nu_o @ psi_o)
    diag = {
        "primal_value": primal,
        "dual_value": dual,
        "duality_gap": dual - primal,
        "relative_gap": (dual - primal) / problem.scale,
        "scale": problem.scale,
        "symmetry_residual": max(symmetry_residual(phi.values, mu.grid), symmetry_residual(psi.values, nu.grid)),
        "marginal_error": marginal_error(coupling, mu, nu),
        "slackness_violation": slackness_violation(coupling, phi, psi),
        "dual_nonuniqueness": width,
        "normalization_point": list(map(str, default_normalization_point(problem.d).bary)),
        "orbits": [int(problem.cost.shape[0]), int(problem.cost.shape[1])],
        "points": [len(mu.grid), len(nu.grid)],
    }
    diag.update(extra or {})
    return TransportSolution(phi, psi, coupling, mu, nu, method, diag, phi_o, psi_o, W, face)


def marginal_error(coupling, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    rows = np.asarray(coupling.sum(axis=1)).ravel()
    cols = np.asarray(coupling.sum(axis=0)).ravel()
    return float(max(np.abs(rows - mu.weights).max(), np.abs(cols - nu.weights).max()))


def slackness_violation(coupling, phi: SampledPotential, psi: SampledPotential) -> float:
    """Largest ``phi(x) + psi(y) - c(x, y)`` over supported pairs."""
    coo = sparse.coo_matrix(coupling)
    keep = coo.data > SUPPORT_TOL
    r, c = coo.row[keep], coo.col[keep]
    if not len(r):
        return 0.0
    n = phi.grid.d + 2
    cost = 1.0 - n * np.einsum("ij,ij->i", phi.grid.bary[r], psi.grid.bary[c])
    return float(np.abs(phi.values[r] + psi.values[c] - cost).max())
