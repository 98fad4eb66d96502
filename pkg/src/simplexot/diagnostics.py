"""Resolution-level checks of the c-gradient of a solved potential.

All checks read the c-gradient through :func:`~simplexot.ctransform.c_gradient_map`
and compare against the sample grids, so every bound is stated in units of
the grid spacing ``h``.
"""
from __future__ import annotations

import math
from collections import Counter
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist

from .ctransform import GradientMap, SampledPotential, c_gradient_map, c_transform_at, grid_modulus, radial_projection
from .geometry import TIE_TOL, Side, SimplexPoint, classify_array
from .grid import Grid
from .symmetry import Permutation, generators


def singular_census(d: int) -> dict:
    """Number of nonempty strata per signature ``(|I|, |J|)``.

    A stratum needs disjoint nonempty ``I`` and ``J``; the remaining
    ``d + 2 - |I| - |J|`` weights lie strictly between, so every such pair is
    realized and the count is ``C(n, |I|) C(n - |I|, |J|)``.  Its dimension is
    ``n - |I| - |J|``.
    """
    if int(d) != d or d < 1:
        from .errors import InvalidDimension

        raise InvalidDimension(f"dimension must be an integer >= 1, got {d!r}")
    n = d + 2
    rows = []
    for a in range(1, n):
        for b in range(1, n - a + 1):
            rows.append(
                {
                    "I": a,
                    "J": b,
                    "count": math.comb(n, a) * math.comb(n - a, b),
                    "dimension": n - a - b,
                    "singular": a >= 2 and b >= 2,
                }
            )
    singular = [r for r in rows if r["singular"]]
    summary = {
        "singular_strata": sum(r["count"] for r in singular),
        "singular_by_dimension": dict(sorted(_sum_by_dim(singular).items())),
    }
    if d == 3:
        summary["edges"] = _count(rows, 2, 2)
        summary["positive_vertices"] = _count(rows, 2, 3)
        summary["negative_vertices"] = _count(rows, 3, 2)
    if d == 2:
        summary["singular_points"] = _count(rows, 2, 2)
    return {"d": d, "strata": rows, "summary": summary}


def _sum_by_dim(rows) -> dict:
    out: dict = {}
    for r in rows:
        out[r["dimension"]] = out.get(r["dimension"], 0) + r["count"]
    return out


def _count(rows, a, b) -> int:
    return next((r["count"] for r in rows if r["I"] == a and r["J"] == b), 0)


def brute_force_census(d: int, resolution: int | None = None) -> dict:
    """Distinct stratum labels found on a grid, counted per signature.

    Open strata need ``d + 1`` distinct weight levels, which the grid has
    from resolution ``d + 1`` on.
    """
    grid = Grid.build(d, resolution or d + 1)
    I, J = grid.label_masks
    labels = {(tuple(np.flatnonzero(i)), tuple(np.flatnonzero(j))) for i, j in zip(I, J)}
    return dict(Counter((len(a), len(b)) for a, b in labels))


# ---------------------------------------------------------------------------
# c-gradient checks


def _rows(sol, rows):
    return np.arange(len(sol.mu.grid)) if rows is None else np.asarray(rows)


def forward_map(sol, rows=None, margin: float = 1e-9) -> GradientMap:
    return c_gradient_map(sol.phi, sol.psi, _rows(sol, rows), margin)


def backward_at(sol, targets: np.ndarray, margin: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """c-gradient of ``psi`` at arbitrary B points, through the A samples.

    ``psi`` is extended off its samples by ``psi(y) = max_x c(x, y) - phi(x)``;
    the argmax set within ``margin`` is averaged and projected to A.
    """
    ga = sol.mu.grid
    targets = np.atleast_2d(targets)
    n = ga.d + 2
    phi = sol.phi.as_float()
    ext = c_transform_at(sol.phi, targets)
    out = np.empty_like(targets)
    diam = np.zeros(len(targets))
    for k, y in enumerate(targets):
        val = 1.0 - n * (ga.bary @ y) - phi
        pts = ga.bary[val >= ext[k] - margin]
        out[k] = pts.mean(axis=0)
        if len(pts) > 1:
            diam[k] = pdist(pts).max()
    return radial_projection(out), diam


def check_partition_mapping(
    sol, rows=None, tie_tol: float = TIE_TOL, margin: float = 1e-9, collar: float = 2.0
) -> dict:
    """Compare the stratum of every image with the matched stratum ``(J, I)``.

    ``strict_mismatches`` counts images whose label (ties at ``tie_tol``)
    differs from ``(J, I)``.  ``closed_violations`` counts images outside the
    closure of the matched stratum by more than ``tie_tol``.  A strict
    mismatch inside the closure is a boundary collapse: the image sits on a
    lower stratum.  It counts as a violation only when the source is farther
    than ``collar`` grid spacings (in weight gaps) from the boundary of its own
    stratum, since near that boundary a grid cannot separate the two.
    ``containment_violations`` counts images outside
    ``(union_{j in J} T_j) & (union_{i in I} tau_i)``.
    """
    rows = _rows(sol, rows)
    gm = forward_map(sol, rows, margin)
    img = gm.image
    I_src, J_src = (m[rows] for m in sol.mu.grid.label_masks)
    I_img, J_img = classify_array(img, tie_tol)
    strict = np.all(I_img == J_src, axis=1) & np.all(J_img == I_src, axis=1)
    top = img.max(axis=1, keepdims=True)
    # deviation from the closed matched stratum: beta maximal on J, zero on I
    dev_max = np.where(J_src, top - img, 0.0).max(axis=1)
    dev_zero = np.where(I_src, img, 0.0).max(axis=1)
    deviation = np.maximum(dev_max, dev_zero)
    closed_bad = deviation > tie_tol * top[:, 0]
    # separation of the remaining weights from both levels, for the open stratum
    middle = ~(I_src | J_src)
    sep = np.where(middle, np.minimum(top - img, img), np.inf).min(axis=1)
    src = sol.mu.grid.bary[rows]
    src_top = src.max(axis=1, keepdims=True)
    src_sep = np.where(middle, np.minimum(src_top - src, src), np.inf).min(axis=1)
    h = sol.mu.grid.spacing
    collapse = ~strict & ~closed_bad
    deep = collapse & (src_sep > collar * h)
    in_T = np.any(J_src & I_img, axis=1)
    in_tau = np.any(I_src & J_img, axis=1)
    signature = Counter()
    images = Counter()
    for k in range(len(rows)):
        key = (int(I_src[k].sum()), int(J_src[k].sum()))
        signature[key] += 1
        images[(key, (int(I_img[k].sum()), int(J_img[k].sum())))] += 1
    return {
        "samples": int(len(rows)),
        "violations": int(closed_bad.sum() + deep.sum()),
        "strict_mismatches": int((~strict).sum()),
        "closed_violations": int(closed_bad.sum()),
        "boundary_collapses": int(collapse.sum()),
        "deep_collapses": int(deep.sum()),
        "max_collapse_depth": float(src_sep[collapse].max() / h) if collapse.any() else 0.0,
        "collar": collar,
        "containment_violations": int((~(in_T & in_tau)).sum()),
        "worst_closure_deviation": float(deviation.max()) if len(rows) else 0.0,
        "worst_middle_separation": float(sep.min()) if len(rows) and np.isfinite(sep.min()) else None,
        "tie_tol": tie_tol,
        "signatures": {f"{a},{b}": c for (a, b), c in sorted(signature.items())},
        "image_signatures": {f"{a},{b}->{c},{e}": n for ((a, b), (c, e)), n in sorted(images.items())},
        "violating_ids": rows[closed_bad | deep].tolist()[:50],
        "collapsed_ids": rows[collapse].tolist()[:50],
    }


def check_single_valued(sol, rows=None, margin: float = 1e-9, factor: float = 3.0) -> dict:
    rows = _rows(sol, rows)
    gm = forward_map(sol, rows, margin)
    h = sol.nu.grid.spacing
    I, J = (m[rows] for m in sol.mu.grid.label_masks)
    singular = (I.sum(axis=1) >= 2) & (J.sum(axis=1) >= 2)
    return {
        "samples": int(len(rows)),
        "spacing": h,
        "limit": factor * h,
        "max_diameter": float(gm.diameter.max()),
        "max_diameter_singular": float(gm.diameter[singular].max()) if singular.any() else None,
        "singular_samples": int(singular.sum()),
        "multivalued": int((gm.diameter > factor * h).sum()),
        "max_argmax_size": int(gm.size.max()),
        "certified": bool(gm.diameter.max() <= factor * h),
    }


def holder_fit(src: np.ndarray, img: np.ndarray, lo: float, hi: float, max_pairs: int = 200000, seed: int = 0) -> dict:
    """Fit ``|G(x) - G(x')| <= C |x - x'|^gamma`` on pairs with ``lo <= |x - x'| <= hi``.

    ``gamma`` is the log-log least-squares slope; ``C`` is the smallest
    constant for which the envelope with that slope covers every pair in the
    window.  The window is empty when ``lo > hi``.
    """
    n = len(src)
    rng = np.random.default_rng(seed)
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        i = rng.integers(0, n, max_pairs)
        j = rng.integers(0, n, max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    dx = np.linalg.norm(src[i] - src[j], axis=1)
    dy = np.linalg.norm(img[i] - img[j], axis=1)
    sel = (dx >= lo) & (dx <= hi) & (dy > 0)
    if sel.sum() < 3 or np.ptp(np.log(dx[sel])) < 1e-9:
        return {"pairs": int(sel.sum()), "C": None, "gamma": None, "r2": None, "window": [lo, hi]}
    x, y = np.log(dx[sel]), np.log(dy[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1 - resid.var() / y.var() if y.var() > 0 else 1.0
    # an exponent above 1 carries no Hölder information on a bounded set
    gamma = float(np.clip(slope, 1e-6, 1.0))
    C = float(np.exp((y - gamma * x).max()))
    return {
        "pairs": int(sel.sum()),
        "C": C,
        "gamma": gamma,
        "slope": float(slope),
        "r2": float(r2),
        "window": [lo, hi],
    }


def check_inverse_homeo(sol, rows=None, margin: float = 1e-9, seed: int = 0) -> dict:
    """``max |grad_c psi(grad_c phi(x)) - x|`` and a Hölder fit of the forward map."""
    rows = _rows(sol, rows)
    gm = forward_map(sol, rows, margin)
    back, _ = backward_at(sol, gm.image, margin)
    src = sol.mu.grid.bary[rows]
    dev = np.linalg.norm(back - src, axis=1)
    h = max(sol.mu.grid.spacing, sol.nu.grid.spacing)
    diam = math.sqrt(2.0)  # the simplex in barycentric coordinates
    fit = holder_fit(src, gm.image, 4 * h, diam / 4, seed=seed)
    return {
        "samples": int(len(rows)),
        "spacing": h,
        "max_deviation": float(dev.max()),
        "deviation_over_spacing": float(dev.max() / h),
        "holder": fit,
    }


def check_equivariance(sol, rows=None, gens=None, margin: float = 1e-9) -> dict:
    """``max |G(g x) - g G(x)|`` over samples and generators."""
    ga = sol.mu.grid
    gens = generators(ga.d + 2) if gens is None else gens
    gm = forward_map(sol, None, margin)
    rows = _rows(sol, rows)
    worst = 0.0
    for g in gens:
        idx = ga.permutation_indices(g.image)
        moved = np.empty_like(gm.image)
        moved[:, list(g.image)] = gm.image
        worst = max(worst, float(np.abs(gm.image[idx[rows]] - moved[rows]).max()))
    return {"generators": [list(g.image) for g in gens], "residual": worst, "grid_modulus": grid_modulus(sol.nu.grid)}


def check_fixed_points(sol, margin: float = 1e-9) -> dict:
    """Images of the vertices and of the facet barycenters.

    The stabilizer of ``m_i`` fixes only the barycenter of ``tau_i`` among
    points of its matched stratum, and the stabilizer of the barycenter of
    ``sigma_i`` fixes only ``n_i``.
    """
    d = sol.d
    ga = sol.mu.grid
    out = {"vertex": [], "facet_barycenter": []}
    for i in range(d + 2):
        for key, src, want in (
            ("vertex", SimplexPoint.vertex(Side.A, d, i), SimplexPoint.facet_barycenter(Side.B, d, i)),
            ("facet_barycenter", SimplexPoint.facet_barycenter(Side.A, d, i), SimplexPoint.vertex(Side.B, d, i)),
        ):
            k = ga.index_of(src)
            if k < 0:
                out[key].append({"index": i, "present": False})
                continue
            gm = forward_map(sol, [k], margin)
            err = float(np.abs(gm.image[0] - want.array()).max())
            out[key].append({"index": i, "present": True, "error": err, "argmax_size": int(gm.size[0])})
    errs = [e["error"] for v in out.values() for e in v if e.get("present")]
    out["max_error"] = max(errs) if errs else None
    out["reproduced"] = bool(errs) and max(errs) <= 1e-9
    return out


def c_gradient_suite(sol, margin: float = 1e-9, tie_tol: float = TIE_TOL, seed: int = 0) -> dict:
    """All stratum, single-valuedness, inverse, equivariance and fixed-point checks."""
    partition = check_partition_mapping(sol, tie_tol=tie_tol, margin=margin)
    single = check_single_valued(sol, margin=margin)
    inverse = check_inverse_homeo(sol, margin=margin, seed=seed)
    equiv = check_equivariance(sol, margin=margin)
    fixed = check_fixed_points(sol, margin=margin)
    h = single["spacing"]
    return {
        "d": sol.d,
        "resolution": sol.mu.grid.resolution,
        "spacing": h,
        "partition_mapping": partition,
        "single_valued": single,
        "inverse_homeomorphism": inverse,
        "equivariance": equiv,
        "fixed_points": fixed,
        "passed": {
            "partition_mapping": partition["violations"] == 0,
            "single_valued": single["certified"],
            "inverse": inverse["max_deviation"] <= 2 * inverse["spacing"],
            "equivariance": equiv["residual"] <= 1e-9,
            "fixed_points": fixed["reproduced"],
        },
    }
