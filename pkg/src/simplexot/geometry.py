"""Points, strata and affine charts on the boundary of a simplex and its polar.

The simplex ``Delta`` has vertices ``m_i = (d+2) e_i - (1, ..., 1)`` in the
hyperplane ``sum = 0`` of R^{d+2}; its polar has vertices ``n_i = -e_i`` in
R^{d+2} modulo the all-ones vector.  ``A`` and ``B`` denote the two boundaries.
A point of ``A`` is stored through barycentric weights ``alpha`` with
``min(alpha) = 0``, a point of ``B`` through weights ``beta`` with
``min(beta) = 0``; the pairing of such points is ``1 - (d+2) <alpha, beta>``.

Arithmetic is dual-mode: ``int``/``Fraction`` inputs stay exact, floats are
checked against small absolute tolerances.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDimension, NotInImage, NotOnBoundary, OutOfChart, ShapeError

#: Absolute tolerance for float-mode invariants.
TOL = 1e-12
#: Relative tolerance for ties and zeros in :func:`classify`.
TIE_TOL = 1e-9


class Side(str, enum.Enum):
    A = "A"
    B = "B"

    @property
    def opposite(self) -> "Side":
        return Side.B if self is Side.A else Side.A

    def __str__(self) -> str:
        return self.value


def is_exact(values: Iterable) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _close(a, b, exact: bool, tol: float = TOL) -> bool:
    return a == b if exact else abs(a - b) <= tol


def _check_dim(d: int) -> int:
    if int(d) != d or d < 1:
        raise InvalidDimension(f"dimension must be an integer >= 1, got {d!r}")
    return int(d)


@dataclass(frozen=True)
class AmbientVector:
    """A vector of ``M_R`` (side A) or a class in ``N_R`` (side B).

    B-side vectors are stored with last coordinate 0, so equality and hashing
    work on classes modulo ``(1, ..., 1)``.
    """

    side: Side
    coords: tuple

    def __post_init__(self):
        side = Side(self.side)
        coords = tuple(self.coords)
        _check_dim(len(coords) - 2)
        if side is Side.A:
            total = sum(coords)
            if not _close(total, 0, is_exact(coords)):
                raise ShapeError(f"A-side coordinates must sum to 0, got {total}")
        else:
            last = coords[-1]
            coords = tuple(c - last for c in coords)
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "coords", coords)

    @property
    def d(self) -> int:
        return len(self.coords) - 2

    def __add__(self, other: "AmbientVector") -> "AmbientVector":
        _same_shape(self, other)
        return AmbientVector(self.side, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "AmbientVector") -> "AmbientVector":
        _same_shape(self, other)
        return AmbientVector(self.side, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def scale(self, t) -> "AmbientVector":
        return AmbientVector(self.side, tuple(t * c for c in self.coords))


def _same_shape(u: AmbientVector, v: AmbientVector) -> None:
    if u.side is not v.side or len(u.coords) != len(v.coords):
        raise ShapeError("vectors live in different spaces")


def zero_vector(side: Side, d: int) -> AmbientVector:
    return AmbientVector(side, (0,) * (_check_dim(d) + 2))


def vertices(d: int) -> list[tuple[AmbientVector, AmbientVector]]:
    """The vertex pairs ``(m_i, n_i)`` with exact integer coordinates."""
    n = _check_dim(d) + 2
    out = []
    for i in range(n):
        m = tuple(n - 1 if k == i else -1 for k in range(n))
        e = tuple(-1 if k == i else 0 for k in range(n))
        out.append((AmbientVector(Side.A, m), AmbientVector(Side.B, e)))
    return out


def pairing(m: AmbientVector, n: AmbientVector):
    if m.side is not Side.A or n.side is not Side.B:
        raise ShapeError("pairing expects an A-side and a B-side vector")
    if len(m.coords) != len(n.coords):
        raise ShapeError(f"dimension mismatch: {m.d} vs {n.d}")
    return sum(a * b for a, b in zip(m.coords, n.coords))


@dataclass(frozen=True)
class SimplexPoint:
    """A point of ``A`` or ``B`` in normalized barycentric coordinates."""

    side: Side
    bary: tuple

    def __post_init__(self):
        side = Side(self.side)
        bary = tuple(self.bary)
        _check_dim(len(bary) - 2)
        exact = is_exact(bary)
        if not exact:
            bary = tuple(float(b) for b in bary)
        if not _close(sum(bary), 1, exact):
            raise NotOnBoundary(f"barycentric weights sum to {sum(bary)}, not 1")
        if not _close(min(bary), 0, exact):
            raise NotOnBoundary(f"minimum weight is {min(bary)}, not 0")
        object.__setattr__(self, "side", side)
        object.__setattr__(self, "bary", bary)

    @property
    def d(self) -> int:
        return len(self.bary) - 2

    @property
    def exact(self) -> bool:
        return is_exact(self.bary)

    def array(self) -> np.ndarray:
        return np.array([float(b) for b in self.bary])

    @classmethod
    def vertex(cls, side: Side, d: int, i: int) -> "SimplexPoint":
        """The vertex ``m_i`` (side A) or the vertex ``n_i`` (side B).

        ``m_i`` has ``alpha = e_i``; ``n_i = -e_i`` has ``beta = e_i`` as well.
        """
        n = _check_dim(d) + 2
        return cls(side, tuple(int(k == i) for k in range(n)))

    @classmethod
    def barycenter(cls, side: Side, d: int, support: Iterable[int]) -> "SimplexPoint":
        """Barycenter of the face spanned by the vertices in ``support``."""
        n = _check_dim(d) + 2
        s = sorted(set(support))
        if not s or len(s) == n or s[0] < 0 or s[-1] >= n:
            raise ShapeError(f"{s} does not span a proper face")
        w = Fraction(1, len(s))
        return cls(side, tuple(w if k in s else Fraction(0) for k in range(n)))

    @classmethod
    def facet_barycenter(cls, side: Side, d: int, i: int) -> "SimplexPoint":
        """Barycenter of the facet opposite vertex ``i`` (``sigma_i`` or ``tau_i``)."""
        return cls.barycenter(side, d, [k for k in range(d + 2) if k != i])


def to_barycentric(v: AmbientVector, tol: float = TOL) -> SimplexPoint:
    exact = is_exact(v.coords)
    n = len(v.coords)
    if v.side is Side.A:
        alpha = tuple((c + 1) / Fraction(n) if exact else (c + 1) / n for c in v.coords)
        if not _close(min(alpha), 0, exact, tol):
            raise NotOnBoundary(f"{v.coords} is not on the boundary of the simplex")
        if not exact:
            alpha = tuple(max(a, 0.0) for a in alpha)
            alpha = tuple(a / sum(alpha) for a in alpha)
        return SimplexPoint(Side.A, alpha)
    top = max(v.coords)
    gaps = tuple(top - c for c in v.coords)
    total = sum(gaps)
    if not _close(total, 1, exact, tol):
        raise NotOnBoundary(f"{v.coords} is not on the boundary of the polar simplex")
    return SimplexPoint(Side.B, tuple(g / total for g in gaps) if not exact else gaps)


def from_barycentric(p: SimplexPoint) -> AmbientVector:
    n = len(p.bary)
    if p.side is Side.A:
        return AmbientVector(Side.A, tuple(n * a - 1 for a in p.bary))
    last = p.bary[-1]
    return AmbientVector(Side.B, tuple(last - b for b in p.bary))


def point_pairing(x: SimplexPoint, y: SimplexPoint):
    """``<x, y>`` for x on A and y on B, as ``1 - (d+2) <alpha, beta>``."""
    if x.side is not Side.A or y.side is not Side.B:
        raise ShapeError("point_pairing expects an A point and a B point")
    if len(x.bary) != len(y.bary):
        raise ShapeError(f"dimension mismatch: {x.d} vs {y.d}")
    return 1 - len(x.bary) * sum(a * b for a, b in zip(x.bary, y.bary))


def pairing_matrix(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Pairings between rows of ``alpha`` (A side) and rows of ``beta`` (B side)."""
    alpha = np.atleast_2d(alpha)
    beta = np.atleast_2d(beta)
    return 1.0 - alpha.shape[1] * (alpha @ beta.T)


# ---------------------------------------------------------------------------
# strata


@dataclass(frozen=True)
class CellLabel:
    """Index sets ``I`` (maximal weights) and ``J`` (zero weights)."""

    I: frozenset
    J: frozenset

    def __post_init__(self):
        I, J = frozenset(self.I), frozenset(self.J)
        if I & J:
            raise ShapeError(f"label sets overlap: {sorted(I & J)}")
        object.__setattr__(self, "I", I)
        object.__setattr__(self, "J", J)

    @property
    def singular(self) -> bool:
        return len(self.I) >= 2 and len(self.J) >= 2

    @property
    def signature(self) -> tuple[int, int]:
        return len(self.I), len(self.J)

    def swapped(self) -> "CellLabel":
        """The label ``(J, I)`` of the matched stratum on the other side."""
        return CellLabel(self.J, self.I)

    def permuted(self, image: Sequence[int]) -> "CellLabel":
        return CellLabel(frozenset(image[k] for k in self.I), frozenset(image[k] for k in self.J))

    def __str__(self) -> str:
        return ",".join(map(str, sorted(self.I))) + "|" + ",".join(map(str, sorted(self.J)))

    @classmethod
    def parse(cls, text: str) -> "CellLabel":
        left, _, right = text.partition("|")
        sets = [frozenset(int(t) for t in part.split(",") if t.strip()) for part in (left, right)]
        return cls(*sets)


def classify(p: SimplexPoint, tol: float = TIE_TOL) -> CellLabel:
    """Stratum label of ``p``; ties and zeros are relative to the largest weight."""
    b = p.bary
    top = max(b)
    if p.exact:
        I = {k for k, v in enumerate(b) if v == top}
        J = {k for k, v in enumerate(b) if v == 0}
    else:
        I = {k for k, v in enumerate(b) if v >= top - tol * top}
        J = {k for k, v in enumerate(b) if v <= tol * top}
    return CellLabel(frozenset(I), frozenset(J))


def classify_array(bary: np.ndarray, tol: float = TIE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks ``(I, J)`` for each row of a float barycentric array."""
    bary = np.atleast_2d(bary)
    top = bary.max(axis=1, keepdims=True)
    return bary >= top - tol * top, bary <= tol * top


def in_face(p: SimplexPoint, i: int, tol: float = TOL) -> bool:
    return _close(p.bary[i], 0, p.exact, tol)


def in_star(p: SimplexPoint, i: int, tol: float = TOL) -> bool:
    top = max(p.bary)
    return _close(p.bary[i], top, p.exact, tol)


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """An affine chart of ``A`` or ``B``.

    A star chart ``(i, j)`` uses the map anchored at vertex ``i`` with
    auxiliary index ``j``; it covers the small star ``S_i`` (``T_i`` on B).
    A face chart ``(i, j)`` covers the facet ``sigma_i`` (``tau_i``) through
    the map anchored at vertex ``j`` with auxiliary index ``i``.  In both cases
    the plane coordinates are ``(d+2)(w_k - w_aux)`` for ``k`` outside
    ``{anchor, aux}``, in increasing order of ``k``.
    """

    side: Side
    kind: str
    i: int
    j: int

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if self.kind not in ("star", "face"):
            raise ShapeError(f"chart kind must be 'star' or 'face', got {self.kind!r}")
        if self.i == self.j or self.i < 0 or self.j < 0:
            raise ShapeError(f"chart indices must be distinct and nonnegative: {self.i}, {self.j}")

    @property
    def anchor(self) -> int:
        return self.i if self.kind == "star" else self.j

    @property
    def aux(self) -> int:
        return self.j if self.kind == "star" else self.i

    def free_indices(self, d: int) -> list[int]:
        return [k for k in range(d + 2) if k not in (self.anchor, self.aux)]

    @property
    def partner(self) -> "Chart":
        """The chart on the other side in which c-gradients of this chart land.

        A star chart on one side is matched with the face chart of the facet
        opposite the same vertex on the other side, and conversely.
        """
        kind = "face" if self.kind == "star" else "star"
        return Chart(self.side.opposite, kind, self.i, self.j)

    def _check(self, d: int) -> None:
        if max(self.i, self.j) >= d + 2:
            raise ShapeError(f"chart indices {self.i}, {self.j} out of range for d={d}")

    def __str__(self) -> str:
        return f"{self.side}:{self.kind}({self.i},{self.j})"


def in_chart_domain(c: Chart, p: SimplexPoint, tol: float = TOL) -> bool:
    """Closed-domain test: ``Star(m_i)`` for star charts, the facet for face charts."""
    if p.side is not c.side:
        return False
    if c.kind == "face":
        return in_face(p, c.i, tol)
    return any(in_face(p, k, tol) for k in range(len(p.bary)) if k != c.i)


def chart_to_plane(c: Chart, p: SimplexPoint, tol: float = TOL) -> tuple:
    c._check(p.d)
    if p.side is not c.side:
        raise OutOfChart(f"{p.side}-point given to {c}")
    if not in_chart_domain(c, p, tol):
        raise OutOfChart(f"{p.bary} lies outside the domain of {c}")
    n = len(p.bary)
    base = p.bary[c.aux]
    return tuple(n * (p.bary[k] - base) for k in c.free_indices(p.d))


def chart_from_plane(c: Chart, x: Sequence, tol: float = TOL) -> SimplexPoint:
    """Inverse chart map.

    The preimage lies on exactly one facet ``w_l = 0`` with ``l != anchor``;
    writing ``u_k = x_k / (d+2)``, the weights off the anchor are
    ``w_aux + u_k`` with ``w_aux`` the smallest value keeping them all
    nonnegative, which selects that facet.
    """
    d = len(x)
    c._check(d)
    n = d + 2
    exact = is_exact(x)
    u = [xk / Fraction(n) if exact else xk / n for xk in x]
    w_aux = max([0] + [-v for v in u])
    w = [None] * n
    w[c.aux] = w_aux
    for k, v in zip(c.free_indices(d), u):
        w[k] = w_aux + v
    rest = sum(w[k] for k in range(n) if k != c.anchor)
    w[c.anchor] = 1 - rest
    if w[c.anchor] < (0 if exact else -tol):
        raise NotInImage(f"{tuple(x)} is not in the image of {c}")
    if not exact:
        w[c.anchor] = max(w[c.anchor], 0.0)
        w = [max(v, 0.0) for v in w]
    p = SimplexPoint(c.side, tuple(w))
    if c.kind == "face" and not in_face(p, c.i, tol):
        raise NotInImage(f"{tuple(x)} maps outside the facet of {c}")
    return p


def chart_coords(c: Chart, bary: np.ndarray) -> np.ndarray:
    """Vectorized :func:`chart_to_plane` without domain checks."""
    bary = np.atleast_2d(bary)
    n = bary.shape[1]
    free = c.free_indices(n - 2)
    return n * (bary[:, free] - bary[:, [c.aux]])


def chart_inverse(c: Chart, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`chart_from_plane`.

    Returns barycentric rows and a mask of rows in the chart image (for face
    charts, additionally on the chart's facet).  Rows outside are clipped.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    n = d + 2
    u = x / n
    w_aux = np.maximum(0.0, -u.min(axis=1))
    w = np.zeros((len(x), n))
    w[:, c.aux] = w_aux
    w[:, c.free_indices(d)] = w_aux[:, None] + u
    w[:, c.anchor] = 1.0 - w.sum(axis=1)
    ok = w[:, c.anchor] >= -TOL
    if c.kind == "face":
        ok &= w_aux <= TOL
    return np.maximum(w, 0.0), ok


def chart_domain_mask(c: Chart, bary: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Rows of ``bary`` in the chart's natural closed domain.

    This is ``S_i`` (maximal weight at ``i``) for star charts and the facet
    for face charts; it is where the chart potential is convex.
    """
    bary = np.atleast_2d(bary)
    if c.kind == "face":
        return bary[:, c.i] <= tol
    return bary[:, c.i] >= bary.max(axis=1) - tol


def euclidean(p: SimplexPoint, q: SimplexPoint) -> float:
    """Distance between barycentric coordinate vectors."""
    return math.dist([float(v) for v in p.bary], [float(v) for v in q.bary])
