"""A one-dimensional convex function with controlled modulus and short Riemannian length.

``f`` is a step function on ``[0, 1)`` with ``MN`` cells of width
``w = 1/(MN)``: cell ``j`` carries the value ``M`` when ``M | j`` and
``N^(1-beta)`` otherwise.  Its double primitive ``phi`` satisfies

    (1/2) |I|^beta <= int_I f <= 3 |I|^alpha      for every interval I

while ``int_0^1 sqrt(phi'') = 1/sqrt(M) + ((M-1)/M) N^(-(beta-1)/2)`` is small.

Integrals of ``f`` over intervals with breakpoint endpoints are rational
whenever ``N^(1-beta)`` is; the bound checks then run in integer arithmetic by
raising both sides to the denominators of ``alpha`` and ``beta``.

Corner sufficiency.  For fixed ``x`` the map ``y -> int_x^y f`` is affine on
each cell while ``(y - x)^beta`` is convex (``beta > 1``) and ``(y - x)^alpha``
is concave (``alpha < 1``).  Hence ``int_x^y f - (1/2)(y - x)^beta`` and
``3 (y - x)^alpha - int_x^y f`` are concave in ``y`` on each cell, and likewise
in ``x``; their minima over all intervals are attained with both endpoints on
breakpoints, so checking breakpoint corners is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DomainError, ValidationError

Number = Fraction | float


def _as_fraction(x) -> Fraction:
    if isinstance(x, Rational):
        return Fraction(x)
    return Fraction(str(x))


def _int_root(n: int, k: int) -> int | None:
    """Exact ``k``-th root of a nonnegative integer, or None."""
    if n < 0:
        return None
    r = round(n ** (1.0 / k))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c**k == n:
            return c
    return None


def rational_power(base: int, e: Fraction) -> Fraction | None:
    """``base ** e`` as a Fraction when it is rational, else None."""
    root = _int_root(base, e.denominator)
    if root is None:
        return None
    return Fraction(root) ** e.numerator


@dataclass(frozen=True)
class StepFunction:
    M: int
    N: int
    alpha: Fraction
    beta: Fraction

    @property
    def cells(self) -> int:
        return self.M * self.N

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.cells)

    @property
    def high(self) -> int:
        return self.M

    @cached_property
    def low(self) -> Number:
        """``N^(1-beta)``: a Fraction when rational, a float otherwise."""
        exact = rational_power(self.N, 1 - self.beta)
        return exact if exact is not None else float(self.N) ** float(1 - self.beta)

    @property
    def exact(self) -> bool:
        return isinstance(self.low, Fraction)

    def value(self, j: int) -> Number:
        return Fraction(self.M) if j % self.M == 0 else self.low

    def values(self) -> np.ndarray:
        v = np.full(self.cells, float(self.low))
        v[:: self.M] = float(self.M)
        return v

    def high_before(self, k: int) -> int:
        """Number of high cells among cells ``0 .. k-1``."""
        return (k + self.M - 1) // self.M

    def high_in(self, a: int, b: int) -> int:
        """Number of high cells among cells ``a .. b-1``."""
        return self.high_before(b) - self.high_before(a)


def build_example(M: int, N: int, alpha, beta) -> StepFunction:
    """Validate the parameters and build the step function."""
    if int(M) != M or int(N) != N or M < 2 or N < 2:
        raise ValidationError(f"M and N must be integers >= 2, got {M!r}, {N!r}")
    M, N = int(M), int(N)
    if math.gcd(M, N) != 1:
        raise ValidationError(f"M={M} and N={N} are not coprime")
    a, b = _as_fraction(alpha), _as_fraction(beta)
    if not 0 < a < 1:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if not b > 1:
        raise ValidationError(f"beta must exceed 1, got {beta}")
    # M^a <= N^(1-a)  <=>  M^p <= N^(q-p) for a = p/q
    p, q = a.numerator, a.denominator
    if M**p > N ** (q - p):
        raise ValidationError(f"M^alpha <= N^(1-alpha) fails for M={M}, N={N}, alpha={a}")
    return StepFunction(M, N, a, b)


# ---------------------------------------------------------------------------
# primitives


def _cell(f: StepFunction, x) -> tuple[int, Fraction | float]:
    if not 0 <= x <= 1:
        raise DomainError(f"x={x} is outside [0, 1]")
    exact = isinstance(x, Rational) and f.exact
    xs = Fraction(x) if exact else float(x)
    k = min(int(math.floor(xs * f.cells)), f.cells - 1)
    return k, xs - (Fraction(k, f.cells) if exact else k / f.cells)


def integral_to_breakpoint(f: StepFunction, k: int) -> Number:
    """``phi'(k w) = int_0^{k w} f``."""
    c = f.high_before(k)
    return f.width * (f.M * c + f.low * (k - c))


def _sum_high_before(f: StepFunction, k: int) -> int:
    """``sum_{j < k} high_before(j)``."""
    K = k - 1
    if K <= 0:
        return 0
    a, b = divmod(K, f.M)
    return f.M * a * (a + 1) // 2 + b * (a + 1)


def _phi_at_breakpoint(f: StepFunction, k: int) -> Number:
    w = f.width
    s_high = _sum_high_before(f, k)
    s_all = k * (k - 1) // 2
    sum_F = w * (f.M * s_high + f.low * (s_all - s_high))
    return w * sum_F + w * integral_to_breakpoint(f, k) / 2


def phi(f: StepFunction, x) -> Number:
    """``int_0^x (x - t) f(t) dt``, exact for rational ``x`` and rational values."""
    k, t = _cell(f, x)
    v = f.value(k)
    return _phi_at_breakpoint(f, k) + integral_to_breakpoint(f, k) * t + v * t * t / 2


def phi_prime(f: StepFunction, x) -> Number:
    k, t = _cell(f, x)
    return integral_to_breakpoint(f, k) + f.value(k) * t


def phi_second(f: StepFunction, x) -> Number:
    """``f(x)``, taking the right-hand value at breakpoints."""
    k, _ = _cell(f, x)
    return f.value(k)


# ---------------------------------------------------------------------------
# lengths


def riemannian_length(f: StepFunction) -> Number:
    """``int_0^1 sqrt(f) = 1/sqrt(M) + ((M-1)/M) N^(-(beta-1)/2)``; a Fraction when rational."""
    hi = rational_power(f.M, Fraction(-1, 2))
    lo = rational_power(f.N, -(f.beta - 1) / 2)
    if hi is not None and lo is not None:
        return hi + Fraction(f.M - 1, f.M) * lo
    return f.M**-0.5 + (f.M - 1) / f.M * float(f.N) ** (-float(f.beta - 1) / 2)


def cell_sum_length(values, widths=None) -> float:
    """``sum width * sqrt(value)`` over cells (equal widths summing to 1 by default)."""
    v = np.asarray(values, dtype=float)
    w = np.full(len(v), 1.0 / len(v)) if widths is None else np.asarray(widths, dtype=float)
    return math.fsum(w * np.sqrt(v))


# ---------------------------------------------------------------------------
# bound verification


def _interval_integral_num(f: StepFunction, L: int, c: int) -> tuple[int, int]:
    """``int_I f`` over ``L`` cells of which ``c`` are high, as ``(numerator, denominator)``."""
    low = f.low
    ln, ld = low.numerator, low.denominator
    return f.M * c * ld + ln * (L - c), f.cells * ld


def _exact_checks(f: StepFunction, L: int, c: int) -> tuple[bool, bool]:
    """``(lower holds, upper holds)`` in integer arithmetic."""
    gn, gd = _interval_integral_num(f, L, c)
    MN = f.cells
    r, s = f.beta.numerator, f.beta.denominator
    p, q = f.alpha.numerator, f.alpha.denominator
    # (1/2)(L/MN)^(r/s) <= gn/gd  <=>  L^r gd^s <= 2^s MN^r gn^s
    lower = L**r * gd**s <= 2**s * MN**r * gn**s
    # gn/gd <= 3 (L/MN)^(p/q)  <=>  gn^q MN^p <= 3^q L^p gd^q
    upper = gn**q * MN**p <= 3**q * L**p * gd**q
    return lower, upper


def _margins(f: StepFunction, L: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    length = L / f.cells
    g = (f.M * c + float(f.low) * (L - c)) / f.cells
    return g - 0.5 * length ** float(f.beta), 3.0 * length ** float(f.alpha) - g, length


GUARD = 1e-12


#: Relative float margin above which a case counts as certified without exact arithmetic.
FLOAT_CERTIFIED = 1e-6


def _report(f, L, c_lo, c_hi, starts_lo, starts_hi, exact, mode, all_exact=True) -> dict:
    lower_m, _, length = _margins(f, L, c_lo)
    _, upper_m, _ = _margins(f, L, c_hi)
    lower_rel = lower_m / (0.5 * length ** float(f.beta))
    upper_rel = upper_m / (3.0 * length ** float(f.alpha))
    witness = None
    exact_cases = 0
    if exact:
        # float margins this far above rounding error need no exact recheck
        lo_k = range(len(L)) if all_exact else np.flatnonzero(lower_rel < FLOAT_CERTIFIED)
        up_k = range(len(L)) if all_exact else np.flatnonzero(upper_rel < FLOAT_CERTIFIED)
        exact_cases = len(lo_k) + len(up_k)
        bad_lower = [k for k in lo_k if not _exact_checks(f, int(L[k]), int(c_lo[k]))[0]]
        bad_upper = [k for k in up_k if not _exact_checks(f, int(L[k]), int(c_hi[k]))[1]]
    else:
        # certified floats: a failure needs the relative margin below -GUARD, a pass needs it above GUARD
        bad_lower = list(np.flatnonzero(lower_rel < GUARD))
        bad_upper = list(np.flatnonzero(upper_rel < GUARD))
    if bad_lower or bad_upper:
        k, which, starts = (bad_lower[0], "lower", starts_lo) if bad_lower else (bad_upper[0], "upper", starts_hi)
        a = int(starts[k])
        witness = {"bound": which, "interval": [str(Fraction(a, f.cells)), str(Fraction(a + int(L[k]), f.cells))]}
    i_lo, i_hi = int(np.argmin(lower_m)), int(np.argmin(upper_m))
    return {
        "mode": mode,
        "arithmetic": ("exact" if all_exact else f"exact below relative margin {FLOAT_CERTIFIED}, float above")
        if exact
        else f"float with relative guard {GUARD}",
        "exact_cases": exact_cases,
        "intervals_covered": None,
        "passed": not bad_lower and not bad_upper,
        "lower_violations": len(bad_lower),
        "upper_violations": len(bad_upper),
        "worst_lower_margin": float(lower_m[i_lo]),
        "worst_lower_interval": [str(Fraction(int(starts_lo[i_lo]), f.cells)), str(Fraction(int(starts_lo[i_lo] + L[i_lo]), f.cells))],
        "worst_upper_margin": float(upper_m[i_hi]),
        "worst_upper_interval": [str(Fraction(int(starts_hi[i_hi]), f.cells)), str(Fraction(int(starts_hi[i_hi] + L[i_hi]), f.cells))],
        "worst_lower_relative": float(lower_rel.min()),
        "worst_upper_relative": float(upper_rel.min()),
        "witness": witness,
    }


def verify_interval_bounds(f: StepFunction, exhaustive_limit: int = 2000) -> dict:
    """Check ``(1/2)|I|^beta <= int_I f <= 3|I|^alpha`` on all breakpoint intervals.

    Up to ``exhaustive_limit`` cells every pair of breakpoints is enumerated.
    Beyond it the check uses periodicity: the integral over ``L`` cells
    starting at cell ``a`` depends only on ``L`` and the number of high cells
    it contains, which is ``floor(L/M)`` or ``ceil(L/M)`` depending on
    ``a mod M``.  Per length the extreme counts over all admissible starts
    give the binding cases, so every interval is still covered.
    """
    MN, M = f.cells, f.M
    if MN <= exhaustive_limit:
        a, b = np.triu_indices(MN + 1, 1)
        L = b - a
        hb = (np.arange(MN + 1) + M - 1) // M
        c = hb[b] - hb[a]
        rep = _report(f, L, c, c, a, a, f.exact, "exhaustive")
        rep["intervals_covered"] = int(len(L))
        return rep
    L = np.arange(1, MN + 1)
    # admissible starts are 0 .. MN - L; their residues mod M are all residues when MN - L + 1 >= M
    span = MN - L + 1
    c_lo = np.empty_like(L)
    c_hi = np.empty_like(L)
    s_lo = np.empty_like(L)
    s_hi = np.empty_like(L)
    full = span >= M
    # with every residue available: start just after a high cell gives floor, at a high cell gives ceil
    c_lo[full] = L[full] // M
    c_hi[full] = -(-L[full] // M)
    s_lo[full] = np.where(L[full] % M == 0, 0, 1)
    s_hi[full] = 0
    for k in np.flatnonzero(~full):
        starts = np.arange(span[k])
        counts = (starts + L[k] + M - 1) // M - (starts + M - 1) // M
        c_lo[k], c_hi[k] = counts.min(), counts.max()
        s_lo[k], s_hi[k] = starts[counts.argmin()], starts[counts.argmax()]
    rep = _report(f, L, c_lo, c_hi, s_lo, s_hi, f.exact, "periodic", all_exact=False)
    rep["intervals_covered"] = MN * (MN + 1) // 2
    return rep


def verify_derivative_bounds(f: StepFunction, pairs=None, limit: int = 2000, seed: int = 0) -> dict:
    """Re-check ``(1/2)(y-x)^beta <= phi'(y) - phi'(x) <= 3 (y-x)^alpha`` through :func:`phi_prime`.

    Uses all breakpoint pairs when there are at most ``limit`` cells,
    otherwise ``pairs`` (or 2000 random breakpoint pairs).
    """
    MN = f.cells
    if pairs is None:
        if MN <= limit:
            pairs = [(a, b) for a in range(MN + 1) for b in range(a + 1, MN + 1)]
        else:
            rng = np.random.default_rng(seed)
            ab = np.sort(rng.integers(0, MN + 1, size=(2000, 2)), axis=1)
            pairs = [(int(a), int(b)) for a, b in ab if a < b]
    bad = []
    for a, b in pairs:
        x, y = Fraction(a, MN), Fraction(b, MN)
        g = phi_prime(f, y) - phi_prime(f, x)
        L = b - a
        c = f.high_in(a, b)
        if f.exact:
            if g != Fraction(*_interval_integral_num(f, L, c)):
                bad.append((a, b, "integral mismatch"))
            lo, up = _exact_checks(f, L, c)
        else:
            lo = g >= 0.5 * float(y - x) ** float(f.beta) * (1 + GUARD)
            up = g <= 3 * float(y - x) ** float(f.alpha) * (1 - GUARD)
        if not (lo and up):
            bad.append((a, b, "bound"))
    return {"pairs": len(pairs), "violations": len(bad), "first": bad[:5], "passed": not bad}


def random_interval_margins(f: StepFunction, n: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Least lower and upper margins over random off-grid intervals (floats)."""
    rng = np.random.default_rng(seed)
    xy = np.sort(rng.random((n, 2)), axis=1)
    lo, up = np.inf, np.inf
    for x, y in xy:
        if y <= x:
            continue
        g = float(phi_prime(f, float(y))) - float(phi_prime(f, float(x)))
        lo = min(lo, g - 0.5 * (y - x) ** float(f.beta))
        up = min(up, 3 * (y - x) ** float(f.alpha) - g)
    return lo, up


def appendix_report(M: int, N: int, alpha, beta) -> dict:
    f = build_example(M, N, alpha, beta)
    length = riemannian_length(f)
    bounds = verify_interval_bounds(f)
    deriv = verify_derivative_bounds(f)
    return {
        "M": M,
        "N": N,
        "alpha": str(f.alpha),
        "beta": str(f.beta),
        "cells": f.cells,
        "length": float(length),
        "length_exact": str(length) if isinstance(length, Fraction) else None,
        "cell_sum_length": cell_sum_length(f.values()),
        "phi_prime_at_1": str(phi_prime(f, 1)) if f.exact else float(phi_prime(f, 1.0)),
        "interval_bounds": bounds,
        "derivative_bounds": deriv,
        "passed": bounds["passed"] and deriv["passed"],
    }
