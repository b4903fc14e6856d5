"""Piecewise-polynomial flux vectors and genuine-nonlinearity analysis.

Each flux component is a continuous piecewise polynomial of degree <= 3 with
breakpoints at (ideally rational) states. The set ``F`` of states where every
nonzero dual-lattice direction ``xi . phi`` fails to be affine near ``u`` is
computed on a grid of states: around each grid state the condition
"``xi . phi`` affine on the neighbourhood" is a linear system in ``xi``, and
the question whether a nonzero integer combination of the dual generators
solves it is a rank test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _rational as rat
from .lattice import PeriodStructure


class FluxError(ValueError):
    """Invalid flux description or query."""


def _trim(c):
    c = list(c)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


def _poly_eval(c, u):
    out = 0.0 * u + float(c[-1]) if not isinstance(u, Fraction) else c[-1]
    for a in reversed(c[:-1]):
        out = out * u + (a if isinstance(u, Fraction) else float(a))
    return out


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    """Scalar function of ``u``; piece ``j`` lives between ``knots[j-1]`` and ``knots[j]``.

    The outer pieces extend to -inf / +inf. Coefficients are ascending powers.
    """

    knots: tuple
    coeffs: tuple
    check_continuity: bool = True

    def __post_init__(self):
        knots = tuple(rat.to_exact(k) for k in self.knots)
        coeffs = tuple(_trim(tuple(rat.to_exact(c) for c in np.atleast_1d(np.asarray(p, dtype=object))))
                       for p in self.coeffs)
        if len(coeffs) != len(knots) + 1:
            raise FluxError(f"{len(knots)} breakpoints need {len(knots) + 1} pieces, got {len(coeffs)}")
        if any(len(c) > 4 for c in coeffs):
            raise FluxError("piece degree exceeds 3")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise FluxError("breakpoints must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coeffs", coeffs)
        if self.check_continuity:
            for j, k in enumerate(knots):
                left, right = _poly_eval(coeffs[j], k), _poly_eval(coeffs[j + 1], k)
                if self.exact:
                    ok = left == right
                else:
                    ok = abs(float(left) - float(right)) <= 1e-12 * (1 + abs(float(left)))
                if not ok:
                    raise FluxError(f"discontinuous at breakpoint {k}: {left} != {right}")

    # construction helpers
    @classmethod
    def polynomial(cls, coeffs) -> "PiecewisePolynomial":
        return cls((), (tuple(coeffs),))

    @property
    def exact(self) -> bool:
        return rat.all_exact(self.knots) and all(rat.all_exact(c) for c in self.coeffs)

    @cached_property
    def _knots_f(self) -> np.ndarray:
        return np.array([float(k) for k in self.knots])

    @cached_property
    def _table(self) -> np.ndarray:
        T = np.zeros((len(self.coeffs), 4))
        for j, c in enumerate(self.coeffs):
            T[j, :len(c)] = [float(x) for x in c]
        return T

    @property
    def degree(self) -> int:
        return max(len(c) - 1 for c in self.coeffs)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if not self.knots:
            c = self._table[0]
            return ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
        idx = np.searchsorted(self._knots_f, u, side="right")
        c = self._table[idx]
        return ((c[..., 3] * u + c[..., 2]) * u + c[..., 1]) * u + c[..., 0]

    def eval_exact(self, u):
        u = rat.to_exact(u)
        j = sum(1 for k in self.knots if u >= k)
        return _poly_eval(self.coeffs[j], u)

    def piece_bounds(self, j):
        lo = self.knots[j - 1] if j > 0 else -math.inf
        hi = self.knots[j] if j < len(self.knots) else math.inf
        return lo, hi

    def derivative(self) -> "PiecewisePolynomial":
        d = [tuple(k * c[k] for k in range(1, len(c))) or (0,) for c in self.coeffs]
        return PiecewisePolynomial(self.knots, tuple(d), check_continuity=False)

    def _piece_critical(self, j) -> list:
        c = self._table[j]
        if not np.any(c[1:] != 0):
            return []
        lo, hi = (float(x) for x in self.piece_bounds(j))
        out = []
        for r in np.atleast_1d(np.roots([3 * c[3], 2 * c[2], c[1]])):
            if abs(np.imag(r)) < 1e-14 and lo <= np.real(r) <= hi:
                out.append(float(np.real(r)))
        return out

    def critical_points(self) -> np.ndarray:
        """Real roots of the derivative inside their own piece (floats)."""
        return np.array(sorted({r for j in range(len(self.coeffs)) for r in self._piece_critical(j)}))

    def extrema(self, lo, hi):
        """Min and max over ``[lo, hi]`` (vectorized), exact up to rounding.

        Each piece is examined on its own closed sub-interval, so one-sided
        limits at breakpoints count as well (relevant for derivatives).
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        mn = np.full(np.broadcast(lo, hi).shape, np.inf)
        mx = np.full_like(mn, -np.inf)
        for j, c in enumerate(self._table):
            a, b = (float(x) for x in self.piece_bounds(j))
            plo, phi = np.maximum(lo, a), np.minimum(hi, b)
            valid = plo <= phi
            if not np.any(valid):
                continue
            pts = [plo, phi] + [np.clip(r, plo, phi) for r in self._piece_critical(j)]
            for p in pts:
                v = ((c[3] * p + c[2]) * p + c[1]) * p + c[0]
                mn = np.where(valid, np.minimum(mn, v), mn)
                mx = np.where(valid, np.maximum(mx, v), mx)
        return mn, mx

    def sup_abs(self, lo, hi) -> float:
        mn, mx = self.extrema(lo, hi)
        return float(max(abs(mn), abs(mx)))

    def linear_combination(self, others: Sequence["PiecewisePolynomial"], weights: Sequence) -> "PiecewisePolynomial":
        return combine([self, *others], weights)

    def restricted_pieces(self, lo, hi):
        """Indices of pieces overlapping the open interval (lo, hi) with positive length."""
        out = []
        for j in range(len(self.coeffs)):
            a, b = self.piece_bounds(j)
            if a < hi and b > lo:
                out.append(j)
        return out

    def positive_part_antiderivative(self, ref: float = 0.0) -> Callable:
        """``u -> integral_ref^u max(f'(s), 0) ds`` as a vectorized callable."""
        d = self.derivative()
        pts = sorted(set(list(d._knots_f) + list(_real_roots_all(d))))
        edges = [-math.inf] + pts + [math.inf]
        pieces = []
        for a, b in zip(edges[:-1], edges[1:]):
            mid = (a + b) / 2 if math.isfinite(a) and math.isfinite(b) else (b - 1 if math.isfinite(b) else a + 1)
            if not math.isfinite(mid):
                mid = 0.0
            j = int(np.searchsorted(d._knots_f, mid, side="right"))
            c = d._table[j][:3].copy()
            pos = float(np.polyval(c[::-1], mid)) > 0
            pieces.append(c if pos else np.zeros(3))
        # antiderivative coefficients per piece (degree <= 3), made continuous
        ints = [np.array([0.0, c[0], c[1] / 2, c[2] / 3]) for c in pieces]
        knots = np.array(pts)
        offs = np.zeros(len(ints))
        for j in range(1, len(ints)):
            k = knots[j - 1]
            offs[j] = offs[j - 1] + np.polyval(ints[j - 1][::-1], k) - np.polyval(ints[j][::-1], k)
        table = np.array(ints)
        table[:, 0] += offs

        def F(u):
            u = np.asarray(u, dtype=float)
            idx = np.searchsorted(knots, u, side="right")
            c = table[idx]
            return ((c[..., 3] * u + c[..., 2]) * u + c[..., 1]) * u + c[..., 0]

        base = float(F(ref))
        return lambda u: F(u) - base

    def __repr__(self):
        return f"PiecewisePolynomial(knots={[str(k) for k in self.knots]}, coeffs={[[str(c) for c in p] for p in self.coeffs]})"


def _real_roots_all(pp: PiecewisePolynomial):
    out = []
    for j, c in enumerate(pp._table):
        lo, hi = (float(x) for x in pp.piece_bounds(j))
        coeffs = np.trim_zeros(c[::-1], "f")
        if len(coeffs) <= 1:
            continue
        for r in np.roots(coeffs):
            if abs(r.imag) < 1e-14 and lo < r.real < hi:
                out.append(float(r.real))
    return out


def combine(pps: Sequence[PiecewisePolynomial], weights: Sequence) -> PiecewisePolynomial:
    """Pointwise ``sum w_i * f_i`` on the merged breakpoints."""
    weights = [rat.to_exact(w) for w in weights]
    knots = sorted(set(k for p in pps for k in p.knots))
    exact = all(p.exact for p in pps) and rat.all_exact(weights)
    if not exact:
        knots = sorted(set(float(k) for k in knots))
    edges = [None] + knots + [None]
    coeffs = []
    for a, b in zip(edges[:-1], edges[1:]):
        if a is None and b is None:
            probe = 0
        elif a is None:
            probe = b - 1
        elif b is None:
            probe = a + 1
        else:
            probe = (a + b) / 2
        acc = [Fraction(0) if exact else 0.0] * 4
        for p, w in zip(pps, weights):
            j = sum(1 for k in p.knots if probe >= (k if exact else float(k)))
            for i, c in enumerate(p.coeffs[j]):
                acc[i] += w * c if exact else float(w) * float(c)
        coeffs.append(tuple(acc))
    return PiecewisePolynomial(tuple(knots), tuple(coeffs), check_continuity=False)


@dataclass(frozen=True, eq=False)
class FluxModel:
    """Flux vector ``phi = (phi_1, ..., phi_n)`` on a bounded state interval."""

    components: tuple
    state_interval: tuple
    name: str = "custom"

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise FluxError("flux needs at least one component")
        for c in comps:
            if not isinstance(c, PiecewisePolynomial):
                raise FluxError("flux components must be PiecewisePolynomial instances")
        a, b = (float(x) for x in self.state_interval)
        if not a < b:
            raise FluxError(f"empty state interval [{a}, {b}]")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "state_interval", (a, b))

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def exact(self) -> bool:
        return all(c.exact for c in self.components)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([c(u) for c in self.components])

    @cached_property
    def lipschitz(self) -> np.ndarray:
        return lipschitz_bound(self, self.state_interval)

    def with_interval(self, interval) -> "FluxModel":
        return FluxModel(self.components, tuple(interval), self.name)


# ---------------------------------------------------------------- presets

def burgers(state_interval=(-1, 1)) -> FluxModel:
    return FluxModel((PiecewisePolynomial.polynomial((0, 0, Fraction(1, 2))),), state_interval, "burgers")


def example1(state_interval=(-2, 2)) -> FluxModel:
    """``max(0, -u)``: affine on each side of the kink at 0."""
    return FluxModel((PiecewisePolynomial((0,), ((0, -1), (0,))),), state_interval, "example1")


def cubic2d(state_interval=(-1, 1)) -> FluxModel:
    return FluxModel((PiecewisePolynomial.polynomial((0, 0, Fraction(1, 2))),
                      PiecewisePolynomial.polynomial((0, 0, 0, Fraction(1, 3)))), state_interval, "cubic2d")


def linear(velocity: Sequence = (1,), state_interval=(-1, 1)) -> FluxModel:
    return FluxModel(tuple(PiecewisePolynomial.polynomial((0, a)) for a in velocity), state_interval, "linear")


def flat_band(mean=0, delta=Fraction(1, 2), state_interval=(-1, 1)) -> FluxModel:
    """2D flux ``(u^2/2, g(u))`` with ``g`` constant on ``|u - mean| <= delta``.

    ``g`` is ``(u - mean - delta)^2 / 2`` above the band and
    ``(u - mean + delta)^2 / 2`` below it, so it is C^1.
    """
    m, d = rat.to_exact(mean), rat.to_exact(delta)
    lo, hi = m - d, m + d
    below = (lo * lo / 2, -lo, Fraction(1, 2))
    above = (hi * hi / 2, -hi, Fraction(1, 2))
    g = PiecewisePolynomial((lo, hi), (below, (0,), above))
    return FluxModel((PiecewisePolynomial.polynomial((0, 0, Fraction(1, 2))), g), state_interval, "flat_band")


PRESETS = {"burgers": burgers, "example1": example1, "cubic2d": cubic2d, "linear": linear, "flat_band": flat_band}


def from_table(components: Sequence[dict], state_interval) -> FluxModel:
    """Flux from ``[{"breakpoints": [...], "coefficients": [[...], ...]}, ...]``."""
    comps = []
    for i, c in enumerate(components):
        unknown = set(c) - {"breakpoints", "coefficients"}
        if unknown:
            raise FluxError(f"flux component {i}: unknown keys {sorted(unknown)}")
        comps.append(PiecewisePolynomial(tuple(c.get("breakpoints", ())), tuple(tuple(p) for p in c["coefficients"])))
    return FluxModel(tuple(comps), state_interval, "table")


# ---------------------------------------------------------------- operations

def directional_component(phi: FluxModel, xi: Sequence) -> PiecewisePolynomial:
    """``u -> xi . phi(u)`` with merged breakpoints."""
    xi = list(np.atleast_1d(np.asarray(xi, dtype=object)))
    if len(xi) != phi.n:
        raise FluxError(f"direction has {len(xi)} entries, flux has {phi.n} components")
    return combine(phi.components, xi)


def is_affine_on(f, interval, tol: float = 1e-10, samples: int = 257) -> bool:
    """Whether ``f`` is affine on ``[a, b]``.

    Exact piecewise polynomials are tested structurally (every overlapping
    piece of degree <= 1 with a common slope). Anything else uses the chord
    test ``max |f - chord| <= tol * (1 + sup |f|)`` on samples and breakpoints.
    """
    a, b = interval
    if not a < b:
        raise FluxError(f"empty interval [{a}, {b}]")
    if isinstance(f, PiecewisePolynomial) and f.exact:
        a, b = rat.to_exact(a), rat.to_exact(b)
        pieces = f.restricted_pieces(a, b)
        slopes = set()
        for j in pieces:
            c = f.coeffs[j]
            if len(c) > 2:
                return False
            slopes.add(c[1] if len(c) > 1 else Fraction(0))
        return len(slopes) <= 1
    a, b = float(a), float(b)
    u = np.linspace(a, b, samples)
    if isinstance(f, PiecewisePolynomial):
        k = f._knots_f
        u = np.unique(np.concatenate([u, k[(k > a) & (k < b)], f.critical_points()[
            (f.critical_points() > a) & (f.critical_points() < b)] if f.critical_points().size else []]))
    fu = np.asarray(f(u), dtype=float)
    fa, fb = float(f(np.array(a))), float(f(np.array(b)))
    chord = fa + (fb - fa) * (u - a) / (b - a)
    return bool(np.max(np.abs(fu - chord)) <= tol * (1 + np.max(np.abs(fu))))


@dataclass(frozen=True)
class NonlinearitySet:
    """Finite union of closed intervals approximating ``F`` at a given resolution."""

    intervals: tuple
    resolution: float
    tolerance: float
    exact: bool = True

    @property
    def empty(self) -> bool:
        return not self.intervals

    def contains(self, u: float, tol: float = 1e-12) -> bool:
        return any(a - tol <= u <= b + tol for a, b in self.intervals)

    def meets_open(self, a: float, b: float) -> bool:
        """Whether ``F`` intersects the open interval ``(a, b)``."""
        return any(lo < b and hi > a for lo, hi in self.intervals)

    def as_dict(self):
        return {"intervals": [list(iv) for iv in self.intervals], "resolution": self.resolution,
                "tolerance": self.tolerance, "exact": self.exact}


def _constraint_rows(phi: FluxModel, lo, hi):
    """Rows ``r`` with ``xi . phi`` affine on (lo, hi)  <=>  ``r . xi = 0`` for all rows."""
    knots = sorted(set(k for c in phi.components for k in c.knots if lo < k < hi))
    edges = [lo] + knots + [hi]
    rows = []
    slope0 = None
    exact = phi.exact
    zero = Fraction(0) if exact else 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        probe = (a + b) / 2
        cs = []
        for c in phi.components:
            j = sum(1 for k in c.knots if probe >= k)
            p = list(c.coeffs[j]) + [zero] * (4 - len(c.coeffs[j]))
            cs.append(p if exact else [float(x) for x in p])
        rows.append([p[2] for p in cs])
        rows.append([p[3] for p in cs])
        slope = [p[1] for p in cs]
        if slope0 is None:
            slope0 = slope
        else:
            rows.append([s - s0 for s, s0 in zip(slope, slope0)])
    return rows


def _float_rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s.max() if s.size else 0.0)))


def _in_F(phi: FluxModel, dual_cols, lo, hi, tol) -> bool:
    rows = _constraint_rows(phi, lo, hi)
    d = len(dual_cols[0]) if dual_cols else 0
    exact = phi.exact and all(rat.all_exact(r) for r in dual_cols)
    if d == 0:
        # trivial G': F collects points where some component is non-affine
        return any(x != 0 for r in rows for x in r)
    if exact:
        A = rat.matmul(rows, dual_cols) if rows else []
        return bool(A) and rat.rank(A) == d
    A = np.array(rows, dtype=float) @ np.array(dual_cols, dtype=float)
    return _float_rank(A, tol) == d


def _state_grid(phi: FluxModel, delta):
    a, b = phi.state_interval
    if phi.exact:
        a, b = Fraction(repr(a)), Fraction(repr(b))
        step = Fraction(repr(float(delta)))
        n = int(math.floor((b - a) / step))
        pts = [a + k * step for k in range(n + 1)]
        if pts[-1] != b:
            pts.append(b)
        knots = {k for c in phi.components for k in c.knots if a <= k <= b}
        return sorted(set(pts) | knots), (a, b), step
    n = int(math.floor((b - a) / delta))
    pts = list(a + delta * np.arange(n + 1))
    if pts[-1] < b:
        pts.append(b)
    knots = {float(k) for c in phi.components for k in c.knots if a <= float(k) <= b}
    return sorted(set(pts) | knots), (a, b), delta


def nonlinearity_set(phi: FluxModel, S: PeriodStructure | None, delta_grid: float = 1e-2,
                     tol: float = 1e-10) -> NonlinearitySet:
    """States ``u`` where no nonzero ``xi`` in G' makes ``xi . phi`` affine on ``(u - delta, u + delta)``.

    ``S=None`` (or a structure with trivial lattice) selects the whole-vector
    variant: ``u`` is kept when some component is non-affine near ``u``.
    """
    if not delta_grid > 0 or not tol > 0:
        raise FluxError("delta_grid and tol must be positive")
    if S is not None and S.ambient_dim != phi.n:
        raise FluxError(f"period structure lives in R^{S.ambient_dim}, flux has {phi.n} components")
    dual_cols = []
    if S is not None and S.d:
        dual_cols = rat.transpose([list(g) for g in S.dual.generators])
    pts, (a, b), step = _state_grid(phi, delta_grid)
    accepted = []
    for u in pts:
        lo, hi = max(a, u - step), min(b, u + step)
        accepted.append(_in_F(phi, dual_cols, lo, hi, tol))
    intervals = []
    start = None
    for u, ok, prev in zip(pts, accepted, [None] + pts[:-1]):
        if ok and start is None:
            start = u
        elif not ok and start is not None:
            intervals.append((float(start), float(prev)))
            start = None
    if start is not None:
        intervals.append((float(start), float(pts[-1])))
    exact = phi.exact and (S is None or S.exact)
    return NonlinearitySet(tuple(intervals), float(delta_grid), float(tol), exact)


@dataclass(frozen=True)
class GNCheck:
    theorem1_ok: bool
    gn_ok: bool
    mean: float
    eps_list: tuple

    def as_dict(self):
        return {"theorem1_ok": self.theorem1_ok, "gn_ok": self.gn_ok, "mean": self.mean,
                "eps_list": list(self.eps_list)}


def check_genuine_nonlinearity(F: NonlinearitySet, m: float, eps_list: Sequence[float]) -> GNCheck:
    """Two-sided accumulation of F at ``m`` (decay with perturbations) and ``m in F`` (periodic decay)."""
    t1 = all(F.meets_open(m - e, m) and F.meets_open(m, m + e) for e in eps_list)
    return GNCheck(bool(t1), F.contains(m), float(m), tuple(float(e) for e in eps_list))


def lipschitz_bound(phi: FluxModel, interval) -> np.ndarray:
    """Per-component ``sup |phi_i'|`` on ``[a, b]`` from derivative extrema."""
    a, b = (float(x) for x in interval)
    lo, hi = phi.state_interval
    slack = 1e-12 * (1 + abs(lo) + abs(hi))
    if a > b or a < lo - slack or b > hi + slack:
        raise FluxError(f"interval [{a}, {b}] outside the state interval [{lo}, {hi}]")
    return np.array([c.derivative().sup_abs(a, b) for c in phi.components])
