"""Period groups: lattices, dual lattices, fundamental cells and torus means.

A periodic function on R^n has a group of periods ``G = H + L0`` where ``H``
is the largest linear subspace of periods (directions of constancy) and
``L0`` is a full-rank lattice inside the orthogonal complement of ``H``.
Its dual ``G'`` is the set of ``xi`` with ``xi . e`` integral for every
period ``e``; it lives in the complement of ``H`` and equals the dual of
``L0``.

Generators given as ints, Fractions or numeric strings are handled in exact
rational arithmetic. Float generators fall back to a 1e-12 tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import _rational as rat

TOL = 1e-12

Sampler = Callable[[np.ndarray], np.ndarray]


class LatticeError(ValueError):
    """Raised for degenerate or inconsistent lattice data."""


def _as_vector(v, n=None):
    vec = tuple(rat.to_exact(x) for x in np.atleast_1d(np.asarray(v, dtype=object)).ravel())
    if n is not None and len(vec) != n:
        raise LatticeError(f"vector {v!r} has length {len(vec)}, expected {n}")
    return vec


def _gram(vectors):
    return [[rat.dot(a, b) for b in vectors] for a in vectors]


def _det_any(M):
    if not M:
        return Fraction(1)
    if all(rat.all_exact(r) for r in M):
        return rat.det(M)
    return float(np.linalg.det(np.array(M, dtype=float)))


@dataclass(frozen=True)
class LatticeBasis:
    """``rank`` linearly independent generators in R^``ambient_dim``."""

    generators: tuple
    ambient_dim: int

    def __post_init__(self):
        gens = tuple(_as_vector(g, self.ambient_dim) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        if self.ambient_dim < 1:
            raise LatticeError("ambient dimension must be >= 1")
        if len(gens) > self.ambient_dim:
            raise LatticeError("more generators than the ambient dimension")
        if gens:
            g = self.gram_det
            if (g <= 0) if self.exact else (g <= TOL * max(1.0, self._scale ** (2 * len(gens)))):
                raise LatticeError(f"generators are linearly dependent (Gram determinant {g})")

    @classmethod
    def from_vectors(cls, vectors: Sequence, ambient_dim: int | None = None) -> "LatticeBasis":
        vectors = [list(np.atleast_1d(np.asarray(v, dtype=object)).ravel()) for v in vectors]
        if ambient_dim is None:
            if not vectors:
                raise LatticeError("ambient_dim is required for an empty basis")
            ambient_dim = len(vectors[0])
        return cls(tuple(tuple(v) for v in vectors), ambient_dim)

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def exact(self) -> bool:
        return all(rat.all_exact(g) for g in self.generators)

    @property
    def _scale(self) -> float:
        return max((abs(float(x)) for g in self.generators for x in g), default=1.0) or 1.0

    def gram(self):
        return _gram(self.generators)

    @property
    def gram_det(self):
        return _det_any(self.gram())

    @property
    def covolume(self) -> float:
        """d-dimensional volume of a fundamental parallelepiped inside span(L)."""
        return math.sqrt(float(self.gram_det)) if self.rank else 1.0

    def as_array(self) -> np.ndarray:
        return np.array(self.generators, dtype=float).reshape(self.rank, self.ambient_dim)

    def coordinates(self, x) -> np.ndarray:
        """Coefficients of points ``x`` (shape (n, ...)) in this basis (least squares on the span)."""
        E = self.as_array()
        x = np.asarray(x, dtype=float)
        flat = x.reshape(self.ambient_dim, -1)
        c = np.linalg.solve(E @ E.T, E @ flat)
        return c.reshape((self.rank,) + x.shape[1:])


def dual_lattice(L: LatticeBasis) -> LatticeBasis:
    """Dual basis ``xi_i`` inside span(L) with ``xi_i . e_j = delta_ij``."""
    if L.rank == 0:
        return L
    E = [list(g) for g in L.generators]
    if L.exact:
        Ginv = rat.inverse(_gram(E))
        Xi = rat.matmul(Ginv, E)
    else:
        A = L.as_array()
        Xi = np.linalg.solve(A @ A.T, A).tolist()
    return LatticeBasis(tuple(tuple(r) for r in Xi), L.ambient_dim)


def change_of_basis(A: LatticeBasis, B: LatticeBasis):
    """Matrix ``M`` with ``B.generators = M @ A.generators`` (rows), or None."""
    if A.rank != B.rank or A.ambient_dim != B.ambient_dim:
        return None
    if A.rank == 0:
        return []
    if A.exact and B.exact:
        Ea = [list(g) for g in A.generators]
        Ginv = rat.inverse(_gram(Ea))
        # M = B A^T (A A^T)^-1, then confirm B is really in span(A)
        M = rat.matmul(rat.matmul([list(g) for g in B.generators], rat.transpose(Ea)), Ginv)
        if rat.matmul(M, Ea) != [list(g) for g in B.generators]:
            return None
        return M
    Aa, Ba = A.as_array(), B.as_array()
    M = Ba @ Aa.T @ np.linalg.inv(Aa @ Aa.T)
    if not np.allclose(M @ Aa, Ba, atol=TOL * max(1.0, np.abs(Ba).max())):
        return None
    return M.tolist()


def same_lattice(A: LatticeBasis, B: LatticeBasis, tol: float = TOL) -> bool:
    """True when both bases generate the same lattice (unimodular change of basis)."""
    M = change_of_basis(A, B)
    if M is None:
        return False
    if not M:
        return True
    if all(rat.all_exact(r) for r in M):
        return all(x.denominator == 1 for r in M for x in r) and abs(rat.det(M)) == 1
    Mf = np.array(M, dtype=float)
    return bool(np.all(np.abs(Mf - np.round(Mf)) <= tol) and abs(abs(np.linalg.det(np.round(Mf))) - 1) <= tol)


@dataclass(frozen=True)
class PeriodStructure:
    """Declared period group ``G = H + L0``.

    ``constancy_basis`` spans ``H``; ``lattice`` generates ``L0`` inside the
    orthogonal complement of ``H``. Together they must span R^n.
    """

    constancy_basis: tuple
    lattice: LatticeBasis

    def __post_init__(self):
        n = self.lattice.ambient_dim
        H = tuple(_as_vector(h, n) for h in self.constancy_basis)
        object.__setattr__(self, "constancy_basis", H)
        for h in H:
            for e in self.lattice.generators:
                d = rat.dot(h, e)
                if (d != 0) if (rat.all_exact(h) and rat.all_exact(e)) else abs(d) > TOL:
                    raise LatticeError(f"lattice generator {e} is not orthogonal to constancy direction {h}")
        allvec = list(H) + list(self.lattice.generators)
        if len(allvec) != n:
            raise LatticeError(
                f"constancy directions ({len(H)}) and lattice generators ({self.lattice.rank}) "
                f"must together span R^{n}")
        g = _det_any(_gram(allvec))
        if (g == 0) if isinstance(g, Fraction) else abs(g) <= TOL:
            raise LatticeError("constancy directions are linearly dependent")

    @classmethod
    def from_config(cls, generators: Sequence, constancy: Sequence = (), ambient_dim: int | None = None):
        if ambient_dim is None:
            ambient_dim = len((list(generators) + list(constancy))[0])
        return cls(tuple(constancy), LatticeBasis.from_vectors(list(generators), ambient_dim))

    @classmethod
    def integer_lattice(cls, n: int = 1, period=1):
        gens = [[period if i == j else 0 for i in range(n)] for j in range(n)]
        return cls((), LatticeBasis.from_vectors(gens, n))

    @property
    def ambient_dim(self) -> int:
        return self.lattice.ambient_dim

    @property
    def d(self) -> int:
        return self.lattice.rank

    @property
    def exact(self) -> bool:
        return self.lattice.exact and all(rat.all_exact(h) for h in self.constancy_basis)

    @cached_property
    def dual(self) -> LatticeBasis:
        return dual_lattice(self.lattice)

    def is_dual_vector(self, xi) -> bool:
        """Membership of ``xi`` in G': orthogonal to H and integral on L0."""
        xi = _as_vector(xi, self.ambient_dim)
        exact = rat.all_exact(xi) and self.exact
        for h in self.constancy_basis:
            d = rat.dot(xi, h)
            if (d != 0) if exact else abs(d) > TOL:
                return False
        for e in self.lattice.generators:
            d = rat.dot(xi, e)
            if exact:
                if d.denominator != 1:
                    return False
            elif abs(d - round(d)) > TOL:
                return False
        return True

    def pairings(self, xi) -> list:
        """Values ``xi . e_j`` over the lattice generators."""
        xi = _as_vector(xi, self.ambient_dim)
        return [rat.dot(xi, e) for e in self.lattice.generators]

    def period_box(self) -> list:
        """Smallest axis-aligned periods: entry i is the least t>0 with t*e_i in G.

        ``None`` marks axes lying in H (any shift is a period). Requires exact data.
        """
        if not self.exact:
            raise LatticeError("period_box needs rational lattice data")
        n = self.ambient_dim
        basis = [list(h) for h in self.constancy_basis] + [list(e) for e in self.lattice.generators]
        Binv = rat.inverse(rat.transpose(basis))  # coords = Binv @ x
        k = len(self.constancy_basis)
        out = []
        for i in range(n):
            coords = [Binv[r][i] for r in range(n)][k:]
            nz = [c for c in coords if c != 0]
            if not nz:
                out.append(None)
                continue
            # t * c integral for all c  <=>  t in lcm of (den/num) over c
            steps = [Fraction(c.denominator, abs(c.numerator)) for c in nz]
            num = 1
            den = 0
            for s in steps:
                num = num * s.numerator // math.gcd(num, s.numerator)
                den = math.gcd(den, s.denominator)
            out.append(Fraction(num, den))
        return out


@dataclass(frozen=True)
class FundamentalCell:
    """Half-open parallelepiped ``origin + sum s_k * edge_k``, 0 <= s_k < 1."""

    origin: np.ndarray
    edge_vectors: np.ndarray
    volume: float

    def coordinates(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        E = self.edge_vectors
        flat = x.reshape(E.shape[1], -1) - self.origin[:, None]
        s = np.linalg.solve(E @ E.T, E @ flat)
        return s.reshape((E.shape[0],) + x.shape[1:])

    def translate_index(self, x) -> np.ndarray:
        """Integer k with ``x - k @ edges`` inside the cell (points of span(L))."""
        return np.floor(self.coordinates(x)).astype(np.int64)

    def reduce(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.translate_index(x)
        shift = np.tensordot(self.edge_vectors.T, k, axes=(1, 0))
        return x - shift

    def contains(self, x) -> np.ndarray:
        s = self.coordinates(x)
        return np.all((s >= 0) & (s < 1), axis=0)


def fundamental_cell(L: LatticeBasis, r: int = 1) -> FundamentalCell:
    """Cell ``{sum x_k e_k : -r/2 <= x_k < r/2}`` for the lattice ``rL``."""
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise LatticeError(f"r must be a positive integer, got {r!r}")
    E = L.as_array() * r
    origin = -0.5 * E.sum(axis=0) if L.rank else np.zeros(L.ambient_dim)
    return FundamentalCell(origin, E, r ** L.rank * L.covolume)


# ---------------------------------------------------------------- windows

@dataclass(frozen=True)
class NormWindow:
    """Bounded open window: a ball of radius ``size`` or a box of half-widths ``size``.

    ``center`` only matters for coverings; the V-norm is invariant under
    translating the window.
    """

    shape: str
    size: tuple
    center: tuple = ()

    def __post_init__(self):
        if self.shape not in ("ball", "box"):
            raise ValueError(f"unknown window shape {self.shape!r}")
        size = tuple(float(s) for s in np.atleast_1d(self.size))
        if self.shape == "ball" and len(size) != 1:
            raise ValueError("ball windows take a single radius")
        if not size or any(not (s > 0) or not math.isfinite(s) for s in size):
            raise ValueError(f"window size must be positive and finite, got {self.size!r}")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def ball(cls, radius=1.0, center=()):
        return cls("ball", (radius,), center)

    @classmethod
    def box(cls, half_widths, center=()):
        return cls("box", tuple(np.atleast_1d(half_widths)), center)

    @classmethod
    def interval(cls, a: float, b: float):
        """1D open interval (a, b)."""
        return cls("box", ((b - a) / 2,), ((a + b) / 2,))

    def center_vec(self, n: int) -> np.ndarray:
        return np.array(self.center, dtype=float) if self.center else np.zeros(n)

    def half_widths(self, n: int) -> np.ndarray:
        if self.shape == "ball":
            return np.full(n, self.size[0])
        if len(self.size) == 1:
            return np.full(n, self.size[0])
        if len(self.size) != n:
            raise ValueError(f"box window has {len(self.size)} half-widths, expected {n}")
        return np.array(self.size)

    def volume(self, n: int) -> float:
        if self.shape == "ball":
            return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.size[0] ** n
        return float(np.prod(2 * self.half_widths(n)))

    def perimeter(self, n: int) -> float:
        if self.shape == "ball":
            R = self.size[0]
            return n * math.pi ** (n / 2) / math.gamma(n / 2 + 1) * R ** (n - 1)
        h = 2 * self.half_widths(n)
        return float(sum(2 * np.prod(np.delete(h, i)) for i in range(n)))

    def contains(self, x, closed: bool = False) -> np.ndarray:
        """Membership of points ``x`` (shape (n, ...))."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        c = self.center_vec(n).reshape((n,) + (1,) * (x.ndim - 1))
        y = x - c
        if self.shape == "ball":
            r2 = np.sum(y * y, axis=0)
            return r2 <= self.size[0] ** 2 * (1 + 1e-12) if closed else r2 < self.size[0] ** 2
        h = self.half_widths(n).reshape(c.shape)
        return np.all(np.abs(y) <= h * (1 + 1e-12), axis=0) if closed else np.all(np.abs(y) < h, axis=0)

    def boundary_samples(self, n: int, k: int = 33) -> np.ndarray:
        """Points of the closure of the window (boundary plus a grid), shape (n, N)."""
        c = self.center_vec(n)
        h = self.half_widths(n)
        axes = [np.linspace(-1, 1, k) for _ in range(n)]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
        if self.shape == "ball":
            norm = np.sqrt(np.sum(pts ** 2, axis=0))
            outside = norm > 1
            pts[:, outside] /= norm[outside]
            # extra points exactly on the sphere
            rng = np.random.default_rng(0)
            s = rng.normal(size=(n, 64 * n))
            s /= np.linalg.norm(s, axis=0)
            pts = np.concatenate([pts, s], axis=1)
        return c[:, None] + h[:, None] * pts


@dataclass(frozen=True)
class Covering:
    """Translates ``centers[i] + V2`` whose union contains the closure of ``V1``."""

    count: int
    centers: np.ndarray
    V1: NormWindow = field(repr=False)
    V2: NormWindow = field(repr=False)
    containment: bool = False

    def verify(self, n: int, k: int = 33) -> bool:
        pts = self.V1.boundary_samples(n, k)
        covered = np.zeros(pts.shape[1], dtype=bool)
        for y in self.centers:
            covered |= self.V2.contains(pts - y[:, None], closed=self.containment)
        return bool(covered.all())


def _contained(V1: NormWindow, V2: NormWindow, n: int) -> bool:
    """Closure of V1 (recentred) inside the closure of V2 (recentred)."""
    if V1 == V2 or (V1.shape == V2.shape and np.allclose(V1.half_widths(n), V2.half_widths(n))):
        return True
    h1 = V1.half_widths(n)
    if V2.shape == "box":
        if V1.shape == "box":
            return bool(np.all(h1 <= V2.half_widths(n)))
        return bool(np.all(V1.size[0] <= V2.half_widths(n)))
    R2 = V2.size[0]
    if V1.shape == "ball":
        return V1.size[0] <= R2
    return float(np.sqrt(np.sum(h1 ** 2))) <= R2


def covering_count(V1: NormWindow, V2: NormWindow, n: int | None = None) -> Covering:
    """Finite covering of closure(V1) by translates of V2 (deterministic, not minimal).

    If V1 fits inside a translate of V2 the answer is a single translate. Otherwise
    the bounding box of V1 is tiled greedily by boxes inscribed in V2, shrunk by a
    small margin so the open translates also cover tile boundaries.
    """
    if n is None:
        n = max(len(V1.center) or 1, len(V2.center) or 1,
                len(V1.size) if V1.shape == "box" else 1, len(V2.size) if V2.shape == "box" else 1)
    c1, c2 = V1.center_vec(n), V2.center_vec(n)
    if _contained(V1, V2, n):
        return Covering(1, (c1 - c2)[None, :], V1, V2, containment=True)
    h1 = V1.half_widths(n)
    if V2.shape == "ball":
        inner = np.full(n, V2.size[0] / math.sqrt(n))
    else:
        inner = V2.half_widths(n).copy()
    side = 2 * inner * (1 - 1e-6)
    counts = [int(math.floor(2 * h / s)) + 1 for h, s in zip(h1, side)]
    ticks = []
    for k, h, s, hi in zip(counts, h1, side, inner):
        # first tile starts just below -h, consecutive tiles overlap by the margin
        lo = -h - 0.5 * (2 * hi - s)
        ticks.append(lo + hi + s * np.arange(k))
    grid = np.stack([g.ravel() for g in np.meshgrid(*ticks, indexing="ij")], axis=1)
    centers = grid + c1 - c2
    return Covering(len(centers), centers, V1, V2)


# ---------------------------------------------------------------- torus sampling

def _cell_points(S: PeriodStructure, resolution: int, offset=None) -> np.ndarray:
    """Midpoints of ``resolution**d`` sub-cells of one L0 cell, shape (n, res, ..., res)."""
    n, d = S.ambient_dim, S.d
    if d == 0:
        pts = np.zeros((n, 1))
    else:
        s = (np.arange(resolution) + 0.5) / resolution
        coords = np.meshgrid(*([s] * d), indexing="ij")
        E = S.lattice.as_array()
        pts = np.tensordot(E.T, np.stack(coords), axes=(1, 0))
    if offset is not None:
        pts = pts + np.asarray(offset, dtype=float).reshape((n,) + (1,) * (pts.ndim - 1))
    return pts


def torus_mean(p: Sampler, S: PeriodStructure, resolution: int = 64, *, offset=None,
               return_error: bool = False):
    """Mean of an S-periodic sampler over the torus H^perp / L0 (normalized measure).

    Midpoint rule on ``resolution`` sub-cells per generator. With
    ``return_error`` also returns the Richardson estimate
    ``|mean(res) - mean(res/2)|``.
    """
    report = validate_periods(p, S, tol=1e-9, resolution=max(8, resolution // 4))
    if not report.passed:
        raise LatticeError(f"sampler is not periodic for the declared structure "
                           f"(max discrepancy {report.max_violation:.3g})")
    value = float(np.mean(p(_cell_points(S, resolution, offset))))
    if not return_error:
        return value
    coarse = float(np.mean(p(_cell_points(S, max(1, resolution // 2), offset))))
    return value, abs(value - coarse)


@dataclass
class PeriodReport:
    generator_discrepancy: list
    constancy_discrepancy: list
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.generator_discrepancy + self.constancy_discrepancy, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def validate_periods(p: Sampler, S: PeriodStructure, tol: float = 1e-10, resolution: int = 64,
                     shifts: Sequence[float] = (0.5, 1.0, math.sqrt(3.0))) -> PeriodReport:
    """Grid-L1 discrepancy over one cell of ``p(. + e) - p(.)`` for every declared period."""
    pts = _cell_points(S, resolution)
    base = p(pts)
    vol = S.lattice.covolume
    shape = (S.ambient_dim,) + (1,) * (pts.ndim - 1)

    def disc(vec):
        return float(np.mean(np.abs(p(pts + vec.reshape(shape)) - base)) * vol)

    gen = [disc(np.array(e, dtype=float)) for e in S.lattice.generators]
    const = []
    for h in S.constancy_basis:
        hv = np.array(h, dtype=float)
        hv /= np.linalg.norm(hv)
        const.append(max(disc(s * hv) for s in shifts))
    return PeriodReport(gen, const, tol)


def random_rational_structure(rng: np.random.Generator, n: int, d: int, max_entry: int = 4) -> PeriodStructure:
    """Random exact PeriodStructure with rank-``d`` lattice in R^n (test/demo helper)."""
    while True:
        Hraw = [[Fraction(int(x)) for x in rng.integers(-max_entry, max_entry + 1, n)] for _ in range(n - d)]
        if n - d and rat.rank(Hraw) < n - d:
            continue
        comp = rat.nullspace(Hraw, n) if Hraw else [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
        if len(comp) != d:
            continue
        gens = []
        for _ in range(d):
            coef = [Fraction(int(c), int(rng.integers(1, 4))) for c in rng.integers(-3, 4, d)]
            gens.append([sum((c * b[k] for c, b in zip(coef, comp)), Fraction(0)) for k in range(n)])
        if d and rat.det(_gram(gens)) == 0:
            continue
        return PeriodStructure(tuple(tuple(h) for h in Hraw), LatticeBasis(tuple(tuple(g) for g in gens), n))


__all__ = [
    "LatticeError", "LatticeBasis", "PeriodStructure", "FundamentalCell", "NormWindow", "Covering",
    "dual_lattice", "change_of_basis", "same_lattice", "fundamental_cell", "covering_count",
    "torus_mean", "validate_periods", "PeriodReport", "random_rational_structure",
]
