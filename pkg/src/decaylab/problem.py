"""Initial data ``u0 = p + v``, periodic envelopes, bracketing data and reductions.

Samplers follow the package convention: ``f(x)`` with ``x`` of shape
``(n, ...)`` returns an array of shape ``x.shape[1:]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .flux import FluxModel, PiecewisePolynomial, combine
from .lattice import PeriodStructure, _cell_points, torus_mean
from .solver import GridField, SchemeConfig

Sampler = Callable[[np.ndarray], np.ndarray]


def _zero(x):
    return np.zeros(np.asarray(x).shape[1:])


@dataclass
class InitialData:
    """``u0 = p + v`` with ``p`` periodic under ``structure`` and ``v`` vanishing at infinity."""

    periodic_part: Sampler
    structure: PeriodStructure
    perturbation: Sampler | None = None
    support_radius: float = 0.0
    mean: float | None = None
    bounds: tuple | None = None
    mean_error: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.mean is None:
            self.mean, self.mean_error = torus_mean(self.periodic_part, self.structure, return_error=True)

    @property
    def n(self) -> int:
        return self.structure.ambient_dim

    def __call__(self, x):
        out = self.periodic_part(x)
        if self.perturbation is not None:
            out = out + self.perturbation(x)
        return out

    def sample(self, lower, upper, cells, subsamples: int = 4) -> GridField:
        g = GridField.from_function(self, lower, upper, cells, subsamples)
        if self.bounds is not None:
            lo, hi = self.bounds
            if g.data.min() < lo - 1e-12 or g.data.max() > hi + 1e-12:
                raise ValueError(f"sampled data leaves the declared bounds {self.bounds}")
        return g


@dataclass
class ProblemSpec:
    flux: FluxModel
    initial: InitialData
    lower: tuple
    upper: tuple
    cells: tuple
    scheme: SchemeConfig
    subsamples: int = 4
    exact_initial: Callable[[], GridField] | None = None

    def __post_init__(self):
        self.lower = tuple(float(x) for x in np.atleast_1d(self.lower))
        self.upper = tuple(float(x) for x in np.atleast_1d(self.upper))
        self.cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if not (len(self.lower) == len(self.upper) == len(self.cells) == self.flux.n == self.initial.n):
            raise ValueError("flux, data and grid dimensions disagree")

    @property
    def n(self) -> int:
        return len(self.cells)

    def initial_field(self) -> GridField:
        if self.exact_initial is not None:
            return self.exact_initial()
        return self.initial.sample(self.lower, self.upper, self.cells, self.subsamples)


# ---------------------------------------------------------------- vanishing at infinity

@dataclass
class VanishingReport:
    lambdas: list
    radii: list
    measures: list  # measures[i][k]: |{|v| > lambdas[i]}| inside the box of radius radii[k]
    passed_each: list

    @property
    def passed(self) -> bool:
        return all(self.passed_each)


def verify_vanishing(v: Sampler, lambdas: Sequence[float], probe_radius: float, n: int = 1,
                     cells_per_unit: int | None = None, growth_tol: float = 0.01) -> VanishingReport:
    """Measure of ``{|v| > lambda}`` in boxes ``[-R', R']^n`` for ``R' = R/4, R/2, R``.

    A level passes when the measure grows by less than ``growth_tol`` (relative)
    between the two largest boxes.
    """
    if cells_per_unit is None:
        cells_per_unit = max(4, int((4_000_000 ** (1 / n)) / (2 * probe_radius)))
    radii = [probe_radius / 4, probe_radius / 2, probe_radius]
    N = int(math.ceil(2 * probe_radius * cells_per_unit))
    h = 2 * probe_radius / N
    axis = -probe_radius + h * (np.arange(N) + 0.5)
    X = np.stack(np.meshgrid(*([axis] * n), indexing="ij"))
    a = np.abs(v(X))
    dist = np.max(np.abs(X), axis=0)
    measures, ok = [], []
    for lam in lambdas:
        row = [float(np.count_nonzero((a > lam) & (dist < r))) * h ** n for r in radii]
        measures.append(row)
        ok.append(row[2] - row[1] <= growth_tol * max(row[1], 0.0) or row[2] == row[1])
    return VanishingReport(list(lambdas), radii, measures, ok)


# ---------------------------------------------------------------- envelopes

@dataclass
class EnvelopeSet:
    """rG-periodic envelopes of ``v`` stored on one period box of the sublattice they share with the grid."""

    r: int
    v_plus: GridField
    v_minus: GridField
    V_big: GridField
    eps_plus: float
    eps_minus: float
    M_r: float
    origin_cell: tuple = ()

    def extend(self, grid: GridField, which: str = "v_plus") -> np.ndarray:
        """Values of an envelope on the cells of ``grid`` (same spacing, aligned)."""
        env = getattr(self, which)
        if not np.allclose(grid.spacing, env.spacing, rtol=0, atol=1e-12 * max(env.spacing)):
            raise ValueError("grid spacing differs from the envelope grid")
        idx = []
        for i in range(grid.dims):
            s = (grid.lower[i] - env.lower[i]) / env.spacing[i]
            k = int(round(s))
            if abs(s - k) > 1e-6:
                raise ValueError("grid is not aligned with the envelope grid")
            idx.append(np.mod(np.arange(grid.cells[i]) + k, env.cells[i]))
        return env.data[np.ix_(*idx)]


def _coset_shifts(gens: np.ndarray, box: np.ndarray) -> np.ndarray:
    """All residues mod ``box`` of integer combinations of the integer vectors ``gens``."""
    seen = {tuple(np.zeros(len(box), dtype=int))}
    frontier = list(seen)
    while frontier:
        nxt = []
        for s in frontier:
            for g in gens:
                for sign in (1, -1):
                    t = tuple(int(c) for c in np.mod(np.array(s) + sign * g, box))
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
        frontier = nxt
    return np.array(sorted(seen))


def periodic_envelopes(v: GridField, S: PeriodStructure, r: int) -> EnvelopeSet:
    """Sup/inf of ``v`` over translates by ``r`` times the lattice, folded onto one period box.

    Translates that miss the sampled domain contribute ``v = 0``; this is exact
    when ``v`` vanishes on the outermost layer of cells (checked).
    """
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise ValueError(f"r must be a positive integer, got {r!r}")
    if S.constancy_basis:
        raise ValueError("envelopes need a lattice spanning every axis; reduce constancy directions first")
    if S.ambient_dim != v.dims:
        raise ValueError("dimension mismatch between field and period structure")
    for axis in range(v.dims):
        for end in (0, -1):
            if np.any(np.take(v.data, end, axis=axis) != 0):
                raise ValueError("perturbation support reaches the edge of the sampled domain")
    box_len = [Fraction(r) * p for p in S.period_box()]
    box = []
    for L, h in zip(box_len, v.spacing):
        c = float(L) / h
        if abs(c - round(c)) > 1e-9:
            raise ValueError(f"period {float(L)} is not a whole number of cells of width {h}")
        box.append(int(round(c)))
    box = np.array(box)
    gens = []
    for e in S.lattice.as_array():
        k = r * e / np.array(v.spacing)
        if np.any(np.abs(k - np.round(k)) > 1e-9):
            raise ValueError("lattice generator is not a whole number of cells")
        gens.append(np.round(k).astype(int))
    shifts = _coset_shifts(np.array(gens), box)

    # box origin: the grid cell edge closest to -(period box)/2, so P_r is centred at 0
    origin = [int(round((-float(L) / 2 - lo) / h)) for L, lo, h in zip(box_len, v.lower, v.spacing)]
    lower = tuple(lo + o * h for lo, o, h in zip(v.lower, origin, v.spacing))
    vmax = np.zeros(tuple(box))
    vmin = np.zeros(tuple(box))
    vabs = np.zeros(tuple(box))
    idx = np.ix_(*[np.mod(np.arange(c) - o, b) for c, o, b in zip(v.cells, origin, box)])
    np.maximum.at(vmax, idx, v.data)
    np.minimum.at(vmin, idx, v.data)
    np.maximum.at(vabs, idx, np.abs(v.data))
    # close under the coset shifts that the rectangular box does not already absorb
    axes = tuple(range(v.dims))
    plus, minus, big = vmax.copy(), vmin.copy(), vabs.copy()
    for s in shifts[1:]:
        plus = np.maximum(plus, np.roll(vmax, tuple(-s), axis=axes))
        minus = np.minimum(minus, np.roll(vmin, tuple(-s), axis=axes))
        big = np.maximum(big, np.roll(vabs, tuple(-s), axis=axes))
    mk = lambda a: GridField(a, lower, v.spacing)
    mean = lambda a: float(np.add.reduce(a.ravel())) / a.size
    return EnvelopeSet(r, mk(plus), mk(minus), mk(big), mean(plus), mean(minus), mean(big), tuple(origin))


def build_bracketing_data(p, env: EnvelopeSet, m: float, alpha_minus: float, alpha_plus: float):
    """Periodic data ``p + v_r^+ + alpha^+ - m - eps^+`` and its lower counterpart on the envelope grid."""
    gap_plus = (alpha_plus - m) - abs(env.eps_plus)
    gap_minus = (m - alpha_minus) - abs(env.eps_minus)
    if gap_plus <= 0 or gap_minus <= 0:
        raise ValueError(f"r too small for the requested means: margins {gap_minus:.3g} (lower), {gap_plus:.3g} (upper)")
    g = env.v_plus
    if isinstance(p, GridField):
        pg = p.data
    else:
        pg = GridField.from_function(p, g.lower, g.upper, g.cells).data
    up = pg + env.v_plus.data + (alpha_plus - m - env.eps_plus)
    down = pg + env.v_minus.data + (alpha_minus - m - env.eps_minus)
    return g.with_data(down), g.with_data(up)


# ---------------------------------------------------------------- counterexample family

def _ext_gcd(values: Sequence[int]):
    """``g, c`` with ``sum c_i * values_i = g = gcd(values)``."""
    g, coeffs = 0, [0] * len(values)
    for i, a in enumerate(values):
        # combine (g, coeffs) with a
        x0, x1, a0, a1 = 1, 0, g, a
        y0, y1 = 0, 1
        while a1:
            q = a0 // a1
            a0, a1 = a1, a0 - q * a1
            x0, x1 = x1, x0 - q * x1
            y0, y1 = y1, y0 - q * y1
        if a0 < 0:
            a0, x0, y0 = -a0, -x0, -y0
        coeffs = [c * x0 for c in coeffs]
        coeffs[i] = y0
        g = a0
    return g, coeffs


def transverse_period(S: PeriodStructure, xi, r: int) -> np.ndarray:
    """A period ``e0`` of ``p`` with ``xi . e0 = r``."""
    if not S.is_dual_vector(xi):
        raise ValueError(f"{tuple(xi)} is not in the dual lattice")
    pair = [int(Fraction(a)) if isinstance(a, Fraction) else int(round(a)) for a in S.pairings(xi)]
    if not any(pair):
        raise ValueError("xi must be nonzero on the lattice")
    g, c = _ext_gcd(pair)
    if r % g:
        raise ValueError(f"r = {r} is not a multiple of gcd of the pairings ({g})")
    E = S.lattice.as_array()
    return (r // g) * np.tensordot(np.array(c, dtype=float), E, axes=1)


def nondecaying_example(delta: float, S: PeriodStructure, xi, r: int, v_profile: Sampler | None = None,
                        mean: float = 0.0, check_resolution: int = 32) -> InitialData:
    """``m + v(pr x) + (delta/2) sin(2 pi xi.x / r)``, whose slice means never decay."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise ValueError("r must be a positive integer")
    xi_f = np.array([float(c) for c in xi])
    if not np.any(xi_f):
        raise ValueError("xi must be nonzero")
    e0 = transverse_period(S, xi, r)
    n = S.ambient_dim
    prof = v_profile or _zero

    def pr(x):
        s = np.tensordot(xi_f, x, axes=1) / r
        return x - e0.reshape((n,) + (1,) * (x.ndim - 1)) * s

    def u0(x):
        x = np.asarray(x, dtype=float)
        phase = np.tensordot(xi_f, x, axes=1) / r
        return mean + prof(pr(x)) + 0.5 * delta * np.sin(2 * np.pi * phase)

    if v_profile is not None:
        sup = float(np.max(np.abs(v_profile(pr(_cell_points(S, check_resolution))))))
        if sup > delta / 2 * (1 + 1e-12):
            raise ValueError(f"profile sup {sup:.4g} exceeds delta/2")
    return InitialData(u0, S, mean=float(mean), bounds=(mean - delta, mean + delta), label="counterexample")


# ---------------------------------------------------------------- dimensional reduction

def _constancy_violation(u0: Sampler, lower, upper, H: np.ndarray, samples: int = 17) -> float:
    rng = np.random.default_rng(0)
    lower, upper = np.asarray(lower), np.asarray(upper)
    X = lower[:, None] + (upper - lower)[:, None] * rng.random((len(lower), samples ** 2))
    base = u0(X)
    worst = 0.0
    for h in H:
        for s in (0.37, 1.0, math.sqrt(2.0), -2.5):
            worst = max(worst, float(np.max(np.abs(u0(X + s * h[:, None]) - base))))
    return worst


def _orthonormal_complement(H: np.ndarray, n: int) -> np.ndarray:
    """Rows form an orthonormal basis of the complement of span(H)."""
    if len(H) == 0:
        return np.eye(n)
    _, _, vt = np.linalg.svd(np.asarray(H, dtype=float))
    Q = vt[len(H):]
    # deterministic orientation: first nonzero entry of each row positive
    for i in range(len(Q)):
        j = int(np.nonzero(np.abs(Q[i]) > 1e-12)[0][0])
        if Q[i, j] < 0:
            Q[i] = -Q[i]
    return Q


def reduce_problem(spec: ProblemSpec, tol: float = 1e-10, cells: Sequence[int] | None = None) -> ProblemSpec:
    """Drop the directions of constancy: problem on the orthogonal complement of H.

    Axis-aligned H drops axes and keeps the grid. Otherwise H^perp must be
    one-dimensional and the reduced problem lives on the period of the lattice
    along its unit normal, with flux ``q . phi``.
    """
    S = spec.initial.structure
    if not S.constancy_basis:
        return spec
    n = spec.n
    H = np.array([[float(c) for c in h] for h in S.constancy_basis])
    H = H / np.linalg.norm(H, axis=1, keepdims=True)
    viol = _constancy_violation(spec.initial, spec.lower, spec.upper, H)
    if viol > tol:
        raise ValueError(f"initial data vary along the constancy directions (max change {viol:.3g})")
    axis_aligned = all(np.count_nonzero(np.abs(h) > 1e-12) == 1 for h in H)
    if axis_aligned:
        dropped = sorted({int(np.argmax(np.abs(h))) for h in H})
        keep = [i for i in range(n) if i not in dropped]
        Q = np.eye(n)[keep]
    else:
        Q = _orthonormal_complement(H, n)
    d = len(Q)
    if d not in (1, 2):
        raise ValueError(f"reduced problems must be 1D or 2D, got {d}")
    comps = []
    for q in Q:
        nz = [(c, w) for c, w in zip(spec.flux.components, q) if abs(w) > 1e-15]
        if not nz:
            comps.append(PiecewisePolynomial.polynomial((0,)))
            continue
        weights = [Fraction(int(round(w))) if abs(w - round(w)) < 1e-15 else float(w) for _, w in nz]
        comps.append(combine([c for c, _ in nz], weights))
    flux = FluxModel(tuple(comps), spec.flux.state_interval, f"{spec.flux.name}|reduced")
    gens = [[float(np.dot(q, e)) for q in Q] for e in S.lattice.as_array()]
    if axis_aligned:
        gens = [[e[i] for i in keep] for e in S.lattice.generators]
    S_red = PeriodStructure.from_config(gens, (), d)
    init = spec.initial
    Qt = Q.T.copy()

    def u_red(y):
        y = np.asarray(y, dtype=float)
        return init(np.tensordot(Qt, y, axes=1))

    new_init = InitialData(u_red, S_red, None, init.support_radius, init.mean, init.bounds, init.mean_error,
                           init.label + "|reduced")
    if axis_aligned:
        lower = tuple(spec.lower[i] for i in keep)
        upper = tuple(spec.upper[i] for i in keep)
        new_cells = tuple(spec.cells[i] for i in keep)
    else:
        period = abs(gens[0][0]) if len(gens) == 1 else float(S_red.lattice.covolume)
        lower, upper = (0.0,), (period,)
        new_cells = (spec.cells[0],)
    if cells is not None:
        new_cells = tuple(cells)
    return ProblemSpec(flux, new_init, lower, upper, new_cells, spec.scheme, spec.subsamples)


def extend_constant(u: GridField, full_cells: Sequence[int], kept_axes: Sequence[int],
                    full_lower, full_spacing) -> GridField:
    """Broadcast a reduced field back along the dropped axes."""
    shape = [1] * len(full_cells)
    for i, ax in enumerate(kept_axes):
        shape[ax] = u.cells[i]
    data = np.broadcast_to(u.data.reshape(shape), tuple(full_cells)).copy()
    return GridField(data, full_lower, full_spacing)


# ---------------------------------------------------------------- presets

def square_wave(amplitude: float = 1.0, period: float = 2.0, axis: int = 0) -> Sampler:
    """``+a`` on the first half period, ``-a`` on the second."""
    def p(x):
        y = np.mod(np.asarray(x, dtype=float)[axis], period)
        return np.where(y < period / 2, amplitude, -amplitude)
    return p


def sine(amplitude: float = 1.0, wavevector=(1.0,), offset: float = 0.0) -> Sampler:
    k = np.array([float(c) for c in wavevector])

    def p(x):
        return offset + amplitude * np.sin(2 * np.pi * np.tensordot(k, np.asarray(x, dtype=float), axes=1))
    return p


def constant(c: float = 0.0) -> Sampler:
    def p(x):
        return np.full(np.asarray(x).shape[1:], float(c))
    return p


def indicator(height: float, lower, upper) -> Sampler:
    """``height`` on the half-open box ``[lower, upper)``."""
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))

    def v(x):
        x = np.asarray(x, dtype=float)
        inside = np.ones(x.shape[1:], dtype=bool)
        for i in range(len(lo)):
            inside &= (x[i] >= lo[i]) & (x[i] < hi[i])
        return np.where(inside, float(height), 0.0)
    v.support = (lo, hi)
    return v


def exp_decay(amplitude: float = 1.0, rate: float = 1.0) -> Sampler:
    def v(x):
        x = np.asarray(x, dtype=float)
        return amplitude * np.exp(-rate * np.sqrt(np.sum(x * x, axis=0)))
    return v


def enlarged_domain(period_box: Sequence[float], support_radius: float, speed: float, t_end: float,
                    centre: Sequence[float] | None = None) -> tuple:
    """Torus of whole periods, symmetric about ``centre``, with ``speed*t_end + support < R/2``."""
    need = 2 * (speed * t_end + support_radius)
    lower, upper, mult = [], [], []
    for i, P in enumerate(period_box):
        k = max(1, math.floor(need / P) + 1)
        if k % 2:
            k += 1
        c = 0.0 if centre is None else float(centre[i])
        c = P * round(c / P)
        lower.append(c - k * P / 2)
        upper.append(c + k * P / 2)
        mult.append(k)
    return tuple(lower), tuple(upper), tuple(mult)
