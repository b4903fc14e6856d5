"""Monotone finite-volume solver for ``u_t + div phi(u) = 0`` on periodic boxes.

Forward Euler in time, first order in space, unsplit in several dimensions::

    u_j^{n+1} = u_j^n - sum_i dt/dx_i (F_i(u_j, u_{j+e_i}) - F_i(u_{j-e_i}, u_j))

Three two-point fluxes are available: Lax-Friedrichs with a fixed dissipation
``lambda_i`` equal to the Lipschitz bound of ``phi_i`` on the configured state
bounds, Godunov (exact interval min/max of ``phi``, 1D only) and
Engquist-Osher. Under ``dt * sum_i L_i / dx_i <= 1`` all three updates are
monotone, which is what the maximum principle, order preservation and
L1-contraction checks rely on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flux import FluxModel, lipschitz_bound

log = logging.getLogger(__name__)

SCHEMES = ("local_lax_friedrichs", "godunov_1d", "engquist_osher")


class SolverError(RuntimeError):
    """Raised when a step is rejected or the state stops being finite."""

    def __init__(self, msg, last_good=None, t=None):
        super().__init__(msg)
        self.last_good = last_good
        self.t = t


@dataclass
class GridField:
    """Cell averages on a uniform periodic box ``[lower, lower + cells * spacing)``."""

    data: np.ndarray
    lower: tuple
    spacing: tuple

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.lower = tuple(float(x) for x in np.atleast_1d(self.lower))
        self.spacing = tuple(float(x) for x in np.atleast_1d(self.spacing))
        if self.data.ndim not in (1, 2, 3):
            raise ValueError(f"grid fields are 1D-3D, got {self.data.ndim} axes")
        if len(self.lower) != self.data.ndim or len(self.spacing) != self.data.ndim:
            raise ValueError("lower/spacing do not match the data dimension")
        if any(c < 3 for c in self.data.shape):
            raise ValueError(f"need at least 3 cells per axis, got {self.data.shape}")
        if any(not h > 0 for h in self.spacing):
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("grid field contains non-finite values")

    @classmethod
    def from_function(cls, f: Callable, lower, upper, cells, subsamples: int = 1) -> "GridField":
        """Cell averages of ``f`` (points of shape (n, ...)) by ``subsamples**n`` midpoints per cell."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        cells = tuple(int(c) for c in np.atleast_1d(cells))
        h = (upper - lower) / np.array(cells)
        acc = np.zeros(cells)
        offsets = (np.arange(subsamples) + 0.5) / subsamples
        for combo in np.ndindex(*([subsamples] * len(cells))):
            axes = [lower[i] + h[i] * (np.arange(cells[i]) + offsets[combo[i]]) for i in range(len(cells))]
            acc += f(np.stack(np.meshgrid(*axes, indexing="ij")))
        return cls(acc / subsamples ** len(cells), tuple(lower), tuple(h))

    @property
    def dims(self) -> int:
        return self.data.ndim

    @property
    def cells(self) -> tuple:
        return self.data.shape

    @property
    def upper(self) -> tuple:
        return tuple(l + c * h for l, c, h in zip(self.lower, self.cells, self.spacing))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return self.cell_volume * self.data.size

    def axis_centers(self, i: int) -> np.ndarray:
        return self.lower[i] + self.spacing[i] * (np.arange(self.cells[i]) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centres, shape (n, *cells)."""
        return np.stack(np.meshgrid(*[self.axis_centers(i) for i in range(self.dims)], indexing="ij"))

    def with_data(self, data) -> "GridField":
        return GridField(data, self.lower, self.spacing)

    def copy(self) -> "GridField":
        return self.with_data(self.data.copy())


@dataclass
class SchemeConfig:
    scheme: str = "local_lax_friedrichs"
    cfl: float = 0.9
    t_end: float = 1.0
    output_times: tuple = ()
    state_bounds: tuple | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not 0 < self.cfl <= 0.9:
            raise ValueError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        outs = tuple(sorted(float(t) for t in self.output_times)) or (0.0, float(self.t_end))
        if outs[0] < 0 or outs[-1] > self.t_end + 1e-12:
            raise ValueError(f"output times {outs} outside [0, {self.t_end}]")
        self.output_times = outs
        if self.state_bounds is not None:
            a, b = (float(x) for x in self.state_bounds)
            if a > b:
                raise ValueError("state_bounds must be ordered")
            self.state_bounds = (a, b)


def cfl_dt(grid: GridField, L: Sequence[float], cfl: float, cadence: float | None = None) -> float:
    """``cfl / sum_i L_i / dx_i``; with a zero flux speed the output cadence is returned."""
    L = np.atleast_1d(np.asarray(L, dtype=float))
    if L.size != grid.dims:
        raise ValueError(f"{L.size} Lipschitz bounds for a {grid.dims}D grid")
    rate = float(np.sum(L / np.array(grid.spacing)))
    if rate == 0:
        if cadence is None:
            raise ValueError("flux speed is zero everywhere; supply an output cadence")
        return float(cadence)
    return cfl / rate


# ---------------------------------------------------------------- numerical fluxes

def _llf(comp, lam):
    def F(a, b):
        return 0.5 * (comp(a) + comp(b)) - 0.5 * lam * (b - a)
    return F


def _godunov(comp):
    def F(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        mn, mx = comp.extrema(lo, hi)
        return np.where(a <= b, mn, mx)
    return F


def _engquist_osher(comp):
    P = comp.positive_part_antiderivative(0.0)

    def F(a, b):
        return P(a) - P(b) + comp(b)
    return F


class Scheme:
    """Face fluxes and step rule for a flux model under a scheme configuration."""

    def __init__(self, phi: FluxModel, cfg: SchemeConfig, grid: GridField | None = None):
        self.phi = phi
        self.cfg = cfg
        bounds = cfg.state_bounds or phi.state_interval
        self.lipschitz = lipschitz_bound(phi, bounds)
        if cfg.scheme == "godunov_1d" and phi.n != 1:
            raise ValueError("the Godunov flux is only implemented for one space dimension")
        if cfg.scheme == "local_lax_friedrichs":
            self.face_fluxes = [_llf(c, lam) for c, lam in zip(phi.components, self.lipschitz)]
        elif cfg.scheme == "godunov_1d":
            self.face_fluxes = [_godunov(phi.components[0])]
        else:
            self.face_fluxes = [_engquist_osher(c) for c in phi.components]

    def dt_max(self, grid: GridField, cadence: float | None = None) -> float:
        return cfl_dt(grid, self.lipschitz, self.cfg.cfl, cadence)

    def face_flux(self, u: np.ndarray, axis: int) -> np.ndarray:
        """Flux through the face between cell j and j + e_axis, stored at j."""
        return self.face_fluxes[axis](u, np.roll(u, -1, axis=axis))

    def entropy_face_flux(self, u: np.ndarray, axis: int, k: float) -> np.ndarray:
        """Numerical Kruzhkov flux ``F(a v k, b v k) - F(a ^ k, b ^ k)``."""
        b = np.roll(u, -1, axis=axis)
        F = self.face_fluxes[axis]
        return F(np.maximum(u, k), np.maximum(b, k)) - F(np.minimum(u, k), np.minimum(b, k))

    def increment(self, u: np.ndarray, spacing, dt: float) -> np.ndarray:
        du = np.zeros_like(u)
        for axis, h in enumerate(spacing):
            Fa = self.face_flux(u, axis)
            du -= (dt / h) * (Fa - np.roll(Fa, 1, axis=axis))
        return du

    def step(self, u: GridField, dt: float) -> GridField:
        if u.dims != self.phi.n:
            raise ValueError(f"{u.dims}D field with a {self.phi.n}-component flux")
        limit = self.dt_max(u, cadence=math.inf)
        if dt > limit * (1 + 1e-12):
            raise SolverError(f"dt={dt:.6g} exceeds the monotonicity limit {limit:.6g}")
        return u.with_data(u.data + self.increment(u.data, u.spacing, dt))


def step(u: GridField, phi: FluxModel, cfg: SchemeConfig, dt: float) -> GridField:
    """One forward-Euler step of the configured monotone scheme."""
    return Scheme(phi, cfg).step(u, dt)


# ---------------------------------------------------------------- trajectories

@dataclass
class Trajectory:
    times: list
    states: list
    grid: GridField
    phi: FluxModel
    cfg: SchemeConfig
    step_times: list = field(default_factory=list)
    step_states: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def field_at(self, i: int) -> GridField:
        return self.grid.with_data(self.states[i])

    def at_time(self, t: float) -> GridField:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no output stored at t={t}")
        return self.field_at(i)

    @property
    def final(self) -> GridField:
        return self.field_at(-1)

    def __len__(self):
        return len(self.times)


def total_variation(u: GridField) -> np.ndarray:
    """Per-axis periodic total variation (jump sizes times the transverse face area)."""
    out = []
    for i in range(u.dims):
        jumps = np.abs(np.roll(u.data, -1, axis=i) - u.data)
        out.append(float(np.sum(jumps)) * u.cell_volume / u.spacing[i])
    return np.array(out)


def evolve(u0: GridField, phi: FluxModel, cfg: SchemeConfig, record_steps: bool = False,
           max_steps: int = 10_000_000) -> Trajectory:
    """Run the scheme from ``u0`` through ``cfg.output_times`` up to ``cfg.t_end``."""
    if cfg.state_bounds is None:
        lo, hi = float(u0.data.min()), float(u0.data.max())
        if hi == lo:
            hi = lo + 1e-12
        cfg = SchemeConfig(cfg.scheme, cfg.cfl, cfg.t_end, cfg.output_times, (lo, hi))
    lo, hi = cfg.state_bounds
    if u0.data.min() < lo - 1e-12 or u0.data.max() > hi + 1e-12:
        raise ValueError(f"initial data range [{u0.data.min()}, {u0.data.max()}] exceeds state bounds {cfg.state_bounds}")
    scheme = Scheme(phi, cfg)
    outs = list(cfg.output_times)
    cadence = (outs[-1] - outs[0]) / max(1, len(outs) - 1) or cfg.t_end or 1.0
    dt0 = scheme.dt_max(u0, cadence=cadence)
    traj = Trajectory([], [], u0.with_data(u0.data.copy()), phi, cfg)
    t = 0.0
    u = u0.data.copy()
    oi = 0
    while oi < len(outs) and outs[oi] <= 0.0:
        traj.times.append(0.0)
        traj.states.append(u.copy())
        oi += 1
    if record_steps:
        traj.step_times.append(0.0)
        traj.step_states.append(u.copy())
    nsteps = 0
    while t < cfg.t_end:
        target = outs[oi] if oi < len(outs) else cfg.t_end
        dt = min(dt0, target - t)
        if dt <= 0:
            break
        new = u + scheme.increment(u, u0.spacing, dt)
        if not np.all(np.isfinite(new)):
            raise SolverError(f"non-finite state after t={t:.6g}", last_good=u0.with_data(u), t=t)
        u = new
        t = target if target - t <= dt0 and dt == target - t else t + dt
        nsteps += 1
        if record_steps:
            traj.step_times.append(t)
            traj.step_states.append(u.copy())
        while oi < len(outs) and abs(outs[oi] - t) <= 1e-12 * max(1.0, t):
            traj.times.append(outs[oi])
            traj.states.append(u.copy())
            oi += 1
        if nsteps >= max_steps:
            raise SolverError("step budget exhausted", last_good=u0.with_data(u), t=t)
    traj.diagnostics = _diagnostics(traj, scheme, dt0, nsteps)
    return traj


def _diagnostics(traj: Trajectory, scheme: Scheme, dt: float, nsteps: int) -> dict:
    g = traj.grid
    m0 = total_mass(traj.field_at(0)) if traj.states else 0.0
    masses = [total_mass(traj.field_at(i)) for i in range(len(traj))]
    tv0 = total_variation(traj.field_at(0)) if traj.states else np.zeros(g.dims)
    rate = float(np.dot(scheme.lipschitz, tv0))
    cont = []
    for i in range(1, len(traj)):
        diff = float(np.sum(np.abs(traj.states[i] - traj.states[i - 1]))) * g.cell_volume
        bound = rate * (traj.times[i] - traj.times[i - 1])
        cont.append((diff, bound))
    scale = float(np.sum(np.abs(traj.states[0]))) * g.cell_volume if traj.states else 1.0
    return {
        "dt": dt,
        "steps": nsteps,
        "lipschitz": scheme.lipschitz.tolist(),
        "mass_drift": max((abs(m - m0) for m in masses), default=0.0) / max(scale, 1e-300),
        "time_continuity": cont,
        "time_continuity_ok": all(d <= b * (1 + 1e-9) + 1e-12 for d, b in cont),
    }


def solve(spec, record_steps: bool = False) -> Trajectory:
    """Solve a :class:`~decaylab.problem.ProblemSpec` (anything with ``initial_field``, ``flux``, ``scheme``)."""
    return evolve(spec.initial_field(), spec.flux, spec.scheme, record_steps=record_steps)


def total_mass(u: GridField) -> float:
    """``sum u_j * |cell|`` with numpy's pairwise summation over the flattened array."""
    return float(np.add.reduce(np.ascontiguousarray(u.data).ravel())) * u.cell_volume


# ---------------------------------------------------------------- entropy checks

def bump(t_center: float, t_half: float, x_center: Sequence[float], x_half: Sequence[float]) -> Callable:
    """Non-negative C^2 test function with compact support ``|t - tc| < tw, |x_i - c_i| < w_i``."""
    xc = np.atleast_1d(np.asarray(x_center, dtype=float))
    xw = np.atleast_1d(np.asarray(x_half, dtype=float))

    def psi(s):
        return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)

    def f(t, x):
        x = np.asarray(x, dtype=float)
        out = psi((t - t_center) / t_half) * np.ones(x.shape[1:])
        for i in range(x.shape[0]):
            out = out * psi((x[i] - xc[i]) / xw[i])
        return out

    f.support = (t_center - t_half, t_center + t_half, xc - xw, xc + xw)
    return f


def _check_support(fvals: np.ndarray, interior_times: bool):
    if np.any(fvals[0] != 0) or (interior_times and (np.any(fvals[-1] != 0) or np.any(fvals[-2] != 0))):
        raise ValueError("test function support touches the initial or final time")
    for axis in range(1, fvals.ndim):
        first = np.take(fvals, 0, axis=axis)
        last = np.take(fvals, -1, axis=axis)
        if np.any(first != 0) or np.any(last != 0):
            raise ValueError("test function support touches the spatial boundary")


def entropy_residual(traj: Trajectory, k: float, testfn: Callable, return_scale: bool = False):
    """Discrete weak form of the Kruzhkov inequality for entropy ``|u - k|``.

    Computes ``sum_n sum_j |cell| [ |u^{n+1} - k| (f^{n+1} - f^n)
    + dt_n sum_i Q_i (f_{j+e_i} - f_j) / dx_i ]`` with the scheme's numerical
    entropy flux ``Q_i``. For a monotone scheme this is non-negative up to
    rounding. Requires a trajectory recorded with ``record_steps=True``.
    """
    if len(traj.step_states) < 3:
        raise ValueError("entropy_residual needs a trajectory recorded with record_steps=True")
    scheme = Scheme(traj.phi, traj.cfg)
    g = traj.grid
    X = g.centers()
    f = np.stack([testfn(t, X) for t in traj.step_times])
    if np.any(f < 0):
        raise ValueError("test function must be non-negative")
    _check_support(f, interior_times=True)
    total = 0.0
    scale = 0.0
    vol = g.cell_volume
    for n in range(len(traj.step_times) - 1):
        fn, fn1 = f[n], f[n + 1]
        if not (np.any(fn) or np.any(fn1)):
            continue
        dt = traj.step_times[n + 1] - traj.step_times[n]
        eta1 = np.abs(traj.step_states[n + 1] - k)
        terms = [eta1 * (fn1 - fn)]
        for axis, h in enumerate(g.spacing):
            Q = scheme.entropy_face_flux(traj.step_states[n], axis, k)
            terms.append(dt / h * Q * (np.roll(fn, -1, axis=axis) - fn))
        for term in terms:
            total += float(np.sum(term)) * vol
            scale += float(np.sum(np.abs(term))) * vol
    return (total, scale) if return_scale else total


def entropy_residual_exact(u: Callable, phi: FluxModel, k: float, testfn: Callable, t_span, lower, upper,
                           cells: Sequence[int], nt: int, return_scale: bool = False):
    """Midpoint quadrature of ``int |u-k| f_t + sign(u-k)(phi(u)-phi(k)) . grad f`` for a closed-form ``u(t, x)``."""
    t0, t1 = t_span
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    cells = tuple(int(c) for c in np.atleast_1d(cells))
    h = (upper - lower) / np.array(cells)
    dt = (t1 - t0) / nt
    axes = [lower[i] + h[i] * (np.arange(cells[i]) + 0.5) for i in range(len(cells))]
    X = np.stack(np.meshgrid(*axes, indexing="ij"))
    eps = 1e-6
    phik = phi(np.array(float(k)))
    total = 0.0
    scale = 0.0
    for n in range(nt):
        t = t0 + (n + 0.5) * dt
        f = testfn(t, X)
        if not np.any(f):
            continue
        ft = (testfn(t + eps, X) - testfn(t - eps, X)) / (2 * eps)
        uu = u(t, X)
        s = np.sign(uu - k)
        integrand = np.abs(uu - k) * ft
        fu = phi(uu)
        for i in range(len(cells)):
            dX = np.zeros_like(X)
            dX[i] = eps
            fx = (testfn(t, X + dX) - testfn(t, X - dX)) / (2 * eps)
            integrand = integrand + s * (fu[i] - phik[i]) * fx
        w = dt * float(np.prod(h))
        total += float(np.sum(integrand)) * w
        scale += float(np.sum(np.abs(integrand))) * w
    return (total, scale) if return_scale else total
