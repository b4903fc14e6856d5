"""Closed-form entropy solutions for the flux ``max(0, -u)`` with square-wave data.

The periodic solution has a shock at ``x = 1 - t/2`` and a contact at
``x = 2 - t`` that annihilate at ``t = 2``. Adding ``eps * chi_[0,1)`` slows
the shock to speed ``-1/(2+eps)``; after the contact catches it a plateau of
height ``1 + eps`` and width ``eps/(1+eps)`` survives forever.

Branches are half-open intervals ``[a, b)``, so a boundary point takes the
value of the interval it opens.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .flux import FluxModel, PRESETS
from .solver import GridField

PERIOD = 2.0


@dataclass(frozen=True)
class Example1Params:
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


def example1_flux(u):
    u = np.asarray(u, dtype=float)
    out = np.maximum(0.0, -u)
    return float(out) if out.ndim == 0 else out


def example1_model() -> FluxModel:
    return PRESETS["example1"]()


def _check_t(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")


def example1_periodic(t, x):
    """Periodic solution; vectorized in ``x`` (scalar ``t``)."""
    _check_t(t)
    t = float(t)
    x = np.asarray(x, dtype=float)
    y = np.mod(x, PERIOD)
    out = np.zeros_like(y)
    if t <= 2:
        a, b = 1 - t / 2, 2 - t
        out = np.where(y < a, 1.0, np.where(y < b, -1.0, 0.0))
    return float(out) if out.ndim == 0 else out


def example1_perturbed(t, x, p: Example1Params | float = 0.0):
    """Solution for data ``square_wave + eps * chi_[0,1)``; periodic solution outside ``[0, 2)``."""
    _check_t(t)
    if not isinstance(p, Example1Params):
        p = Example1Params(float(p))
    eps = p.epsilon
    t = float(t)
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x < PERIOD)
    plateau = eps / (1 + eps)
    shock = 1 - t / (2 + eps)
    top = max(shock, plateau)
    pert = np.where(x < top, 1 + eps, np.where((x >= shock) & (x < 2 - t), -1.0, 0.0))
    out = np.where(inside, pert, example1_periodic(t, x))
    return float(out) if out.ndim == 0 else out


def _branches_periodic(t):
    """``(a, b, value)`` pieces of the periodic solution on ``[0, 2)``."""
    if t > 2:
        return [(0.0, PERIOD, 0.0)]
    a, b = 1 - t / 2, 2 - t
    return [(0.0, a, 1.0), (a, b, -1.0), (b, PERIOD, 0.0)]


def _branches_perturbed(t, eps):
    plateau = eps / (1 + eps)
    shock = 1 - t / (2 + eps)
    top = max(shock, plateau)
    out = [(0.0, top, 1 + eps)]
    if 2 - t > top:
        out.append((top, 2 - t, -1.0))
    out.append((max(2 - t, top), PERIOD, 0.0))
    return out


def example1_cell_averages(t: float, lower: float, upper: float, cells: int, epsilon: float | None = None) -> GridField:
    """Exact cell averages of the periodic (``epsilon=None``) or perturbed solution.

    Each average is a sum of branch values times overlap fractions, so cells
    inside a single branch get that value exactly.
    """
    _check_t(t)
    t = float(t)
    edges = np.linspace(lower, upper, cells + 1)
    lo, hi = edges[:-1], edges[1:]
    width = hi - lo
    acc = np.zeros(cells)
    per = _branches_periodic(t)
    pert = None if epsilon is None else _branches_perturbed(t, Example1Params(epsilon).epsilon)
    for k in range(int(np.floor(lower / PERIOD)), int(np.ceil(upper / PERIOD)) + 1):
        shift = k * PERIOD
        for a, b, val in (pert if (k == 0 and pert is not None) else per):
            if val == 0.0 or b <= a:
                continue
            ov = np.maximum(0.0, np.minimum(hi, shift + b) - np.maximum(lo, shift + a))
            acc += val * (ov / width)
    return GridField(acc, (lower,), ((upper - lower) / cells,))


def _fronts(t: float, lower: float, upper: float, epsilon: float | None):
    """Discontinuities ``(x, left, right)`` of the exact solution inside ``[lower, upper]``."""
    pieces = []
    per = _branches_periodic(t)
    pert = None if epsilon is None else _branches_perturbed(t, epsilon)
    for k in range(int(np.floor(lower / PERIOD)) - 1, int(np.ceil(upper / PERIOD)) + 1):
        for a, b, val in (pert if (k == 0 and pert is not None) else per):
            if b > a:
                pieces.append((k * PERIOD + a, val))
    out = []
    for (_, left), (x, right) in zip(pieces, pieces[1:]):
        if left != right and lower <= x <= upper:
            out.append((x, left, right))
    return out


def example1_entropy_residual(k: float, testfn, t_span, lower: float, upper: float, epsilon: float | None = None,
                              panels: int = 400, order: int = 6, return_scale: bool = False):
    """Entropy weak-form integral of the exact solution, evaluated front by front.

    The solution is piecewise constant, so ``int |u-k| f_t + q(u) f_x`` reduces
    to ``sum_fronts int f(t, x(t)) (s [|u-k|] - [q]) dt`` with the
    Rankine-Hugoniot speed ``s`` (every front of this flux, contacts included,
    moves at that speed). The time integral uses composite Gauss-Legendre
    panels split at the collision time, so a non-negative dissipation on every
    front gives a non-negative result with no quadrature slack.
    """
    t0, t1 = (float(v) for v in t_span)
    cuts = {t0, t1}
    for c in (2.0, collision_time(epsilon or 0.0)):
        if t0 < c < t1:
            cuts.add(c)
    cuts = sorted(cuts)
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def q(u):
        return np.sign(u - k) * (example1_flux(u) - example1_flux(k))

    total = 0.0
    scale = 0.0
    for a, b in zip(cuts, cuts[1:]):
        edges = np.linspace(a, b, max(1, int(round(panels * (b - a) / (t1 - t0)))) + 1)
        for lo, hi in zip(edges, edges[1:]):
            h = 0.5 * (hi - lo)
            for z, w in zip(nodes, weights):
                t = lo + h * (z + 1)
                for x, L, R in _fronts(t, lower, upper, epsilon):
                    s = (example1_flux(R) - example1_flux(L)) / (R - L)
                    jump_eta, jump_q = s * (abs(R - k) - abs(L - k)), q(R) - q(L)
                    fx = w * h * float(testfn(t, np.array([[x]]))[0])
                    total += (jump_eta - jump_q) * fx
                    scale += (abs(jump_eta) + abs(jump_q)) * fx
    return (total, scale) if return_scale else total


def collision_time(epsilon: float) -> float:
    """Time at which the contact ``x = 2 - t`` meets the shock ``x = 1 - t/(2+eps)``."""
    eps = Example1Params(epsilon).epsilon
    return (2 + eps) / (1 + eps)


def plot_data(times, epsilon: float | None = None, points: int = 401, lower: float = 0.0, upper: float = 2.0) -> dict:
    """Two-column CSV text ``x,u`` per requested time."""
    xs = np.linspace(lower, upper, points, endpoint=False)
    out = {}
    for t in times:
        u = example1_periodic(t, xs) if epsilon is None else example1_perturbed(t, xs, epsilon)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u"])
        for a, b in zip(xs, u):
            w.writerow([f"{a:.17g}", f"{b:.17g}"])
        out[float(t)] = buf.getvalue()
    return out


# ---------------------------------------------------------------- smooth Burgers

def burgers_breaking_time(amplitude: float = 1.0, wavenumber: float = 1.0) -> float:
    """First shock time for ``u0 = A sin(2 pi k x)``: ``1 / max(-u0')``."""
    return 1.0 / (2 * np.pi * amplitude * wavenumber)


def burgers_smooth(t: float, x, amplitude: float = 1.0, wavenumber: float = 1.0, iterations: int = 60):
    """Pre-shock solution ``u = u0(x - u t)`` of ``u_t + (u^2/2)_x = 0`` for sine data, by Newton's method."""
    _check_t(t)
    if t >= burgers_breaking_time(amplitude, wavenumber):
        raise ValueError("the smooth characteristic solution only exists before the breaking time")
    x = np.asarray(x, dtype=float)
    w = 2 * np.pi * wavenumber
    u = amplitude * np.sin(w * x)
    for _ in range(iterations):
        s = w * (x - u * t)
        g = u - amplitude * np.sin(s)
        dg = 1 + amplitude * w * t * np.cos(s)
        step = g / dg
        u = u - step
        if np.max(np.abs(step), initial=0.0) < 1e-15:
            break
    return u


def burgers_cell_averages(t: float, lower: float, upper: float, cells: int, amplitude: float = 1.0,
                          wavenumber: float = 1.0, order: int = 8) -> GridField:
    """Gauss-Legendre cell averages of the smooth Burgers solution."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    h = (upper - lower) / cells
    mid = lower + h * (np.arange(cells) + 0.5)
    pts = mid[:, None] + 0.5 * h * nodes[None, :]
    vals = burgers_smooth(t, pts, amplitude, wavenumber)
    return GridField(0.5 * vals @ weights, (lower,), (h,))
