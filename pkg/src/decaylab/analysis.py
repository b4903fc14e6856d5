"""Shift-invariant window norms, torus distances and decay time series.

``v_norm(u, V, m) = max_y int_{y+V} |u - m|`` with ``y`` restricted to cell
centres. For piecewise-constant cell data the window integral is evaluated
exactly (cell/window intersection volumes) in 1D and 2D and by 4x4x4 subcell
sampling on boundary cells in 3D. Sums over kernel offsets run in a fixed
order for every centre, so rolling ``u`` by whole cells rolls the window sums
bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lattice import NormWindow, PeriodStructure, covering_count
from .solver import GridField, Trajectory, total_mass

UNIT_BALL = NormWindow.ball(1.0)


class NormError(ValueError):
    pass


# ---------------------------------------------------------------- window kernels

def _interval_overlap(a, b, lo, hi):
    return np.maximum(0.0, np.minimum(b, hi) - np.maximum(a, lo))


def _disk_primitive(x, R):
    """``int_0^x sqrt(R^2 - s^2) ds`` for ``|x| <= R``."""
    x = min(max(x, -R), R)
    return 0.5 * (x * math.sqrt(max(R * R - x * x, 0.0)) + R * R * math.asin(x / R))


def rect_disk_area(x0, x1, y0, y1, R) -> float:
    """Exact area of ``[x0,x1] x [y0,y1]`` intersected with the disk of radius ``R`` at the origin."""
    a, b = max(x0, -R), min(x1, R)
    if a >= b or y0 >= y1:
        return 0.0
    cuts = {a, b}
    for y in (y0, y1):
        if abs(y) < R:
            s = math.sqrt(R * R - y * y)
            cuts.update(c for c in (-s, s) if a < c < b)
    pts = sorted(cuts)
    area = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (lo + hi)
        w = math.sqrt(max(R * R - mid * mid, 0.0))
        top_is_w = w < y1
        bot_is_w = -w > y0
        top = w if top_is_w else y1
        bot = -w if bot_is_w else y0
        if top <= bot:
            continue
        W = _disk_primitive(hi, R) - _disk_primitive(lo, R)
        L = hi - lo
        area += (W if top_is_w else y1 * L) - (-W if bot_is_w else y0 * L)
    return area


@lru_cache(maxsize=64)
def _kernel(spacing: tuple, shape: str, size: tuple) -> tuple:
    """Offsets (k, n) and weights: the volume of cell ``j + k`` inside the window centred at cell ``j``."""
    n = len(spacing)
    h = np.array(spacing)
    V = NormWindow(shape, size)
    hw = V.half_widths(n)
    reach = np.ceil(hw / h + 0.5).astype(int)
    axes = [np.arange(-r, r + 1) for r in reach]
    K = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    lo = K * h[:, None] - h[:, None] / 2
    hi = lo + h[:, None]
    if shape == "box" or n == 1:
        w = np.ones(K.shape[1])
        for i in range(n):
            w = w * _interval_overlap(lo[i], hi[i], -hw[i], hw[i])
    else:
        R = size[0]
        near = np.sqrt(np.sum(np.maximum(0, np.maximum(lo, -hi)) ** 2, axis=0))
        far = np.sqrt(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2, axis=0))
        w = np.where(far <= R, np.prod(h), 0.0)
        boundary = np.nonzero((near < R) & (far > R))[0]
        for idx in boundary:
            if n == 2:
                w[idx] = rect_disk_area(lo[0, idx], hi[0, idx], lo[1, idx], hi[1, idx], R)
            else:
                s = (np.arange(4) + 0.5) / 4
                sub = np.stack(np.meshgrid(*[lo[i, idx] + h[i] * s for i in range(n)], indexing="ij"))
                w[idx] = np.prod(h) * np.mean(np.sum(sub ** 2, axis=0) < R * R)
        if n == 3 and len(boundary):
            # rescale the sampled boundary layer so the weights add up to the exact ball volume
            inner = np.sum(w) - np.sum(w[boundary])
            w[boundary] *= (4 / 3 * math.pi * R ** 3 - inner) / np.sum(w[boundary])
    keep = w > 0
    return K[:, keep], w[keep]


def window_sums(u: GridField, V: NormWindow, m_shift: float = 0.0) -> np.ndarray:
    """``int_{y_j + V} |u - m|`` for every cell centre ``y_j`` (periodic wrap)."""
    n = u.dims
    hw = V.half_widths(n)
    if any(h > r / 4 for h, r in zip(u.spacing, hw)):
        raise NormError(f"grid spacing {u.spacing} does not resolve a window of half-width {tuple(hw)}")
    K, w = _kernel(tuple(u.spacing), V.shape, V.size)
    a = np.abs(u.data - m_shift)
    reach = np.max(np.abs(K), axis=1)
    reps = [int(math.ceil(r / c)) for r, c in zip(reach, u.cells)]
    padded = np.pad(a, [(r * c, r * c) for r, c in zip(reps, u.cells)], mode="wrap")
    base = [r * c for r, c in zip(reps, u.cells)]
    out = np.zeros_like(a)
    for k, wk in zip(K.T, w):
        sl = tuple(slice(b + ki, b + ki + c) for b, ki, c in zip(base, k, u.cells))
        out += wk * padded[sl]
    return out


def v_norm(u: GridField, V: NormWindow, m_shift: float = 0.0, return_defect: bool = False):
    """Window norm over cell-centred windows.

    With ``return_defect`` also returns a bound on the gap to the supremum
    over all real centres: ``||u - m||_inf * perimeter(V) * half cell diagonal``.
    """
    val = float(np.max(window_sums(u, V, m_shift)))
    if not return_defect:
        return val
    diag = 0.5 * math.sqrt(sum(h * h for h in u.spacing))
    defect = float(np.max(np.abs(u.data - m_shift))) * V.perimeter(u.dims) * diag
    return val, defect


def x_norm(u: GridField, m_shift: float = 0.0, return_defect: bool = False):
    """Unit-ball window norm of ``u - m_shift``."""
    return v_norm(u, UNIT_BALL, m_shift, return_defect)


def norm_equivalence_bound(V1: NormWindow, V2: NormWindow, n: int | None = None) -> int:
    """Number of translates of ``V2`` needed to cover ``V1``; bounds ``||.||_V1 / ||.||_V2``."""
    return covering_count(V1, V2, n).count


# ---------------------------------------------------------------- periodic quantities

def _cell_shift(vec, spacing, tol=1e-9):
    k = np.asarray(vec, dtype=float) / np.asarray(spacing)
    r = np.round(k)
    if np.any(np.abs(k - r) > tol):
        return None
    return r.astype(int)


def check_grid_periodicity(u: GridField, S: PeriodStructure, tol: float = 1e-10) -> float:
    """Largest ``max |u(. + e) - u|`` over lattice generators and axis-aligned constancy directions."""
    if S.ambient_dim != u.dims:
        raise NormError(f"period structure is {S.ambient_dim}D, field is {u.dims}D")
    worst = 0.0
    for e in S.lattice.as_array():
        k = _cell_shift(e, u.spacing)
        if k is None:
            raise NormError(f"lattice generator {tuple(e)} is not a whole number of cells")
        shifted = np.roll(u.data, tuple(-k), axis=tuple(range(u.dims)))
        worst = max(worst, float(np.max(np.abs(shifted - u.data))))
    for h in S.constancy_basis:
        h = np.asarray([float(c) for c in h])
        axes = np.nonzero(np.abs(h) > 1e-12)[0]
        if len(axes) != 1:
            raise NormError("only axis-aligned constancy directions can be checked on a grid")
        ax = int(axes[0])
        worst = max(worst, float(np.max(np.abs(u.data - u.data.mean(axis=ax, keepdims=True)))))
    return worst


def torus_l1_distance(u: GridField, c: float, S: PeriodStructure | None = None, tol: float = 1e-10) -> float:
    """Mean of ``|u - c|`` over the torus with normalized measure.

    The grid box is itself a union of fundamental cells once ``u`` is
    invariant under the declared periods, so the grid mean is the cell mean.
    """
    if S is not None:
        viol = check_grid_periodicity(u, S)
        if viol > tol:
            raise NormError(f"field is not periodic on the grid (max violation {viol:.3g})")
    a = np.abs(u.data - c)
    return float(np.add.reduce(a.ravel())) / a.size


def slice_means(u: GridField, axis: int) -> np.ndarray:
    """Averages over all axes except ``axis`` (one value per cell along ``axis``)."""
    other = tuple(i for i in range(u.dims) if i != axis)
    return u.data.mean(axis=other) if other else u.data.copy()


# ---------------------------------------------------------------- decay series

@dataclass
class DecayReport:
    times: list
    x_norm: list
    torus_l1: list
    mass: list
    min_max: list
    verdict: str = "undetermined"
    threshold: float | None = None
    metric: str = "x_norm"
    x_norm_defect: list = field(default_factory=list)

    def __post_init__(self):
        k = len(self.times)
        if not (len(self.x_norm) == len(self.torus_l1) == len(self.mass) == len(self.min_max) == k):
            raise ValueError("decay report columns differ in length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x_norm", "torus_l1", "mass", "min", "max"])
        for row in zip(self.times, self.x_norm, self.torus_l1, self.mass, self.min_max):
            t, xn, tl, ms, (lo, hi) = row
            w.writerow([f"{v:.17g}" for v in (t, xn, tl, ms, lo, hi)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, threshold: float | None = None, metric: str = "x_norm") -> "DecayReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        col = lambda k: [float(r[k]) for r in rows]
        rep = cls(col("t"), col("x_norm"), col("torus_l1"), col("mass"),
                  list(zip(col("min"), col("max"))), threshold=threshold, metric=metric)
        rep.verdict = classify(getattr(rep, metric), threshold)
        return rep


def classify(series: Sequence[float], threshold: float | None, stall_rel: float = 0.01) -> str:
    """``decayed`` if the last value is at most ``threshold``, ``stalled`` if the last three agree within 1%."""
    if not series:
        return "undetermined"
    if threshold is not None and series[-1] <= threshold:
        return "decayed"
    tail = series[-3:]
    if len(tail) == 3 and max(tail) - min(tail) < stall_rel * max(abs(v) for v in tail):
        return "stalled"
    return "undetermined"


def decay_report(traj: Trajectory, m: float, S: PeriodStructure | None = None, decay_threshold: float | None = None,
                 metric: str = "x_norm", window: NormWindow = UNIT_BALL) -> DecayReport:
    if not len(traj):
        raise ValueError("empty trajectory")
    if metric not in ("x_norm", "torus_l1"):
        raise ValueError(f"unknown decay metric {metric!r}")
    xs, ds, tl, ms, mm = [], [], [], [], []
    for i, t in enumerate(traj.times):
        u = traj.field_at(i)
        val, defect = v_norm(u, window, m, return_defect=True)
        xs.append(val)
        ds.append(defect)
        tl.append(torus_l1_distance(u, m, S) if S is not None else math.nan)
        ms.append(total_mass(u))
        mm.append((float(u.data.min()), float(u.data.max())))
    rep = DecayReport(list(traj.times), xs, tl, ms, mm, threshold=decay_threshold, metric=metric, x_norm_defect=ds)
    rep.verdict = classify(getattr(rep, metric), decay_threshold)
    return rep
