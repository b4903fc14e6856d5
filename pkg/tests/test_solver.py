import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaylab.flux import PRESETS
from decaylab.oracle import example1_cell_averages, example1_model
from decaylab.solver import (GridField, Scheme, SchemeConfig, SolverError, bump, cfl_dt, entropy_residual, evolve,
                             step, total_mass)

SCHEMES_1D = ["local_lax_friedrichs", "godunov_1d", "engquist_osher"]


def grid1(data, lower=0.0, length=1.0):
    data = np.asarray(data, dtype=float)
    return GridField(data, (lower,), (length / data.size,))


# --- GridField / SchemeConfig validation

def test_grid_rejects_too_few_cells():
    with pytest.raises(ValueError):
        GridField(np.zeros(2), (0.0,), (0.5,))


def test_grid_rejects_nan():
    with pytest.raises(ValueError):
        GridField(np.array([0.0, np.nan, 1.0]), (0.0,), (1.0,))


def test_cfl_above_limit_rejected():
    with pytest.raises(ValueError):
        SchemeConfig(cfl=0.95)


def test_output_times_outside_horizon_rejected():
    with pytest.raises(ValueError):
        SchemeConfig(t_end=1.0, output_times=(0.0, 2.0))


# --- cfl_dt

def test_cfl_dt_1d():
    g = grid1(np.zeros(100))
    assert cfl_dt(g, [1.0], 0.45) == pytest.approx(0.0045, rel=1e-15)


def test_cfl_dt_2d():
    g = GridField(np.zeros((10, 10)), (0, 0), (0.1, 0.1))
    assert cfl_dt(g, [1.0, 2.0], 0.5) == pytest.approx(0.5 / 30, rel=1e-14)


def test_cfl_dt_zero_speed_returns_cadence():
    assert cfl_dt(grid1(np.zeros(10)), [0.0], 0.9, cadence=0.25) == 0.25
    with pytest.raises(ValueError):
        cfl_dt(grid1(np.zeros(10)), [0.0], 0.9)


# --- step

@pytest.mark.parametrize("scheme", SCHEMES_1D)
def test_constant_state_is_preserved(scheme):
    g = grid1(np.full(16, 0.3))
    cfg = SchemeConfig(scheme, state_bounds=(-1, 1))
    out = step(g, PRESETS["burgers"](), cfg, 0.5 / 16)
    assert np.array_equal(out.data, g.data)


def test_constant_state_2d_engquist_osher():
    g = GridField(np.full((8, 8), -0.4), (0, 0), (0.125, 0.125))
    cfg = SchemeConfig("engquist_osher", state_bounds=(-1, 1))
    out = step(g, PRESETS["cubic2d"](), cfg, 0.01)
    assert np.array_equal(out.data, g.data)


def test_llf_advection_one_step():
    # lambda equal to the advection speed turns LLF into upwinding: the pulse moves half a cell
    g = grid1([0.0, 1.0, 0.0], length=3.0)
    cfg = SchemeConfig("local_lax_friedrichs", state_bounds=(0, 1))
    out = step(g, PRESETS["linear"]((1,), (0, 1)), cfg, 0.5)
    assert np.array_equal(out.data, [0.0, 0.5, 0.5])


def test_oversized_step_rejected():
    g = grid1(np.zeros(10))
    cfg = SchemeConfig("local_lax_friedrichs", state_bounds=(-1, 1))
    with pytest.raises(SolverError):
        step(g, PRESETS["burgers"](), cfg, 0.2)


def test_godunov_needs_one_dimension():
    with pytest.raises(ValueError):
        Scheme(PRESETS["cubic2d"](), SchemeConfig("godunov_1d"))


@pytest.mark.parametrize("scheme", ["godunov_1d", "local_lax_friedrichs"])
def test_riemann_shock_for_kinked_flux(scheme):
    # 1 | -1 at x = 0 gives a shock with speed (phi(-1) - phi(1)) / (-2) = -1/2;
    # the wrap-around jump at +-4 travels left at speed 1 and stays outside |x| < 2
    for cells in (400, 800, 1600):
        g = GridField.from_function(lambda x: np.where(x[0] < 0, 1.0, -1.0), (-4,), (4,), cells)
        traj = evolve(g, example1_model(), SchemeConfig(scheme, 0.9, 0.5))
        x = g.axis_centers(0)
        exact = np.where(x < -0.25, 1.0, -1.0)
        window = np.abs(x) < 2
        err = np.sum(np.abs(traj.final.data - exact)[window]) * g.spacing[0]
        assert err <= 2 * g.spacing[0]


# --- evolve / solve

def test_constant_data_stays_constant_at_every_output():
    g = grid1(np.full(32, 0.25))
    traj = evolve(g, PRESETS["burgers"](), SchemeConfig(t_end=1.0, output_times=(0, 0.5, 1.0)))
    assert traj.times == [0.0, 0.5, 1.0]
    assert all(np.array_equal(s, g.data) for s in traj.states)


def test_zero_speed_flux_uses_cadence():
    g = grid1(np.linspace(-1, 1, 8))
    traj = evolve(g, PRESETS["linear"]((0,)), SchemeConfig(t_end=1.0, output_times=(0, 0.5, 1.0)))
    assert traj.diagnostics["steps"] == 2
    assert np.array_equal(traj.final.data, g.data)


def test_trajectory_starts_with_the_sampled_data_and_hits_outputs():
    g = example1_cell_averages(0.0, 0.0, 2.0, 200)
    traj = evolve(g, example1_model(), SchemeConfig("godunov_1d", 0.9, 1.0, (0.0, 0.3, 0.7, 1.0)))
    assert traj.times == [0.0, 0.3, 0.7, 1.0]
    assert np.array_equal(traj.states[0], g.data)
    assert traj.diagnostics["time_continuity_ok"]


def test_example1_periodic_matches_exact_solution_under_refinement():
    errs = []
    for cells in (200, 400, 800):
        g = example1_cell_averages(0.0, 0.0, 2.0, cells)
        traj = evolve(g, example1_model(), SchemeConfig("godunov_1d", 0.9, 1.0))
        ex = example1_cell_averages(1.0, 0.0, 2.0, cells)
        errs.append(np.sum(np.abs(traj.final.data - ex.data)) * g.spacing[0])
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.02


def test_example1_after_collision_is_zero():
    g = example1_cell_averages(0.0, 0.0, 2.0, 800)
    traj = evolve(g, example1_model(), SchemeConfig("godunov_1d", 0.9, 3.0))
    assert np.max(np.abs(traj.final.data)) < 1e-12


def test_burgers_sine_decays_toward_mean():
    g = GridField.from_function(lambda x: np.sin(2 * np.pi * x[0]), (0,), (1,), 256, subsamples=4)
    traj = evolve(g, PRESETS["burgers"]((-1.5, 1.5)),
                  SchemeConfig("local_lax_friedrichs", 0.9, 3.0, (0, 1, 2, 3), (-1, 1)))
    l1 = [np.sum(np.abs(s)) * g.spacing[0] for s in traj.states]
    assert all(b < a for a, b in zip(l1, l1[1:]))


def test_nan_aborts_with_last_good_state(monkeypatch):
    g = grid1(np.linspace(-1, 1, 10))
    cfg = SchemeConfig("local_lax_friedrichs", 0.9, 1.0)
    calls = {"n": 0}
    orig = Scheme.increment

    def poisoned(self, u, spacing, dt):
        calls["n"] += 1
        du = orig(self, u, spacing, dt)
        if calls["n"] == 3:
            du[0] = np.nan
        return du

    monkeypatch.setattr(Scheme, "increment", poisoned)
    with pytest.raises(SolverError) as exc:
        evolve(g, PRESETS["burgers"](), cfg)
    assert exc.value.last_good is not None and np.all(np.isfinite(exc.value.last_good.data))
    assert exc.value.t > 0


def test_initial_data_outside_bounds_rejected():
    with pytest.raises(ValueError):
        evolve(grid1([0.0, 2.0, 0.0]), PRESETS["burgers"](), SchemeConfig(state_bounds=(-1, 1)))


# --- total_mass

def test_mass_of_unit_field_on_torus_of_volume_two():
    assert total_mass(grid1(np.ones(64), length=2.0)) == 2.0


def test_mass_of_square_wave_is_zero():
    assert total_mass(example1_cell_averages(0.0, 0.0, 2.0, 100)) == 0.0


def test_mass_matches_sequential_sum():
    rng = np.random.default_rng(7)
    u = GridField(rng.normal(size=(30, 20, 10)), (0, 0, 0), (0.1, 0.2, 0.3))
    seq = 0.0
    for v in u.data.ravel():
        seq += float(v)
    assert total_mass(u) == pytest.approx(seq * u.cell_volume, rel=1e-12)


def test_mass_is_conserved_over_many_steps():
    g = GridField.from_function(lambda x: 0.5 + 0.5 * np.sin(2 * np.pi * x[0]), (0,), (1,), 128)
    cfg = SchemeConfig("engquist_osher", 0.9, 80.0, (0.0, 80.0), (0, 1))
    traj = evolve(g, PRESETS["burgers"](), cfg)
    assert traj.diagnostics["steps"] >= 10_000
    m0, m1 = total_mass(traj.field_at(0)), total_mass(traj.final)
    assert abs(m1 - m0) <= 1e-10 * abs(m0)


# --- entropy residual

def _recorded(u0, phi, scheme, t_end, bounds=None):
    return evolve(u0, phi, SchemeConfig(scheme, 0.9, t_end, (0.0, t_end), bounds), record_steps=True)


def test_entropy_residual_of_constant_solution_vanishes():
    g = grid1(np.full(40, 0.2), lower=-1.0, length=2.0)
    traj = _recorded(g, PRESETS["burgers"](), "local_lax_friedrichs", 0.5, (-1, 1))
    for k in (-0.5, 0.2, 0.7):
        r, scale = entropy_residual(traj, k, bump(0.25, 0.2, [0.0], [0.5]), return_scale=True)
        assert abs(r) <= 1e-12 * max(scale, 1.0)


def test_entropy_residual_above_the_range_is_the_conservation_form():
    g = example1_cell_averages(0.0, 0.0, 2.0, 200)
    traj = _recorded(g, example1_model(), "godunov_1d", 0.8)
    r, scale = entropy_residual(traj, 5.0, bump(0.4, 0.3, [1.0], [0.6]), return_scale=True)
    assert abs(r) <= 1e-12 * scale


def test_entropy_residual_across_the_shock_is_nonnegative():
    g = example1_cell_averages(0.0, 0.0, 2.0, 400)
    traj = _recorded(g, example1_model(), "godunov_1d", 1.0)
    r, scale = entropy_residual(traj, 0.0, bump(0.5, 0.3, [0.75], [0.4]), return_scale=True)
    assert r >= -1e-8 * scale and r > 0


def test_entropy_residual_needs_recorded_steps():
    g = grid1(np.full(40, 0.2))
    traj = evolve(g, PRESETS["burgers"](), SchemeConfig(t_end=0.5))
    with pytest.raises(ValueError):
        entropy_residual(traj, 0.0, bump(0.25, 0.2, [0.5], [0.2]))


def test_entropy_testfn_touching_boundary_rejected():
    g = grid1(np.linspace(-1, 1, 40))
    traj = _recorded(g, PRESETS["burgers"](), "local_lax_friedrichs", 0.5)
    with pytest.raises(ValueError):
        entropy_residual(traj, 0.0, bump(0.25, 0.2, [0.0], [0.3]))
    with pytest.raises(ValueError):
        entropy_residual(traj, 0.0, bump(0.0, 0.2, [0.5], [0.2]))


# --- randomized monotonicity properties

def _rand_case(seed, n):
    rng = np.random.default_rng(seed)
    shape = {1: (48,), 2: (12, 10), 3: (6, 5, 4)}[n]
    phi = {1: PRESETS["burgers"](), 2: PRESETS["cubic2d"](), 3: PRESETS["linear"]((1, -0.5, 0.25), (-1, 1))}[n]
    u = rng.uniform(-1, 1, size=shape)
    w = np.minimum(1.0, u + rng.uniform(0, 0.5, size=shape))
    g = GridField(u, (0.0,) * n, tuple(1.0 / s for s in shape))
    return rng, phi, g, g.with_data(w)


SCHEME_FOR = {1: ["local_lax_friedrichs", "godunov_1d", "engquist_osher"],
              2: ["local_lax_friedrichs", "engquist_osher"], 3: ["local_lax_friedrichs", "engquist_osher"]}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([1, 2, 3]), st.data())
def test_monotone_scheme_properties(seed, n, data):
    _, phi, g, h = _rand_case(seed, n)
    scheme = data.draw(st.sampled_from(SCHEME_FOR[n]))
    cfg = SchemeConfig(scheme, 0.9, 0.3, (0.0, 0.1, 0.2, 0.3), (-1, 1))
    a = evolve(g, phi, cfg, record_steps=True)
    b = evolve(h, phi, cfg, record_steps=True)
    lo, hi = g.data.min(), g.data.max()
    m0 = total_mass(g)
    prev = np.inf
    for sa, sb in zip(a.step_states, b.step_states):
        assert sa.min() >= lo and sa.max() <= hi                       # maximum principle
        assert np.all(sa <= sb + 1e-12)                                # order preservation
        d = float(np.sum(np.abs(sa - sb))) * g.cell_volume
        assert d <= prev + 1e-12                                       # L1 contraction
        prev = d
        assert abs(float(np.sum(sa)) * g.cell_volume - m0) <= 1e-12 * max(1.0, abs(m0)) + 1e-13


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([1, 2]), st.floats(-1.2, 1.2), st.data())
def test_entropy_residual_is_nonnegative_for_random_tests(seed, n, k, data):
    rng, phi, g, _ = _rand_case(seed, n)
    scheme = data.draw(st.sampled_from(SCHEME_FOR[n]))
    traj = _recorded(g, phi, scheme, 0.3, (-1, 1))
    center = rng.uniform(0.35, 0.65, size=n)
    half = rng.uniform(0.1, 0.3, size=n)
    r, scale = entropy_residual(traj, k, bump(0.15, 0.1, center, half), return_scale=True)
    assert r >= -1e-8 * scale
