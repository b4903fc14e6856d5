from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaylab import _rational as rat
from decaylab.lattice import (LatticeBasis, LatticeError, NormWindow, PeriodStructure, covering_count, dual_lattice,
                              fundamental_cell, random_rational_structure, same_lattice, torus_mean, validate_periods)


def F(*xs):
    return tuple(Fraction(x) for x in xs)


def square_wave(period=2.0):
    def p(x):
        y = np.mod(x[0], period)
        return np.where(y < period / 2, 1.0, -1.0)
    return p


# --- dual_lattice

def test_dual_of_identity_is_identity():
    L = LatticeBasis.from_vectors([[1, 0], [0, 1]])
    assert dual_lattice(L).generators == (F(1, 0), F(0, 1))


def test_dual_of_diagonal_inverts_entries():
    L = LatticeBasis.from_vectors([[2, 0], [0, 3]])
    assert dual_lattice(L).generators == (F(Fraction(1, 2), 0), F(0, Fraction(1, 3)))


def test_dual_of_sheared_basis():
    # solved by hand: xi_1 = (1, 0), xi_2 = (-1, 1) against e_1 = (1, 1), e_2 = (0, 1)
    L = LatticeBasis.from_vectors([[1, 1], [0, 1]])
    D = dual_lattice(L)
    assert D.generators == (F(1, 0), F(-1, 1))
    for i, xi in enumerate(D.generators):
        for j, e in enumerate(L.generators):
            assert rat.dot(xi, e) == (1 if i == j else 0)


def test_dual_rejects_dependent_generators():
    with pytest.raises(LatticeError):
        LatticeBasis.from_vectors([[1, 2], [2, 4]])


def test_dual_of_rank_deficient_lattice_stays_in_span():
    L = LatticeBasis.from_vectors([[1, 1, 0]])
    D = dual_lattice(L)
    assert D.generators == (F(Fraction(1, 2), Fraction(1, 2), 0),)


def test_float_lattice_uses_tolerance_path():
    L = LatticeBasis.from_vectors([[np.sqrt(2), 0.0], [0.0, np.pi]])
    D = dual_lattice(L)
    M = D.as_array() @ L.as_array().T
    assert np.allclose(M, np.eye(2), atol=1e-12)


# --- fundamental_cell

def test_unit_cell_of_integers():
    L = LatticeBasis.from_vectors([[1]])
    c = fundamental_cell(L, 1)
    assert c.origin[0] == -0.5 and c.volume == 1
    assert c.contains(np.array([[-0.5]]))[0] and not c.contains(np.array([[0.5]]))[0]


def test_scaled_cell_of_integers():
    c = fundamental_cell(LatticeBasis.from_vectors([[1]]), 4)
    assert c.origin[0] == -2 and c.volume == 4


def test_cell_volume_of_rectangular_lattice():
    c = fundamental_cell(LatticeBasis.from_vectors([[2, 0], [0, 3]]), 2)
    assert c.volume == pytest.approx(24.0, abs=1e-12)


def test_cell_rejects_zero_scale():
    with pytest.raises(LatticeError):
        fundamental_cell(LatticeBasis.from_vectors([[1]]), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_reduction_map_is_idempotent(seed, n, r):
    rng = np.random.default_rng(seed)
    S = random_rational_structure(rng, n, n)
    cell = fundamental_cell(S.lattice, r)
    x = rng.normal(scale=5, size=(n, 40))
    y = cell.reduce(x)
    s = cell.coordinates(y)
    assert np.all((s > -1e-9) & (s < 1 + 1e-9))
    assert np.allclose(cell.reduce(y), y, atol=1e-9)
    k = np.linalg.lstsq(cell.edge_vectors.T, x - y, rcond=None)[0]
    assert np.allclose(k, np.round(k), atol=1e-9)


# --- covering_count

def test_identity_covering():
    V = NormWindow.ball(1.0)
    cov = covering_count(V, V, 2)
    assert cov.count == 1 and np.allclose(cov.centers, 0) and cov.verify(2)


def test_interval_covering_needs_three():
    cov = covering_count(NormWindow.interval(0, 2), NormWindow.interval(0, 1), 1)
    assert cov.count == 3 and cov.verify(1)


def test_ball_inside_larger_ball():
    cov = covering_count(NormWindow.ball(1.0), NormWindow.ball(2.0), 2)
    assert cov.count == 1 and cov.verify(2)


def test_empty_window_rejected():
    with pytest.raises(ValueError):
        NormWindow.ball(0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.booleans(), st.booleans())
def test_coverings_always_verify(n, a, b, ball1, ball2):
    V1 = NormWindow.ball(a) if ball1 else NormWindow.box(a)
    V2 = NormWindow.ball(b) if ball2 else NormWindow.box(b)
    cov = covering_count(V1, V2, n)
    assert cov.count >= 1
    assert cov.verify(n, k=9 if n == 3 else 17)


# --- torus_mean / validate_periods

def test_square_wave_mean_is_zero():
    S = PeriodStructure.integer_lattice(1, 2)
    assert torus_mean(square_wave(), S) == 0.0


def test_constant_mean():
    S = PeriodStructure.integer_lattice(2, 1)
    assert torus_mean(lambda x: np.full(x.shape[1:], 0.7), S) == pytest.approx(0.7, abs=1e-15)


def test_sine_mean_and_richardson_estimate():
    S = PeriodStructure.integer_lattice(1, 1)
    m, err = torus_mean(lambda x: np.sin(2 * np.pi * x[0]), S, return_error=True)
    assert abs(m) < 1e-14 and err < 1e-14


def test_mean_rejects_non_periodic_sampler():
    S = PeriodStructure.integer_lattice(1, 1)
    with pytest.raises(LatticeError):
        torus_mean(square_wave(2.0), S)


def test_mean_invariant_under_lattice_shift_of_origin():
    S = PeriodStructure.integer_lattice(1, 2)
    a = torus_mean(square_wave(), S, offset=[0.0])
    b = torus_mean(square_wave(), S, offset=[4.0])
    assert a == b


def test_validate_periods_exact_period():
    rep = validate_periods(square_wave(), PeriodStructure.integer_lattice(1, 2))
    assert rep.passed and rep.max_violation == 0


def test_validate_periods_wrong_period_gives_discrepancy_two():
    # over [0, 1) the unit shift maps +1 to -1 and back: |diff| = 2 everywhere, cell length 1
    rep = validate_periods(square_wave(), PeriodStructure.integer_lattice(1, 1))
    assert not rep.passed and rep.max_violation == pytest.approx(2.0)


def test_validate_periods_constancy_direction():
    S = PeriodStructure.from_config([[1, 0]], [[0, 1]])
    rep = validate_periods(lambda x: np.sin(2 * np.pi * x[0]), S)
    assert rep.passed


def test_structure_rejects_non_orthogonal_constancy():
    with pytest.raises(LatticeError):
        PeriodStructure.from_config([[1, 1]], [[0, 1]])


def test_period_box_of_sheared_lattice():
    S = PeriodStructure.from_config([[1, 1], [0, 1]])
    assert S.period_box() == [1, 1]


# --- randomized duality properties

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 3), st.data())
def test_duality_round_trip_and_orthogonality(seed, n, data):
    d = data.draw(st.integers(0, n))
    S = random_rational_structure(np.random.default_rng(seed), n, d)
    D = S.dual
    assert same_lattice(dual_lattice(D), S.lattice)
    for xi in D.generators:
        assert all(rat.dot(xi, h) == 0 for h in S.constancy_basis)
        assert all(Fraction(p).denominator == 1 for p in S.pairings(xi))
