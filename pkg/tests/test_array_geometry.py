import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwave_mimo import ConfigError
from mmwave_mimo.array_geometry import (
    ArrayGeometry,
    angular_separation_ok,
    array_gain,
    detection_matrix,
    hpbw,
    max_users,
    min_search_steps,
    search_grid,
    snap_to_grid,
    steering_matrix,
    steering_vector,
)

angles = st.floats(0.0, np.pi, allow_nan=False)
sizes = st.integers(1, 256)


def test_broadside_is_all_ones():
    v = steering_vector(ArrayGeometry(4), np.pi / 2)
    assert np.allclose(v.elements, np.ones(4))


def test_endfire_two_elements():
    v = steering_vector(ArrayGeometry(2), 0.0)
    assert np.allclose(v.elements, [1, -1])


def test_sixty_degrees_element_two():
    v = steering_vector(ArrayGeometry(8), np.pi / 3)
    assert np.isclose(v.elements[2], -1.0)
    assert np.allclose(v.elements, np.exp(-1j * np.pi * np.arange(8) * 0.5))


def test_geometry_validation():
    with pytest.raises(ConfigError):
        ArrayGeometry(0)
    with pytest.raises(ConfigError):
        ArrayGeometry(8, spacing_over_wavelength=0.25)
    with pytest.raises(ConfigError):
        steering_matrix(8, [3.5])


@given(sizes, angles)
def test_steering_unit_modulus_and_first_element(m, theta):
    a = steering_matrix(m, [theta])[:, 0]
    assert np.allclose(np.abs(a), 1.0)
    assert a[0] == 1.0


@given(sizes, angles)
def test_steering_reflection_is_conjugate(m, theta):
    assert np.allclose(steering_matrix(m, [np.pi - theta]), steering_matrix(m, [theta]).conj(), atol=1e-9)


def test_array_gain_peak_and_first_null():
    assert array_gain(16, 0.0) == pytest.approx(16.0)
    assert array_gain(4, 2 / 4) == pytest.approx(0.0, abs=1e-12)


def test_array_gain_integrates_to_one_over_a_period():
    # mean over one period of the cosine offset; the sinc^2 integral law
    x = np.linspace(-1.0, 1.0, 200001)[:-1]
    assert np.mean(array_gain(64, x)) == pytest.approx(1.0, rel=1e-6)


@given(sizes, st.floats(-4.0, 4.0, allow_nan=False))
def test_array_gain_bounded(m, x):
    g = array_gain(m, x)
    assert -1e-12 <= g <= m * (1 + 1e-9)


@given(st.integers(2, 256), st.floats(-1.0, 1.0, allow_nan=False))
def test_array_gain_periodic_and_even(m, x):
    assert array_gain(m, x) == pytest.approx(array_gain(m, x + 2.0), rel=1e-6, abs=1e-9)
    assert array_gain(m, x) == pytest.approx(array_gain(m, -x), rel=1e-9, abs=1e-12)


@given(st.integers(2, 128), st.floats(1e-12, 1e-6))
def test_array_gain_continuous_at_peak(m, x):
    assert array_gain(m, x) == pytest.approx(m, rel=1e-6)


def test_array_gain_matches_steering_inner_product():
    m, t1, t2 = 32, 1.0, 1.3
    a1, a2 = steering_matrix(m, [t1, t2]).T
    direct = np.abs(np.vdot(a1, a2)) ** 2 / m
    assert array_gain(m, np.cos(t1) - np.cos(t2)) == pytest.approx(direct, rel=1e-10)


def test_half_power_beamwidth():
    assert hpbw(ArrayGeometry(100)) == pytest.approx(0.01782)
    assert hpbw(ArrayGeometry(200)) == pytest.approx(0.00891)
    assert hpbw(ArrayGeometry(1782)) == pytest.approx(1e-3)
    # the gain at half the beamwidth is half the peak
    assert array_gain(100, 0.01782 / 2) / 100 == pytest.approx(0.5, abs=0.01)


def test_min_search_steps():
    assert min_search_steps(100) == 113
    assert min_search_steps(1782) == 2000
    assert min_search_steps(2) == 3


def test_angular_separation():
    m = 200
    cosines = -1 + 4 / m * np.arange(100)
    assert angular_separation_ok(np.arccos(cosines), m)
    assert max_users(m) >= 100
    assert not angular_separation_ok([1.0, 1.0], 100)
    assert angular_separation_ok(np.arccos([-1.0, 0.0, 1.0]), 8)


def test_detection_matrix_matched_filter_peak():
    m, j = 64, 90
    grid = search_grid(j)
    gamma = detection_matrix(m, j)
    out = gamma.T @ steering_matrix(m, [grid[17]])[:, 0]
    assert np.argmax(np.abs(out)) == 17
    assert np.abs(out[17]) == pytest.approx(np.sqrt(m))


@given(st.integers(2, 720), st.lists(angles, min_size=1, max_size=5))
def test_snap_to_grid_lands_on_grid(j, thetas):
    snapped = snap_to_grid(thetas, j)
    grid = search_grid(j)
    nearest = np.min(np.abs(np.asarray(thetas)[:, None] - grid[None, :]), axis=1)
    step = np.pi / j
    assert np.allclose(np.abs(snapped - np.asarray(thetas)), nearest, atol=1e-12)
    assert np.allclose(snapped / step, np.round(snapped / step))
