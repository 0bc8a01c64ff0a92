import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdisac.beams import (
    DEFAULT_DIRECTIONS,
    ArrayGeometry,
    beampattern,
    build_codebook,
    half_power_beamwidth,
    make_codeword,
    steering_vector,
)

angles = st.floats(min_value=1.0, max_value=179.0, allow_nan=False)


def test_steering_broadside_is_flat():
    a = steering_vector(ArrayGeometry(8), 90.0)
    assert np.allclose(a, np.full(8, 1 / math.sqrt(8)), atol=1e-15)


def test_steering_two_elements_at_60():
    a = steering_vector(ArrayGeometry(2), 60.0)
    expected = [cmath.exp(-1j * math.pi / 4) / math.sqrt(2), cmath.exp(1j * math.pi / 4) / math.sqrt(2)]
    assert np.allclose(a, expected, atol=1e-15)


@given(n=st.integers(1, 32), spacing=st.floats(0.1, 2.0), theta=angles)
def test_steering_matches_elementwise_formula(n, spacing, theta):
    a = steering_vector(ArrayGeometry(n, spacing), theta)
    for k in range(n):
        phase = 2 * math.pi * spacing * ((-n + 1) / 2 + k) * math.cos(math.radians(theta))
        assert abs(a[k] - cmath.exp(1j * phase) / math.sqrt(n)) < 1e-12
    assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_steering_self_inner_product():
    a = steering_vector(ArrayGeometry(8), 100.0)
    assert np.vdot(a, a) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("theta", [0.0, 180.0, -5.0, 200.0])
def test_steering_rejects_endfire(theta):
    with pytest.raises(ValueError):
        steering_vector(ArrayGeometry(4), theta)


@pytest.mark.parametrize("kwargs", [dict(n_elements=0), dict(n_elements=2.5), dict(n_elements=4, element_spacing=0)])
def test_geometry_validation(kwargs):
    with pytest.raises(ValueError):
        ArrayGeometry(**kwargs)


def test_codeword_full_broadside():
    cw = make_codeword(ArrayGeometry(8), 90.0, 8, 1.0)
    assert np.allclose(cw.weights, 1 / math.sqrt(8))
    assert cw.power == pytest.approx(1.0, rel=1e-12)


def test_codeword_two_central_elements():
    cw = make_codeword(ArrayGeometry(8), 90.0, 2, 1.0)
    expected = np.zeros(8)
    expected[[3, 4]] = 1 / math.sqrt(2)
    assert np.array_equal(cw.weights == 0, expected == 0)
    assert np.allclose(cw.weights, expected, atol=1e-15)


def test_odd_leftover_goes_high():
    w = make_codeword(ArrayGeometry(7), 90.0, 2, 1.0).weights
    assert list(np.flatnonzero(w)) == [2, 3]


def test_codeword_peak_on_direction_grid():
    g = ArrayGeometry(16)
    cw = make_codeword(g, 100.0, 4, 0.25)
    assert cw.power == pytest.approx(0.25, rel=1e-12)
    grid = np.arange(50.0, 131.0, 5.0)
    gains = [abs(np.vdot(steering_vector(g, t), cw.weights)) ** 2 for t in grid]
    assert grid[int(np.argmax(gains))] == 100.0


@pytest.mark.parametrize("n_active", [0, 9])
def test_codeword_rejects_bad_active_count(n_active):
    with pytest.raises(ValueError):
        make_codeword(ArrayGeometry(8), 90.0, n_active, 1.0)


def test_default_codebook_sizes(tx_cb, rx_cb):
    assert len(DEFAULT_DIRECTIONS) == 17
    assert len(tx_cb) == 68 and len(rx_cb) == 68
    assert tx_cb.beamwidths == (13.0, 17.0, 26.0, 60.0)
    assert rx_cb.beamwidths == (6.0, 13.0, 17.0, 26.0)


def test_codebook_order_and_pairs(tx_cb):
    pairs = [(cw.direction_deg, cw.beamwidth_deg) for cw in tx_cb]
    assert len(set(pairs)) == len(pairs)
    assert [cw.index for cw in tx_cb] == list(range(68))
    assert pairs[:5] == [(50.0, 13.0), (50.0, 17.0), (50.0, 26.0), (50.0, 60.0), (55.0, 13.0)]
    assert tx_cb.position(55.0, 17.0) == 5


def test_single_codeword_codebook():
    cb = build_codebook(ArrayGeometry(4), [90], [(30.0, 4)], 1.0)
    assert len(cb) == 1 and cb.matrix.shape == (1, 4)


@pytest.mark.parametrize(
    "dirs, bws",
    [([], [(13, 8)]), ([90], []), ([90, 90], [(13, 8)]), ([100, 90], [(13, 8)]), ([90], [(13, 8), (13, 6)])],
)
def test_codebook_rejects_bad_axes(dirs, bws):
    with pytest.raises(ValueError):
        build_codebook(ArrayGeometry(8), dirs, bws, 1.0)


def test_equal_power_across_codebook(tx_cb, rx_cb):
    assert np.allclose([cw.power for cw in tx_cb], 1.0, rtol=1e-12, atol=0)
    assert np.allclose([cw.power for cw in rx_cb], 0.25, rtol=1e-12, atol=0)


def test_peak_at_own_direction(tx_cb, rx_cb, tx_geom, rx_geom):
    grid = np.array(DEFAULT_DIRECTIONS)
    for geom, cb in ((tx_geom, tx_cb), (rx_geom, rx_cb)):
        for cw in cb:
            gains = beampattern(geom, cw.weights, grid)
            assert np.isclose(gains.max(), gains[grid == cw.direction_deg][0], rtol=1e-12)


@pytest.mark.parametrize("n", [8, 16])
def test_fewer_elements_widen_beam(n):
    g = ArrayGeometry(n)
    widths = [half_power_beamwidth(g, make_codeword(g, 90.0, k, 1.0).weights) for k in range(n, 1, -1)]
    assert all(a < b for a, b in zip(widths, widths[1:]))


def test_beamwidth_map_is_close_to_labels(tx_geom, rx_geom):
    # labels follow ~101.5/N; 60 deg for two elements is the loosest fit
    for geom, pairs in ((tx_geom, [(13, 8), (17, 6), (26, 4), (60, 2)]), (rx_geom, [(6, 16), (13, 8), (17, 6), (26, 4)])):
        for label, n in pairs:
            hpbw = half_power_beamwidth(geom, make_codeword(geom, 90.0, n, 1.0).weights)
            assert abs(hpbw - label) / label < 0.2 or (label == 60 and 45 < hpbw < 65)
