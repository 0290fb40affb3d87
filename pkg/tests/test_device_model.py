import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossbar_bp.device_model import (
    DeviceParams,
    conductance_lattice,
    depress,
    potentiate,
    sample_variation,
    solve_step_size,
    trace_response,
)


def pulse_unclamped(alpha, beta, pulses, g_min=0.0, g_max=1.0):
    """Independent oracle: iterate the potentiation map without clamping."""
    g = g_min
    for _ in range(pulses):
        g += alpha * math.exp(-beta * (g - g_min) / (g_max - g_min))
    return g


def test_linear_step_size_is_reciprocal_of_range():
    assert solve_step_size(0, 64) == 0.015625
    assert solve_step_size(0, 32) == 0.03125


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 3.0, 5.0])
@pytest.mark.parametrize("n_max", [2, 32, 64, 128])
def test_step_size_spans_range_exactly(beta, n_max):
    alpha = solve_step_size(beta, n_max)
    assert abs(pulse_unclamped(alpha, beta, n_max) - 1.0) <= 1e-9
    assert pulse_unclamped(alpha, beta, n_max - 1) < 1.0


def test_step_size_on_shifted_range():
    alpha = solve_step_size(2.0, 64, g_min=0.2, g_max=1.7)
    assert abs(pulse_unclamped(alpha, 2.0, 64, 0.2, 1.7) - 1.7) <= 1e-9


def test_step_size_rejects_bad_arguments():
    with pytest.raises(ValueError):
        solve_step_size(1.0, 1)
    with pytest.raises(ValueError):
        solve_step_size(-1.0, 64)
    with pytest.raises(ValueError):
        solve_step_size(1.0, 64, g_min=1.0, g_max=0.0)


def test_params_validate():
    with pytest.raises(ValueError):
        DeviceParams(0.1, 0.0, 0.1, 0.0, g_min=1.0, g_max=1.0)
    with pytest.raises(ValueError):
        DeviceParams(0.0, 0.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        DeviceParams(0.1, -1.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        DeviceParams(0.1, 0.0, 0.1, 0.0, n_max=1)


def test_linear_pulses():
    p = DeviceParams.from_nonlinearity(0, 64)
    assert potentiate(0.5, p) == 0.515625
    assert depress(0.5, p) == 0.484375


def test_clamps_at_range_ends():
    p = DeviceParams.from_nonlinearity(2, 64)
    assert potentiate(1.0, p) == 1.0
    assert depress(0.0, p) == 0.0


def test_first_nonlinear_pulse_is_alpha():
    p = DeviceParams.from_nonlinearity(2, 64)
    alpha = solve_step_size(2, 64)
    assert potentiate(0.0, p) == 0.0 + alpha
    assert depress(1.0, p) == 1.0 - alpha


def test_out_of_range_conductance_is_rejected():
    p = DeviceParams.from_nonlinearity(1, 64)
    with pytest.raises(ValueError):
        potentiate(1.5, p)
    with pytest.raises(ValueError):
        depress(-0.1, p)


def test_linear_trace_is_a_ramp():
    p = DeviceParams.from_nonlinearity(0, 64)
    pot, dep = trace_response(p, 64)
    k = np.arange(1, 65)
    np.testing.assert_allclose(pot, k / 64, atol=1e-12)
    np.testing.assert_allclose(dep, 1 - k / 64, atol=1e-12)


def test_nonlinear_trace_shape():
    p = DeviceParams.from_nonlinearity(2, 64)
    pot, dep = trace_response(p, 64)
    assert np.all(np.diff(pot) >= 0) and np.all(np.diff(dep) <= 0)
    # concave rise, convex fall
    assert np.all(np.diff(pot, 2) < 1e-15)
    assert np.all(np.diff(dep, 2) > -1e-15)


def test_trace_ends_at_range_end():
    pot, dep = trace_response(DeviceParams.from_nonlinearity(3, 64), 64)
    assert abs(pot[-1] - 1.0) <= 1e-6
    assert abs(dep[-1] - 0.0) <= 1e-6


def test_trace_needs_a_pulse():
    with pytest.raises(ValueError):
        trace_response(DeviceParams.from_nonlinearity(0, 8), 0)


def test_lattice_matches_repeated_pulses():
    p = DeviceParams.from_nonlinearity(2, 64)
    lat = conductance_lattice(p)
    assert lat[0] == 0.0 and lat[-1] == 1.0
    g = 0.0
    for k in range(1, 65):
        g = potentiate(g, p)
        assert lat[k] == g


def test_increment_shrinks_with_conductance():
    p = DeviceParams.from_nonlinearity(2, 64)
    grid = np.linspace(0, 0.9, 50)
    steps = [potentiate(g, p) - g for g in grid]
    assert np.all(np.diff(steps) < 0)


@given(st.floats(0, 1), st.floats(0.1, 4), st.integers(2, 200))
def test_mirror_symmetry(g, beta, n_max):
    p = DeviceParams.from_nonlinearity(beta, n_max)
    down = g - depress(g, p)
    up = potentiate(1.0 - g, p) - (1.0 - g)
    # away from the clamps the two increments are the same expression
    if 1.0 - g + up < 1.0 and g - down > 0.0:
        assert abs(down - up) <= 1e-12


@settings(max_examples=50)
@given(st.floats(0, 3), st.integers(2, 128),
       st.lists(st.booleans(), min_size=1, max_size=300))
def test_range_closure(beta, n_max, ops):
    p = DeviceParams.from_nonlinearity(beta, n_max)
    g = 0.0
    for up in ops:
        g = potentiate(g, p) if up else depress(g, p)
        assert 0.0 <= g <= 1.0


@pytest.mark.parametrize("beta", [0, 1, 2, 3])
def test_depression_span_from_top(beta):
    p = DeviceParams.from_nonlinearity(beta, 64)
    g = 1.0
    for _ in range(64):
        g = depress(g, p)
    assert abs(g) <= 1e-6


def test_zero_sigma_variation_is_one_without_draws():
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state
    assert sample_variation(0, rng) == 1.0
    np.testing.assert_array_equal(sample_variation(0, rng, 5), np.ones(5))
    assert rng.bit_generator.state == state


def test_variation_statistics():
    x = sample_variation(0.25, np.random.default_rng(1), 100_000)
    assert abs(x.mean() - 1.0) < 0.01
    frac = np.mean((x >= 0.25) & (x <= 1.75))
    assert 0.99 < frac < 0.999


def test_wide_variation_clamps_negative_draws():
    x = sample_variation(1.0, np.random.default_rng(2), 100_000)
    assert x.min() == 0.0
    clamped = np.mean(x == 0.0)
    assert abs(clamped - 0.158655) < 0.01


def test_variation_is_deterministic():
    a = sample_variation(0.5, np.random.default_rng(7), 10)
    b = sample_variation(0.5, np.random.default_rng(7), 10)
    np.testing.assert_array_equal(a, b)


def test_variation_rejects_negative_sigma():
    with pytest.raises(ValueError):
        sample_variation(-0.1, np.random.default_rng(0))
