import numpy as np
import pytest

from hotuner.errors import DimensionMismatch, NotHurwitz
from hotuner.linalg import is_hurwitz
from hotuner.models import (
    F16_A_P,
    RegressionModel,
    SystemState,
    build_f16_plant,
    f16_open_loop,
    plant_rhs,
    regression_output_error,
)
from hotuner.signals import CommandSignal, SinusoidFeature, StepFeature

THETA_STAR = np.array([1.0, -2.0, 5.0])


def model():
    return RegressionModel(THETA_STAR, StepFeature([0.1], [[1, 1, 1]], [0, 0, 0]))


def test_output_error():
    m = model()
    assert regression_output_error(m, THETA_STAR, 3.0) == 0.0
    assert regression_output_error(m, np.zeros(3), 3.0) == pytest.approx(-4.0)
    assert regression_output_error(m, np.ones(3), 0.0) == 0.0  # feature still zero


def test_output_error_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        regression_output_error(model(), np.zeros(2), 3.0)


def test_f16_constants():
    A, b, b_z = f16_open_loop()
    np.testing.assert_array_equal(A[:2, :2], F16_A_P)
    np.testing.assert_array_equal(A[2], [0, 1, 0])
    np.testing.assert_array_equal(b_z, [0, 0, -1])
    m = build_f16_plant()
    np.testing.assert_array_equal(m.theta_star, [0.1965, -0.3835, -1.0])
    assert is_hurwitz(m.A_m)
    # independent oracle: roots of the characteristic polynomial
    assert np.all(np.roots(np.poly(m.A_m)).real < 0)


def test_f16_destabilizing_gain_rejected():
    with pytest.raises(NotHurwitz):
        build_f16_plant(W=-0.5)


def test_plant_rhs_cases():
    m = build_f16_plant(command=CommandSignal("constant-after", 0.0, 1.0))
    z = np.zeros(3)
    d = plant_rhs(m, SystemState(z, z), 0.0, 1.0, z, z)
    np.testing.assert_allclose(d.x, [0, 0, -1])
    x = np.array([0.3, -0.2, 0.1])
    u = -m.theta_star @ x
    d = plant_rhs(m, SystemState(x, x), u, 1.0, x, m.theta_star)
    np.testing.assert_allclose(d.e, 0.0, atol=1e-15)
    theta = m.theta_star + np.array([0.1, 0.0, -0.2])
    d = plant_rhs(m, SystemState(x, x), 0.0, 1.0, x, theta)
    np.testing.assert_allclose(d.e, m.b * ((theta - m.theta_star) @ x), atol=1e-15)
