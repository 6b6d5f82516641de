import numpy as np
import pytest

from hotuner.errors import GridTooCoarse
from hotuner.tuners import (
    Law,
    TunerConfig,
    TunerState,
    default_mu_mrac,
    default_mu_regression,
    first_order_mrac_rhs,
    first_order_regression_rhs,
    higher_order_mrac_rhs,
    higher_order_regression_rhs,
    normalizing_signal,
    second_order_form_check,
    wibisono_baseline_rhs,
)

HO = TunerConfig(Law.HIGHER_ORDER).resolved(default_mu_regression(0.1, 1.0))


def test_normalizing_signal():
    assert normalizing_signal(np.zeros(3), 0.2) == 1.0
    assert normalizing_signal([1, 1, 1], 0.2) == pytest.approx(1.6)
    assert normalizing_signal([2, -1, -2], 0.2) == pytest.approx(2.8)
    assert default_mu_regression(0.1, 1.0) == pytest.approx(0.2)


def test_first_order_regression():
    cfg = TunerConfig(Law.FIRST_ORDER)
    d = first_order_regression_rhs(TunerState(np.zeros(3)), [1, 1, 1], 0.0, cfg)
    np.testing.assert_array_equal(d.theta, 0.0)
    d = first_order_regression_rhs(TunerState(np.zeros(3)), [1, 1, 1], -4.0, cfg)
    np.testing.assert_allclose(d.theta, [0.4, 0.4, 0.4])


def test_higher_order_regression():
    th = np.array([0.3, -1.0, 2.0])
    d = higher_order_regression_rhs(TunerState(th, vartheta=th.copy()), [1, 2, 3], 0.0, HO)
    np.testing.assert_array_equal(d.theta, 0.0)
    np.testing.assert_array_equal(d.vartheta, 0.0)
    d = higher_order_regression_rhs(TunerState(np.array([1.0, 0, 0]), vartheta=np.zeros(3)), np.zeros(3), 0.0, HO)
    np.testing.assert_allclose(d.theta, [-1, 0, 0])
    np.testing.assert_array_equal(d.vartheta, 0.0)


def test_first_order_mrac():
    cfg = TunerConfig(Law.FIRST_ORDER)
    Pb = np.array([2.0, 0.0, 0.0])
    d = first_order_mrac_rhs(TunerState(np.zeros(3)), [1, 0, 0], np.zeros(3), Pb, cfg)
    np.testing.assert_array_equal(d.theta, 0.0)
    d = first_order_mrac_rhs(TunerState(np.zeros(3)), [1, 0, 0], [1.0, 0, 0], Pb, cfg)
    np.testing.assert_allclose(d.theta, [-0.2, 0, 0])


def test_mrac_reduces_to_regression_form():
    # n = 1 with P = b = 1: e^T P b is the scalar error itself
    cfg = TunerConfig(Law.FIRST_ORDER)
    phi = np.array([0.5, -1.0])
    a = first_order_mrac_rhs(TunerState(np.zeros(2)), phi, [0.7], [1.0], cfg)
    b = first_order_regression_rhs(TunerState(np.zeros(2)), phi, 0.7, cfg)
    np.testing.assert_array_equal(a.theta, b.theta)


def test_higher_order_mrac():
    Pb = np.array([0.5, -1.0, 0.2])
    cfg = TunerConfig(Law.HIGHER_ORDER).resolved(default_mu_mrac(0.1, 1.0, Pb))
    assert cfg.mu == pytest.approx(2 * 0.1 * Pb @ Pb)
    th = np.array([0.1, 0.2, 0.3])
    d = higher_order_mrac_rhs(TunerState(th, vartheta=th), np.ones(3), np.zeros(3), Pb, cfg)
    np.testing.assert_array_equal(d.theta, 0)
    np.testing.assert_array_equal(d.vartheta, 0)
    phi = np.array([1.0, -1.0, 2.0])
    d = higher_order_mrac_rhs(TunerState(th, vartheta=np.zeros(3)), phi, np.zeros(3), Pb, cfg)
    np.testing.assert_array_equal(d.vartheta, 0)
    np.testing.assert_allclose(d.theta, -cfg.beta * th * (1 + cfg.mu * phi @ phi))


def test_wibisono_baseline():
    cfg = TunerConfig(Law.WIBISONO)
    assert cfg.C == pytest.approx(0.025)
    d = wibisono_baseline_rhs(TunerState(np.ones(3), theta_dot=np.zeros(3)), [1, 1, 1], 0.0, 3.0, cfg)
    np.testing.assert_array_equal(d.theta, 0)
    np.testing.assert_array_equal(d.theta_dot, 0)
    # forcing coefficient C p^2 t^(p-2) equals gamma*beta for p = 2
    d = wibisono_baseline_rhs(TunerState(np.zeros(1), theta_dot=np.zeros(1)), [1.0], 1.0, 3.0, cfg)
    np.testing.assert_allclose(d.theta_dot, [-0.1])


def test_second_order_residual_equilibrium():
    t = np.linspace(0, 1, 11)
    theta = np.tile([1.0, -2.0, 5.0], (11, 1))
    phi = np.tile([1.0, 2.0, 3.0], (11, 1))
    assert second_order_form_check(HO, t, theta, phi, np.zeros_like(phi), np.zeros(11)) == 0.0


def test_second_order_residual_needs_points():
    t = np.linspace(0, 1, 4)
    with pytest.raises(GridTooCoarse):
        second_order_form_check(HO, t, np.zeros((4, 1)), np.zeros((4, 1)), np.zeros((4, 1)), np.zeros(4))


def test_second_order_residual_constant_feature():
    from hotuner.integrator import IntegrationConfig, integrate

    phi = np.array([1.0, 1.0, 1.0])
    theta_star = np.array([1.0, -2.0, 5.0])

    def rhs(t, y):
        th, vt = y[:3], y[3:]
        e = (th - theta_star) @ phi
        d = higher_order_regression_rhs(TunerState(th, vartheta=vt), phi, e, HO)
        return np.concatenate([d.theta, d.vartheta])

    res = integrate(rhs, np.zeros(6), IntegrationConfig(1e-3, 5.0))
    th = res.y[:, :3]
    e = (th - theta_star) @ phi
    phis = np.tile(phi, (len(res.t), 1))
    assert second_order_form_check(HO, res.t, th, phis, np.zeros_like(phis), e) <= 1e-4


def test_law_parse():
    assert Law.parse("HigherOrder") is Law.HIGHER_ORDER
    assert Law.parse("wib") is Law.WIBISONO
    with pytest.raises(ValueError):
        Law.parse("sgd")
