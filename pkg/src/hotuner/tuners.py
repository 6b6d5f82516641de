"""
Parameter update laws.

Each ``*_rhs`` function maps the current tuner state and the measured
signals to the time derivative of the tuner state.  The laws only see the
feature and the error; the true parameter is never an input.

All functions broadcast over leading batch axes.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, GridTooCoarse


class Law(str, enum.Enum):
    FIRST_ORDER = "fo"
    HIGHER_ORDER = "ho"
    WIBISONO = "wib"

    @property
    def label(self) -> str:
        return {"fo": "FirstOrder", "ho": "HigherOrder", "wib": "WibisonoBaseline"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "Law":
        key = text.strip().lower()
        aliases = {
            "fo": "fo", "firstorder": "fo", "first-order": "fo",
            "ho": "ho", "higherorder": "ho", "higher-order": "ho",
            "wib": "wib", "wibisono": "wib", "wibisonobaseline": "wib",
        }
        if key not in aliases:
            raise ValueError(f"unknown law {text!r}")
        return cls(aliases[key])


def default_mu_regression(gamma: float, beta: float) -> float:
    return 2.0 * gamma / beta


def default_mu_mrac(gamma: float, beta: float, Pb) -> float:
    return 2.0 * gamma * float(np.dot(Pb, Pb)) / beta


@dataclass(frozen=True)
class TunerConfig:
    """
    Hyperparameters of an update law.

    ``mu=None`` means "use the normalization that the stability proof
    needs"; call :meth:`resolved` with the model-specific default before
    integrating.  ``wibisono_C=None`` likewise resolves to ``gamma*beta/p**2``.
    """

    law: Law = Law.HIGHER_ORDER
    gamma: float = 0.1
    beta: float = 1.0
    mu: float | None = None
    wibisono_p: float = 2.0
    wibisono_C: float | None = None
    wibisono_t0: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "law", Law(self.law))
        if self.gamma <= 0 or self.beta <= 0:
            raise ValueError("gamma and beta must be strictly positive")
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be strictly positive")

    @property
    def C(self) -> float:
        if self.wibisono_C is not None:
            return self.wibisono_C
        return self.gamma * self.beta / self.wibisono_p**2

    def resolved(self, default_mu: float) -> "TunerConfig":
        if self.mu is not None:
            return self
        return replace(self, mu=default_mu)


@dataclass
class TunerState:
    """Stacked learner state; ``vartheta`` and ``theta_dot`` are law-specific."""

    theta: np.ndarray
    vartheta: np.ndarray | None = None
    theta_dot: np.ndarray | None = None


def normalizing_signal(phi, mu: float):
    """``1 + mu * phi^T phi``."""
    phi = np.asarray(phi, dtype=float)
    return 1.0 + mu * np.sum(phi * phi, axis=-1)


def _scalar_error(e, Pb):
    e = np.asarray(e, dtype=float)
    Pb = np.asarray(Pb, dtype=float)
    if e.shape[-1] != Pb.shape[-1]:
        raise DimensionMismatch(f"error has {e.shape[-1]} entries but Pb has {Pb.shape[-1]}")
    return np.sum(e * Pb, axis=-1)


def _check_feature(s: TunerState, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != np.shape(s.theta)[-1]:
        raise DimensionMismatch("feature and parameter dimensions differ")
    return phi


def first_order_regression_rhs(s: TunerState, phi, e_y, cfg: TunerConfig) -> TunerState:
    phi = _check_feature(s, phi)
    return TunerState(theta=-cfg.gamma * phi * np.asarray(e_y)[..., None])


def higher_order_regression_rhs(s: TunerState, phi, e_y, cfg: TunerConfig) -> TunerState:
    """Gradient step on ``vartheta``, normalized filter pulling ``theta`` toward it."""
    phi = _check_feature(s, phi)
    N_t = normalizing_signal(phi, cfg.mu)[..., None]
    return TunerState(
        theta=-cfg.beta * (s.theta - s.vartheta) * N_t,
        vartheta=-cfg.gamma * phi * np.asarray(e_y)[..., None],
    )


def first_order_mrac_rhs(s: TunerState, phi, e, Pb, cfg: TunerConfig) -> TunerState:
    phi = _check_feature(s, phi)
    return first_order_regression_rhs(s, phi, _scalar_error(e, Pb), cfg)


def higher_order_mrac_rhs(s: TunerState, phi, e, Pb, cfg: TunerConfig) -> TunerState:
    phi = _check_feature(s, phi)
    return higher_order_regression_rhs(s, phi, _scalar_error(e, Pb), cfg)


def wibisono_baseline_rhs(s: TunerState, phi, e_y, t, cfg: TunerConfig) -> TunerState:
    """
    Accelerated baseline ``theta'' + (p+1)/t theta' = -C p^2 t^(p-2) phi e_y``
    written as a first-order system.

    The damping clock is shifted by ``cfg.wibisono_t0`` so the ODE is regular
    at ``t = 0``.
    """
    phi = _check_feature(s, phi)
    p = cfg.wibisono_p
    tau = np.asarray(t, dtype=float) + cfg.wibisono_t0
    gain = cfg.C * p**2 * tau ** (p - 2.0)
    accel = -((p + 1.0) / tau) * s.theta_dot - gain * phi * np.asarray(e_y)[..., None]
    return TunerState(theta=s.theta_dot, theta_dot=accel)


def second_order_form_check(cfg: TunerConfig, t, theta, phi, phi_dot, error) -> float:
    """
    Residual of the second-order tuner ODE along a sampled trajectory.

    Central differences of ``theta`` give its first and second derivatives
    at interior grid points, and the residual
    ``theta'' + (beta N - N'/N) theta' + gamma beta N phi err`` is returned
    as a max-norm over components and interior points.  ``error`` is
    ``e_y`` for regression or ``e^T P b`` for the dynamical model.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    phi_dot = np.asarray(phi_dot, dtype=float)
    error = np.asarray(error, dtype=float)
    if t.size < 5:
        raise GridTooCoarse("need at least 5 grid points")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-6, atol=0):
        raise ValueError("grid must be uniform")
    h = (t[-1] - t[0]) / (t.size - 1)
    mu = cfg.mu
    N = normalizing_signal(phi, mu)
    N_dot = 2.0 * mu * np.sum(phi * phi_dot, axis=-1)
    d1 = (theta[2:] - theta[:-2]) / (2.0 * h)
    d2 = (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / h**2
    mid = slice(1, -1)
    damping = (cfg.beta * N[mid] - N_dot[mid] / N[mid])[:, None]
    forcing = (cfg.gamma * cfg.beta * N[mid] * error[mid])[:, None] * phi[mid]
    return float(np.max(np.abs(d2 + damping * d1 + forcing)))
