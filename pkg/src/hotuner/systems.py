"""
Closed simulation systems: an error model coupled to one update law.

A system packs its state into one flat vector per Monte-Carlo draw,
``(B, d)`` for ``B`` draws, so :func:`hotuner.integrator.integrate` can
advance every draw at once.  The last entry of each row is the running
regret integral, integrated alongside the dynamics.

Regression layout: ``[theta, (vartheta | theta_dot), regret]``.
MRAC layout: ``[x, xhat, theta, (vartheta), regret]``.
"""

import numpy as np

from . import _kernels
from .errors import NonFiniteDerivative
from .integrator import IntegrationConfig, IntegrationResult, Status, integrate
from .models import PlantModel
from .signals import StepFeature
from .tuners import (
    Law,
    TunerConfig,
    TunerState,
    default_mu_mrac,
    first_order_regression_rhs,
    higher_order_regression_rhs,
    wibisono_baseline_rhs,
)


class RegressionSystem:
    """Time-varying regression ``e_y = (theta - theta_star)^T phi(t)``."""

    model = "regression"

    def __init__(self, feature, theta_star, tuner: TunerConfig, theta0=None, theta_dot0=None):
        self.feature = feature
        self.theta_star = np.atleast_2d(np.asarray(theta_star, dtype=float))
        self.tuner = tuner
        self.law = Law(tuner.law)
        self.N = self.theta_star.shape[1]
        if self.law is not Law.WIBISONO and tuner.mu is None:
            raise ValueError("tuner config must be resolved (mu set) before simulation")
        B = self.theta_star.shape[0]
        self.theta0 = np.zeros((B, self.N)) if theta0 is None else np.broadcast_to(theta0, (B, self.N))
        self.theta_dot0 = np.zeros((B, self.N)) if theta_dot0 is None else np.broadcast_to(theta_dot0, (B, self.N))

    @property
    def batch(self) -> int:
        return self.theta_star.shape[0]

    @property
    def width(self) -> int:
        return self.N * (1 if self.law is Law.FIRST_ORDER else 2) + 1

    def initial_state(self) -> np.ndarray:
        B, N = self.theta_star.shape
        y = np.zeros((B, self.width))
        y[:, :N] = self.theta0
        if self.law is Law.HIGHER_ORDER:
            y[:, N:2 * N] = self.theta0
        elif self.law is Law.WIBISONO:
            y[:, N:2 * N] = self.theta_dot0
        return y

    def _split(self, y):
        N = self.N
        theta = y[..., :N]
        aux = y[..., N:2 * N] if self.law is not Law.FIRST_ORDER else None
        return theta, aux, y[..., -1]

    def rhs(self, t, y):
        theta, aux, _ = self._split(y)
        phi = self.feature.value(t)
        e_y = np.sum((theta - self.theta_star) * phi, axis=-1)
        if self.law is Law.FIRST_ORDER:
            d = first_order_regression_rhs(TunerState(theta), phi, e_y, self.tuner)
            parts = [d.theta]
        elif self.law is Law.HIGHER_ORDER:
            d = higher_order_regression_rhs(TunerState(theta, vartheta=aux), phi, e_y, self.tuner)
            parts = [d.theta, d.vartheta]
        else:
            d = wibisono_baseline_rhs(TunerState(theta, theta_dot=aux), phi, e_y, t, self.tuner)
            parts = [d.theta, d.theta_dot]
        return np.concatenate(parts + [(e_y * e_y)[..., None]], axis=-1)

    def monitor(self, t, y):
        theta = y[..., :self.N]
        with np.errstate(invalid="ignore", over="ignore"):
            e_y = np.sum((theta - self.theta_star) * self.feature.value(t), axis=-1)
            return np.maximum.reduce([
                np.max(np.abs(y[..., :-1]), axis=-1),
                np.sqrt(np.sum(theta * theta, axis=-1)),
                np.abs(e_y),
            ])

    def _kernel_args(self):
        f = self.feature
        if isinstance(f, StepFeature):
            kind, times, table = _kernels.FEATURE_STEPS, f.times, f._table
        else:
            kind, times, table = _kernels.FEATURE_SINUSOID, np.zeros(0), np.stack([f.offset, f.amplitude, f.omega, f.phase])
        B = self.batch
        cfg = self.tuner
        return dict(
            model=_kernels.MODEL_REGRESSION, theta_star=self.theta_star, feat_kind=kind,
            times=np.ascontiguousarray(times, dtype=float), table=np.ascontiguousarray(table, dtype=float),
            A=np.zeros((B, 1, 1)), bvec=np.zeros((B, 1)), bz=np.zeros((B, 1)), Pb=np.zeros((B, 1)),
            cmd_kind=0, onset=0.0, value=0.0, gamma=cfg.gamma, beta=cfg.beta,
            mu=np.full(B, cfg.mu if cfg.mu is not None else 0.0), p=cfg.wibisono_p, C=cfg.C, t0w=cfg.wibisono_t0,
        )

    def simulate(self, cfg: IntegrationConfig, fast: bool = True) -> IntegrationResult:
        return simulate(self, cfg, fast)

    def columns(self, t, y, b: int) -> dict:
        """Per-sample signals for draw ``b`` from logged states ``y`` (K, d)."""
        theta, aux, regret = self._split(y)
        phi = self.feature.value(t)
        cols = {
            "theta": theta,
            "phi": phi,
            "e_y": np.sum((theta - self.theta_star[b]) * phi, axis=-1),
            "regret": regret,
        }
        if self.law is Law.HIGHER_ORDER:
            cols["vartheta"] = aux
        elif self.law is Law.WIBISONO:
            cols["theta_dot"] = aux
        return cols


class MracSystem:
    """
    State-feedback model-reference adaptive control with ``phi = x``.

    Each draw carries its own plant (``A_m``, ``P`` and the true gain differ
    per draw).  The control input is ``u = -theta^T x``.
    """

    model = "mrac"

    def __init__(self, plants: list[PlantModel], tuner: TunerConfig):
        if tuner.law is Law.WIBISONO:
            raise ValueError("the accelerated baseline is only defined for regression")
        self.plants = plants
        self.tuner = tuner
        self.law = Law(tuner.law)
        self.n = plants[0].n
        self.N = plants[0].theta_star.size
        self.A_m = np.stack([p.A_m for p in plants])
        self.b = np.stack([p.b for p in plants])
        self.b_z = np.stack([p.b_z for p in plants])
        self.theta_star = np.stack([p.theta_star for p in plants])
        self.Pb = np.stack([p.Pb for p in plants])
        self.command = plants[0].command
        if tuner.mu is None:
            self.mu = np.array([default_mu_mrac(tuner.gamma, tuner.beta, p.Pb) for p in plants])
        else:
            self.mu = np.full(len(plants), float(tuner.mu))

    def tuner_for(self, b: int) -> TunerConfig:
        """Tuner config of draw ``b`` with its normalization resolved."""
        return self.tuner.resolved(float(self.mu[b]))

    @property
    def batch(self) -> int:
        return len(self.plants)

    @property
    def width(self) -> int:
        return 2 * self.n + self.N * (1 if self.law is Law.FIRST_ORDER else 2) + 1

    def initial_state(self) -> np.ndarray:
        return np.zeros((self.batch, self.width))

    def _split(self, y):
        n, N = self.n, self.N
        x = y[..., :n]
        xhat = y[..., n:2 * n]
        theta = y[..., 2 * n:2 * n + N]
        vartheta = y[..., 2 * n + N:2 * n + 2 * N] if self.law is Law.HIGHER_ORDER else None
        return x, xhat, theta, vartheta, y[..., -1]

    def rhs(self, t, y):
        x, xhat, theta, vartheta, _ = self._split(y)
        z = self.command(t)
        u = -np.sum(theta * x, axis=-1)
        drive = self.b_z * z
        xdot = np.einsum("bij,bj->bi", self.A_m, x) + self.b * (u + np.sum(self.theta_star * x, axis=-1))[:, None] + drive
        xhatdot = np.einsum("bij,bj->bi", self.A_m, xhat) + self.b * (u + np.sum(theta * x, axis=-1))[:, None] + drive
        e = xhat - x
        ePb = np.sum(e * self.Pb, axis=-1)
        g = self.tuner.gamma
        if self.law is Law.FIRST_ORDER:
            parts = [-g * x * ePb[:, None]]
        else:
            N_t = 1.0 + self.mu * np.sum(x * x, axis=-1)
            parts = [-self.tuner.beta * (theta - vartheta) * N_t[:, None], -g * x * ePb[:, None]]
        return np.concatenate([xdot, xhatdot] + parts + [np.sum(e * e, axis=-1)[:, None]], axis=-1)

    def monitor(self, t, y):
        x, xhat, theta, _, _ = self._split(y)
        with np.errstate(invalid="ignore", over="ignore"):
            e = xhat - x
            return np.maximum.reduce([
                np.max(np.abs(y[..., :-1]), axis=-1),
                np.sqrt(np.sum(theta * theta, axis=-1)),
                np.sqrt(np.sum(e * e, axis=-1)),
            ])

    def _kernel_args(self):
        c = self.command
        cfg = self.tuner
        return dict(
            model=_kernels.MODEL_MRAC, theta_star=self.theta_star, feat_kind=0,
            times=np.zeros(0), table=np.zeros((1, self.N)),
            A=np.ascontiguousarray(self.A_m), bvec=np.ascontiguousarray(self.b),
            bz=np.ascontiguousarray(self.b_z), Pb=np.ascontiguousarray(self.Pb),
            cmd_kind=1 if c.kind == "constant-after" else 0, onset=float(c.onset), value=float(c.value),
            gamma=cfg.gamma, beta=cfg.beta, mu=self.mu,
            p=cfg.wibisono_p, C=cfg.C, t0w=cfg.wibisono_t0,
        )

    def simulate(self, cfg: IntegrationConfig, fast: bool = True) -> IntegrationResult:
        return simulate(self, cfg, fast)

    def columns(self, t, y, b: int) -> dict:
        x, xhat, theta, vartheta, regret = self._split(y)
        e = xhat - x
        cols = {
            "theta": theta,
            "phi": x,
            "e": e,
            "x": x,
            "xhat": xhat,
            "u": -np.sum(theta * x, axis=-1),
            "z_cmd": self.command(t),
            "ePb": e @ self.Pb[b],
            "regret": regret,
        }
        if vartheta is not None:
            cols["vartheta"] = vartheta
        return cols


_LAW_CODES = {Law.FIRST_ORDER: _kernels.LAW_FO, Law.HIGHER_ORDER: _kernels.LAW_HO, Law.WIBISONO: _kernels.LAW_WIB}


def simulate(system, cfg: IntegrationConfig, fast: bool = True) -> IntegrationResult:
    """
    Integrate a system from its initial state over ``[0, horizon]``.

    ``fast=True`` runs the compiled loop; ``fast=False`` goes through the
    generic :func:`integrate` with the numpy right-hand side.  Both follow
    the same grid, stage times and divergence rule.
    """
    y0 = system.initial_state()
    if not fast:
        return integrate(system.rhs, y0, cfg, monitor=system.monitor)
    t, logs, active, n_valid, diverged_at, bad_t = _kernels.rk4(
        law=_LAW_CODES[system.law], y0=np.ascontiguousarray(y0), t0=0.0, h=cfg.step,
        n_steps=cfg.n_steps, log_every=cfg.log_every, threshold=cfg.divergence_threshold,
        **system._kernel_args(),
    )
    if not np.isnan(bad_t):
        raise NonFiniteDerivative(bad_t)
    status = [Status.COMPLETED if a else Status.DIVERGED for a in active]
    return IntegrationResult(t, logs, status, n_valid, diverged_at, batched=True)
