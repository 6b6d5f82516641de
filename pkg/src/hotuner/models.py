"""
Error models: algebraic regression and the dynamical model-reference system.

Functions broadcast over leading axes, so a batch of Monte-Carlo draws can
be evaluated in one call (``theta`` of shape ``(B, N)``, ``A_m`` of shape
``(B, n, n)`` and so on).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .linalg import solve_lyapunov
from .signals import CommandSignal, StateFeature

F16_A_P = np.array([[-0.6398, 0.9378], [-1.5679, -0.8791]])
F16_B_P = np.array([-0.0777, -6.5121])
F16_THETA_STAR = np.array([0.1965, -0.3835, -1.0000])


def _same_dim(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"{what}: dimensions {a.shape[-1]} and {b.shape[-1]} differ")


@dataclass(frozen=True)
class RegressionModel:
    """``y(t) = theta_star^T phi(t)`` with a known feature signal."""

    theta_star: np.ndarray
    feature: object

    def __post_init__(self):
        theta_star = np.asarray(self.theta_star, dtype=float)
        if theta_star.shape[-1] != self.feature.dim:
            raise DimensionMismatch("theta_star and the feature have different dimensions")
        object.__setattr__(self, "theta_star", theta_star)

    def output(self, t):
        return np.sum(self.theta_star * self.feature.value(t), axis=-1)


def regression_output_error(m: RegressionModel, theta, t):
    """Output error ``(theta - theta_star)^T phi(t)``."""
    theta = np.asarray(theta, dtype=float)
    _same_dim(theta, m.theta_star, "theta vs theta_star")
    return np.sum((theta - m.theta_star) * m.feature.value(t), axis=-1)


@dataclass(frozen=True)
class SystemState:
    x: np.ndarray
    xhat: np.ndarray

    @property
    def e(self) -> np.ndarray:
        return self.xhat - self.x


@dataclass(frozen=True)
class PlantModel:
    """
    Closed-loop plant data for model-reference adaptive control.

    ``P`` is solved from ``A_m^T P + P A_m = -Q`` at construction.
    """

    A_m: np.ndarray
    b: np.ndarray
    b_z: np.ndarray
    theta_star: np.ndarray
    Q: np.ndarray | None = None
    command: CommandSignal = field(default_factory=lambda: CommandSignal("zero"))
    P: np.ndarray = field(init=False)

    def __post_init__(self):
        A_m = np.asarray(self.A_m, dtype=float)
        n = A_m.shape[0]
        b = np.asarray(self.b, dtype=float).reshape(n)
        b_z = np.asarray(self.b_z, dtype=float).reshape(n)
        Q = 2.0 * np.eye(n) if self.Q is None else np.asarray(self.Q, dtype=float)
        for name, val in (("A_m", A_m), ("b", b), ("b_z", b_z), ("theta_star", np.asarray(self.theta_star, dtype=float)), ("Q", Q)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "P", solve_lyapunov(A_m, Q))

    @property
    def n(self) -> int:
        return self.A_m.shape[0]

    @property
    def Pb(self) -> np.ndarray:
        return self.P @ self.b

    @property
    def feature(self) -> StateFeature:
        return StateFeature(self.n)


def plant_rhs(m: PlantModel, s: SystemState, u, t, phi, theta) -> SystemState:
    """
    Derivatives of the plant and its reference model.

    ``x' = A_m x + b (u + theta_star^T phi) + b_z z_cmd(t)`` and
    ``xhat' = A_m xhat + b (u + theta^T phi) + b_z z_cmd(t)``.
    """
    x = np.asarray(s.x, dtype=float)
    xhat = np.asarray(s.xhat, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape[-1] != m.n or xhat.shape[-1] != m.n:
        raise DimensionMismatch(f"plant has {m.n} states")
    _same_dim(phi, m.theta_star, "phi vs theta_star")
    _same_dim(theta, m.theta_star, "theta vs theta_star")
    z = m.command(t)[..., None]
    u = np.asarray(u, dtype=float)[..., None]
    xdot = x @ m.A_m.T + m.b * (u + np.sum(m.theta_star * phi, axis=-1)[..., None]) + m.b_z * z
    xhatdot = xhat @ m.A_m.T + m.b * (u + np.sum(theta * phi, axis=-1)[..., None]) + m.b_z * z
    return SystemState(xdot, xhatdot)


def f16_open_loop() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integral-augmented short-period F-16 model ``(A, b, b_z)``.

    States are angle of attack, pitch rate and the integral of the
    pitch-rate tracking error.
    """
    A = np.zeros((3, 3))
    A[:2, :2] = F16_A_P
    A[2, 1] = 1.0
    b = np.array([F16_B_P[0], F16_B_P[1], 0.0])
    b_z = np.array([0.0, 0.0, -1.0])
    return A, b, b_z


def build_f16_plant(W: float = 1.0, command: CommandSignal | None = None, Q=None) -> PlantModel:
    """Closed-loop F-16 plant with the LQR gain scaled by ``W``.

    Raises ``NotHurwitz`` when the scaled gain does not stabilize the plant.
    """
    A, b, b_z = f16_open_loop()
    theta_star = F16_THETA_STAR * W
    A_m = A - np.outer(b, theta_star)
    if command is None:
        command = CommandSignal("constant-after", onset=5.0, value=1.0)
    return PlantModel(A_m, b, b_z, theta_star, Q=Q, command=command)
