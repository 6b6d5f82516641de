"""
Lyapunov functions, their derivative bounds, regret and signal norms.

These are evaluated by the simulator, which knows the true parameter; the
update laws never see it.  Functions broadcast over a leading sample axis
so a whole trajectory is processed in one call.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DimensionMismatch, NoAnalyticRate, NotPD
from .integrator import Status
from .linalg import is_positive_definite
from .tuners import Law, TunerConfig, normalizing_signal


def _norm(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=-1))


def _sq(v):
    v = np.asarray(v, dtype=float)
    return np.sum(v * v, axis=-1)


def _match(*arrays):
    dims = {np.shape(a)[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionMismatch(f"vector dimensions disagree: {sorted(dims)}")


# -- higher-order laws -------------------------------------------------------

def lyapunov_regression(theta, vartheta, theta_star, gamma):
    """``(1/gamma) ||vartheta - theta*||^2 + (1/gamma) ||theta - vartheta||^2``."""
    _match(theta, vartheta, theta_star)
    theta, vartheta, theta_star = (np.asarray(a, dtype=float) for a in (theta, vartheta, theta_star))
    return (_sq(vartheta - theta_star) + _sq(theta - vartheta)) / gamma


def lyapunov_regression_rate_bound(theta, vartheta, phi, e_y, gamma, beta):
    """Upper bound on dV/dt for the higher-order regression law with ``mu = 2 gamma / beta``."""
    gap = _norm(np.asarray(theta, dtype=float) - vartheta)
    ey = np.abs(np.asarray(e_y, dtype=float))
    return -(2.0 * beta / gamma) * gap**2 - ey**2 - (ey - 2.0 * gap * _norm(phi)) ** 2


def lyapunov_mrac(theta, vartheta, theta_star, e, P, gamma):
    P = np.asarray(P, dtype=float)
    if not is_positive_definite(P):
        raise NotPD("P must be symmetric positive definite")
    e = np.asarray(e, dtype=float)
    if e.shape[-1] != P.shape[0]:
        raise DimensionMismatch("e and P dimensions disagree")
    return lyapunov_regression(theta, vartheta, theta_star, gamma) + np.einsum("...i,ij,...j->...", e, P, e)


def lyapunov_mrac_rate_bound(theta, vartheta, phi, e, Pb, gamma, beta):
    """Upper bound on dV/dt for higher-order MRAC with ``mu = 2 gamma ||Pb||^2 / beta`` and ``Q = 2I``."""
    gap = _norm(np.asarray(theta, dtype=float) - vartheta)
    ne = _norm(e)
    return -(2.0 * beta / gamma) * gap**2 - ne**2 - (ne - 2.0 * _norm(Pb) * gap * _norm(phi)) ** 2


# -- first-order laws --------------------------------------------------------

def lyapunov_first_order_regression(theta, theta_star, gamma):
    """``theta_err^T theta_err / (2 gamma)``; decreases at rate ``e_y^2``."""
    _match(theta, theta_star)
    return _sq(np.asarray(theta, dtype=float) - theta_star) / (2.0 * gamma)


def lyapunov_first_order_mrac(theta, theta_star, e, P, gamma):
    """``e^T P e + theta_err^T theta_err / gamma``; decreases at rate ``e^T Q e``."""
    e = np.asarray(e, dtype=float)
    return np.einsum("...i,ij,...j->...", e, P, e) + _sq(np.asarray(theta, dtype=float) - theta_star) / gamma


# -- accelerated-baseline candidate -----------------------------------------

def wibisono_candidate_lyapunov(theta, theta_dot, theta_star, phi, phi_dot, e_y, gamma, beta, mu):
    """
    Scaled kinetic-plus-potential energy and its time derivative along the
    higher-order regression law.

    The derivative contains the feature rate and can take either sign;
    with a constant feature it reduces to ``-gamma * e_y**2``.

    Returns
    -------
    V, Vdot : ndarray
    """
    if phi_dot is None:
        raise NoAnalyticRate("the candidate derivative needs the analytic feature rate")
    theta, theta_dot, phi, phi_dot = (np.asarray(a, dtype=float) for a in (theta, theta_dot, phi, phi_dot))
    e_y = np.asarray(e_y, dtype=float)
    err = theta - theta_star
    N_t = normalizing_signal(phi, mu)
    V = 0.5 * _sq(err + theta_dot / (beta * N_t)[..., None]) + gamma / (beta * N_t) * 0.5 * e_y**2
    phi_phidot = np.sum(phi * phi_dot, axis=-1)
    Vdot = (-gamma * e_y**2 * (1.0 + mu * phi_phidot / (beta * N_t**2))
            + gamma / (beta * N_t) * e_y * np.sum(err * phi_dot, axis=-1))
    return V, Vdot


# -- integrals and norms -----------------------------------------------------

def running_integral(t, f):
    """Composite-trapezoid running integral, starting at zero."""
    return cumulative_trapezoid(np.asarray(f, dtype=float), np.asarray(t, dtype=float), initial=0.0)


def continuous_regret(t, error) -> float:
    """``int ||error||^2 dt`` by the trapezoid rule; ``error`` is (K,) or (K, n)."""
    error = np.asarray(error, dtype=float)
    sq = error**2 if error.ndim == 1 else _sq(error)
    if len(t) < 2:
        return 0.0
    return float(running_integral(t, sq)[-1])


def lp_norm(t, signal, p) -> float:
    """L2 (trapezoid) or L-infinity (running max) norm of a sampled signal."""
    signal = np.asarray(signal, dtype=float)
    mag = np.abs(signal) if signal.ndim == 1 else _norm(signal)
    if p in (np.inf, "inf", "infinity"):
        return float(mag.max()) if mag.size else 0.0
    if p != 2:
        raise ValueError("only p = 2 and p = infinity are supported")
    if len(t) < 2:
        return 0.0
    return float(np.sqrt(np.trapezoid(mag**2, t)))


def asymptotic_decay_check(t, signal, tail_fraction: float = 0.2, tol: float = 1e-2) -> bool:
    """True iff the signal's magnitude stays within ``tol`` over the final ``tail_fraction`` of the horizon."""
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail_fraction must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    signal = np.asarray(signal, dtype=float)
    mag = np.abs(signal) if signal.ndim == 1 else _norm(signal)
    start = t[-1] - tail_fraction * (t[-1] - t[0])
    return bool(mag[t >= start].max() <= tol)


def zero_crossings(signal, deadband: float = 1e-6) -> int:
    """Sign changes of a sampled signal, ignoring samples with ``|s| <= deadband``."""
    s = np.asarray(signal, dtype=float)
    signs = np.sign(s[np.abs(s) > deadband])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def monotonicity_violation(V, slack: float) -> float:
    """Largest ``V[k+1] - V[k] - slack``; non-positive means monotone within slack."""
    V = np.asarray(V, dtype=float)
    if V.size < 2:
        return -slack
    return float(np.max(np.diff(V)) - slack)


def fd_rate_violation(t, V, bound, slack: float = 1e-4, exclude_times=()) -> float:
    """
    Largest ``dV/dt - bound - slack`` over interior samples, with ``dV/dt``
    from central differences.

    Samples whose stencil touches a time in ``exclude_times`` (input
    discontinuities) are skipped.
    """
    t = np.asarray(t, dtype=float)
    V = np.asarray(V, dtype=float)
    bound = np.asarray(bound, dtype=float)
    if t.size < 3:
        return -slack
    dV = (V[2:] - V[:-2]) / (t[2:] - t[:-2])
    keep = np.ones(dV.size, dtype=bool)
    for ts in exclude_times:
        keep &= ~((t[:-2] <= ts) & (ts <= t[2:]))
    if not keep.any():
        return -slack
    return float(np.max((dV - bound[1:-1] - slack)[keep]))


# -- trajectory record -------------------------------------------------------

@dataclass
class Trajectory:
    """
    Logged samples of one draw of one law.

    ``columns`` holds per-sample arrays keyed by signal name (``theta``,
    ``vartheta``, ``e_y`` or ``e``, ``phi``, ``V``, ``regret``, ...).
    ``V_rate_bound`` is absent when no certified bound applies (baseline
    law, or a user-overridden normalization).
    """

    model: str
    law: Law
    status: Status
    t: np.ndarray
    columns: dict
    theta_star: np.ndarray
    tuner: TunerConfig
    default_mu: bool = True
    P: np.ndarray | None = None
    Pb: np.ndarray | None = None
    diverged_at: float | None = None
    draw: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def error(self) -> np.ndarray:
        return self.columns["e_y"] if self.model == "regression" else self.columns["e"]

    @property
    def error_norm(self) -> np.ndarray:
        err = self.error
        return np.abs(err) if err.ndim == 1 else _norm(err)

    @property
    def certified(self) -> bool:
        """A Lyapunov function with a proven non-positive rate exists for this run."""
        return self.law is not Law.WIBISONO and (self.law is Law.FIRST_ORDER or self.default_mu)

    @property
    def V0(self) -> float:
        return float(self.columns["V"][0])


def attach_lyapunov(traj: Trajectory) -> Trajectory:
    """Add ``V`` and (when certified) ``V_rate_bound`` columns in place."""
    c = traj.columns
    cfg = traj.tuner
    ts = traj.theta_star
    if traj.law is Law.WIBISONO:
        return traj
    if traj.model == "regression":
        if traj.law is Law.FIRST_ORDER:
            c["V"] = lyapunov_first_order_regression(c["theta"], ts, cfg.gamma)
            c["V_rate_bound"] = -c["e_y"] ** 2
        else:
            c["V"] = lyapunov_regression(c["theta"], c["vartheta"], ts, cfg.gamma)
            if traj.default_mu:
                c["V_rate_bound"] = lyapunov_regression_rate_bound(
                    c["theta"], c["vartheta"], c["phi"], c["e_y"], cfg.gamma, cfg.beta)
    else:
        if traj.law is Law.FIRST_ORDER:
            c["V"] = lyapunov_first_order_mrac(c["theta"], ts, c["e"], traj.P, cfg.gamma)
            Q = -(traj.P @ traj.meta["A_m"] + traj.meta["A_m"].T @ traj.P)
            c["V_rate_bound"] = -np.einsum("ki,ij,kj->k", c["e"], Q, c["e"])
        else:
            c["V"] = lyapunov_mrac(c["theta"], c["vartheta"], ts, c["e"], traj.P, cfg.gamma)
            if traj.default_mu:
                c["V_rate_bound"] = lyapunov_mrac_rate_bound(
                    c["theta"], c["vartheta"], c["phi"], c["e"], traj.Pb, cfg.gamma, cfg.beta)
    return traj
