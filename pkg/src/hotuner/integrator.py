"""
Fixed-step classic Runge-Kutta 4 integration with divergence monitoring.

The state may carry a leading batch axis, ``y0`` of shape ``(B, d)``; rows
are advanced together but diverge (and freeze) independently, which is how
Monte-Carlo draws are run side by side.  Grid times are always computed as
``t0 + k * step`` from the integer step index.

The fourth stage of each step is evaluated one ulp *before* the step end.
Piecewise-constant inputs whose jumps are snapped onto grid nodes therefore
see the left limit for the whole step, and the new value from the first
stage of the next step on.
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteDerivative


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class IntegrationConfig:
    step: float
    horizon: float
    log_every: int = 1
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("step and horizon must be positive")
        if self.horizon < self.step:
            raise ValueError("horizon must be at least one step")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass
class IntegrationResult:
    """Logged samples of an integration run.

    ``y`` has shape ``(K, B, d)`` for batched runs and ``(K, d)`` otherwise.
    ``n_valid[b]`` is the number of leading samples logged before row ``b``
    diverged (all ``K`` for completed rows).
    """

    t: np.ndarray
    y: np.ndarray
    status: list[Status]
    n_valid: np.ndarray
    diverged_at: np.ndarray
    batched: bool

    def row(self, b: int) -> tuple[np.ndarray, np.ndarray]:
        """Time stamps and states of row ``b``, truncated at divergence."""
        k = self.n_valid[b]
        y = self.y[:, b] if self.batched else self.y
        return self.t[:k], y[:k]


def _default_monitor(t, y):
    return np.max(np.abs(y), axis=-1)


def integrate(
    rhs: Callable,
    init,
    cfg: IntegrationConfig,
    t0: float = 0.0,
    observer: Callable | None = None,
    monitor: Callable | None = None,
) -> IntegrationResult:
    """
    Integrate ``y' = rhs(t, y)`` over ``[t0, t0 + horizon]`` with RK4.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy``, vectorized over a leading batch axis when
        ``init`` is two-dimensional.
    init : array_like
        Initial state, shape ``(d,)`` or ``(B, d)``.
    cfg : IntegrationConfig
    t0 : float
    observer : callable, optional
        Called as ``observer(t, y)`` with a copy of every logged state.
    monitor : callable, optional
        ``monitor(t, y) -> (B,)`` magnitude compared against the divergence
        threshold.  Defaults to the max-abs entry of each row.

    Raises
    ------
    NonFiniteDerivative
        If ``rhs`` returns NaN/Inf at an accepted (finite, sub-threshold)
        state.
    """
    y = np.array(init, dtype=float)
    batched = y.ndim == 2
    if not batched:
        y = y[None, :]
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    monitor = monitor or _default_monitor
    h = cfg.step
    n_steps = cfg.n_steps
    B = y.shape[0]

    active = np.ones(B, dtype=bool)
    diverged_at = np.full(B, np.nan)
    times = [t0]
    logs = [y.copy()]
    n_valid = np.ones(B, dtype=int)
    if observer is not None:
        observer(t0, (y if batched else y[0]).copy())

    for k in range(n_steps):
        t = t0 + k * h
        t_mid = t0 + (k + 0.5) * h
        t_next = t0 + (k + 1) * h
        t_end = math.nextafter(t_next, -math.inf)

        k1 = rhs(t, y if batched else y[0])
        k1 = np.reshape(k1, y.shape)
        if not np.all(np.isfinite(k1[active])):
            raise NonFiniteDerivative(t)
        with np.errstate(over="ignore", invalid="ignore"):
            k2 = np.reshape(rhs(t_mid, _shape(y + 0.5 * h * k1, batched)), y.shape)
            k3 = np.reshape(rhs(t_mid, _shape(y + 0.5 * h * k2, batched)), y.shape)
            k4 = np.reshape(rhs(t_end, _shape(y + h * k3, batched)), y.shape)
            y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            mag = np.asarray(monitor(t_next, _shape(y_new, batched))).reshape(B)
            bad = ~np.all(np.isfinite(y_new), axis=1) | ~(mag <= cfg.divergence_threshold)

        newly = active & bad
        if newly.any():
            diverged_at[newly] = t_next
            active &= ~bad
        y = np.where(active[:, None], y_new, y)

        if (k + 1) % cfg.log_every == 0:
            times.append(t_next)
            logs.append(y.copy())
            n_valid[active] = len(times)
            if observer is not None:
                observer(t_next, (y if batched else y[0]).copy())
        if not active.any():
            break

    ys = np.stack(logs)
    if not batched:
        ys = ys[:, 0]
    status = [Status.COMPLETED if a else Status.DIVERGED for a in active]
    return IntegrationResult(np.array(times), ys, status, n_valid, diverged_at, batched)


def _shape(y, batched):
    return y if batched else y[0]


def convergence_step_check(rhs, init, steps, horizon: float, t0: float = 0.0) -> float | None:
    """
    Observed convergence order from terminal states at geometric step sizes.

    Returns ``None`` (not applicable) when successive terminal-state
    differences vanish, e.g. for ``y' = 0``.
    """
    steps = sorted(steps, reverse=True)
    if len(steps) < 3:
        raise ValueError("need at least three step sizes")
    ratios = [a / b for a, b in zip(steps, steps[1:])]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("step sizes must form a geometric progression")
    finals = []
    for h in steps:
        cfg = IntegrationConfig(step=h, horizon=horizon)
        res = integrate(rhs, init, IntegrationConfig(h, horizon, log_every=cfg.n_steps), t0=t0)
        if res.status[0] is not Status.COMPLETED:
            raise ValueError(f"run with step {h} diverged")
        finals.append(res.y[-1])
    return richardson_order(finals, ratios[0])


def richardson_order(finals, ratio: float) -> float | None:
    """
    Observed order from terminal states computed at steps ``h, h/r, h/r^2, ...``
    (coarsest first).  ``None`` when successive differences vanish.
    """
    diffs = [np.max(np.abs(np.asarray(a) - np.asarray(b))) for a, b in zip(finals, finals[1:])]
    if min(diffs) <= 1e-300:
        return None
    orders = [math.log(d1 / d2) / math.log(ratio) for d1, d2 in zip(diffs, diffs[1:])]
    return float(orders[-1])
