"""
Time-varying feature and command generators.

A feature signal maps time to a vector phi(t).  Three kinds exist:

- ``steps``: piecewise constant, switching to a new value at each step time
  (the new value is taken *at* the step instant),
- ``sinusoid``: per-channel ``offset + amplitude * sin(omega * t + phase)``
  with an exact time derivative,
- ``state``: the feature is the plant state itself (phi = x), which only a
  closed-loop simulation can evaluate.

All signals are immutable and accept scalar or array time arguments.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import NoAnalyticRate


def _vec(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StepFeature:
    """Piecewise-constant feature, right-continuous at each step time."""

    times: np.ndarray
    values: np.ndarray  # (n_steps, dim)
    initial: np.ndarray | None = None  # value before the first step; zero by default

    kind = "steps"

    def __post_init__(self):
        times = _vec(self.times).reshape(-1)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(len(times), -1) if len(times) else values.reshape(0, -1)
        if len(times) != len(values):
            raise ValueError("one step value per step time is required")
        if np.any(np.diff(times) <= 0):
            raise ValueError("step times must be strictly increasing")
        dim = values.shape[1] if values.size else np.asarray(self.initial).size
        initial = np.zeros(dim) if self.initial is None else np.array(self.initial, dtype=float)
        if initial.shape != (dim,):
            raise ValueError("initial value does not match the step values' dimension")
        values.setflags(write=False)
        initial.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "_table", np.vstack([initial[None, :], values]))

    @property
    def dim(self) -> int:
        return self.initial.size

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self._table[np.searchsorted(self.times, t, side="right")]

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (self.dim,))

    def snapped(self, step: float) -> "StepFeature":
        """Move each step time onto the nearest node ``k * step`` of the grid."""
        k = np.rint(self.times / step)
        return replace(self, times=k * step)


@dataclass(frozen=True)
class SinusoidFeature:
    """Bank of offset sinusoids, one per channel."""

    offset: np.ndarray
    amplitude: np.ndarray
    omega: np.ndarray
    phase: np.ndarray

    kind = "sinusoid"

    def __post_init__(self):
        arrays = [_vec(getattr(self, name)).reshape(-1) for name in ("offset", "amplitude", "omega", "phase")]
        if len({a.size for a in arrays}) != 1:
            raise ValueError("offset, amplitude, omega and phase must have one entry per channel")
        for name, arr in zip(("offset", "amplitude", "omega", "phase"), arrays):
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.offset.size

    def value(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.offset + self.amplitude * np.sin(self.omega * t + self.phase)

    def rate(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.amplitude * self.omega * np.cos(self.omega * t + self.phase)

    def snapped(self, step: float) -> "SinusoidFeature":
        return self


@dataclass(frozen=True)
class StateFeature:
    """Feature equal to the plant state (phi = x); closed-loop only."""

    dim: int

    kind = "state"

    def value(self, t, state=None):
        if state is None:
            raise ValueError("a state-feedback feature needs the plant state to evaluate")
        return np.asarray(state, dtype=float)

    def rate(self, t):
        raise NoAnalyticRate("state-feedback features have no analytic time derivative")

    def snapped(self, step: float) -> "StateFeature":
        return self


FeatureSignal = StepFeature | SinusoidFeature | StateFeature


def offset_sinusoids(offset, amplitude, omega, phase=None) -> SinusoidFeature:
    offset = np.asarray(offset, dtype=float)
    bc = lambda v: np.broadcast_to(np.asarray(v, dtype=float), offset.shape)
    phase = np.zeros_like(offset) if phase is None else phase
    return SinusoidFeature(offset, bc(amplitude), bc(omega), bc(phase))


def eval_feature(sig, t):
    return sig.value(t)


def eval_feature_rate(sig, t):
    return sig.rate(t)


def pe_gram(sig, t: float, T_window: float, quad_step: float) -> np.ndarray:
    """
    Composite-trapezoid approximation of the windowed Gram matrix
    ``int_t^{t+T} phi phi^T d tau``.

    The window is split into ``ceil(T / quad_step)`` equal panels, so the
    panel width never exceeds ``quad_step``.
    """
    if T_window <= 0 or quad_step <= 0:
        raise ValueError("window length and quadrature step must be positive")
    n = int(np.ceil(T_window / quad_step - 1e-12))
    taus = t + T_window * np.arange(n + 1) / n
    phi = sig.value(taus)
    w = np.full(n + 1, T_window / n)
    w[0] *= 0.5
    w[-1] *= 0.5
    G = np.einsum("k,ki,kj->ij", w, phi, phi)
    return 0.5 * (G + G.T)


@dataclass(frozen=True)
class CommandSignal:
    """Reference command: zero before ``onset``, ``value`` from ``onset`` on."""

    kind: str = "constant-after"
    onset: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant-after", "zero"):
            raise ValueError(f"unknown command kind {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros(t.shape)
        return np.where(t >= self.onset, self.value, 0.0)

    def snapped(self, step: float) -> "CommandSignal":
        return replace(self, onset=float(np.rint(self.onset / step) * step))
