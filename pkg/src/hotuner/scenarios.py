"""
Built-in experiments, Monte-Carlo sampling and summary statistics.

A scenario run samples one true parameter per draw, integrates every draw
of every requested law in a single batched pass, and attaches the
Lyapunov diagnostics to each per-draw trajectory.  Random numbers come
from numpy's PCG64 bit generator seeded with ``cfg.seed``.
"""

from dataclasses import dataclass, field, replace
from math import pi

import numpy as np

from .config import ScenarioConfig
from .diagnostics import Trajectory, attach_lyapunov, zero_crossings
from .errors import ConfigError, NotHurwitz, UnknownScenario
from .integrator import IntegrationConfig, Status
from .models import F16_THETA_STAR, PlantModel, f16_open_loop
from .signals import CommandSignal, SinusoidFeature, StepFeature
from .systems import MracSystem, RegressionSystem, simulate
from .tuners import Law, TunerConfig, default_mu_regression

MAX_LOG_SAMPLES = 5000
ERROR_TOL = 1e-2
BAND_LEVELS = (0.025, 0.5, 0.975)

_REG_LAWS = (Law.FIRST_ORDER, Law.HIGHER_ORDER, Law.WIBISONO)


def _pe_feature(omega: float, third: bool = True) -> dict:
    return dict(
        feature_kind="sinusoid",
        feature_offset=(1.0, 1.0, 1.0),
        feature_amplitude=(0.0, 3.0, 3.0 if third else 0.0),
        feature_omega=(0.0, omega, omega),
        feature_phase=(0.0, 0.0, pi / 2),
    )


_STEP_ONLY = dict(
    feature_kind="steps",
    feature_initial=(0.0, 0.0, 0.0),
    feature_step_times=(0.1,),
    feature_step_values=((1.0, 1.0, 1.0),),
)

# Members of the frequency-sweep family, slowest variation first.
FREQ_SWEEP = {
    "step-only": ("single step to a constant feature", _STEP_ONLY),
    "slow": ("sinusoids at omega = 2 pi / 50", _pe_feature(2 * pi / 50)),
    "third": ("sinusoids at omega = 1/3", _pe_feature(1.0 / 3.0)),
    "unit": ("sinusoids at omega = 1", _pe_feature(1.0)),
    "single": ("one sinusoidal channel at omega = 1", _pe_feature(1.0, third=False)),
}


def builtin_scenarios() -> list[ScenarioConfig]:
    reg = dict(model="regression", laws=_REG_LAWS, truth_nominal=(1.0, -2.0, 5.0),
               mc_low=-10.0, mc_high=10.0, horizon=50.0)
    return [
        ScenarioConfig(
            name="reg-two-step",
            description="regression, feature steps to (1,1,1) at 0.1 s and (2,-1,-2) at 25 s",
            feature_kind="steps", feature_initial=(0.0, 0.0, 0.0),
            feature_step_times=(0.1, 25.0),
            feature_step_values=((1.0, 1.0, 1.0), (2.0, -1.0, -2.0)),
            **reg,
        ),
        ScenarioConfig(
            name="reg-pe",
            description="regression, persistently exciting feature (1, 1+3 sin t, 1+3 cos t)",
            **{**reg, "horizon": 80.0}, **_pe_feature(1.0),
        ),
        ScenarioConfig(
            name="reg-freq-sweep",
            description="regression, feature variation from a single step up to unit-frequency sinusoids",
            family=tuple(FREQ_SWEEP),
            **reg, **_pe_feature(2 * pi / 50),
        ),
        ScenarioConfig(
            name="f16-mrac",
            description="F-16 short-period MRAC, LQR gain scaled by W ~ U[-1/2, 2], pitch-rate command 1 at 5 s",
            model="mrac", laws=(Law.FIRST_ORDER, Law.HIGHER_ORDER),
            truth_nominal=tuple(F16_THETA_STAR), mc_low=-0.5, mc_high=2.0,
            command_onset=5.0, command_value=1.0, horizon=40.0,
        ),
    ]


def family_members(cfg: ScenarioConfig) -> list[ScenarioConfig]:
    """Expand a family config into its member configs (itself if not a family)."""
    if not cfg.family:
        return [cfg]
    out = []
    for key in cfg.family:
        if key not in FREQ_SWEEP:
            raise ConfigError(f"unknown family member {key!r}")
        desc, feature = FREQ_SWEEP[key]
        out.append(replace(cfg, name=f"{cfg.name}.{key}", description=desc, family=(), **feature))
    return out


def find_scenario(name: str, extra: list[ScenarioConfig] = ()) -> ScenarioConfig:
    """Look up a scenario or family member (``reg-freq-sweep.unit``) by name."""
    for cfg in [*builtin_scenarios(), *extra]:
        if cfg.name == name:
            return cfg
        if cfg.family and name.startswith(cfg.name + "."):
            for member in family_members(cfg):
                if member.name == name:
                    return member
    raise UnknownScenario(f"unknown scenario {name!r}")


# -- building blocks ----------------------------------------------------------

def resolved_log_every(cfg: ScenarioConfig) -> int:
    """Explicit ``log_every`` or the smallest divisor of the step count keeping the log within bounds."""
    if cfg.log_every is not None:
        return cfg.log_every
    n = IntegrationConfig(cfg.step, cfg.horizon).n_steps
    for d in range(1, n + 1):
        if n % d == 0 and n // d + 1 <= MAX_LOG_SAMPLES:
            return d
    return n


def integration_config(cfg: ScenarioConfig) -> IntegrationConfig:
    return IntegrationConfig(cfg.step, cfg.horizon, resolved_log_every(cfg), cfg.divergence_threshold)


def build_feature(cfg: ScenarioConfig):
    """Feature signal of a regression scenario, with step times snapped to the grid."""
    if cfg.feature_kind == "steps":
        N = len(cfg.truth_nominal)
        initial = cfg.feature_initial or (0.0,) * N
        values = np.array(cfg.feature_step_values, dtype=float).reshape(len(cfg.feature_step_times), N)
        f = StepFeature(np.array(cfg.feature_step_times, dtype=float), values, initial)
    else:
        f = SinusoidFeature(cfg.feature_offset, cfg.feature_amplitude, cfg.feature_omega, cfg.feature_phase)
    if f.dim != len(cfg.truth_nominal):
        raise ConfigError("feature dimension does not match truth.nominal")
    return f.snapped(cfg.step)


def build_command(cfg: ScenarioConfig) -> CommandSignal:
    return CommandSignal("constant-after", cfg.command_onset, cfg.command_value).snapped(cfg.step)


def mrac_plant(theta_star, command: CommandSignal) -> PlantModel:
    """F-16 closed loop for an arbitrary true gain."""
    A, b, b_z = f16_open_loop()
    theta_star = np.asarray(theta_star, dtype=float)
    return PlantModel(A - np.outer(b, theta_star), b, b_z, theta_star, command=command)


@dataclass
class Draws:
    theta_star: np.ndarray  # (B, N)
    scale: np.ndarray | None = None  # W per draw (mrac)
    rejections: int = 0
    plants: list = field(default_factory=list)


def sample_draws(cfg: ScenarioConfig) -> Draws:
    """
    Sample the true parameter of every draw.

    Regression draws are ``nominal + Z`` with ``Z ~ U[low, high]^N``; MRAC
    draws are ``W * nominal`` with ``W ~ U[low, high]``, where a ``W``
    whose reference model is not Hurwitz is rejected and redrawn.  With
    ``include_nominal`` draw 0 is the nominal truth (``Z = 0``, ``W = 1``).
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    nominal = np.array(cfg.truth_nominal, dtype=float)
    B = cfg.draws
    random_from = 1 if cfg.include_nominal else 0
    if cfg.sampling == "nominal":
        random_from = B
    if cfg.model == "regression":
        ts = np.tile(nominal, (B, 1))
        for b in range(random_from, B):
            ts[b] = nominal + rng.uniform(cfg.mc_low, cfg.mc_high, size=nominal.size)
        return Draws(ts)
    command = build_command(cfg)
    scale = np.ones(B)
    plants = []
    rejections = 0
    for b in range(B):
        while True:
            if b >= random_from:
                scale[b] = rng.uniform(cfg.mc_low, cfg.mc_high)
            try:
                plants.append(mrac_plant(scale[b] * nominal, command))
                break
            except NotHurwitz:
                if b < random_from:
                    raise
                rejections += 1
                if rejections > cfg.max_rejections:
                    raise ConfigError("too many rejected draws; the sampling range rarely stabilizes the plant")
    return Draws(np.stack([p.theta_star for p in plants]), scale, rejections, plants)


def tuner_config(cfg: ScenarioConfig, law: Law) -> TunerConfig:
    return TunerConfig(law, cfg.gamma, cfg.beta, cfg.mu, cfg.wibisono_p, cfg.wibisono_C, cfg.wibisono_t0)


def make_system(cfg: ScenarioConfig, law: Law, draws: Draws):
    tuner = tuner_config(cfg, law)
    if cfg.model == "regression":
        if law is not Law.WIBISONO:
            tuner = tuner.resolved(default_mu_regression(cfg.gamma, cfg.beta))
        theta_dot0 = cfg.wibisono_theta_dot0 or None
        return RegressionSystem(build_feature(cfg), draws.theta_star, tuner, theta_dot0=theta_dot0)
    return MracSystem(draws.plants, tuner)


# -- summaries ------------------------------------------------------------------

def quantile_band(series, levels=BAND_LEVELS) -> np.ndarray:
    """
    Pointwise empirical quantiles across draws.

    ``series`` is ``(draws, K)`` on a shared grid; returns ``(len(levels), K)``
    using linear interpolation between order statistics.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] < 1:
        raise ValueError("need at least one draw")
    return np.quantile(series, levels, axis=0, method="linear")


def settling_time(t, err_norm, tol: float = ERROR_TOL) -> float | None:
    """First logged time after which the error norm stays below ``tol``."""
    above = np.nonzero(np.asarray(err_norm) >= tol)[0]
    if above.size == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return None
    return float(t[above[-1] + 1])


def pitch_rate_error_rate(traj: Trajectory) -> np.ndarray:
    """Exact time derivative of the second error component, ``e' = A_m e + b theta_err^T x``."""
    c = traj.columns
    A_m = traj.meta["A_m"]
    b = traj.meta["b"]
    mis = np.sum((c["theta"] - traj.theta_star) * c["x"], axis=-1)
    return c["e"] @ A_m[1] + b[1] * mis


def oscillation_count(traj: Trajectory, onset: float, deadband: float = 1e-6) -> int | None:
    """Zero crossings of the pitch-rate error derivative after the command onset."""
    if traj.model != "mrac":
        return None
    keep = traj.t > onset
    return zero_crossings(pitch_rate_error_rate(traj)[keep], deadband)


@dataclass
class DrawSummary:
    status: Status
    final_regret: float
    V0: float | None
    time_to_tol: float | None
    oscillations: int | None
    diverged_at: float | None


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    trajectories: dict  # Law -> list[Trajectory]
    summaries: dict  # Law -> list[DrawSummary]
    bands: dict  # Law -> (t, (3, K) array) or None when every draw diverged
    draws: Draws

    def stable(self, law: Law) -> bool:
        """All draws of ``law`` completed."""
        return all(s.status is Status.COMPLETED for s in self.summaries[law])

    def final_regrets(self, law: Law) -> np.ndarray:
        return np.array([s.final_regret for s in self.summaries[law]])


def run_law(cfg: ScenarioConfig, law: Law, draws: Draws, fast: bool = True) -> list[Trajectory]:
    system = make_system(cfg, law, draws)
    res = simulate(system, integration_config(cfg), fast=fast)
    out = []
    for b in range(system.batch):
        t, y = res.row(b)
        cols = system.columns(t, y, b)
        meta = {}
        if cfg.model == "mrac":
            tuner = system.tuner_for(b)
            plant = draws.plants[b]
            P, Pb = plant.P, plant.Pb
            meta.update(A_m=plant.A_m, b=plant.b, W=float(draws.scale[b]))
        else:
            tuner = system.tuner
            P = Pb = None
        diverged = res.diverged_at[b]
        traj = Trajectory(
            model=cfg.model, law=law, status=res.status[b], t=t, columns=cols,
            theta_star=system.theta_star[b], tuner=tuner, default_mu=cfg.mu is None,
            P=P, Pb=Pb, diverged_at=None if np.isnan(diverged) else float(diverged),
            draw=b, meta=meta,
        )
        out.append(attach_lyapunov(traj))
    return out


def summarize(traj: Trajectory, cfg: ScenarioConfig) -> DrawSummary:
    c = traj.columns
    return DrawSummary(
        status=traj.status,
        final_regret=float(c["regret"][-1]),
        V0=traj.V0 if "V" in c else None,
        time_to_tol=settling_time(traj.t, traj.error_norm) if traj.status is Status.COMPLETED else None,
        oscillations=oscillation_count(traj, cfg.command_onset),
        diverged_at=traj.diverged_at,
    )


def run_scenario(cfg: ScenarioConfig, fast: bool = True) -> ScenarioResult:
    """
    Run every law over every draw of a (non-family) scenario.

    Diverged draws are recorded, not raised; they count against the law's
    stability flag and are left out of the quantile bands.
    """
    if cfg.family:
        raise ConfigError(f"{cfg.name} is a family; run its members (family_members) one by one")
    draws = sample_draws(cfg)
    trajectories, summaries, bands = {}, {}, {}
    for law in cfg.laws:
        trajs = run_law(cfg, law, draws, fast=fast)
        trajectories[law] = trajs
        summaries[law] = [summarize(tr, cfg) for tr in trajs]
        done = [tr for tr in trajs if tr.status is Status.COMPLETED]
        if done:
            bands[law] = (done[0].t, quantile_band(np.stack([tr.error_norm for tr in done])))
        else:
            bands[law] = None
    return ScenarioResult(cfg, trajectories, summaries, bands, draws)
