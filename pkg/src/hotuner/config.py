"""
Scenario configuration and its flat ``key = value`` text format.

Keys are dotted (``tuner.beta = 1.0``); vectors are comma separated and
lists of vectors are separated by ``;``.  ``auto`` selects the documented
default for optional numeric keys.  Lines starting with ``#`` are comments.
"""

from dataclasses import dataclass, fields, replace

from .errors import BadOverrideKey, ConfigError
from .tuners import Law


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return ", ".join(_fmt_float(x) for x in v)


def _parse_vec(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _parse_vecs(text: str) -> tuple[tuple[float, ...], ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_vec(chunk) for chunk in text.split(";"))


def _fmt_vecs(vs) -> str:
    return "; ".join(_fmt_vec(v) for v in vs)


def _parse_opt_float(text: str):
    text = text.strip()
    return None if text.lower() in ("auto", "none", "") else float(text)


def _fmt_opt_float(x) -> str:
    return "auto" if x is None else _fmt_float(x)


def _parse_laws(text: str) -> tuple[Law, ...]:
    return tuple(Law.parse(tok) for tok in text.split(",") if tok.strip())


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    description: str = ""
    model: str = "regression"
    laws: tuple[Law, ...] = (Law.FIRST_ORDER, Law.HIGHER_ORDER, Law.WIBISONO)
    # feature (regression only)
    feature_kind: str = "steps"
    feature_initial: tuple[float, ...] = ()
    feature_step_times: tuple[float, ...] = ()
    feature_step_values: tuple[tuple[float, ...], ...] = ()
    feature_offset: tuple[float, ...] = ()
    feature_amplitude: tuple[float, ...] = ()
    feature_omega: tuple[float, ...] = ()
    feature_phase: tuple[float, ...] = ()
    # command (mrac only)
    command_onset: float = 5.0
    command_value: float = 1.0
    # nominal truth: theta* for regression, LQR gain for mrac
    truth_nominal: tuple[float, ...] = (1.0, -2.0, 5.0)
    # tuner
    gamma: float = 0.1
    beta: float = 1.0
    mu: float | None = None
    wibisono_p: float = 2.0
    wibisono_C: float | None = None
    wibisono_t0: float = 1e-2
    wibisono_theta_dot0: tuple[float, ...] = ()
    # integration
    step: float = 1e-3
    horizon: float = 50.0
    log_every: int | None = None
    divergence_threshold: float = 1e6
    # Monte Carlo
    draws: int = 20
    seed: int = 0
    sampling: str = "uniform"
    mc_low: float = -10.0
    mc_high: float = 10.0
    max_rejections: int = 10000
    include_nominal: bool = True
    # named member variants; a non-empty family is run member by member
    family: tuple[str, ...] = ()

    def __post_init__(self):
        if self.model not in ("regression", "mrac"):
            raise ConfigError(f"model must be 'regression' or 'mrac', got {self.model!r}")
        if not self.laws:
            raise ConfigError("at least one law is required")
        if self.model == "mrac" and Law.WIBISONO in self.laws:
            raise ConfigError("the accelerated baseline is defined for regression only")
        if self.draws < 1:
            raise ConfigError("draws must be >= 1")
        if self.sampling not in ("uniform", "nominal"):
            raise ConfigError("sampling must be 'uniform' or 'nominal'")
        if self.feature_kind not in ("steps", "sinusoid"):
            raise ConfigError("feature.kind must be 'steps' or 'sinusoid'")
        if self.gamma <= 0 or self.beta <= 0 or (self.mu is not None and self.mu <= 0):
            raise ConfigError("gamma, beta and mu must be positive")
        if self.step <= 0 or self.horizon < self.step:
            raise ConfigError("need step > 0 and horizon >= step")
        if self.mc_low > self.mc_high:
            raise ConfigError("mc.low must not exceed mc.high")
        if self.log_every is not None and self.log_every < 1:
            raise ConfigError("sim.log_every must be >= 1")

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        values = {}
        for key, text in overrides.items():
            if key not in KEYS:
                raise BadOverrideKey(f"unknown config key {key!r}")
            attr, parse, _ = KEYS[key]
            try:
                values[attr] = parse(str(text))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        try:
            return replace(self, **values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_text(self) -> str:
        lines = []
        for key, (attr, _, fmt) in KEYS.items():
            lines.append(f"{key} = {fmt(getattr(self, attr))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "ScenarioConfig | None" = None) -> "ScenarioConfig":
        pairs = parse_key_values(text)
        if base is None:
            if "name" not in pairs:
                raise ConfigError("config is missing 'name'")
            base = cls(name=pairs["name"])
        return base.with_overrides(pairs)


def parse_key_values(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


KEYS = {
    "name": ("name", str.strip, str),
    "description": ("description", str.strip, str),
    "model": ("model", str.strip, str),
    "laws": ("laws", _parse_laws, lambda laws: ", ".join(law.value for law in laws)),
    "feature.kind": ("feature_kind", str.strip, str),
    "feature.initial": ("feature_initial", _parse_vec, _fmt_vec),
    "feature.step_times": ("feature_step_times", _parse_vec, _fmt_vec),
    "feature.step_values": ("feature_step_values", _parse_vecs, _fmt_vecs),
    "feature.offset": ("feature_offset", _parse_vec, _fmt_vec),
    "feature.amplitude": ("feature_amplitude", _parse_vec, _fmt_vec),
    "feature.omega": ("feature_omega", _parse_vec, _fmt_vec),
    "feature.phase": ("feature_phase", _parse_vec, _fmt_vec),
    "command.onset": ("command_onset", float, _fmt_float),
    "command.value": ("command_value", float, _fmt_float),
    "truth.nominal": ("truth_nominal", _parse_vec, _fmt_vec),
    "tuner.gamma": ("gamma", float, _fmt_float),
    "tuner.beta": ("beta", float, _fmt_float),
    "tuner.mu": ("mu", _parse_opt_float, _fmt_opt_float),
    "tuner.wibisono_p": ("wibisono_p", float, _fmt_float),
    "tuner.wibisono_C": ("wibisono_C", _parse_opt_float, _fmt_opt_float),
    "tuner.wibisono_t0": ("wibisono_t0", float, _fmt_float),
    "tuner.wibisono_theta_dot0": ("wibisono_theta_dot0", _parse_vec, _fmt_vec),
    "sim.step": ("step", float, _fmt_float),
    "sim.horizon": ("horizon", float, _fmt_float),
    "sim.log_every": ("log_every", lambda s: None if s.strip().lower() == "auto" else int(s), lambda v: "auto" if v is None else str(v)),
    "sim.divergence_threshold": ("divergence_threshold", float, _fmt_float),
    "mc.draws": ("draws", int, str),
    "mc.seed": ("seed", int, str),
    "mc.sampling": ("sampling", str.strip, str),
    "mc.low": ("mc_low", float, _fmt_float),
    "mc.high": ("mc_high", float, _fmt_float),
    "mc.max_rejections": ("max_rejections", int, str),
    "mc.include_nominal": ("include_nominal", _parse_bool, lambda v: "true" if v else "false"),
    "family": ("family", lambda s: tuple(tok.strip() for tok in s.split(",") if tok.strip()), ", ".join),
}

assert {attr for attr, _, _ in KEYS.values()} == {f.name for f in fields(ScenarioConfig)}

# Command-line flags and the config keys they set.
FLAG_KEYS = {
    "draws": "mc.draws",
    "seed": "mc.seed",
    "beta": "tuner.beta",
    "gamma": "tuner.gamma",
    "mu": "tuner.mu",
    "step": "sim.step",
    "horizon": "sim.horizon",
    "laws": "laws",
}
