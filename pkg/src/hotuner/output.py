"""
Run directories: trajectory CSVs, band CSVs and the manifest.

Numbers are written with 17 significant digits so a re-read reproduces
every double exactly.  A run directory looks like::

    manifest.txt
    fo_draw000.csv  ho_draw000.csv  ...
    band_fo.csv     band_ho.csv     ...

The manifest is ``key = value`` text holding the fully resolved scenario
config (so it can be fed back to ``run``) followed by ``manifest.*`` and
``summary.*`` entries.
"""

import os
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, parse_key_values
from .errors import ConfigError, CorruptCsv, MissingManifest, UnwritableOutput
from .integrator import Status
from .scenarios import ScenarioResult, resolved_log_every
from .tuners import Law

MANIFEST = "manifest.txt"
_RESERVED = ("manifest.", "summary.")


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def trajectory_file(law: Law, draw: int) -> str:
    return f"{law.value}_draw{draw:03d}.csv"


def band_file(law: Law) -> str:
    return f"band_{law.value}.csv"


def _vec_cols(name, arr):
    arr = np.asarray(arr)
    return [(f"{name}_{i + 1}", arr[:, i]) for i in range(arr.shape[1])]


def trajectory_table(traj) -> list[tuple[str, np.ndarray]]:
    """Ordered ``(column, values)`` pairs of one trajectory."""
    c = traj.columns
    e_y = c["e_y"] if traj.model == "regression" else c["ePb"]
    cols = [("t", traj.t), ("e_y", e_y)]
    cols += _vec_cols("theta", c["theta"])
    if "vartheta" in c:
        cols += _vec_cols("vartheta", c["vartheta"])
    if "theta_dot" in c:
        cols += _vec_cols("theta_dot", c["theta_dot"])
    cols += _vec_cols("phi", c["phi"])
    for key in ("V", "V_rate_bound"):
        if key in c:
            cols.append((key, c[key]))
    cols.append(("regret", c["regret"]))
    if traj.model == "mrac":
        cols += _vec_cols("e", c["e"]) + _vec_cols("x", c["x"]) + _vec_cols("xhat", c["xhat"])
        cols += [("u", c["u"]), ("z_cmd", c["z_cmd"])]
    return cols


def write_csv(path: Path, cols: list[tuple[str, np.ndarray]]) -> None:
    header = ",".join(name for name, _ in cols)
    data = np.column_stack([np.asarray(v, dtype=float) for _, v in cols])
    lines = [header] + [",".join("%.17g" % x for x in row) for row in data]
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Read a run CSV, checking the header, finiteness and strictly increasing time."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CorruptCsv(f"{path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CorruptCsv(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "t":
        raise CorruptCsv(f"{path}: first column must be 't'")
    try:
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise CorruptCsv(f"{path}: {exc}") from None
    data = data.reshape(-1, len(header))
    if data.shape[0] == 0:
        raise CorruptCsv(f"{path}: no rows")
    if not np.all(np.isfinite(data)):
        raise CorruptCsv(f"{path}: non-finite values")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise CorruptCsv(f"{path}: t is not strictly increasing")
    return {name: data[:, i] for i, name in enumerate(header)}


def stacked(cols: dict, name: str) -> np.ndarray | None:
    """Gather ``name_1 .. name_k`` columns into a (K, k) array."""
    keys = []
    i = 1
    while f"{name}_{i}" in cols:
        keys.append(f"{name}_{i}")
        i += 1
    if not keys:
        return None
    return np.column_stack([cols[k] for k in keys])


def resolved_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Config with its step-count dependent defaults materialized.

    ``tuner.mu`` stays ``auto`` because its value depends on the model (and,
    for MRAC, on each draw); the resolved values go to the summary.
    """
    from dataclasses import replace

    C = cfg.wibisono_C if cfg.wibisono_C is not None else cfg.gamma * cfg.beta / cfg.wibisono_p**2
    return replace(cfg, log_every=resolved_log_every(cfg), wibisono_C=C)


def manifest_text(result: ScenarioResult, version: str) -> str:
    cfg = resolved_config(result.config)
    lines = [cfg.to_text().rstrip("\n")]
    lines.append(f"manifest.version = {version}")
    lines.append(f"manifest.scenario = {cfg.name}")
    lines.append(f"manifest.seed = {cfg.seed}")
    lines.append(f"manifest.rng = PCG64")
    lines.append(f"manifest.rejections = {result.draws.rejections}")
    for b, ts in enumerate(result.draws.theta_star):
        lines.append(f"manifest.draw{b:03d}.theta_star = " + ", ".join(fmt(x) for x in ts))
        if result.draws.scale is not None:
            lines.append(f"manifest.draw{b:03d}.W = {fmt(result.draws.scale[b])}")
    for law in cfg.laws:
        pre = f"summary.{law.value}"
        lines.append(f"{pre}.law = {law.label}")
        lines.append(f"{pre}.stable = {fmt(result.stable(law))}")
        lines.append(f"{pre}.band = {band_file(law) if result.bands[law] is not None else 'none'}")
        for b, (s, tr) in enumerate(zip(result.summaries[law], result.trajectories[law])):
            d = f"{pre}.draw{b:03d}"
            lines.append(f"{d}.file = {trajectory_file(law, b)}")
            lines.append(f"{d}.status = {s.status.value}")
            lines.append(f"{d}.final_regret = {fmt(s.final_regret)}")
            lines.append(f"{d}.V0 = {fmt(s.V0)}")
            lines.append(f"{d}.time_to_tol = {fmt(s.time_to_tol)}")
            lines.append(f"{d}.oscillations = {fmt(s.oscillations)}")
            lines.append(f"{d}.diverged_at = {fmt(s.diverged_at)}")
            lines.append(f"{d}.mu = {fmt(tr.tuner.mu)}")
    return "\n".join(lines) + "\n"


def write_run(result: ScenarioResult, out_dir, version: str) -> Path:
    """Write every CSV and then the manifest into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
        for law, trajs in result.trajectories.items():
            for tr in trajs:
                write_csv(out / trajectory_file(law, tr.draw), trajectory_table(tr))
            band = result.bands[law]
            if band is not None:
                t, q = band
                write_csv(out / band_file(law), [("t", t), ("lo", q[0]), ("median", q[1]), ("hi", q[2])])
        (out / MANIFEST).write_text(manifest_text(result, version))
    except OSError as exc:
        raise UnwritableOutput(f"cannot write to {out}: {exc}") from None
    return out


def config_from_pairs(pairs: dict[str, str]) -> ScenarioConfig:
    """Scenario config from ``key = value`` pairs, ignoring manifest and summary entries."""
    pairs = {k: v for k, v in pairs.items() if not k.startswith(_RESERVED)}
    if "name" not in pairs:
        raise ConfigError("config is missing 'name'")
    return ScenarioConfig(name=pairs["name"]).with_overrides(pairs)


def load_config_file(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return config_from_pairs(parse_key_values(text))


def read_manifest(run_dir) -> dict[str, str]:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise MissingManifest(f"no {MANIFEST} in {run_dir}")
    try:
        return parse_key_values(path.read_text())
    except ConfigError as exc:
        raise MissingManifest(f"unreadable manifest: {exc}") from None


def draw_status(manifest: dict, law: Law, b: int) -> Status:
    return Status(manifest[f"summary.{law.value}.draw{b:03d}.status"])
