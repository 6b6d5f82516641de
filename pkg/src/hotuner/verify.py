"""
Re-check diagnostic invariants on a written run directory.

Every check yields one of ``pass``, ``FAIL`` or ``NotApplicable`` per
trajectory; results are aggregated per (check, law) with the worst margin.
A margin is the largest amount by which the checked quantity exceeds its
allowance, so non-positive margins pass.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import fd_rate_violation, monotonicity_violation
from .errors import GridTooCoarse
from .integrator import Status
from .output import read_csv, read_manifest, config_from_pairs, stacked, trajectory_file, draw_status
from .scenarios import build_command, build_feature
from .signals import StepFeature
from .tuners import Law, second_order_form_check

PASS, FAIL, NA = "pass", "FAIL", "NotApplicable"

MONOTONE_SLACK = 1e-6
RATE_SLACK = 1e-4
REGRET_SLACK = 1e-9
RESIDUAL_TOL = 1e-3
RESIDUAL_MAX_SPACING = 1e-4


@dataclass
class CheckResult:
    check: str
    law: Law
    outcome: str
    margin: float | None = None
    note: str = ""


def _scaled(values, V0):
    return values * (1.0 + abs(V0))


def _discontinuities(cfg) -> list[float]:
    if cfg.model == "mrac":
        return [build_command(cfg).onset]
    f = build_feature(cfg)
    return list(f.times) if isinstance(f, StepFeature) else []


def check_trajectory(cfg, law: Law, status: Status, cols: dict, mu: float | None) -> list[CheckResult]:
    out = []
    certified = "V" in cols and "V_rate_bound" in cols
    completed = status is Status.COMPLETED

    def na(name, why):
        out.append(CheckResult(name, law, NA, note=why))

    def judged(name, margin):
        out.append(CheckResult(name, law, PASS if margin <= 0 else FAIL, margin))

    if not completed:
        why = "draw diverged"
    elif not certified:
        why = "no certified Lyapunov rate for this law or normalization"
    else:
        why = ""

    t = cols["t"]
    regret = cols["regret"]
    if why:
        for name in ("lyapunov-monotone", "lyapunov-rate-fd", "regret-bound"):
            na(name, why)
    else:
        V = cols["V"]
        V0 = V[0]
        judged("lyapunov-monotone", monotonicity_violation(V, MONOTONE_SLACK * (1 + V0)))
        if cfg.log_every == 1:
            judged("lyapunov-rate-fd", fd_rate_violation(t, V, cols["V_rate_bound"], RATE_SLACK,
                                                          exclude_times=_discontinuities(cfg)))
        else:
            na("lyapunov-rate-fd", "log spacing coarser than the integration step")
        judged("regret-bound", float(regret[-1] - V0 - REGRET_SLACK * (1 + V0)))
    if completed:
        judged("regret-nondecreasing", float(0.0 - np.min(np.diff(regret), initial=0.0)))
    else:
        na("regret-nondecreasing", "draw diverged")

    # second-order form of the two-stage law
    if law is not Law.HIGHER_ORDER or cfg.model != "regression":
        na("second-order-form", "defined here for the higher-order regression law")
    elif not completed:
        na("second-order-form", "draw diverged")
    elif len(t) < 2 or (t[1] - t[0]) > RESIDUAL_MAX_SPACING * (1 + 1e-9):
        na("second-order-form", "log spacing coarser than 1e-4")
    else:
        out.append(_second_order(cfg, law, t, cols, mu))

    na("beta-limit", "needs runs at several beta values")
    return out


def _second_order(cfg, law, t, cols, mu) -> CheckResult:
    from .scenarios import tuner_config

    tuner = tuner_config(cfg, law).resolved(mu)
    feature = build_feature(cfg)
    theta = stacked(cols, "theta")
    phi = stacked(cols, "phi")
    phi_dot = feature.rate(t)
    cuts = np.searchsorted(t, _discontinuities(cfg))
    # residual on each smooth segment, keeping two samples clear of a jump
    bounds = [0, *cuts, len(t)]
    worst = 0.0
    used = False
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        lo, hi = lo + 2 if lo > 0 else lo, hi - 2 if hi < len(t) else hi
        if hi - lo < 5:
            continue
        s = slice(lo, hi)
        try:
            r = second_order_form_check(tuner, t[s], theta[s], phi[s], phi_dot[s], cols["e_y"][s])
        except GridTooCoarse:
            continue
        worst = max(worst, r)
        used = True
    if not used:
        return CheckResult("second-order-form", law, NA, note="no smooth segment long enough")
    margin = worst - RESIDUAL_TOL
    return CheckResult("second-order-form", law, PASS if margin <= 0 else FAIL, margin)


def verify_run(run_dir) -> list[CheckResult]:
    manifest = read_manifest(run_dir)
    cfg = config_from_pairs(manifest)
    results = []
    for law in cfg.laws:
        for b in range(cfg.draws):
            status = draw_status(manifest, law, b)
            cols = read_csv(Path(run_dir) / trajectory_file(law, b))
            mu_text = manifest.get(f"summary.{law.value}.draw{b:03d}.mu", "none")
            mu = None if mu_text == "none" else float(mu_text)
            results += check_trajectory(cfg, law, status, cols, mu)
    return results


def aggregate(results: list[CheckResult]) -> list[CheckResult]:
    """One row per (check, law): FAIL beats pass beats NotApplicable."""
    rank = {FAIL: 2, PASS: 1, NA: 0}
    rows: dict = {}
    for r in results:
        key = (r.check, r.law)
        cur = rows.get(key)
        if cur is None:
            rows[key] = CheckResult(r.check, r.law, r.outcome, r.margin, r.note)
            continue
        if rank[r.outcome] > rank[cur.outcome]:
            cur.outcome, cur.note = r.outcome, r.note
        if r.margin is not None:
            cur.margin = r.margin if cur.margin is None else max(cur.margin, r.margin)
    return list(rows.values())


def run_dirs(path) -> list[Path]:
    """The run directory itself, or its immediate sub-directories holding manifests (families)."""
    path = Path(path)
    if (path / "manifest.txt").is_file():
        return [path]
    subs = sorted(p for p in path.iterdir() if (p / "manifest.txt").is_file()) if path.is_dir() else []
    return subs or [path]
