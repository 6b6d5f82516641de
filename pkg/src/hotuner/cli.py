"""
Command-line front end.

    hotuner list
    hotuner run <scenario | config file> [--draws N] [--seed S] [--beta B]
                [--gamma G] [--mu M] [--step H] [--horizon T] [--laws fo,ho]
                [--set key=value ...] [--out DIR]
    hotuner verify <run dir>

User scenario files (``*.cfg``, flat ``key = value`` text) are picked up
from the directory named by ``HOTUNER_SCENARIOS``.
"""

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .config import FLAG_KEYS, ScenarioConfig
from .errors import ConfigError, HotunerError
from .output import load_config_file, write_run
from .scenarios import builtin_scenarios, family_members, find_scenario, run_scenario
from .verify import FAIL, aggregate, run_dirs, verify_run

ENV_SCENARIOS = "HOTUNER_SCENARIOS"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def user_scenarios() -> list[ScenarioConfig]:
    root = os.environ.get(ENV_SCENARIOS)
    if not root:
        return []
    path = Path(root)
    if not path.is_dir():
        raise ConfigError(f"{ENV_SCENARIOS}={root} is not a directory")
    return [load_config_file(p) for p in sorted(path.glob("*.cfg"))]


def cmd_list(out=None) -> int:
    out = out or sys.stdout
    for cfg in builtin_scenarios() + user_scenarios():
        print(f"{cfg.name:<16} {cfg.description}", file=out)
        for member in family_members(cfg) if cfg.family else []:
            print(f"  {member.name:<28} {member.description}", file=out)
    return EXIT_OK


def resolve_scenario(spec: str) -> ScenarioConfig:
    path = Path(spec)
    if path.is_file():
        return load_config_file(path)
    return find_scenario(spec, user_scenarios())


def cmd_run(spec: str, overrides: dict, out_dir, out=None) -> int:
    out = out or sys.stdout
    cfg = resolve_scenario(spec).with_overrides(overrides)
    out_dir = Path(out_dir) if out_dir is not None else Path("runs") / cfg.name
    members = family_members(cfg)
    for member in members:
        target = out_dir / member.name if cfg.family else out_dir
        result = run_scenario(member)
        write_run(result, target, __version__)
        for law in member.laws:
            n_div = sum(s.status.value == "Diverged" for s in result.summaries[law])
            print(f"{member.name} {law.label}: {member.draws - n_div}/{member.draws} completed", file=out)
        print(f"wrote {target}", file=out)
    return EXIT_OK


def cmd_verify(run_dir, out=None) -> int:
    out = out or sys.stdout
    ok = True
    for d in run_dirs(run_dir):
        rows = aggregate(verify_run(d))
        print(f"== {d}", file=out)
        for r in rows:
            margin = "" if r.margin is None else f"margin={r.margin:.3e}"
            print(f"{r.check:<22} {r.law.label:<17} {r.outcome:<14} {margin} {r.note}".rstrip(), file=out)
            ok &= r.outcome != FAIL
    print("all checks passed" if ok else "some checks FAILED", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hotuner", description="Higher-order tuner experiments.")
    p.add_argument("--version", action="version", version=f"hotuner {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios")
    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("scenario", help="scenario name or config file")
    for flag in FLAG_KEYS:
        run.add_argument(f"--{flag}", help=f"set {FLAG_KEYS[flag]}")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="set any config key")
    run.add_argument("--out", help="output directory (default runs/<scenario>)")
    ver = sub.add_parser("verify", help="re-check invariants on a run directory")
    ver.add_argument("dir")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list()
        if args.command == "run":
            overrides = {}
            for item in args.set:
                if "=" not in item:
                    raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
                key, value = item.split("=", 1)
                overrides[key.strip()] = value.strip()
            for flag, key in FLAG_KEYS.items():
                value = getattr(args, flag)
                if value is not None:
                    overrides[key] = value
            return cmd_run(args.scenario, overrides, args.out)
        return cmd_verify(args.dir)
    except HotunerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
