"""Command-line scenario runner.

Verbs: `run <config>` executes a scenario and writes its artifacts,
`validate <config>` resolves and checks a configuration without running,
`list-scenarios` prints the catalogue.  No environment variables are read.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .core import dump_config, mapping_from_scenario_config
from .scenarios import list_scenarios, resolve_config_text, run_scenario


def _load(path: str):
    with open(path) as fh:
        return resolve_config_text(fh.read())


def _apply_overrides(cfg, args):
    updates = {}
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.snapshot_stride is not None:
        updates["snapshot_stride"] = args.snapshot_stride
    return replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg, inferred = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    manifest = run_scenario(cfg, inferred)
    print(f"scenario {manifest.scenario} finished in {manifest.duration_s:.2f} s")
    for entry in manifest.files:
        print(f"  {entry['name']}: {entry['rows']} rows")
    print(f"  manifest.json in {cfg.out_dir}")
    return 0


def _cmd_validate(args) -> int:
    cfg, inferred = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    print(f"configuration OK: scenario {cfg.scenario}")
    resolved = mapping_from_scenario_config(cfg)
    body = dump_config(resolved)
    for line in body.strip().splitlines():
        key = line.split("=", 1)[0].strip()
        marker = "  # inferred default" if inferred.get(key) else ""
        print(f"  {line}{marker}")
    return 0


def _cmd_list(_args) -> int:
    for name, description in list_scenarios():
        print(f"{name}: {description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solsim",
        description="Bright-soliton collision simulations: mean-field, two-mode "
                    "quantum dynamics, fragmentation and collision kinematics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario configuration")
    run_p.add_argument("config", help="path to a key = value configuration file")
    validate_p = sub.add_parser("validate", help="resolve and check a configuration")
    validate_p.add_argument("config", help="path to a key = value configuration file")
    for p in (run_p, validate_p):
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--threads", type=int, help="worker threads for Q-function grids")
        p.add_argument("--snapshot-stride", type=int, dest="snapshot_stride",
                       help="store every k-th mean-field frame")
    sub.add_parser("list-scenarios", help="print the scenario catalogue")

    run_p.set_defaults(fn=_cmd_run)
    validate_p.set_defaults(fn=_cmd_validate)
    sub.choices["list-scenarios"].set_defaults(fn=_cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
