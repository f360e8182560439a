"""Command-line experiment driver.

Exit codes: 0 when every solve converged, 2 when some run did not converge,
1 on configuration or solver errors.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

import yaml

from .experiments import ExperimentConfig, ExperimentError, emit_report, run
from .partition import count_coarse_dofs


def _load_preset(name: str) -> dict:
    filename = name if name.endswith(".yaml") else f"{name}.yaml"
    ref = resources.files("bddcso") / "presets" / filename
    if not ref.is_file():
        available = sorted(
            p.name.removesuffix(".yaml")
            for p in (resources.files("bddcso") / "presets").iterdir()
        )
        raise FileNotFoundError(f"unknown preset {name!r}; available: {available}")
    return yaml.safe_load(ref.read_text())


def _parse_grid(text: str):
    parts = text.replace(",", "x").split("x")
    return tuple(int(p) for p in parts)


def _configs_from_document(doc, overrides) -> list:
    entries = doc["runs"] if isinstance(doc, dict) else doc
    configs = []
    for entry in entries:
        data = dict(entry)
        data.update(overrides)
        configs.append(ExperimentConfig.from_dict(data))
    return configs


def _execute(configs, fmt, out) -> int:
    rows = []
    for config in configs:
        rows.append(run(config))
    text = emit_report(rows, fmt=fmt, path=out)
    sys.stdout.write(text)
    solved = [r for r in rows if r.converged is not None]
    if any(not r.converged for r in solved):
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bddcso",
        description="BDDC / BDDC with subobject constraints experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="relative residual tolerance")
    common.add_argument("--max-iters", type=int, default=None, help="PCG iteration cap")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="write the report to this path")

    p_run = sub.add_parser("run", parents=[common], help="run the experiments in a config file")
    p_run.add_argument("config", help="YAML config: a run dict or a list under 'runs'")

    p_preset = sub.add_parser("preset", parents=[common], help="run a packaged preset")
    p_preset.add_argument("name", help="preset name, e.g. table1-desk")

    p_count = sub.add_parser("count", help="coarse-space size of a uniform split")
    p_count.add_argument("grid", help="subdomain grid, e.g. 10x10x10")
    p_count.add_argument("split", type=int, help="uniform subsubdomain split per axis")
    p_count.add_argument("recipe", help="object kinds, letters from 'vef'")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "count":
            print(count_coarse_dofs(_parse_grid(args.grid), args.split, args.recipe))
            return 0

        overrides = {}
        if args.tol is not None:
            overrides["tol"] = args.tol
        if args.max_iters is not None:
            overrides["max_iters"] = args.max_iters

        if args.command == "run":
            with open(args.config) as fh:
                doc = yaml.safe_load(fh)
            if isinstance(doc, dict) and "runs" not in doc:
                doc = [doc]
        else:
            doc = _load_preset(args.name)
        configs = _configs_from_document(doc, overrides)
        return _execute(configs, args.format, args.out)
    except (ExperimentError, ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
