"""Config-driven experiment runner producing machine-readable report rows."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bddc import Recipe, build_bddc, compute_weights, WEIGHT_MODES
from .krylov import pcg
from .mesh import assemble, build_mesh
from .partition import (
    classify_objects,
    count_coarse_dofs,
    partition_uniform,
    refine_by_coefficient,
    refine_uniform,
)
from .problems import ChannelSpec, make_channels, make_constant

CSV_COLUMNS = (
    "mesh",
    "subdomains",
    "split",
    "precond",
    "recipe",
    "weighting",
    "dofs",
    "coarse_size",
    "iters",
    "kappa",
    "setup_s",
    "solve_s",
    "converged",
)


class ExperimentError(RuntimeError):
    def __init__(self, phase: str, err: Exception):
        super().__init__(f"phase '{phase}': {err}")
        self.phase = phase
        self.cause = err


@dataclass(frozen=True)
class ExperimentConfig:
    subdomains: tuple
    mesh: tuple = ()
    preconditioner: str = "bddc"  # "bddc" | "bddc-so"
    split: object = 1  # int or "coefficient" (bddc-so only)
    coefficient: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    recipe: str = "vef"
    weighting: str = "counting"
    tol: float = 1e-6
    max_iters: int = 2000
    solve: bool = True
    label: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "mesh",
            "subdomains",
            "preconditioner",
            "split",
            "coefficient",
            "recipe",
            "weighting",
            "tol",
            "max_iters",
            "solve",
            "label",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "mesh" in kwargs:
            kwargs["mesh"] = tuple(int(c) for c in kwargs["mesh"])
        kwargs["subdomains"] = tuple(int(s) for s in kwargs["subdomains"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        if self.preconditioner not in ("bddc", "bddc-so"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.weighting not in WEIGHT_MODES:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        Recipe.parse(self.recipe)
        if self.split != "coefficient":
            if int(self.split) < 1:
                raise ValueError("split must be a positive integer or 'coefficient'")
        kind = self.coefficient.get("kind")
        if kind not in ("constant", "channels"):
            raise ValueError(f"unknown coefficient kind {kind!r}")
        if self.solve and not self.mesh:
            raise ValueError("a mesh is required unless solve is disabled")
        if self.mesh:
            if len(self.mesh) != len(self.subdomains):
                raise ValueError("mesh and subdomain grids must have the same dimension")
            for cells, subs in zip(self.mesh, self.subdomains):
                if cells % subs != 0:
                    raise ValueError(
                        f"{subs} subdomains do not divide {cells} cells"
                    )
                block = cells // subs
                if self.effective_split != "coefficient" and block % int(self.effective_split) != 0:
                    raise ValueError(
                        f"split {self.split} does not divide the subdomain size {block}"
                    )

    @property
    def effective_split(self):
        if self.preconditioner == "bddc":
            return 1
        return self.split

    def coefficient_field(self, mesh):
        kind = self.coefficient["kind"]
        if kind == "constant":
            return make_constant(mesh, float(self.coefficient.get("value", 1.0)))
        spec = ChannelSpec(
            contrast_exponent=float(self.coefficient["exponent"]),
            cross_section=int(self.coefficient.get("cross_section", 3)),
            bars_per_subdomain=int(self.coefficient.get("bars_per_subdomain", 1)),
            axis=int(self.coefficient.get("axis", 0)),
        )
        return make_channels(mesh, self.subdomains, spec)


@dataclass
class ReportRow:
    mesh: str
    subdomains: str
    split: str
    precond: str
    recipe: str
    weighting: str
    dofs: object
    coarse_size: object
    iters: object
    kappa: object
    setup_s: object
    solve_s: object
    converged: object

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def _grid_str(grid) -> str:
    return "x".join(str(g) for g in grid)


def run(config: ExperimentConfig) -> ReportRow:
    """Execute the full pipeline for one configuration and return its row."""
    config.validate()
    split_label = str(config.effective_split)

    if not config.solve:
        def phase_count():
            split = config.effective_split
            if split == "coefficient":
                raise ValueError("count-only rows require a uniform split")
            return count_coarse_dofs(config.subdomains, int(split), config.recipe)

        coarse = _phase("count", phase_count)
        dofs = int(np.prod([c - 1 for c in config.mesh])) if config.mesh else None
        return ReportRow(
            mesh=_grid_str(config.mesh) if config.mesh else "",
            subdomains=_grid_str(config.subdomains),
            split=split_label,
            precond=config.preconditioner,
            recipe=config.recipe,
            weighting=config.weighting,
            dofs=dofs,
            coarse_size=coarse,
            iters=None,
            kappa=None,
            setup_s=None,
            solve_s=None,
            converged=None,
        )

    t0 = time.perf_counter()
    mesh = _phase("mesh", lambda: build_mesh(len(config.mesh), config.mesh))
    coeff = _phase("coefficient", lambda: config.coefficient_field(mesh))
    theta = _phase("partition", lambda: partition_uniform(mesh, config.subdomains))

    def phase_refine():
        split = config.effective_split
        if split == "coefficient":
            return refine_by_coefficient(mesh, theta, coeff)
        return refine_uniform(mesh, theta, int(split))

    pair = _phase("refine", phase_refine)
    system = _phase("assemble", lambda: assemble(mesh, coeff, 1.0))
    objects = _phase("classify", lambda: classify_objects(pair))
    weights = _phase(
        "weights", lambda: compute_weights(pair, config.weighting, coeff)
    )
    op = _phase(
        "build", lambda: build_bddc(system, pair, objects, config.recipe, weights)
    )

    split = config.effective_split
    if split != "coefficient":
        block = min(
            c // s for c, s in zip(config.mesh, config.subdomains)
        ) // int(split)
        if block >= 2:
            expected = count_coarse_dofs(config.subdomains, int(split), config.recipe)
            if op.coarse_size != expected:
                raise ExperimentError(
                    "build",
                    AssertionError(
                        f"coarse size {op.coarse_size} disagrees with the "
                        f"combinatorial count {expected}"
                    ),
                )
    setup_s = time.perf_counter() - t0

    t1 = time.perf_counter()
    A = system.matrix.tocsr()
    _, report = _phase(
        "solve",
        lambda: pcg(
            lambda v: A @ v, op.apply, system.rhs, tol=config.tol, max_iters=config.max_iters
        ),
    )
    solve_s = time.perf_counter() - t1

    return ReportRow(
        mesh=_grid_str(config.mesh),
        subdomains=_grid_str(config.subdomains),
        split=split_label,
        precond=config.preconditioner,
        recipe=config.recipe,
        weighting=config.weighting,
        dofs=mesh.free_count,
        coarse_size=op.coarse_size,
        iters=report.iterations,
        kappa=report.kappa_estimate,
        setup_s=setup_s,
        solve_s=solve_s,
        converged=report.converged,
    )


def _phase(name, fn):
    try:
        return fn()
    except ExperimentError:
        raise
    except Exception as err:
        raise ExperimentError(name, err) from err


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _round_floats(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    return value


def emit_report(rows: Sequence[ReportRow], fmt: str = "csv", path=None) -> str:
    """Serialize rows with a stable column order; optionally write to path."""
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            lines.append(",".join(_format_value(v) for v in row.as_dict().values()))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = [
            {k: _round_floats(v) for k, v in row.as_dict().items()} for row in rows
        ]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
