"""Coefficient-field generators: constant background and straight channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import CoefficientField, StructuredMesh


@dataclass(frozen=True)
class ChannelSpec:
    """Family of straight high-coefficient bars, one group per subdomain.

    contrast_exponent: channel coefficient is 10**contrast_exponent, background 1.
    cross_section: bar thickness in cells per transverse axis.
    bars_per_subdomain: bars per subdomain, spaced along the first transverse axis.
    axis: the axis the bars run along.
    """

    contrast_exponent: float
    cross_section: int = 3
    bars_per_subdomain: int = 1
    axis: int = 0

    def __post_init__(self):
        if self.cross_section < 1:
            raise ValueError("cross_section must be at least one cell")
        if self.bars_per_subdomain < 1:
            raise ValueError("bars_per_subdomain must be at least one")


def make_constant(mesh: StructuredMesh, value: float) -> CoefficientField:
    """Constant coefficient field."""
    if value <= 0.0:
        raise ValueError(f"coefficient must be positive, got {value}")
    return CoefficientField(np.full(mesh.cell_count, float(value)))


def make_channels(
    mesh: StructuredMesh, subdomains_per_dim: Sequence[int], spec: ChannelSpec
) -> CoefficientField:
    """Background 1 with axis-aligned bars of coefficient 10**exponent.

    Bars run the full domain length along spec.axis; each subdomain block gets
    bars centered in its transverse cross-section, so the placement is
    deterministic and every subdomain meets a channel.
    """
    subs = tuple(int(s) for s in subdomains_per_dim)
    if len(subs) != mesh.dim:
        raise ValueError(f"expected {mesh.dim} subdomain counts, got {len(subs)}")
    axis = spec.axis
    if not 0 <= axis < mesh.dim:
        raise ValueError(f"axis {axis} out of range for dim {mesh.dim}")
    transverse = [d for d in range(mesh.dim) if d != axis]
    blocks = {}
    for d in transverse:
        if mesh.cells_per_dim[d] % subs[d] != 0:
            raise ValueError(
                f"{subs[d]} subdomains do not divide {mesh.cells_per_dim[d]} cells on axis {d}"
            )
        blocks[d] = mesh.cells_per_dim[d] // subs[d]
        if spec.cross_section > blocks[d]:
            raise ValueError(
                f"cross-section {spec.cross_section} exceeds subdomain size "
                f"{blocks[d]} on axis {d}"
            )

    # bar start offsets inside a block: evenly placed along the first
    # transverse axis, centered on the remaining one(s)
    nbars = spec.bars_per_subdomain
    first = transverse[0]
    starts_first = []
    for t in range(nbars):
        center = (t + 1) * blocks[first] // (nbars + 1)
        start = center - spec.cross_section // 2
        start = min(max(start, 0), blocks[first] - spec.cross_section)
        starts_first.append(start)
    if len(set(starts_first)) != nbars or (
        nbars > 1
        and min(np.diff(sorted(starts_first))) < spec.cross_section
    ):
        raise ValueError("bars overlap; reduce bars_per_subdomain or cross_section")

    multi = mesh.cell_multi_indices()
    in_channel = np.zeros(mesh.cell_count, dtype=bool)
    for start in starts_first:
        sel = np.ones(mesh.cell_count, dtype=bool)
        for d in transverse:
            local = multi[:, d] % blocks[d]
            if d == first:
                lo = start
            else:
                lo = (blocks[d] - spec.cross_section) // 2
            sel &= (local >= lo) & (local < lo + spec.cross_section)
        in_channel |= sel

    alpha = np.ones(mesh.cell_count)
    alpha[in_channel] = 10.0**spec.contrast_exponent
    return CoefficientField(alpha)
