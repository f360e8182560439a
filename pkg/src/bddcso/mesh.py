"""Structured Q1 meshes on the unit box and stiffness assembly.

The mesh is a tensor-product grid of quadrilaterals (2D) or hexahedra (3D)
with multilinear elements and homogeneous Dirichlet conditions on the whole
boundary. Node numbering is lexicographic with the x index fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import SparseSym

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class StructuredMesh:
    dim: int
    cells_per_dim: tuple
    node_count: int
    cell_count: int
    cell_nodes: np.ndarray  # (cell_count, 2**dim)
    node_coords: np.ndarray  # (node_count, dim)
    spacings: tuple  # cell edge length per axis
    boundary_mask: np.ndarray  # (node_count,) bool
    free_nodes: np.ndarray  # node ids of interior nodes
    node_to_free: np.ndarray  # node id -> free dof index, -1 on the boundary

    @property
    def free_count(self) -> int:
        return len(self.free_nodes)

    def cell_multi_indices(self) -> np.ndarray:
        """Per-cell (ix, iy[, iz]) grid indices, shape (cell_count, dim)."""
        ids = np.arange(self.cell_count)
        out = np.empty((self.cell_count, self.dim), dtype=np.int64)
        for d in range(self.dim):
            out[:, d] = ids % self.cells_per_dim[d]
            ids = ids // self.cells_per_dim[d]
        return out

    def cells_grid(self, values: np.ndarray) -> np.ndarray:
        """Reshape a per-cell array onto the cell grid (reversed axis order)."""
        shape = tuple(reversed(self.cells_per_dim))
        return np.asarray(values).reshape(shape)


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise-constant diffusion coefficient, one positive value per cell."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if np.any(self.alpha <= 0.0):
            raise ValueError("diffusion coefficient must be positive on every cell")


@dataclass(frozen=True)
class AssembledSystem:
    mesh: StructuredMesh
    coeff: CoefficientField
    matrix: SparseSym  # over free dofs
    rhs: np.ndarray  # over free dofs
    free_dof_map: np.ndarray  # free dof index -> mesh node id


def build_mesh(dim: int, cells_per_dim: Sequence[int]) -> StructuredMesh:
    """Build a structured Q1 mesh of the unit box with the given cell counts."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    cells = tuple(int(c) for c in cells_per_dim)
    if len(cells) != dim:
        raise ValueError(f"expected {dim} cell counts, got {len(cells)}")
    if any(c < 1 for c in cells):
        raise ValueError(f"cells_per_dim must be positive, got {cells}")

    nodes_per_dim = tuple(c + 1 for c in cells)
    node_count = int(np.prod(nodes_per_dim))
    cell_count = int(np.prod(cells))
    spacings = tuple(1.0 / c for c in cells)

    # node grid indices, x fastest
    node_idx = np.arange(node_count)
    grid = np.empty((node_count, dim), dtype=np.int64)
    rem = node_idx
    for d in range(dim):
        grid[:, d] = rem % nodes_per_dim[d]
        rem = rem // nodes_per_dim[d]
    node_coords = grid * np.array(spacings)

    boundary_mask = np.zeros(node_count, dtype=bool)
    for d in range(dim):
        boundary_mask |= (grid[:, d] == 0) | (grid[:, d] == cells[d])
    free_nodes = np.where(~boundary_mask)[0]
    node_to_free = np.full(node_count, -1, dtype=np.int64)
    node_to_free[free_nodes] = np.arange(len(free_nodes))

    # base node of each cell, then tensor-ordered corner offsets
    strides = np.cumprod((1,) + nodes_per_dim[:-1])
    cell_idx = np.arange(cell_count)
    base = np.zeros(cell_count, dtype=np.int64)
    rem = cell_idx
    for d in range(dim):
        base += (rem % cells[d]) * strides[d]
        rem = rem // cells[d]
    corners = np.array(
        [sum(((c >> d) & 1) * strides[d] for d in range(dim)) for c in range(2**dim)],
        dtype=np.int64,
    )
    cell_nodes = base[:, None] + corners[None, :]

    return StructuredMesh(
        dim=dim,
        cells_per_dim=cells,
        node_count=node_count,
        cell_count=cell_count,
        cell_nodes=cell_nodes,
        node_coords=node_coords,
        spacings=spacings,
        boundary_mask=boundary_mask,
        free_nodes=free_nodes,
        node_to_free=node_to_free,
    )


def _element_stiffness_box(lengths: Sequence[float], alpha: float) -> np.ndarray:
    """Q1 Laplacian element matrix on a box with the given edge lengths.

    Uses the 2-point Gauss rule per direction, which is exact for the
    multilinear gradients with constant coefficient.
    """
    lengths = np.asarray(lengths, dtype=float)
    dim = len(lengths)
    m = 2**dim
    pts = np.array([0.5 - 0.5 / _SQRT3, 0.5 + 0.5 / _SQRT3])
    vol = float(np.prod(lengths))
    K = np.zeros((m, m))
    for q in range(m):
        xi = np.array([pts[(q >> d) & 1] for d in range(dim)])
        # gradient of each corner shape function at xi, scaled to physical coords
        G = np.empty((m, dim))
        for c in range(m):
            for d in range(dim):
                g = 1.0
                for e in range(dim):
                    bit = (c >> e) & 1
                    if e == d:
                        g *= 1.0 if bit else -1.0
                    else:
                        g *= xi[e] if bit else 1.0 - xi[e]
                G[c, d] = g / lengths[d]
        K += (vol / m) * (G @ G.T)
    K = 0.5 * (K + K.T)
    return alpha * K


def element_stiffness(dim: int, h: float, alpha: float) -> np.ndarray:
    """Q1 Laplacian element matrix for a cubic cell of edge length h."""
    if h <= 0.0:
        raise ValueError("cell edge length must be positive")
    if alpha <= 0.0:
        raise ValueError("coefficient must be positive")
    return _element_stiffness_box((h,) * dim, alpha)


def assemble_cells(
    mesh: StructuredMesh,
    coeff: CoefficientField,
    cells: np.ndarray,
    keep_nodes: np.ndarray,
) -> SparseSym:
    """Assemble the stiffness contribution of the given cells.

    Rows/columns are restricted to keep_nodes (the local numbering follows the
    order of keep_nodes); contributions to dropped nodes are eliminated
    symmetrically, which realizes homogeneous Dirichlet conditions.
    """
    cells = np.asarray(cells)
    keep_nodes = np.asarray(keep_nodes)
    lookup = np.full(mesh.node_count, -1, dtype=np.int64)
    lookup[keep_nodes] = np.arange(len(keep_nodes))

    K = _element_stiffness_box(mesh.spacings, 1.0)
    conn = lookup[mesh.cell_nodes[cells]]  # (nc, m) local ids, -1 dropped
    nc, m = conn.shape
    data = coeff.alpha[cells][:, None, None] * K[None, :, :]
    rows = np.broadcast_to(conn[:, :, None], (nc, m, m))
    cols = np.broadcast_to(conn[:, None, :], (nc, m, m))
    mask = (rows >= 0) & (cols >= 0) & (rows <= cols)
    return SparseSym.from_upper_triplets(
        len(keep_nodes), rows[mask], cols[mask], data[mask]
    )


def assemble(mesh: StructuredMesh, coeff: CoefficientField, f: float = 1.0) -> AssembledSystem:
    """Assemble the Dirichlet-eliminated stiffness matrix and constant-source load."""
    if len(coeff.alpha) != mesh.cell_count:
        raise ValueError(
            f"coefficient has {len(coeff.alpha)} values for {mesh.cell_count} cells"
        )
    cells = np.arange(mesh.cell_count)
    matrix = assemble_cells(mesh, coeff, cells, mesh.free_nodes)

    # consistent load for constant f: per node, f * (adjacent cell volume) / 2^dim
    vol = float(np.prod(mesh.spacings))
    counts = np.bincount(mesh.cell_nodes.ravel(), minlength=mesh.node_count)
    load = f * vol / (2**mesh.dim) * counts
    rhs = load[mesh.free_nodes]

    return AssembledSystem(
        mesh=mesh,
        coeff=coeff,
        matrix=matrix,
        rhs=rhs,
        free_dof_map=mesh.free_nodes.copy(),
    )
