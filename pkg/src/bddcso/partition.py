"""Subdomain partitions, their refinements, and interface-object classification.

A partition pair couples the coarse subdomain partition with a refinement of
each subdomain into subsubdomains. Interface degrees of freedom are grouped
into objects (vertices, edges, faces) by their subsubdomain membership
signature; the objects carry the coarse constraints of the preconditioners.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage

from .mesh import CoefficientField, StructuredMesh


@dataclass(frozen=True)
class MembershipSets:
    """Per free DOF, the subdomains / subsubdomains whose closure contains it."""

    on_gamma: list  # sorted tuple of subdomain ids per free dof
    on_gamma_hat: list  # sorted tuple of subsubdomain ids per free dof
    gamma_dofs: np.ndarray  # free dofs with >= 2 subdomain members
    gamma_hat_dofs: np.ndarray  # free dofs with >= 2 subsubdomain members


@dataclass(frozen=True)
class InterfaceObject:
    id: int
    kind: str  # "vertex" | "edge" | "face"
    dofs: np.ndarray  # ascending free-dof indices
    signature: tuple  # shared subsubdomain membership
    owners: tuple  # subdomain ids (parents of the signature)


class PartitionPair:
    """Coarse partition theta and nested refinement theta_hat over mesh cells."""

    def __init__(
        self,
        mesh: StructuredMesh,
        theta: np.ndarray,
        theta_hat: np.ndarray,
        validate: bool = True,
    ):
        theta = np.asarray(theta, dtype=np.int64)
        theta_hat = np.asarray(theta_hat, dtype=np.int64)
        if theta.shape != (mesh.cell_count,) or theta_hat.shape != (mesh.cell_count,):
            raise ValueError("partition arrays must have one entry per cell")
        self.mesh = mesh
        self.theta = theta
        self.theta_hat = theta_hat
        self.subdomain_count = int(theta.max()) + 1
        self.subsubdomain_count = int(theta_hat.max()) + 1
        self.parent = _parent_map(theta, theta_hat, self.subsubdomain_count)
        if validate:
            self._validate()

    def _validate(self):
        for name, labels, count in (
            ("subdomain", self.theta, self.subdomain_count),
            ("subsubdomain", self.theta_hat, self.subsubdomain_count),
        ):
            sizes = np.bincount(labels, minlength=count)
            if np.any(sizes == 0):
                raise ValueError(f"{name} ids must be contiguous and nonempty")
            bad = _disconnected_parts(self.mesh, labels, count)
            if bad:
                raise ValueError(f"{name} {bad[0]} is not face-connected")

    @cached_property
    def membership(self) -> MembershipSets:
        on_gamma = _node_membership(self.mesh, self.theta)
        on_gamma_hat = _node_membership(self.mesh, self.theta_hat)
        gamma = np.array([d for d, s in enumerate(on_gamma) if len(s) >= 2], dtype=np.int64)
        gamma_hat = np.array(
            [d for d, s in enumerate(on_gamma_hat) if len(s) >= 2], dtype=np.int64
        )
        return MembershipSets(on_gamma, on_gamma_hat, gamma, gamma_hat)

    @cached_property
    def grounded_subdomains(self) -> np.ndarray:
        """Boolean mask of subdomains whose closure meets the Dirichlet boundary."""
        touches = np.zeros(self.subdomain_count, dtype=bool)
        cell_on_boundary = self.mesh.boundary_mask[self.mesh.cell_nodes].any(axis=1)
        touches[np.unique(self.theta[cell_on_boundary])] = True
        return touches


def _parent_map(theta, theta_hat, hat_count) -> np.ndarray:
    parent = np.full(hat_count, -1, dtype=np.int64)
    for hat, sub in zip(theta_hat, theta):
        if parent[hat] == -1:
            parent[hat] = sub
        elif parent[hat] != sub:
            raise ValueError(
                f"subsubdomain {hat} spans subdomains {parent[hat]} and {sub}"
            )
    return parent


def _disconnected_parts(mesh, labels, count) -> list:
    structure = ndimage.generate_binary_structure(mesh.dim, 1)
    grid = mesh.cells_grid(labels)
    bad = []
    for part in range(count):
        _, ncomp = ndimage.label(grid == part, structure=structure)
        if ncomp != 1:
            bad.append(part)
    return bad


def _node_membership(mesh, labels) -> list:
    """Sorted tuple of part ids adjacent to each free dof (via its cells)."""
    pairs_node = mesh.cell_nodes.ravel()
    pairs_part = np.repeat(labels, mesh.cell_nodes.shape[1])
    free = mesh.node_to_free[pairs_node]
    keep = free >= 0
    stacked = np.unique(np.stack([free[keep], pairs_part[keep]], axis=1), axis=0)
    members = [()] * mesh.free_count
    if len(stacked) == 0:
        return members
    dofs, starts = np.unique(stacked[:, 0], return_index=True)
    bounds = np.append(starts, len(stacked))
    for i, d in enumerate(dofs):
        members[d] = tuple(stacked[bounds[i] : bounds[i + 1], 1])
    return members


def partition_uniform(mesh: StructuredMesh, subdomains_per_dim: Sequence[int]) -> np.ndarray:
    """Block partition of the cell grid; subdomain ids are lexicographic."""
    subs = tuple(int(s) for s in subdomains_per_dim)
    if len(subs) != mesh.dim:
        raise ValueError(f"expected {mesh.dim} subdomain counts, got {len(subs)}")
    if any(s < 1 for s in subs):
        raise ValueError("subdomain counts must be positive")
    for d in range(mesh.dim):
        if mesh.cells_per_dim[d] % subs[d] != 0:
            raise ValueError(
                f"{subs[d]} subdomains do not divide {mesh.cells_per_dim[d]} cells on axis {d}"
            )
    blocks = [mesh.cells_per_dim[d] // subs[d] for d in range(mesh.dim)]
    multi = mesh.cell_multi_indices()
    theta = np.zeros(mesh.cell_count, dtype=np.int64)
    stride = 1
    for d in range(mesh.dim):
        theta += (multi[:, d] // blocks[d]) * stride
        stride *= subs[d]
    return theta


def _subdomain_boxes(mesh, theta):
    """Bounding cell box per subdomain; errors if a subdomain is not a full box."""
    multi = mesh.cell_multi_indices()
    count = int(theta.max()) + 1
    boxes = []
    for part in range(count):
        sel = multi[theta == part]
        lo = sel.min(axis=0)
        hi = sel.max(axis=0)
        if len(sel) != int(np.prod(hi - lo + 1)):
            raise ValueError(f"subdomain {part} is not a box; uniform refinement undefined")
        boxes.append((lo, hi))
    return boxes


def refine_uniform(mesh: StructuredMesh, theta: np.ndarray, split: int) -> PartitionPair:
    """Split every (box) subdomain into split^dim equal blocks."""
    split = int(split)
    if split < 1:
        raise ValueError("split must be a positive integer")
    theta = np.asarray(theta, dtype=np.int64)
    if split == 1:
        return PartitionPair(mesh, theta, theta.copy())
    multi = mesh.cell_multi_indices()
    boxes = _subdomain_boxes(mesh, theta)
    theta_hat = np.full(mesh.cell_count, -1, dtype=np.int64)
    next_id = 0
    for part, (lo, hi) in enumerate(boxes):
        size = hi - lo + 1
        if np.any(size % split != 0):
            raise ValueError(
                f"split {split} does not divide subdomain {part} of size {tuple(size)}"
            )
        block = size // split
        mask = theta == part
        local = (multi[mask] - lo) // block
        sub_id = np.zeros(len(local), dtype=np.int64)
        stride = 1
        for d in range(mesh.dim):
            sub_id += local[:, d] * stride
            stride *= split
        theta_hat[mask] = next_id + sub_id
        next_id += split**mesh.dim
    return PartitionPair(mesh, theta, theta_hat)


def refine_by_coefficient(
    mesh: StructuredMesh, theta: np.ndarray, coeff: CoefficientField
) -> PartitionPair:
    """Split each subdomain into face-connected components of equal coefficient."""
    theta = np.asarray(theta, dtype=np.int64)
    structure = ndimage.generate_binary_structure(mesh.dim, 1)
    theta_grid = mesh.cells_grid(theta)
    alpha_grid = mesh.cells_grid(coeff.alpha)
    theta_hat_grid = np.full(theta_grid.shape, -1, dtype=np.int64)
    next_id = 0
    for part in range(int(theta.max()) + 1):
        part_mask = theta_grid == part
        for value in np.unique(alpha_grid[part_mask]):
            mask = part_mask & (alpha_grid == value)
            comp, ncomp = ndimage.label(mask, structure=structure)
            for c in range(1, ncomp + 1):
                theta_hat_grid[comp == c] = next_id
                next_id += 1
    return PartitionPair(mesh, theta, theta_hat_grid.reshape(-1))


def classify_objects(pair: PartitionPair) -> list:
    """Group interface DOFs into objects by subsubdomain membership signature.

    Only DOFs on the coarse interface are classified. Kind assignment: a
    single-DOF class is a vertex; a two-subsubdomain class is a face in 3D and
    an edge in 2D; anything else is an edge. Objects are ordered by signature,
    then lowest DOF.
    """
    ms = pair.membership
    groups = {}
    for dof in ms.gamma_dofs:
        groups.setdefault(ms.on_gamma_hat[dof], []).append(int(dof))
    objects = []
    for signature in sorted(groups):
        dofs = np.array(sorted(groups[signature]), dtype=np.int64)
        if len(dofs) == 1:
            kind = "vertex"
        elif len(signature) == 2:
            kind = "face" if pair.mesh.dim == 3 else "edge"
        else:
            kind = "edge"
        owners = tuple(sorted(set(int(pair.parent[s]) for s in signature)))
        objects.append(
            InterfaceObject(
                id=len(objects), kind=kind, dofs=dofs, signature=signature, owners=owners
            )
        )
    return objects


def _kind_flags(recipe) -> dict:
    if hasattr(recipe, "selects"):
        return {k: recipe.selects(k) for k in ("vertex", "edge", "face")}
    letters = set(str(recipe))
    if not letters <= {"v", "e", "f"}:
        raise ValueError(f"unknown recipe {recipe!r}; use letters from 'vef'")
    return {"vertex": "v" in letters, "edge": "e" in letters, "face": "f" in letters}


def count_coarse_dofs(subdomains_per_dim: Sequence[int], split: int, recipe="vef") -> int:
    """Number of coarse-interface objects of a uniformly split box partition.

    Purely combinatorial: counts the vertices/edges/faces of the refined
    subsubdomain grid that lie on the coarse interface and inside the domain.
    Valid whenever every subsubdomain is at least 2 cells wide, so that each
    geometric entity carries at least one DOF.
    """
    subs = tuple(int(s) for s in subdomains_per_dim)
    split = int(split)
    if split < 1 or any(s < 1 for s in subs):
        raise ValueError("subdomain counts and split must be positive")
    flags = _kind_flags(recipe)
    dim = len(subs)
    m = [s * split for s in subs]  # subsubdomains per axis
    A = [mi - 1 for mi in m]  # interior fine planes per axis
    C = [s - 1 for s in subs]  # interior coarse planes per axis
    F = [a - c for a, c in zip(A, C)]  # interior fine-only planes

    total = 0
    if flags["vertex"]:
        total += int(np.prod(A)) - int(np.prod(F))
    if dim == 2:
        if flags["edge"]:
            total += m[0] * C[1] + m[1] * C[0]
    else:
        if flags["edge"]:
            for d in range(3):
                e, f = [ax for ax in range(3) if ax != d]
                total += m[d] * (A[e] * A[f] - F[e] * F[f])
        if flags["face"]:
            for d in range(3):
                e, f = [ax for ax in range(3) if ax != d]
                total += C[d] * m[e] * m[f]
    return total
