"""BDDC preconditioners with constraints on subdomain objects or subobjects.

The operator is assembled from independent subdomain pieces: a local Neumann
matrix per subdomain, a constraint matrix whose rows are point values on
vertex objects and arithmetic averages on edge/face objects, an
energy-minimal coarse basis obtained from constrained saddle solves, and a
weighting that averages duplicated interface values back to a continuous
function. Built on the refined partition with cardinality or
coefficient-scaled weights this yields the subobject variant; with the
trivial refinement and counting weights it is the standard method.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .linalg import (
    NotSpdError,
    SaddleFactorization,
    SparseSym,
    SpdFactorization,
    UnderconstrainedError,
    saddle_factor,
    spd_factor,
)
from .mesh import AssembledSystem, assemble_cells
from .partition import InterfaceObject, PartitionPair

WEIGHT_MODES = ("cardinality", "counting", "coefficient")


class RecipeError(ValueError):
    """Raised when a constraint recipe fails the sufficiency checks."""


@dataclass(frozen=True)
class Recipe:
    """Which object kinds receive a coarse constraint."""

    vertices: bool = False
    edges: bool = False
    faces: bool = False
    full_continuity: bool = False  # every interface DOF becomes a point constraint

    @classmethod
    def parse(cls, text: str) -> "Recipe":
        letters = set(text)
        if not letters <= {"v", "e", "f"}:
            raise ValueError(f"unknown recipe {text!r}; use letters from 'vef'")
        return cls(vertices="v" in letters, edges="e" in letters, faces="f" in letters)

    @classmethod
    def full(cls) -> "Recipe":
        return cls(vertices=True, edges=True, faces=True, full_continuity=True)

    def selects(self, kind: str) -> bool:
        if self.full_continuity:
            return True
        return {"vertex": self.vertices, "edge": self.edges, "face": self.faces}[kind]

    def __str__(self):
        if self.full_continuity:
            return "full"
        return "".join(
            c for c, on in zip("vef", (self.vertices, self.edges, self.faces)) if on
        ) or "none"


class WeightingOperator:
    """Interface averaging weights, one scalar per (subdomain, interface DOF).

    The weights form an exact partition of unity: they are kept as rationals
    internally and exposed as correctly rounded floats.
    """

    def __init__(self, mode, gamma_dofs, members, fractions):
        self.mode = mode
        self.gamma_dofs = gamma_dofs
        self._members = members  # dof -> tuple of subdomain ids
        self._fractions = fractions  # dof -> tuple of Fractions, aligned
        self._floats = {
            dof: np.array([float(f) for f in fr]) for dof, fr in fractions.items()
        }

    def members(self, dof: int) -> tuple:
        return self._members[dof]

    def weight_fraction(self, sub: int, dof: int) -> Fraction:
        mem = self._members[dof]
        if sub not in mem:
            raise KeyError(f"subdomain {sub} does not contain dof {dof}")
        return self._fractions[dof][mem.index(sub)]

    def weight(self, sub: int, dof: int) -> float:
        mem = self._members[dof]
        if sub not in mem:
            raise KeyError(f"subdomain {sub} does not contain dof {dof}")
        return float(self._floats[dof][mem.index(sub)])

    def weight_array(self, sub: int, dofs) -> np.ndarray:
        return np.array([self.weight(sub, d) for d in dofs])


def compute_weights(
    pair: PartitionPair, mode: str, coeff=None
) -> WeightingOperator:
    """Interface weights: cardinality over subsubdomains, counting over
    subdomains, or coefficient-scaled sums over subsubdomains."""
    if mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weighting mode {mode!r}; expected one of {WEIGHT_MODES}")
    ms = pair.membership

    alpha_hat = None
    if mode == "coefficient":
        if coeff is None:
            raise ValueError("coefficient-scaled weighting requires a coefficient field")
        alpha_hat = _constant_per_subsubdomain(pair, coeff)

    members = {}
    fractions = {}
    for dof in ms.gamma_dofs:
        dof = int(dof)
        subs = ms.on_gamma[dof]
        if mode == "counting":
            fr = tuple(Fraction(1, len(subs)) for _ in subs)
        else:
            hats = ms.on_gamma_hat[dof]
            if mode == "cardinality":
                contrib = {s: Fraction(0) for s in subs}
                for h in hats:
                    contrib[int(pair.parent[h])] += 1
                den = Fraction(len(hats))
            else:
                contrib = {s: Fraction(0) for s in subs}
                for h in hats:
                    contrib[int(pair.parent[h])] += Fraction(float(alpha_hat[h]))
                den = sum(contrib.values())
            fr = tuple(contrib[s] / den for s in subs)
        members[dof] = subs
        fractions[dof] = fr
    return WeightingOperator(mode, ms.gamma_dofs, members, fractions)


def _constant_per_subsubdomain(pair: PartitionPair, coeff) -> np.ndarray:
    order = np.argsort(pair.theta_hat, kind="stable")
    hats = pair.theta_hat[order]
    alphas = coeff.alpha[order]
    ids, starts = np.unique(hats, return_index=True)
    rep = np.repeat(alphas[starts], np.diff(np.append(starts, len(alphas))))
    bad = alphas != rep
    if np.any(bad):
        raise ValueError(
            f"coefficient-scaled weighting requires a constant coefficient per "
            f"subsubdomain; subsubdomain {int(hats[np.argmax(bad)])} is not constant"
        )
    out = np.empty(pair.subsubdomain_count)
    out[ids] = alphas[starts]
    return out


@dataclass(frozen=True)
class Constraint:
    coarse_id: int
    object_id: int
    kind: str
    dofs: np.ndarray
    coeffs: np.ndarray
    owners: tuple


def select_constraints(
    objects: list, recipe: Recipe, pair: PartitionPair
) -> list:
    """Turn selected objects into constraint rows and validate sufficiency.

    Point value on vertices, arithmetic average on edges and faces. The
    recipe must leave no floating subdomain without a constraint, and every
    pair of subsubdomains sharing an interface object must be linked through
    selected objects and subdomain interiors.
    """
    if isinstance(recipe, str):
        recipe = Recipe.parse(recipe)
    constraints = []
    for obj in objects:
        if not recipe.selects(obj.kind):
            continue
        if recipe.full_continuity:
            for dof in obj.dofs:
                constraints.append(
                    Constraint(
                        coarse_id=len(constraints),
                        object_id=obj.id,
                        kind="vertex",
                        dofs=np.array([dof]),
                        coeffs=np.array([1.0]),
                        owners=obj.owners,
                    )
                )
            continue
        if obj.kind == "vertex":
            coeffs = np.array([1.0])
        else:
            coeffs = np.full(len(obj.dofs), 1.0 / len(obj.dofs))
        constraints.append(
            Constraint(
                coarse_id=len(constraints),
                object_id=obj.id,
                kind=obj.kind,
                dofs=obj.dofs,
                coeffs=coeffs,
                owners=obj.owners,
            )
        )

    _check_sufficiency(objects, constraints, recipe, pair)
    return constraints


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _check_sufficiency(objects, constraints, recipe, pair):
    grounded = pair.grounded_subdomains
    constrained = np.zeros(pair.subdomain_count, dtype=bool)
    for c in constraints:
        for s in c.owners:
            constrained[s] = True
    floating = np.where(~grounded & ~constrained)[0]
    if floating.size:
        raise RecipeError(
            f"recipe {recipe} leaves floating subdomain {int(floating[0])} without "
            f"any constraint (local Neumann problem singular)"
        )
    if recipe.full_continuity:
        return

    uf = _UnionFind(pair.subsubdomain_count)
    # subsubdomains of one subdomain are linked through its continuous interior
    by_parent = {}
    for hat, parent in enumerate(pair.parent):
        by_parent.setdefault(int(parent), []).append(hat)
    for hats in by_parent.values():
        for h in hats[1:]:
            uf.union(hats[0], h)
    selected_ids = {c.object_id for c in constraints}
    for obj in objects:
        if obj.id in selected_ids:
            sig = obj.signature
            for h in sig[1:]:
                uf.union(sig[0], h)
    for obj in objects:
        roots = {uf.find(h) for h in obj.signature}
        if len(roots) > 1:
            sig = sorted(obj.signature, key=uf.find)
            a, b = sig[0], sig[-1]
            raise RecipeError(
                f"recipe {recipe} provides no acceptable path between "
                f"subsubdomains {int(a)} (subdomain {int(pair.parent[a])}) and "
                f"{int(b)} (subdomain {int(pair.parent[b])})"
            )


@dataclass
class SubdomainOperator:
    """Per-subdomain pieces of the preconditioner."""

    sub_id: int
    global_dofs: np.ndarray  # local -> global free dof, ascending
    interior_local: np.ndarray
    gamma_local: np.ndarray
    gamma_global: np.ndarray
    interior_global: np.ndarray
    neumann: SparseSym
    interior_factor: SpdFactorization | None
    coupling: sp.csr_matrix  # interior x gamma block
    constraint_rows: sp.csr_matrix
    coarse_ids: np.ndarray
    saddle: SaddleFactorization
    coarse_basis: np.ndarray  # (n_local, n_coarse_local)
    gamma_weights: np.ndarray
    gamma_positions: np.ndarray  # positions of gamma_global within the global interface

    @property
    def n_local(self) -> int:
        return len(self.global_dofs)

    @property
    def n_coarse(self) -> int:
        return len(self.coarse_ids)


class BddcOperator:
    """Assembled two-level preconditioner; apply() is linear and symmetric."""

    def __init__(
        self,
        system: AssembledSystem,
        pair: PartitionPair,
        weights: WeightingOperator,
        recipe: Recipe,
        constraints: list,
        subdomains: list,
        coarse_matrix: SparseSym | None,
        coarse_factor: SpdFactorization | None,
        gamma_dofs: np.ndarray,
    ):
        self.system = system
        self.pair = pair
        self.weights = weights
        self.recipe = recipe
        self.constraints = constraints
        self.subdomains = subdomains
        self.coarse_matrix = coarse_matrix
        self.coarse_factor = coarse_factor
        self.coarse_size = len(constraints)
        self.gamma_dofs = gamma_dofs
        self._csr = system.matrix.tocsr()

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Preconditioner action: interior correction, weighted substructure
        and coarse corrections, harmonic extension, closing interior sweep."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.system.matrix.n,):
            raise ValueError(
                f"residual has shape {r.shape}, expected ({self.system.matrix.n},)"
            )
        A = self._csr

        u1 = np.zeros_like(r)
        for s in self.subdomains:
            if s.interior_factor is not None:
                u1[s.interior_global] = s.interior_factor.solve(r[s.interior_global])
        rp = r - A @ u1  # supported on the interface

        coarse_rhs = np.zeros(self.coarse_size)
        local_solutions = []
        for s in self.subdomains:
            rho = np.zeros(s.n_local)
            rho[s.gamma_local] = s.gamma_weights * rp[s.gamma_global]
            v, _ = s.saddle.solve(rho, np.zeros(s.saddle.m))
            local_solutions.append(v)
            if s.n_coarse:
                coarse_rhs[s.coarse_ids] += s.coarse_basis.T @ rho

        coarse_sol = (
            self.coarse_factor.solve(coarse_rhs) if self.coarse_size else coarse_rhs
        )

        gamma_avg = np.zeros(len(self.gamma_dofs))
        for s, v in zip(self.subdomains, local_solutions):
            w = v
            if s.n_coarse:
                w = v + s.coarse_basis @ coarse_sol[s.coarse_ids]
            gamma_avg[s.gamma_positions] += s.gamma_weights * w[s.gamma_local]

        u2 = self._harmonic(gamma_avg)

        r3 = r - A @ (u1 + u2)
        u3 = np.zeros_like(r)
        for s in self.subdomains:
            if s.interior_factor is not None:
                u3[s.interior_global] = s.interior_factor.solve(r3[s.interior_global])
        return u1 + u2 + u3

    def _harmonic(self, gamma_values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.system.matrix.n)
        full[self.gamma_dofs] = gamma_values
        for s in self.subdomains:
            if s.interior_factor is None or len(s.gamma_local) == 0:
                continue
            rhs = s.coupling @ gamma_values[s.gamma_positions]
            full[s.interior_global] = -s.interior_factor.solve(rhs)
        return full


def build_bddc(
    system: AssembledSystem,
    pair: PartitionPair,
    objects: list,
    recipe,
    weights: WeightingOperator,
) -> BddcOperator:
    """Assemble the preconditioner: local factorizations, coarse basis and
    coarse matrix. The recipe is validated before any factorization."""
    if isinstance(recipe, str):
        recipe = Recipe.parse(recipe)
    constraints = select_constraints(objects, recipe, pair)
    mesh = system.mesh

    gamma_dofs = pair.membership.gamma_dofs
    gamma_index = np.full(mesh.free_count, -1, dtype=np.int64)
    gamma_index[gamma_dofs] = np.arange(len(gamma_dofs))

    by_owner = {}
    for c in constraints:
        for s in c.owners:
            by_owner.setdefault(s, []).append(c)

    free_to_node = mesh.free_nodes
    subdomains = []
    coarse_rows, coarse_cols, coarse_data = [], [], []
    for sub in range(pair.subdomain_count):
        cells = np.where(pair.theta == sub)[0]
        nodes = np.unique(mesh.cell_nodes[cells])
        local_nodes = nodes[mesh.node_to_free[nodes] >= 0]
        global_dofs = mesh.node_to_free[local_nodes]
        local_index = np.full(mesh.free_count, -1, dtype=np.int64)
        local_index[global_dofs] = np.arange(len(global_dofs))

        neumann = assemble_cells(mesh, system.coeff, cells, local_nodes)

        gpos = gamma_index[global_dofs]
        gamma_local = np.where(gpos >= 0)[0]
        interior_local = np.where(gpos < 0)[0]
        gamma_global = global_dofs[gamma_local]
        interior_global = global_dofs[interior_local]

        try:
            interior_factor = (
                spd_factor(neumann.restrict(interior_local))
                if len(interior_local)
                else None
            )
            local_cons = by_owner.get(sub, [])
            rows, cols, vals = [], [], []
            for k, c in enumerate(local_cons):
                loc = local_index[c.dofs]
                rows.extend([k] * len(loc))
                cols.extend(loc)
                vals.extend(c.coeffs)
            C = sp.csr_matrix(
                (vals, (rows, cols)), shape=(len(local_cons), len(global_dofs))
            )
            saddle = saddle_factor(neumann, C)
        except (NotSpdError, UnderconstrainedError) as err:
            raise type(err)(f"subdomain {sub}: {err}") from err

        n_c = len(local_cons)
        if n_c:
            psi, _ = saddle.solve(
                np.zeros((len(global_dofs), n_c)), np.eye(n_c)
            )
        else:
            psi = np.zeros((len(global_dofs), 0))
        coarse_ids = np.array([c.coarse_id for c in local_cons], dtype=np.int64)

        if n_c:
            s_local = psi.T @ (neumann.tocsr() @ psi)
            s_local = 0.5 * (s_local + s_local.T)
            coarse_rows.append(np.repeat(coarse_ids, n_c))
            coarse_cols.append(np.tile(coarse_ids, n_c))
            coarse_data.append(s_local.ravel())

        coupling = neumann.tocsr()[interior_local][:, gamma_local]
        gamma_weights = weights.weight_array(sub, gamma_global)

        subdomains.append(
            SubdomainOperator(
                sub_id=sub,
                global_dofs=global_dofs,
                interior_local=interior_local,
                gamma_local=gamma_local,
                gamma_global=gamma_global,
                interior_global=interior_global,
                neumann=neumann,
                interior_factor=interior_factor,
                coupling=coupling,
                constraint_rows=C,
                coarse_ids=coarse_ids,
                saddle=saddle,
                coarse_basis=psi,
                gamma_weights=gamma_weights,
                gamma_positions=gamma_index[gamma_global],
            )
        )

    coarse_matrix = None
    coarse_factor = None
    if constraints:
        n_coarse = len(constraints)
        full = sp.coo_matrix(
            (
                np.concatenate(coarse_data),
                (np.concatenate(coarse_rows), np.concatenate(coarse_cols)),
            ),
            shape=(n_coarse, n_coarse),
        ).tocsr()
        coarse_matrix = SparseSym(sp.triu(full, format="csr"))
        try:
            coarse_factor = spd_factor(coarse_matrix)
        except NotSpdError as err:
            raise NotSpdError(
                f"coarse matrix not SPD; recipe {recipe} is insufficient: {err}"
            ) from err

    return BddcOperator(
        system=system,
        pair=pair,
        weights=weights,
        recipe=recipe,
        constraints=constraints,
        subdomains=subdomains,
        coarse_matrix=coarse_matrix,
        coarse_factor=coarse_factor,
        gamma_dofs=gamma_dofs,
    )


def apply_bddc(bddc: BddcOperator, r: np.ndarray) -> np.ndarray:
    return bddc.apply(r)


def harmonic_extension(bddc: BddcOperator, interface_values: np.ndarray) -> np.ndarray:
    """Fill subdomain interiors with the discrete harmonic extension of the
    given interface values (aligned with bddc.gamma_dofs)."""
    interface_values = np.asarray(interface_values, dtype=float)
    if interface_values.shape != (len(bddc.gamma_dofs),):
        raise ValueError(
            f"expected {len(bddc.gamma_dofs)} interface values, "
            f"got {interface_values.shape}"
        )
    return bddc._harmonic(interface_values)
