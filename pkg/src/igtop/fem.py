"""Assembly and solution of the enriched finite element system.

Supports 2-D heat conduction (one field component) and plane-stress
elastostatics (two components) on linear triangles with a single centroid
quadrature point, which integrates the constant-strain stiffness and linear
load integrands exactly. Cut parents contribute through their integration
elements with a five-slot local block: three original nodes plus the parent's
two enriched nodes. Degrees of freedom of enriched node m follow all original
ones: dof = field_dim * (n_nodes + m) + component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .enrich import CUT, MATERIAL, VOID, EnrichedModel, IntegrationElement
from .errors import ConfigError, SolverError

# gradients of the master-triangle hat functions (L1, L2, L3)
DL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

_CENTROID = np.array([1 / 3, 1 / 3, 1 / 3])


def det2(m: np.ndarray):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def adj2(m: np.ndarray) -> np.ndarray:
    """Adjugate of a 2x2 matrix: adj(m) @ m = det(m) I."""
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])


def inv2(m: np.ndarray) -> np.ndarray:
    """Inverse of a 2x2 matrix, preserving the input dtype."""
    return adj2(m) / det2(m)


@dataclass(frozen=True)
class Conduction:
    """Isotropic heat conduction."""

    conductivity: float
    field_dim: ClassVar[int] = 1

    @property
    def modulus(self) -> float:
        return self.conductivity

    @staticmethod
    def d_unit() -> np.ndarray:
        return np.eye(2)


@dataclass(frozen=True)
class PlaneStressElastic:
    """Isotropic linear elasticity, plane stress."""

    youngs: float
    poisson: float
    field_dim: ClassVar[int] = 2

    @property
    def modulus(self) -> float:
        return self.youngs

    def d_unit(self) -> np.ndarray:
        nu = self.poisson
        return np.array([[1.0, nu, 0.0],
                         [nu, 1.0, 0.0],
                         [0.0, 0.0, (1.0 - nu) / 2.0]]) / (1.0 - nu * nu)


@dataclass(frozen=True)
class MaterialPair:
    """Material and void-phase properties; the material phase is at least
    as stiff (equal moduli make a homogeneous patch, useful for testing)."""

    material: object
    void: object

    def __post_init__(self):
        if type(self.material) is not type(self.void):
            raise ConfigError("material and void phases must share a physics type")
        if not self.material.modulus >= self.void.modulus > 0.0:
            raise ConfigError(
                f"need material modulus >= void modulus > 0, got "
                f"{self.material.modulus} and {self.void.modulus}")
        if isinstance(self.material, PlaneStressElastic) and \
                self.material.poisson != self.void.poisson:
            raise ConfigError("phases must share the Poisson ratio")

    @property
    def field_dim(self) -> int:
        return self.material.field_dim

    def modulus_of(self, material_phase: bool) -> float:
        return self.material.modulus if material_phase else self.void.modulus


@dataclass
class LoadCase:
    """External loading.

    point_loads : list of (node, component, value)
        Concentrated loads on original mesh nodes.
    edge_loads : list of (node_a, node_b, traction)
        Uniform traction per unit length on an uncut boundary edge;
        ``traction`` has one entry per field component.
    body_material, body_void : array or None
        Uniform body source per phase, one entry per field component.
    """

    point_loads: list = field(default_factory=list)
    edge_loads: list = field(default_factory=list)
    body_material: np.ndarray | None = None
    body_void: np.ndarray | None = None


def node_dofs(node_ids, field_dim: int, component: int | None = None) -> np.ndarray:
    """Global dof indices of original (or enriched-offset) node ids."""
    node_ids = np.atleast_1d(np.asarray(node_ids, dtype=np.int64))
    if component is None:
        return (field_dim * node_ids[:, None]
                + np.arange(field_dim)[None, :]).ravel()
    return field_dim * node_ids + component


def tri_jacobian(coords: np.ndarray) -> np.ndarray:
    """Jacobian of the master-to-physical map, columns are edge vectors."""
    return coords.T @ DL.astype(coords.dtype)


def tri_hat_gradients(coords: np.ndarray) -> np.ndarray:
    """Physical hat-function gradients of one triangle, shape (3, 2)."""
    return DL.astype(coords.dtype) @ inv2(tri_jacobian(coords))


def build_b(grads: np.ndarray, field_dim: int) -> np.ndarray:
    """Strain-displacement matrix from per-slot shape gradients (n, 2).

    Heat: rows are the gradient operator, shape (2, n). Elasticity: Voigt
    (eps_xx, eps_yy, gamma_xy), shape (3, 2 n).
    """
    if field_dim == 1:
        return grads.T
    n = grads.shape[0]
    b = np.zeros((3, 2 * n), dtype=grads.dtype)
    b[0, 0::2] = grads[:, 0]
    b[1, 1::2] = grads[:, 1]
    b[2, 0::2] = grads[:, 1]
    b[2, 1::2] = grads[:, 0]
    return b


def cut_parent_dofs(model: EnrichedModel, row: int, field_dim: int) -> np.ndarray:
    """Global dofs of a cut parent's five slots (3 nodes + 2 enriched)."""
    parent = model.cut_parents[row]
    slots = np.concatenate([model.mesh.elements[parent],
                            model.mesh.n_nodes + model.parent_slots[row]])
    return node_dofs(slots, field_dim)


def integration_element_gradients(model: EnrichedModel, ie: IntegrationElement,
                                  dtype=np.float64) -> np.ndarray:
    """Five-slot shape gradients on one integration element, shape (5, 2).

    Rows 0-2: the parent hat gradients (constant over the parent). Rows 3-4:
    gradients of the parent's two enrichment functions on this integration
    element; zero for an enriched node that is not a vertex here.
    """
    out = np.zeros((5, 2), dtype=dtype)
    if dtype == np.float64:
        out[:3] = model.mesh.hat_gradients[ie.parent]
    else:
        parent_coords = model.mesh.nodes[model.mesh.elements[ie.parent]]
        out[:3] = tri_hat_gradients(parent_coords.astype(dtype))
    ge = tri_hat_gradients(ie.coords.astype(dtype))
    for l in range(3):
        s = ie.enr_slots[l]
        if s >= 0:
            out[3 + s] = ge[l]
    return out


def integration_element_stiffness(model: EnrichedModel, ie: IntegrationElement,
                                  pair: MaterialPair,
                                  dtype=np.float64) -> np.ndarray:
    """Local stiffness of one integration element over the five parent slots."""
    d = pair.material.d_unit().astype(dtype) * pair.modulus_of(ie.material)
    b = build_b(integration_element_gradients(model, ie, dtype),
                pair.field_dim)
    return dtype(ie.area) * (b.T @ d @ b)


def integration_element_force(model: EnrichedModel, ie: IntegrationElement,
                              body: np.ndarray, field_dim: int,
                              dtype=np.float64) -> np.ndarray:
    """Consistent body-load vector of one integration element (five slots)."""
    shape = np.concatenate([model.parent_hats(ie, _CENTROID),
                            model.enrichment_values(ie, _CENTROID)]).astype(dtype)
    return dtype(ie.area) * np.outer(shape,
                                     np.atleast_1d(body).astype(dtype)).ravel()


class Assembler:
    """Reusable assembly context for one mesh / materials / loading triple.

    Unit-modulus element stiffness blocks and their scatter indices are
    precomputed once; per-design assembly only rescales them by the phase
    modulus (zero for cut parents) and adds the integration-element
    contributions of the current enriched model.

    ``dtype`` selects the working precision; the default double suits
    optimization runs, while longdouble pushes interface-exactness studies
    below the material-contrast conditioning floor.
    """

    def __init__(self, mesh, pair: MaterialPair, loads: LoadCase,
                 dtype=np.float64):
        self.mesh = mesh
        self.pair = pair
        self.loads = loads
        self.dtype = dtype
        d = pair.field_dim
        if dtype == np.float64:
            g = mesh.hat_gradients
        else:
            coords = mesh.nodes[mesh.elements].astype(dtype)
            jac = np.einsum("eac,al->ecl", coords, DL.astype(dtype))
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            inv = np.empty_like(jac)
            inv[:, 0, 0], inv[:, 1, 1] = jac[:, 1, 1], jac[:, 0, 0]
            inv[:, 0, 1], inv[:, 1, 0] = -jac[:, 0, 1], -jac[:, 1, 0]
            inv /= det[:, None, None]
            g = np.einsum("al,elc->eac", DL.astype(dtype), inv)
        if d == 1:
            b_all = np.swapaxes(g, 1, 2)  # (E, 2, 3)
        else:
            b_all = np.zeros((mesh.n_elements, 3, 6), dtype=dtype)
            b_all[:, 0, 0::2] = g[:, :, 0]
            b_all[:, 1, 1::2] = g[:, :, 1]
            b_all[:, 2, 0::2] = g[:, :, 1]
            b_all[:, 2, 1::2] = g[:, :, 0]
        d1 = pair.material.d_unit().astype(dtype)
        self._k_unit = np.einsum("eia,ij,ejb->eab", b_all, d1, b_all,
                                 optimize=True) \
            * mesh.areas.astype(dtype)[:, None, None]
        dofs = node_dofs(mesh.elements.ravel(), d).reshape(mesh.n_elements, 3 * d)
        self._rows = np.broadcast_to(dofs[:, :, None],
                                     self._k_unit.shape).ravel()
        self._cols = np.broadcast_to(dofs[:, None, :],
                                     self._k_unit.shape).ravel()
        self._elem_dofs = dofs

        self._f_base = np.zeros(d * mesh.n_nodes, dtype=dtype)
        for node, comp, value in loads.point_loads:
            self._f_base[node_dofs(node, d, comp)[0]] += value
        for na, nb, traction in loads.edge_loads:
            length = np.sqrt(np.sum(
                (mesh.nodes[nb] - mesh.nodes[na]).astype(dtype) ** 2))
            t = np.atleast_1d(np.asarray(traction)).astype(dtype)
            for node in (na, nb):
                self._f_base[node_dofs(node, d)] += 0.5 * length * t

    def assemble(self, model: EnrichedModel):
        """Stiffness matrix and load vector for one enriched model."""
        mesh, pair, loads = self.mesh, self.pair, self.loads
        d = pair.field_dim
        dtype = self.dtype
        ndof = d * (mesh.n_nodes + model.n_enriched)

        factor = np.zeros(mesh.n_elements, dtype=dtype)
        factor[model.element_state == MATERIAL] = pair.material.modulus
        factor[model.element_state == VOID] = pair.void.modulus
        data = (self._k_unit * factor[:, None, None]).ravel()
        rows = [self._rows]
        cols = [self._cols]
        vals = [data]

        f = np.zeros(ndof, dtype=dtype)
        f[:self._f_base.size] = self._f_base
        for na, nb, _ in loads.edge_loads:
            if (model.phi[na] > 0.0) != (model.phi[nb] > 0.0):
                raise ConfigError(
                    f"edge load on cut edge ({na}, {nb}) is not supported")

        body = {True: loads.body_material, False: loads.body_void}
        if any(b is not None for b in body.values()):
            for phase, state in ((True, MATERIAL), (False, VOID)):
                b = body[phase]
                if b is None:
                    continue
                sel = model.element_state == state
                if not np.any(sel):
                    continue
                fe = np.outer(mesh.areas[sel].astype(dtype) / 3.0,
                              np.tile(np.atleast_1d(b).astype(dtype), 3)).ravel()
                np.add.at(f, self._elem_dofs[sel].ravel(), fe)

        for row in range(model.n_cut):
            dofs = cut_parent_dofs(model, row, d)
            for ie in model.integration[3 * row: 3 * row + 3]:
                k = integration_element_stiffness(model, ie, pair, dtype)
                rows.append(np.repeat(dofs, dofs.size))
                cols.append(np.tile(dofs, dofs.size))
                vals.append(k.ravel())
                b = body[ie.material]
                if b is not None:
                    f[dofs] += integration_element_force(model, ie, b, d, dtype)

        k = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ndof, ndof)).tocsr()
        return k, f


def assemble_system(model: EnrichedModel, pair: MaterialPair, loads: LoadCase,
                    dtype=np.float64):
    """One-shot assembly; builds a throwaway :class:`Assembler`."""
    return Assembler(model.mesh, pair, loads, dtype=dtype).assemble(model)


@dataclass(frozen=True)
class SolveResult:
    u: np.ndarray
    residual: float


def solve_system(k: sparse.csr_matrix, f: np.ndarray,
                 fixed_dofs) -> SolveResult:
    """Direct solve with homogeneous essential conditions on ``fixed_dofs``.

    The reduced system is symmetrically Jacobi-scaled before factorization.
    Raises SolverError on singular systems (typically an unconstrained rigid
    mode) or when the relative residual exceeds 1e-6.
    """
    ndof = f.size
    fixed = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
    if fixed.size and (fixed.min() < 0 or fixed.max() >= ndof):
        raise ValueError("fixed dof index out of range")
    free = np.setdiff1d(np.arange(ndof), fixed, assume_unique=True)
    if free.size == 0:
        return SolveResult(u=np.zeros(ndof), residual=0.0)

    kff = k[free][:, free].tocsc()
    ff = f[free]
    work_ld = kff.dtype == np.longdouble
    diag = kff.diagonal()
    if np.any(diag <= 0.0):
        bad = free[int(np.argmin(diag))]
        raise SolverError(
            f"nonpositive stiffness diagonal at dof {bad}; "
            f"the system has an unconstrained or degenerate mode")
    scale = 1.0 / np.sqrt(diag)
    dmat = sparse.diags(scale)
    kss = (dmat @ kff @ dmat).tocsc()
    try:
        lu = splu(kss.astype(np.float64) if work_ld else kss)
    except RuntimeError as err:
        raise SolverError(
            f"stiffness factorization failed ({err}); check boundary "
            f"conditions for a free rigid mode") from err
    upiv = np.abs(lu.U.diagonal())
    if upiv.min() < 1e-12 * upiv.max():
        raise SolverError(
            "stiffness matrix is numerically singular; check boundary "
            "conditions for a free rigid mode")
    fs = ff * scale
    # refinement with extended-precision residuals recovers the accuracy
    # lost to the material-contrast conditioning; with longdouble assembly
    # the refinement target itself carries the extra digits
    fsnorm = float(np.linalg.norm(fs.astype(np.float64)))
    kld = kss if work_ld else kss.astype(np.longdouble)
    fld = fs.astype(np.longdouble)
    y = lu.solve(fs.astype(np.float64)).astype(np.longdouble)
    for _ in range(6 if work_ld else 3):
        r = fld - kld @ y
        if float(np.linalg.norm(r.astype(np.float64))) <= 1e-16 * fsnorm:
            break
        y = y + lu.solve(r.astype(np.float64))
    if not np.all(np.isfinite(y.astype(np.float64))):
        raise SolverError("solver produced non-finite values; the system is "
                          "singular (free rigid mode?)")
    uf = (y * scale).astype(np.float64)
    fnorm = float(np.linalg.norm(ff.astype(np.float64)))
    residual = float(np.linalg.norm((kff @ uf - ff).astype(np.float64))) \
        / (fnorm if fnorm else 1.0)
    if residual > 1e-6:
        raise SolverError(f"relative solve residual {residual:.3e} exceeds "
                          f"1e-6; check boundary conditions")
    u = np.zeros(ndof)
    u[free] = uf
    return SolveResult(u=u, residual=residual)


def compliance(u: np.ndarray, f: np.ndarray) -> float:
    """External work f . u; equals u^T K u at equilibrium."""
    return float(u @ f)
