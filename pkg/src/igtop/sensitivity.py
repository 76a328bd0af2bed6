"""Analytic design sensitivities of compliance and material volume.

The chain runs design -> nodal levelset -> enriched-node positions ->
integration-element geometry -> stiffness/load -> compliance. Nodal levelset
values move only the interface nodes (element classification is fixed between
topology events), so all terms reduce to closed-form derivatives of each
integration element with respect to its enriched-vertex coordinates,
transported to nodal levelset values by the design velocity of the edge
intersection, and finally to the design vector through the kernel matrix.

Compliance is self-adjoint: dC = -u^T (dK) u + 2 u^T (dF).
"""

from __future__ import annotations

import numpy as np

from .enrich import EnrichedModel, IntegrationElement
from .fem import (DL, LoadCase, MaterialPair, adj2, build_b, cut_parent_dofs,
                  integration_element_gradients, inv2, tri_jacobian)

_CENTROID = np.array([1 / 3, 1 / 3, 1 / 3])


def design_velocity(xj, xk, phij: float, phik: float) -> np.ndarray:
    """Derivative of the edge-intersection point with respect to ``phij``.

    For x_n = x_j + t (x_k - x_j) with t = phij / (phij - phik):
    d(x_n)/d(phij) = -phik / (phij - phik)^2 * (x_k - x_j).
    Raising the value at j pulls the intersection toward j when the far end
    is material, which fixes the sign. Swap the argument pairs to get the
    derivative with respect to ``phik``.
    """
    if phij == 0.0 or phik == 0.0 or (phij > 0.0) == (phik > 0.0):
        raise ValueError("edge is not cut: levelset values must have "
                         "strictly opposite signs")
    xj = np.asarray(xj, dtype=float)
    xk = np.asarray(xk, dtype=float)
    return -phik / (phij - phik) ** 2 * (xk - xj)


def jacobian_derivative(vertex: int, component: int) -> np.ndarray:
    """d(J)/d(x_vertex[component]) for J = coords^T DL: one nonzero row."""
    dj = np.zeros((2, 2))
    dj[component] = DL[vertex]
    return dj


def det_derivative(jac: np.ndarray, djac: np.ndarray) -> float:
    """Directional derivative of det(J): trace(adj(J) dJ)."""
    return float(np.trace(adj2(jac) @ djac))


def inv_derivative(jac: np.ndarray, djac: np.ndarray) -> np.ndarray:
    """Directional derivative of J^{-1}: -J^{-1} dJ J^{-1}."""
    jinv = inv2(jac)
    return -jinv @ djac @ jinv


def _enriched_gradient_rows(ie: IntegrationElement, dge: np.ndarray) -> np.ndarray:
    """Five-slot gradient perturbation with only enriched rows populated."""
    out = np.zeros((5, 2))
    for l in range(3):
        s = ie.enr_slots[l]
        if s >= 0:
            out[3 + s] = dge[l]
    return out


def integration_element_stiffness_derivative(
        model: EnrichedModel, ie: IntegrationElement, pair: MaterialPair,
        vertex: int, component: int) -> np.ndarray:
    """Derivative of one integration-element stiffness with respect to moving
    local ``vertex`` along ``component``.

    Only the determinant and the enrichment-gradient rows respond; the parent
    hat gradients are unaffected by interface motion.
    """
    d = pair.material.d_unit() * pair.modulus_of(ie.material)
    grads = integration_element_gradients(model, ie)
    b = build_b(grads, pair.field_dim)
    jac = tri_jacobian(ie.coords)
    djac = jacobian_derivative(vertex, component)
    djdet = det_derivative(jac, djac)
    dge = DL @ inv_derivative(jac, djac)
    db = build_b(_enriched_gradient_rows(ie, dge), pair.field_dim)
    bdb = b.T @ d @ b
    cross = db.T @ d @ b
    return 0.5 * djdet * bdb + ie.area * (cross + cross.T)


def integration_element_force_derivative(
        model: EnrichedModel, ie: IntegrationElement, body, field_dim: int,
        vertex: int, component: int) -> np.ndarray:
    """Derivative of one integration element's body-load vector with respect
    to moving local ``vertex`` along ``component``.

    The first term scales the load with the area change; the second moves the
    centroid through the parent hat functions. The enrichment block of the
    second term is identically zero: enrichment values at the centroid are
    fixed barycentric weights.
    """
    bvec = np.atleast_1d(np.asarray(body, dtype=float))
    jac = tri_jacobian(ie.coords)
    djdet = det_derivative(jac, jacobian_derivative(vertex, component))
    shape = np.concatenate([model.parent_hats(ie, _CENTROID),
                            model.enrichment_values(ie, _CENTROID)])
    dshape = np.zeros(5)
    dshape[:3] = model.mesh.hat_gradients[ie.parent][:, component] / 3.0
    return np.outer(0.5 * djdet * shape + ie.area * dshape, bvec).ravel()


def _edge_velocities(model: EnrichedModel, enr_index: int):
    """Design velocities of one enriched node with respect to its edge's two
    nodal levelset values. Returns (j, k, v_j, v_k)."""
    en = model.enriched_nodes[enr_index]
    j, k = en.edge
    xj, xk = model.mesh.nodes[j], model.mesh.nodes[k]
    pj, pk = float(model.phi[j]), float(model.phi[k])
    return j, k, design_velocity(xj, xk, pj, pk), design_velocity(xk, xj, pk, pj)


def nodal_compliance_gradient(model: EnrichedModel, pair: MaterialPair,
                              loads: LoadCase, u: np.ndarray) -> np.ndarray:
    """d(compliance)/d(phi_j) for every mesh node.

    Nonzero only at endpoints of cut edges. ``u`` is the equilibrium solution
    for the same model, materials, and loads.
    """
    mesh = model.mesh
    d = pair.field_dim
    out = np.zeros(mesh.n_nodes)
    body = {True: None if loads.body_material is None
            else np.atleast_1d(np.asarray(loads.body_material, dtype=float)),
            False: None if loads.body_void is None
            else np.atleast_1d(np.asarray(loads.body_void, dtype=float))}
    dmat = {phase: pair.material.d_unit() * pair.modulus_of(phase)
            for phase in (True, False)}

    for row in range(model.n_cut):
        dofs = cut_parent_dofs(model, row, d)
        ue = u[dofs]
        dc_dx = np.zeros((2, 2))  # (slot, direction)
        for ie in model.integration[3 * row: 3 * row + 3]:
            grads = integration_element_gradients(model, ie)
            b = build_b(grads, d)
            strain = b @ ue
            stress = dmat[ie.material] @ strain
            energy = float(strain @ stress)
            jdet = 2.0 * ie.area
            adj = adj2(tri_jacobian(ie.coords))
            jinv = adj / jdet
            bsrc = body[ie.material]
            if bsrc is not None:
                shape = np.concatenate([model.parent_hats(ie, _CENTROID),
                                        model.enrichment_values(ie, _CENTROID)])
                gp_c = mesh.hat_gradients[ie.parent]
            for l in range(3):
                s = ie.enr_slots[l]
                if s < 0:
                    continue
                for c in (0, 1):
                    djdet = float(DL[l] @ adj[:, c])
                    # dJinv = -Jinv dJ Jinv is rank one for a single moving
                    # vertex: -Jinv[:,c] outer (DL[l] Jinv)
                    dginv = -np.outer(jinv[:, c], DL[l] @ jinv)
                    db = build_b(_enriched_gradient_rows(ie, DL @ dginv), d)
                    dstrain = db @ ue
                    val = -(0.5 * djdet * energy
                            + jdet * float(dstrain @ stress))
                    if bsrc is not None:
                        dshape = np.zeros(5)
                        dshape[:3] = gp_c[:, c] / 3.0
                        df = np.outer(0.5 * djdet * shape + ie.area * dshape,
                                      bsrc).ravel()
                        val += 2.0 * float(ue @ df)
                    dc_dx[s, c] += val
        for s in (0, 1):
            j, k, vj, vk = _edge_velocities(model, model.parent_slots[row][s])
            out[j] += dc_dx[s] @ vj
            out[k] += dc_dx[s] @ vk
    return out


def nodal_volume_gradient(model: EnrichedModel,
                          which: str = "material") -> np.ndarray:
    """d(phase volume)/d(phi_j) for every mesh node.

    The material and void gradients sum to zero entrywise: parent areas are
    fixed, interface motion only trades one phase for the other.
    """
    if which not in ("material", "void"):
        raise ValueError(f"which must be 'material' or 'void', got {which!r}")
    want = which == "material"
    out = np.zeros(model.mesh.n_nodes)
    for row in range(model.n_cut):
        dv_dx = np.zeros((2, 2))
        for ie in model.integration[3 * row: 3 * row + 3]:
            if ie.material is not want:
                continue
            adj = adj2(tri_jacobian(ie.coords))
            for l in range(3):
                s = ie.enr_slots[l]
                if s < 0:
                    continue
                for c in (0, 1):
                    dv_dx[s, c] += 0.5 * float(DL[l] @ adj[:, c])
        for s in (0, 1):
            j, k, vj, vk = _edge_velocities(model, model.parent_slots[row][s])
            out[j] += dv_dx[s] @ vj
            out[k] += dv_dx[s] @ vk
    return out


def compliance_gradient(model: EnrichedModel, levelset, pair: MaterialPair,
                        loads: LoadCase, u: np.ndarray) -> np.ndarray:
    """d(compliance)/d(s_i) through the kernel matrix."""
    nodal = nodal_compliance_gradient(model, pair, loads, u)
    return np.asarray(levelset.dphi_ds().T @ nodal).ravel()


def volume_gradient(model: EnrichedModel, levelset,
                    which: str = "material") -> np.ndarray:
    """d(phase volume)/d(s_i) through the kernel matrix."""
    nodal = nodal_volume_gradient(model, which)
    return np.asarray(levelset.dphi_ds().T @ nodal).ravel()
