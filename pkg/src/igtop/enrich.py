"""Interface geometry: cut detection, enriched nodes, integration elements.

A nodal levelset classifies each element as material (all nodes positive),
void (all negative), or cut. Each cut element gains one enriched node per
sign-change edge (exactly two) and is tiled by three integration elements
whose union reproduces the parent exactly. Enrichment functions are the hat
functions of the integration elements attached to the enriched nodes; they
vanish at all original mesh nodes, so essential boundary conditions stay on
original degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, cross2

VOID, MATERIAL, CUT = 0, 1, 2

_EDGES = ((0, 1), (1, 2), (2, 0))
_DIAG_TIE_REL = 1e-12


def snap_nodal_levelset(phi: np.ndarray, relative_eps: float = 1e-10) -> np.ndarray:
    """Copy of ``phi`` with entries near zero replaced by a small positive value.

    Guarantees no entry satisfies ``|phi| < eps`` with
    ``eps = relative_eps * max(|phi|)`` (scale floored for the all-zero
    vector), so every element classifies cleanly as material, void, or cut
    and edge intersections stay strictly inside their edges.
    """
    phi = np.asarray(phi, dtype=float)
    scale = max(float(np.max(np.abs(phi))) if phi.size else 0.0, 1e-30)
    eps = relative_eps * scale
    out = phi.copy()
    out[np.abs(out) < eps] = eps
    return out


def intersect_edge(xj, xk, phij: float, phik: float):
    """Zero-contour crossing of the segment from ``xj`` to ``xk``.

    Returns ``(point, t)`` with ``point = xj + t (xk - xj)`` and
    ``t = phij / (phij - phik)``. Requires strictly opposite nonzero signs.
    """
    if phij == 0.0 or phik == 0.0 or (phij > 0.0) == (phik > 0.0):
        raise ValueError(
            f"edge is not cut: levelset values {phij} and {phik} "
            f"must have strictly opposite signs")
    t = phij / (phij - phik)
    xj = np.asarray(xj, dtype=float)
    xk = np.asarray(xk, dtype=float)
    return xj + t * (xk - xj), t


@dataclass(frozen=True, eq=False)
class EnrichedNode:
    """Interface node on a cut edge.

    ``edge`` holds the original node pair (j, k) with j < k; ``t`` is the
    fractional position from j toward k.
    """

    index: int
    edge: tuple[int, int]
    t: float
    coords: np.ndarray


@dataclass(frozen=True, eq=False)
class IntegrationElement:
    """One triangle of a cut parent's exact tiling.

    ``vertex_ids`` are global: original node index, or ``n_nodes + m`` for
    enriched node m. ``enr_slots[l]`` is the parent-local enriched slot (0 or
    1) of vertex l, or -1 for original vertices.
    """

    parent: int
    vertex_ids: tuple[int, int, int]
    enr_slots: tuple[int, int, int]
    coords: np.ndarray
    material: bool
    area: float


class EnrichedModel:
    """Cut classification plus interface tiling for one levelset snapshot.

    Attributes
    ----------
    mesh : Mesh
    phi : ndarray
        Snapped nodal levelset the model was built from.
    element_state : ndarray of int8
        Per element: 0 void, 1 material, 2 cut.
    enriched_nodes : list of EnrichedNode
    enr_coords : ndarray, shape (n_enriched, 2)
    cut_parents : ndarray
        Cut element indices, ascending. Cut parent row r owns integration
        elements ``integration[3r : 3r+3]`` and enriched slots
        ``parent_slots[r]``.
    parent_slots : ndarray, shape (n_cut, 2)
        Enriched-node indices per cut parent, in canonical edge order.
    integration : list of IntegrationElement
    """

    def __init__(self, mesh, phi, element_state, enriched_nodes, enr_coords,
                 cut_parents, parent_slots, integration):
        self.mesh = mesh
        self.phi = phi
        self.element_state = element_state
        self.enriched_nodes = enriched_nodes
        self.enr_coords = enr_coords
        self.cut_parents = cut_parents
        self.parent_slots = parent_slots
        self.integration = integration
        self._parent_row = {int(g): r for r, g in enumerate(cut_parents)}

    @property
    def n_enriched(self) -> int:
        return len(self.enriched_nodes)

    @property
    def n_cut(self) -> int:
        return len(self.cut_parents)

    def parent_row(self, element: int) -> int:
        """Row of a cut element in ``cut_parents``; KeyError if not cut."""
        return self._parent_row[int(element)]

    def parent_hats(self, ie: IntegrationElement, bary) -> np.ndarray:
        """Original (parent) hat functions evaluated at a barycentric point
        of an integration element. Always sums to 1."""
        bary = np.asarray(bary, dtype=float)
        x = bary @ ie.coords
        x0 = self.mesh.nodes[self.mesh.elements[ie.parent, 0]]
        n = self.mesh.hat_gradients[ie.parent] @ (x - x0)
        n[0] += 1.0
        return n

    def enrichment_values(self, ie: IntegrationElement, bary) -> np.ndarray:
        """Enrichment functions of the parent's two enriched slots at a
        barycentric point of ``ie``. Each is the integration-element hat of
        its enriched node, zero if that node is not a vertex of ``ie``."""
        bary = np.asarray(bary, dtype=float)
        psi = np.zeros(2)
        for l in range(3):
            s = ie.enr_slots[l]
            if s >= 0:
                psi[s] += bary[l]
        return psi

    def material_volume(self) -> float:
        """Total area of the material phase (uncut material elements plus
        material integration elements)."""
        vol = float(self.mesh.areas[self.element_state == MATERIAL].sum())
        vol += sum(ie.area for ie in self.integration if ie.material)
        return vol


def build_enriched_model(mesh: Mesh, phi: np.ndarray) -> EnrichedModel:
    """Classify elements against a snapped nodal levelset and tile cut ones.

    ``phi`` must contain no exact zeros (run :func:`snap_nodal_levelset`
    first). The construction is deterministic: identical inputs produce
    bitwise-identical models.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (mesh.n_nodes,):
        raise ValueError(f"levelset has shape {phi.shape}, "
                         f"expected ({mesh.n_nodes},)")
    if np.any(phi == 0.0):
        raise ValueError("nodal levelset contains exact zeros; "
                         "apply snap_nodal_levelset first")

    pos = phi > 0.0
    elem_pos = pos[mesh.elements]
    n_pos = elem_pos.sum(axis=1)
    state = np.full(mesh.n_elements, CUT, dtype=np.int8)
    state[n_pos == 3] = MATERIAL
    state[n_pos == 0] = VOID
    cut_ids = np.flatnonzero(state == CUT)

    # Unique cut edges in lexicographic order become the enriched nodes.
    pair_blocks = []
    for l0, l1 in _EDGES:
        mask = elem_pos[cut_ids, l0] != elem_pos[cut_ids, l1]
        if np.any(mask):
            pair_blocks.append(
                np.sort(mesh.elements[cut_ids[mask]][:, [l0, l1]], axis=1))
    if pair_blocks:
        edges = np.unique(np.vstack(pair_blocks), axis=0)
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    ej, ek = edges[:, 0], edges[:, 1]
    t = phi[ej] / (phi[ej] - phi[ek])
    enr_coords = mesh.nodes[ej] + t[:, None] * (mesh.nodes[ek] - mesh.nodes[ej])
    edge_to_enr = {(int(j), int(k)): m for m, (j, k) in enumerate(edges)}
    enriched_nodes = [
        EnrichedNode(index=m, edge=(int(ej[m]), int(ek[m])), t=float(t[m]),
                     coords=enr_coords[m])
        for m in range(edges.shape[0])
    ]

    integration: list[IntegrationElement] = []
    parent_slots = np.empty((cut_ids.size, 2), dtype=np.int64)
    n_nodes = mesh.n_nodes

    for row, g in enumerate(cut_ids):
        verts = mesh.elements[g]
        lpos = elem_pos[g]
        slots = []
        for l0, l1 in _EDGES:
            if lpos[l0] != lpos[l1]:
                a, b = int(verts[l0]), int(verts[l1])
                slots.append(edge_to_enr[(a, b) if a < b else (b, a)])
        assert len(slots) == 2, "cut element must have exactly two cut edges"
        parent_slots[row] = slots
        slot_of = {slots[0]: 0, slots[1]: 1}

        # vertex with the lone sign; its two incident edges are the cut ones
        if lpos[0] == lpos[1]:
            lone = 2
        elif lpos[0] == lpos[2]:
            lone = 1
        else:
            lone = 0
        a, b, c = lone, (lone + 1) % 3, (lone + 2) % 3
        va, vb, vc = (int(verts[a]), int(verts[b]), int(verts[c]))
        pab = edge_to_enr[(va, vb) if va < vb else (vb, va)]
        pac = edge_to_enr[(va, vc) if va < vc else (vc, va)]
        xb, xc = mesh.nodes[vb], mesh.nodes[vc]
        xab, xac = enr_coords[pab], enr_coords[pac]

        def make(desc, material):
            ids, slots3, coords = [], [], np.empty((3, 2))
            for l, (kind, idx) in enumerate(desc):
                if kind == 0:
                    ids.append(idx)
                    slots3.append(-1)
                    coords[l] = mesh.nodes[idx]
                else:
                    ids.append(n_nodes + idx)
                    slots3.append(slot_of[idx])
                    coords[l] = enr_coords[idx]
            area = 0.5 * cross2(coords[1] - coords[0], coords[2] - coords[0])
            assert area > 0.0, "integration element lost counterclockwise orientation"
            integration.append(IntegrationElement(
                parent=int(g), vertex_ids=tuple(ids), enr_slots=tuple(slots3),
                coords=coords, material=bool(material), area=float(area)))

        mat_a = bool(lpos[a])
        make(((0, va), (1, pab), (1, pac)), mat_a)

        # split the remaining quad (pab, vb, vc, pac) along its shorter
        # diagonal; ties go to the diagonal touching the lower node index
        d1 = float(np.hypot(*(xc - xab)))
        d2 = float(np.hypot(*(xac - xb)))
        if abs(d1 - d2) <= _DIAG_TIE_REL * max(d1, d2):
            use_d1 = vc < vb
        else:
            use_d1 = d1 < d2
        if use_d1:
            make(((1, pab), (0, vb), (0, vc)), not mat_a)
            make(((1, pab), (0, vc), (1, pac)), not mat_a)
        else:
            make(((1, pab), (0, vb), (1, pac)), not mat_a)
            make(((0, vb), (0, vc), (1, pac)), not mat_a)

    return EnrichedModel(mesh=mesh, phi=phi, element_state=state,
                         enriched_nodes=enriched_nodes, enr_coords=enr_coords,
                         cut_parents=cut_ids, parent_slots=parent_slots,
                         integration=integration)
