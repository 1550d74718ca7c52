//! Coarse-to-fine injection operators for the non-nested skeleton spaces,
//! realized as sparse matrices M_{ℓ-1} → M_ℓ, plus the restriction used by
//! the V-cycle.
//!
//! Fine edges come in two classes. Children of coarse edges carry the coarse
//! polynomial evaluated in place (the embedding) for I¹, I², I³; the
//! continuous operator I⁰ instead evaluates a vertex-averaged continuous
//! rebuild of λ. Edges created inside a coarse cell are filled per kind:
//!
//! * I⁰ — trace of the continuous coarse function U^c (vertex nodes take the
//!   arithmetic mean of λ over all faces sharing the vertex, boundary
//!   vertices 0, edge-interior nodes take λ, cell-interior nodes take U λ),
//! * I¹ — linear interpolation between the new edge's endpoint values
//!   (coarse edge midpoints, where λ is single valued),
//! * I² — the local reconstruction U_{ℓ-1} λ evaluated on the new edge,
//! * I³ — I¹ at the new edge's endpoints, I² at its strictly interior nodes.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::Error;
use crate::hdg::LocalOperators;
use crate::mesh::{cell_geometry, EdgeProvenance, MeshLevel};
use crate::poly::ScalarBasis;
use crate::skeleton::{ScaledMass, SkeletonSpace};
use crate::sparse::{csr_from_triplets, spmv, spmv_transpose};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionKind {
    I0,
    I1,
    I2,
    I3,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 4] = [
        InjectionKind::I0,
        InjectionKind::I1,
        InjectionKind::I2,
        InjectionKind::I3,
    ];

    /// I⁰, I² and I³ evaluate the coarse reconstruction U_{ℓ-1}λ.
    pub fn needs_local_ops(&self) -> bool {
        !matches!(self, InjectionKind::I1)
    }

    pub fn name(&self) -> &'static str {
        match self {
            InjectionKind::I0 => "i0",
            InjectionKind::I1 => "i1",
            InjectionKind::I2 => "i2",
            InjectionKind::I3 => "i3",
        }
    }
}

/// Sparse injection matrix; rows are fine DoFs, columns coarse DoFs.
pub struct TransferMatrix {
    pub kind: InjectionKind,
    pub matrix: CsrMatrix<f64>,
}

impl TransferMatrix {
    /// Apply the injection: fine = I · coarse.
    pub fn inject(&self, coarse: &DVector<f64>) -> DVector<f64> {
        spmv(&self.matrix, coarse)
    }

    /// Coordinate-format text dump for golden tests.
    pub fn dump(&self) -> String {
        crate::sparse::dump_coo(&self.matrix)
    }
}

/// How residuals move to the coarse level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RestrictionMode {
    /// Transpose of the injection in the Euclidean coefficient space
    /// (the implementation convention; the default).
    #[default]
    Euclidean,
    /// The scaled-L2 adjoint M_{ℓ-1}⁻¹ Iᵀ M_ℓ, for diagnostics.
    Scaled,
}

/// Euclidean restriction Iᵀ r.
pub fn restrict_euclidean(transfer: &TransferMatrix, residual: &DVector<f64>) -> DVector<f64> {
    spmv_transpose(&transfer.matrix, residual)
}

/// Scaled restriction M_{ℓ-1}⁻¹ Iᵀ M_ℓ r, the adjoint with respect to the
/// scaled skeleton inner products.
pub fn restrict_scaled(
    transfer: &TransferMatrix,
    residual: &DVector<f64>,
    fine_mass: &ScaledMass,
    coarse_mass: &ScaledMass,
) -> DVector<f64> {
    coarse_mass.apply_inv(&spmv_transpose(&transfer.matrix, &fine_mass.apply(residual)))
}

type SparseRow = Vec<(usize, f64)>;

/// Per-vertex averaging functionals: the arithmetic mean of λ over all faces
/// sharing the vertex; empty (value 0) at boundary vertices.
fn vertex_average_rows(level: &MeshLevel, space: &SkeletonSpace) -> Vec<SparseRow> {
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); level.vertices.len()];
    for (e, edge) in level.edges.iter().enumerate() {
        incident[edge.v[0]].push((e, 0));
        incident[edge.v[1]].push((e, space.p));
    }
    let boundary = crate::mesh::boundary_vertices(level);
    incident
        .iter()
        .enumerate()
        .map(|(v, edges)| {
            if boundary[v] || edges.is_empty() {
                return Vec::new();
            }
            let w = 1.0 / edges.len() as f64;
            edges
                .iter()
                .filter_map(|&(e, node)| space.dof(e, node).map(|d| (d, w)))
                .collect()
        })
        .collect()
}

/// λ restricted to one coarse edge, evaluated at parameter s (empty on
/// boundary edges where λ ≡ 0).
fn lambda_row(space: &SkeletonSpace, edge: usize, s: f64) -> SparseRow {
    match space.edge_offset[edge] {
        None => Vec::new(),
        Some(o) => (0..=space.p)
            .map(|i| (o + i, space.basis.eval(i, s)))
            .collect(),
    }
}

/// Parameter of a point along an edge's own orientation.
fn edge_param(level: &MeshLevel, edge: usize, x: [f64; 2]) -> f64 {
    let e = &level.edges[edge];
    let a = level.vertices[e.v[0]];
    let b = level.vertices[e.v[1]];
    let d = [b.x - a.x, b.y - a.y];
    let len2 = d[0] * d[0] + d[1] * d[1];
    ((x[0] - a.x) * d[0] + (x[1] - a.y) * d[1]) / len2
}

/// How the continuous rebuild behind I⁰ assigns its nodal values. Both
/// variants reproduce conforming P1 traces exactly and behave alike in the
/// V-cycle; they differ in which quantity is averaged at shared nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuousVariant {
    /// Vertex nodes average λ over all faces sharing the vertex,
    /// face-interior nodes take λ itself, cell-interior nodes take U λ.
    FaceAverage,
    /// Every node averages the reconstruction U λ over all cells sharing it.
    CellAverage,
}

/// Variant used for `InjectionKind::I0` unless one is given explicitly.
pub const DEFAULT_I0_VARIANT: ContinuousVariant = ContinuousVariant::FaceAverage;

/// Nodal functionals of the continuous degree-p rebuild: one sparse row per
/// coarse vertex and per strictly-interior edge node; values on the domain
/// boundary are zero (empty rows).
struct I0Nodes {
    vertex_rows: Vec<SparseRow>,
    /// Per coarse edge: rows of the 1D nodes 1..p (exclusive), i.e. nodes
    /// strictly inside the edge.
    edge_rows: Vec<Vec<SparseRow>>,
}

fn i0_nodes(
    level: &MeshLevel,
    space: &SkeletonSpace,
    ops: &LocalOperators,
    variant: ContinuousVariant,
) -> I0Nodes {
    let p = space.p;
    let boundary = crate::mesh::boundary_vertices(level);
    let vertex_rows = match variant {
        ContinuousVariant::FaceAverage => vertex_average_rows(level, space),
        ContinuousVariant::CellAverage => {
            let mut cells_at: Vec<Vec<usize>> = vec![Vec::new(); level.vertices.len()];
            for (c, cell) in level.cells.iter().enumerate() {
                for &v in &cell.v {
                    cells_at[v].push(c);
                }
            }
            cells_at
                .iter()
                .enumerate()
                .map(|(v, cells)| {
                    if boundary[v] || cells.is_empty() {
                        return Vec::new();
                    }
                    let pos = level.vertices[v];
                    let w = 1.0 / cells.len() as f64;
                    let mut row = Vec::new();
                    for &c in cells {
                        for (col, val) in ops.u_eval_row(level, space, c, pos.x, pos.y) {
                            row.push((col, w * val));
                        }
                    }
                    row
                })
                .collect()
        }
    };
    let mut edge_rows = Vec::with_capacity(level.edges.len());
    for (e, edge) in level.edges.iter().enumerate() {
        let mut rows = Vec::with_capacity(p.saturating_sub(1));
        for j in 1..p {
            let s = j as f64 / p as f64;
            let row = if edge.boundary {
                Vec::new()
            } else {
                match variant {
                    ContinuousVariant::FaceAverage => vec![(space.dof(e, j).unwrap(), 1.0)],
                    ContinuousVariant::CellAverage => {
                        let a = level.vertices[edge.v[0]];
                        let b = level.vertices[edge.v[1]];
                        let x = [a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)];
                        let w = 1.0 / edge.cells.len() as f64;
                        let mut row = Vec::new();
                        for &c in &edge.cells {
                            for (col, val) in ops.u_eval_row(level, space, c, x[0], x[1]) {
                                row.push((col, w * val));
                            }
                        }
                        row
                    }
                }
            };
            rows.push(row);
        }
        edge_rows.push(rows);
    }
    I0Nodes {
        vertex_rows,
        edge_rows,
    }
}

/// Lattice evaluation data of the continuous degree-p rebuild on one coarse
/// cell: nodal functionals plus the inverse Vandermonde for point evaluation.
struct CellLattice {
    rows: Vec<SparseRow>,
    basis: ScalarBasis,
    vt_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CellLattice {
    fn build(
        level: &MeshLevel,
        space: &SkeletonSpace,
        cell: usize,
        nodes_data: &I0Nodes,
        ops: &LocalOperators,
    ) -> Self {
        let p = space.p;
        let geom = cell_geometry(level, cell).expect("valid cell");
        let c = &level.cells[cell];
        let mut nodes = Vec::new();
        let mut rows = Vec::new();
        for b0 in 0..=p {
            for b1 in 0..=(p - b0) {
                let b2 = p - b0 - b1;
                let bary = [b0 as f64, b1 as f64, b2 as f64].map(|b| b / p as f64);
                let x = [
                    bary[0] * geom.verts[0][0]
                        + bary[1] * geom.verts[1][0]
                        + bary[2] * geom.verts[2][0],
                    bary[0] * geom.verts[0][1]
                        + bary[1] * geom.verts[1][1]
                        + bary[2] * geom.verts[2][1],
                ];
                nodes.push(x);
                let zeros = [b0, b1, b2].iter().filter(|&&b| b == 0).count();
                let row = if zeros == 2 {
                    // vertex node
                    let local = [b0, b1, b2].iter().position(|&b| b == p).unwrap();
                    nodes_data.vertex_rows[c.v[local]].clone()
                } else if zeros == 1 {
                    // on the edge opposite the vertex with zero coordinate
                    let local = [b0, b1, b2].iter().position(|&b| b == 0).unwrap();
                    let e = c.e[local];
                    let s = edge_param(level, e, x);
                    let j = (s * p as f64).round() as usize;
                    debug_assert!((s - j as f64 / p as f64).abs() < 1e-9);
                    nodes_data.edge_rows[e][j - 1].clone()
                } else {
                    // cell interior: local reconstruction
                    ops.u_eval_row(level, space, cell, x[0], x[1])
                };
                rows.push(row);
            }
        }
        let basis = ScalarBasis::new(p, geom.centroid, geom.diameter);
        let n = basis.len();
        debug_assert_eq!(n, nodes.len());
        let mut vt = DMatrix::zeros(n, n);
        for (i, x) in nodes.iter().enumerate() {
            let m = basis.eval(x[0], x[1]);
            // column i of Vᵀ = monomials at node i
            for k in 0..n {
                vt[(k, i)] = m[k];
            }
        }
        let vt_lu = vt.lu();
        CellLattice { rows, basis, vt_lu }
    }

    /// The continuous function evaluated at (x, y) as a functional of the
    /// coarse coefficients, appended as triplets for the given fine DoF.
    fn eval_row(&self, x: f64, y: f64, out: &mut Vec<(usize, usize, f64)>, fine_dof: usize) {
        let m = self.basis.eval(x, y);
        let phi = self.vt_lu.solve(&m).expect("unisolvent lattice");
        for (i, row) in self.rows.iter().enumerate() {
            let w = phi[i];
            if w == 0.0 {
                continue;
            }
            for &(col, v) in row {
                out.push((fine_dof, col, w * v));
            }
        }
    }
}

/// Build the injection matrix for one level pair. `coarse_ops` are the
/// coarse-level local solver maps; required for I⁰, I², I³.
pub fn build_injection(
    kind: InjectionKind,
    coarse_level: &MeshLevel,
    coarse_space: &SkeletonSpace,
    fine_level: &MeshLevel,
    fine_space: &SkeletonSpace,
    coarse_ops: Option<&LocalOperators>,
) -> Result<TransferMatrix> {
    build_injection_with_variant(
        kind,
        coarse_level,
        coarse_space,
        fine_level,
        fine_space,
        coarse_ops,
        DEFAULT_I0_VARIANT,
    )
}

/// `build_injection` with an explicit choice of the I⁰ nodal rule.
#[allow(clippy::too_many_arguments)]
pub fn build_injection_with_variant(
    kind: InjectionKind,
    coarse_level: &MeshLevel,
    coarse_space: &SkeletonSpace,
    fine_level: &MeshLevel,
    fine_space: &SkeletonSpace,
    coarse_ops: Option<&LocalOperators>,
    i0_variant: ContinuousVariant,
) -> Result<TransferMatrix> {
    assert_eq!(fine_level.level_index, coarse_level.level_index + 1);
    assert_eq!(fine_space.p, coarse_space.p);
    let ops = match (kind.needs_local_ops(), coarse_ops) {
        (true, None) => return Err(Error::MissingLocalOperators { kind: kind.name() }),
        (true, Some(o)) => Some(o),
        (false, o) => o,
    };
    let p = fine_space.p;
    let nodes = fine_space.basis.nodes.clone();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();

    // I0 precomputations: nodal functionals and per-cell lattices (lazy).
    let i0_data = if kind == InjectionKind::I0 {
        Some(i0_nodes(coarse_level, coarse_space, ops.unwrap(), i0_variant))
    } else {
        None
    };
    let mut lattices: Vec<Option<CellLattice>> = Vec::new();
    if kind == InjectionKind::I0 {
        lattices.resize_with(coarse_level.cells.len(), || None);
    }

    for (ef, edge) in fine_level.edges.iter().enumerate() {
        let Some(offset) = fine_space.edge_offset[ef] else { continue };
        let a = fine_level.vertices[edge.v[0]];
        let b = fine_level.vertices[edge.v[1]];
        let point = |t: f64| [a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)];
        match edge.provenance {
            EdgeProvenance::Root => unreachable!("fine level has no root edges"),
            EdgeProvenance::ChildOfEdge { parent, .. } => {
                for (i, &t) in nodes.iter().enumerate() {
                    let x = point(t);
                    let s = edge_param(coarse_level, parent, x);
                    let row = match kind {
                        InjectionKind::I0 => continuous_row_on_edge(
                            coarse_level,
                            coarse_space,
                            parent,
                            s,
                            i0_data.as_ref().unwrap(),
                        ),
                        _ => lambda_row(coarse_space, parent, s),
                    };
                    for (col, v) in row {
                        triplets.push((offset + i, col, v));
                    }
                }
            }
            EdgeProvenance::InteriorOfCell { parent } => {
                // both endpoints are midpoints of coarse edges of the parent
                let mid_edge = |pt: [f64; 2]| -> usize {
                    *coarse_level.cells[parent]
                        .e
                        .iter()
                        .find(|&&ce| {
                            let e = &coarse_level.edges[ce];
                            let va = coarse_level.vertices[e.v[0]];
                            let vb = coarse_level.vertices[e.v[1]];
                            let m = [0.5 * (va.x + vb.x), 0.5 * (va.y + vb.y)];
                            (m[0] - pt[0]).abs() <= 1e-12 && (m[1] - pt[1]).abs() <= 1e-12
                        })
                        .expect("interior edge endpoint is a coarse edge midpoint")
                };
                let e_a = mid_edge([a.x, a.y]);
                let e_b = mid_edge([b.x, b.y]);
                let row_a = lambda_row(coarse_space, e_a, 0.5);
                let row_b = lambda_row(coarse_space, e_b, 0.5);
                for (i, &t) in nodes.iter().enumerate() {
                    let x = point(t);
                    match kind {
                        InjectionKind::I1 => {
                            for &(col, v) in &row_a {
                                triplets.push((offset + i, col, (1.0 - t) * v));
                            }
                            for &(col, v) in &row_b {
                                triplets.push((offset + i, col, t * v));
                            }
                        }
                        InjectionKind::I2 => {
                            for (col, v) in ops.unwrap().u_eval_row(
                                coarse_level,
                                coarse_space,
                                parent,
                                x[0],
                                x[1],
                            ) {
                                triplets.push((offset + i, col, v));
                            }
                        }
                        InjectionKind::I3 => {
                            if i == 0 {
                                for &(col, v) in &row_a {
                                    triplets.push((offset + i, col, v));
                                }
                            } else if i == p {
                                for &(col, v) in &row_b {
                                    triplets.push((offset + i, col, v));
                                }
                            } else {
                                for (col, v) in ops.unwrap().u_eval_row(
                                    coarse_level,
                                    coarse_space,
                                    parent,
                                    x[0],
                                    x[1],
                                ) {
                                    triplets.push((offset + i, col, v));
                                }
                            }
                        }
                        InjectionKind::I0 => {
                            let lattice = lattices[parent].get_or_insert_with(|| {
                                CellLattice::build(
                                    coarse_level,
                                    coarse_space,
                                    parent,
                                    i0_data.as_ref().unwrap(),
                                    ops.unwrap(),
                                )
                            });
                            lattice.eval_row(x[0], x[1], &mut triplets, offset + i);
                        }
                    }
                }
            }
        }
    }

    Ok(TransferMatrix {
        kind,
        matrix: csr_from_triplets(fine_space.n_dofs, coarse_space.n_dofs, triplets),
    })
}

/// The continuous coarse function restricted to a coarse edge: a 1D degree-p
/// polynomial whose endpoint nodes carry the vertex functionals and whose
/// strictly interior nodes carry the edge functionals.
fn continuous_row_on_edge(
    level: &MeshLevel,
    space: &SkeletonSpace,
    edge: usize,
    s: f64,
    nodes_data: &I0Nodes,
) -> SparseRow {
    let p = space.p;
    let e = &level.edges[edge];
    if space.edge_offset[edge].is_none() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for j in 0..=p {
        let w = space.basis.eval(j, s);
        if w == 0.0 {
            continue;
        }
        let row = if j == 0 {
            &nodes_data.vertex_rows[e.v[0]]
        } else if j == p {
            &nodes_data.vertex_rows[e.v[1]]
        } else {
            &nodes_data.edge_rows[edge][j - 1]
        };
        for &(col, v) in row {
            out.push((col, w * v));
        }
    }
    out
}

/// Deliberately broken transfer used as a negative control by the assumption
/// checkers: the embedding on child edges, zero on all new interior edges.
/// Violates the conforming trace identity by construction.
pub fn broken_injection(
    coarse_level: &MeshLevel,
    coarse_space: &SkeletonSpace,
    fine_level: &MeshLevel,
    fine_space: &SkeletonSpace,
) -> TransferMatrix {
    let mut triplets = Vec::new();
    for (ef, edge) in fine_level.edges.iter().enumerate() {
        let Some(offset) = fine_space.edge_offset[ef] else { continue };
        if let EdgeProvenance::ChildOfEdge { parent, .. } = edge.provenance {
            let a = fine_level.vertices[edge.v[0]];
            let b = fine_level.vertices[edge.v[1]];
            for (i, &t) in fine_space.basis.nodes.iter().enumerate() {
                let x = [a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)];
                let s = edge_param(coarse_level, parent, x);
                for (col, v) in lambda_row(coarse_space, parent, s) {
                    triplets.push((offset + i, col, v));
                }
            }
        }
    }
    TransferMatrix {
        kind: InjectionKind::I1,
        matrix: csr_from_triplets(fine_space.n_dofs, coarse_space.n_dofs, triplets),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdg::{SolverKind, TauRule};
    use crate::mesh::MeshHierarchy;
    use crate::skeleton::{build_scaled_mass, build_space, trace_conforming_p1};
    use rand::prelude::*;

    fn ldg(p: usize) -> SolverKind {
        SolverKind::LdgH { p, tau: TauRule::OverH(1.0) }
    }

    fn build_pair(
        hier: &MeshHierarchy,
        coarse: usize,
        p: usize,
        kind: InjectionKind,
    ) -> TransferMatrix {
        let cl = &hier.levels[coarse];
        let fl = &hier.levels[coarse + 1];
        let cs = build_space(cl, p);
        let fs = build_space(fl, p);
        let ops = LocalOperators::build(cl, ldg(p)).unwrap();
        build_injection(kind, cl, &cs, fl, &fs, Some(&ops)).unwrap()
    }

    #[test]
    fn trace_identity_holds_for_all_kinds() {
        // I γ_{ℓ-1} w = γ_ℓ w for every interior coarse vertex hat
        let hier = MeshHierarchy::build(3);
        for p in 1..=3usize {
            for pair in [1usize, 2] {
                let cl = &hier.levels[pair];
                let fl = &hier.levels[pair + 1];
                let cs = build_space(cl, p);
                let fs = build_space(fl, p);
                let ops = LocalOperators::build(cl, ldg(p)).unwrap();
                let boundary = crate::mesh::boundary_vertices(cl);
                for kind in InjectionKind::ALL {
                    let t = build_injection(kind, cl, &cs, fl, &fs, Some(&ops)).unwrap();
                    for v in 0..cl.vertices.len() {
                        if boundary[v] {
                            continue;
                        }
                        let mut vals = vec![0.0; cl.vertices.len()];
                        vals[v] = 1.0;
                        let coarse_tr = trace_conforming_p1(cl, &cs, &vals).unwrap();
                        // fine vertex values: old vertices keep w, midpoints average
                        let mut fine_vals = vec![0.0; fl.vertices.len()];
                        fine_vals[..cl.vertices.len()].copy_from_slice(&vals);
                        for (k, e) in cl.edges.iter().enumerate() {
                            fine_vals[cl.vertices.len() + k] = 0.5 * (vals[e.v[0]] + vals[e.v[1]]);
                        }
                        let fine_tr = trace_conforming_p1(fl, &fs, &fine_vals).unwrap();
                        let injected = t.inject(&coarse_tr.coeffs);
                        let err = (&injected - &fine_tr.coeffs).amax();
                        assert!(
                            err <= 1e-12,
                            "{kind:?} p={p} pair ({pair},{}): trace identity residual {err}",
                            pair + 1
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn i1_new_edge_midpoint_interpolates() {
        // endpoint values (1, 0) on a new edge must give 0.5 at its midpoint
        let hier = MeshHierarchy::build(1);
        let p = 1;
        let t = build_pair(&hier, 0, p, InjectionKind::I1);
        let cl = &hier.levels[0];
        let fl = &hier.levels[1];
        let cs = build_space(cl, p);
        let fs = build_space(fl, p);
        for (ef, edge) in fl.edges.iter().enumerate() {
            let EdgeProvenance::InteriorOfCell { .. } = edge.provenance else { continue };
            if fs.edge_offset[ef].is_none() {
                continue;
            }
            // coarse edges whose midpoints are this edge's endpoints
            let mids: Vec<usize> = edge
                .v
                .iter()
                .filter_map(|&vid| {
                    let v = fl.vertices[vid];
                    cl.edges.iter().position(|ce| {
                        let a = cl.vertices[ce.v[0]];
                        let b = cl.vertices[ce.v[1]];
                        ((a.x + b.x) / 2.0 - v.x).abs() < 1e-12
                            && ((a.y + b.y) / 2.0 - v.y).abs() < 1e-12
                    })
                })
                .collect();
            if mids.len() != 2
                || cs.edge_offset[mids[0]].is_none()
                || cs.edge_offset[mids[1]].is_none()
            {
                continue;
            }
            // with p = 1 the value at s = 0.5 is the mean of the two nodal
            // coefficients; set both to 1 so λ(midpoint of mids[0]) = 1
            let mut lam = DVector::zeros(cs.n_dofs);
            let o = cs.edge_offset[mids[0]].unwrap();
            lam[o] = 1.0;
            lam[o + 1] = 1.0;
            let fine = t.inject(&lam);
            let fo = fs.edge_offset[ef].unwrap();
            let vals = [fine[fo], fine[fo + 1]];
            let (hi, lo) = (vals[0].max(vals[1]), vals[0].min(vals[1]));
            assert!((hi - 1.0).abs() < 1e-13 && lo.abs() < 1e-13, "{vals:?}");
            let mid = 0.5 * (fine[fo] + fine[fo + 1]);
            assert!((mid - 0.5).abs() < 1e-13);
            return;
        }
        panic!("no suitable interior fine edge found");
    }

    #[test]
    fn local_kinds_have_local_sparsity() {
        let hier = MeshHierarchy::build(2);
        for p in [1usize, 3] {
            for kind in [InjectionKind::I1, InjectionKind::I2, InjectionKind::I3] {
                let t = build_pair(&hier, 1, p, kind);
                for row in t.matrix.row_iter() {
                    assert!(
                        row.nnz() <= 3 * (p + 1),
                        "{kind:?} p={p}: row with {} entries",
                        row.nnz()
                    );
                }
            }
        }
    }

    #[test]
    fn child_edge_rows_reproduce_coarse_polynomials() {
        let hier = MeshHierarchy::build(2);
        let p = 3;
        let cl = &hier.levels[1];
        let fl = &hier.levels[2];
        let cs = build_space(cl, p);
        let fs = build_space(fl, p);
        let ops = LocalOperators::build(cl, ldg(p)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for kind in [InjectionKind::I1, InjectionKind::I2, InjectionKind::I3] {
            let t = build_injection(kind, cl, &cs, fl, &fs, Some(&ops)).unwrap();
            let lam = cs.vector_from(DVector::from_fn(cs.n_dofs, |_, _| rng.gen::<f64>() - 0.5));
            let fine = fs.vector_from(t.inject(&lam.coeffs));
            for (ef, edge) in fl.edges.iter().enumerate() {
                let EdgeProvenance::ChildOfEdge { parent, .. } = edge.provenance else { continue };
                if fs.edge_offset[ef].is_none() {
                    continue;
                }
                let a = fl.vertices[edge.v[0]];
                let b = fl.vertices[edge.v[1]];
                for k in 0..10 {
                    let tt = (k as f64 + 0.5) / 10.0;
                    let x = [a.x + tt * (b.x - a.x), a.y + tt * (b.y - a.y)];
                    let s = edge_param(cl, parent, x);
                    let coarse_val = crate::skeleton::eval_on_edge(&lam, parent, s);
                    let fine_val = crate::skeleton::eval_on_edge(&fine, ef, tt);
                    assert!(
                        (coarse_val - fine_val).abs() <= 1e-12,
                        "{kind:?}: {coarse_val} vs {fine_val}"
                    );
                }
            }
        }
    }

    #[test]
    fn i1_equals_i3_for_linear_traces() {
        let hier = MeshHierarchy::build(2);
        let t1 = build_pair(&hier, 1, 1, InjectionKind::I1);
        let t3 = build_pair(&hier, 1, 1, InjectionKind::I3);
        let d1 = crate::sparse::to_dense(&t1.matrix);
        let d3 = crate::sparse::to_dense(&t3.matrix);
        assert_eq!(d1, d3, "for p = 1 new edges have no strictly interior nodes");
    }

    #[test]
    fn missing_local_ops_is_an_error() {
        let hier = MeshHierarchy::build(1);
        let cl = &hier.levels[0];
        let fl = &hier.levels[1];
        let cs = build_space(cl, 1);
        let fs = build_space(fl, 1);
        for kind in [InjectionKind::I0, InjectionKind::I2, InjectionKind::I3] {
            assert!(matches!(
                build_injection(kind, cl, &cs, fl, &fs, None),
                Err(Error::MissingLocalOperators { .. })
            ));
        }
        assert!(build_injection(InjectionKind::I1, cl, &cs, fl, &fs, None).is_ok());
    }

    #[test]
    fn restriction_modes_satisfy_their_adjoint_identities() {
        let hier = MeshHierarchy::build(2);
        let p = 2;
        let cl = &hier.levels[1];
        let fl = &hier.levels[2];
        let cs = build_space(cl, p);
        let fs = build_space(fl, p);
        let ops = LocalOperators::build(cl, ldg(p)).unwrap();
        let t = build_injection(InjectionKind::I2, cl, &cs, fl, &fs, Some(&ops)).unwrap();
        let fine_mass = build_scaled_mass(fl, &fs);
        let coarse_mass = build_scaled_mass(cl, &cs);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let r = DVector::from_fn(fs.n_dofs, |_, _| rng.gen::<f64>() - 0.5);
            let mu = DVector::from_fn(cs.n_dofs, |_, _| rng.gen::<f64>() - 0.5);
            // Euclidean: (Iᵀ r)·μ = r·(I μ)
            let lhs = restrict_euclidean(&t, &r).dot(&mu);
            let rhs = r.dot(&t.inject(&mu));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
            // Scaled: ⟨Π r, μ⟩_{ℓ-1} = ⟨r, I μ⟩_ℓ
            let pr = restrict_scaled(&t, &r, &fine_mass, &coarse_mass);
            let lhs = coarse_mass.form(&pr, &mu);
            let rhs = fine_mass.form(&r, &t.inject(&mu));
            assert!(
                (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(rhs.abs()).max(1.0),
                "{lhs} vs {rhs}"
            );
        }
        let zero = DVector::zeros(fs.n_dofs);
        assert_eq!(restrict_euclidean(&t, &zero).amax(), 0.0);
    }

    #[test]
    fn injection_stability_constant_is_level_uniform() {
        // sup ‖Iλ‖_ℓ / ‖λ‖_{ℓ-1} bounded, growth <= 5% from pair (1,2) to (4,5)
        let hier = MeshHierarchy::build(5);
        let p = 1;
        for kind in InjectionKind::ALL {
            let mut constants = Vec::new();
            for coarse in 1..=4usize {
                let cl = &hier.levels[coarse];
                let fl = &hier.levels[coarse + 1];
                let cs = build_space(cl, p);
                let fs = build_space(fl, p);
                let ops = LocalOperators::build(cl, ldg(p)).unwrap();
                let t = build_injection(kind, cl, &cs, fl, &fs, Some(&ops)).unwrap();
                let fine_mass = build_scaled_mass(fl, &fs);
                let coarse_mass = build_scaled_mass(cl, &cs);
                let sup = crate::eigen::power_sup_ratio(
                    cs.n_dofs,
                    &|v: &DVector<f64>| spmv_transpose(&t.matrix, &fine_mass.apply(&t.inject(v))),
                    &|v: &DVector<f64>| coarse_mass.apply(v),
                    &|v: &DVector<f64>| coarse_mass.apply_inv(v),
                    1e-10,
                );
                constants.push(sup.sqrt());
            }
            let growth = constants.last().unwrap() / constants[0];
            assert!(
                growth <= 1.05,
                "{kind:?}: stability constants {constants:?} grew by {growth}"
            );
        }
    }
}
