//! Triangular mesh hierarchy of the unit square.
//!
//! Level 0 is the criss-cross mesh: a 2x2 grid of squares of side 1/2, each
//! split along its anti-diagonal (top-left to bottom-right corner), giving
//! 8 triangles. Finer levels are produced by regular (red) refinement; every
//! edge records whether it is half of a coarse edge or was created inside a
//! coarse cell, which is what the skeletal transfer operators key on.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeProvenance {
    /// Edge of the initial mesh.
    Root,
    /// Half of a coarse edge; `half` 0 contains the parent's first endpoint.
    ChildOfEdge { parent: usize, half: u8 },
    /// Midpoint-triangle edge created strictly inside a coarse cell.
    InteriorOfCell { parent: usize },
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex ids, lower id first; the edge parameter t in [0, 1]
    /// runs from v[0] to v[1].
    pub v: [usize; 2],
    pub boundary: bool,
    /// Adjacent cell ids (1 for boundary edges, 2 for interior ones).
    pub cells: Vec<usize>,
    pub provenance: EdgeProvenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellParent {
    Root,
    Cell(usize),
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Vertex ids, counterclockwise.
    pub v: [usize; 3],
    /// Edge ids; edge i is opposite vertex i.
    pub e: [usize; 3],
    pub parent: CellParent,
}

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    pub level_index: usize,
    /// Maximum cell diameter.
    pub h: f64,
}

/// Nested mesh levels; `levels[0]` is the initial mesh.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
}

struct LevelBuilder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    cells: Vec<Cell>,
    edge_ids: HashMap<(usize, usize), usize>,
    level_index: usize,
}

impl LevelBuilder {
    fn new(vertices: Vec<Vertex>, level_index: usize) -> Self {
        Self {
            vertices,
            edges: Vec::new(),
            cells: Vec::new(),
            edge_ids: HashMap::new(),
            level_index,
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, provenance: EdgeProvenance) -> usize {
        let key = (a.min(b), a.max(b));
        debug_assert!(!self.edge_ids.contains_key(&key));
        let id = self.edges.len();
        self.edges.push(Edge {
            v: [key.0, key.1],
            boundary: false,
            cells: Vec::new(),
            provenance,
        });
        self.edge_ids.insert(key, id);
        id
    }

    fn add_cell(&mut self, v: [usize; 3], parent: CellParent, interior_provenance: EdgeProvenance) {
        let cell_id = self.cells.len();
        let mut e = [0usize; 3];
        for i in 0..3 {
            let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let id = match self.edge_ids.get(&key) {
                Some(&id) => id,
                None => self.add_edge(a, b, interior_provenance),
            };
            self.edges[id].cells.push(cell_id);
            e[i] = id;
        }
        self.cells.push(Cell { v, e, parent });
    }

    fn finish(mut self) -> MeshLevel {
        for edge in &mut self.edges {
            edge.boundary = edge.cells.len() == 1;
        }
        let h = self
            .cells
            .iter()
            .map(|c| {
                let d01 = dist(&self.vertices, c.v[0], c.v[1]);
                let d12 = dist(&self.vertices, c.v[1], c.v[2]);
                let d20 = dist(&self.vertices, c.v[2], c.v[0]);
                d01.max(d12).max(d20)
            })
            .fold(0.0, f64::max);
        MeshLevel {
            vertices: self.vertices,
            edges: self.edges,
            cells: self.cells,
            level_index: self.level_index,
            h,
        }
    }
}

fn dist(vertices: &[Vertex], a: usize, b: usize) -> f64 {
    let (va, vb) = (vertices[a], vertices[b]);
    ((va.x - vb.x).powi(2) + (va.y - vb.y).powi(2)).sqrt()
}

/// Build the initial 8-triangle criss-cross mesh of [0, 1]^2.
pub fn build_initial_mesh() -> MeshLevel {
    // 3x3 grid of vertices, row-major from (0,0).
    let mut vertices = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            vertices.push(Vertex {
                x: i as f64 * 0.5,
                y: j as f64 * 0.5,
            });
        }
    }
    let mut b = LevelBuilder::new(vertices, 0);
    let vid = |i: usize, j: usize| j * 3 + i;
    for j in 0..2 {
        for i in 0..2 {
            let bl = vid(i, j);
            let br = vid(i + 1, j);
            let tr = vid(i + 1, j + 1);
            let tl = vid(i, j + 1);
            // anti-diagonal from the subsquare's top-left to bottom-right corner
            b.add_cell([bl, br, tl], CellParent::Root, EdgeProvenance::Root);
            b.add_cell([br, tr, tl], CellParent::Root, EdgeProvenance::Root);
        }
    }
    b.finish()
}

/// Regular (red) refinement: each triangle splits into 4 congruent children
/// via edge midpoints.
pub fn refine(level: &MeshLevel) -> MeshLevel {
    let nv = level.vertices.len();
    let mut vertices = level.vertices.clone();
    for edge in &level.edges {
        let (a, b) = (level.vertices[edge.v[0]], level.vertices[edge.v[1]]);
        vertices.push(Vertex {
            x: 0.5 * (a.x + b.x),
            y: 0.5 * (a.y + b.y),
        });
    }
    let mut builder = LevelBuilder::new(vertices, level.level_index + 1);
    // Children of coarse edges first, in coarse edge order; midpoint vertex of
    // coarse edge k has id nv + k.
    for (k, edge) in level.edges.iter().enumerate() {
        let m = nv + k;
        builder.add_edge(edge.v[0], m, EdgeProvenance::ChildOfEdge { parent: k, half: 0 });
        builder.add_edge(m, edge.v[1], EdgeProvenance::ChildOfEdge { parent: k, half: 1 });
    }
    // Child cells; the lookup misses inside add_cell create the three
    // midpoint-triangle edges of each coarse cell.
    for (k, cell) in level.cells.iter().enumerate() {
        let [v0, v1, v2] = cell.v;
        let m0 = nv + cell.e[0];
        let m1 = nv + cell.e[1];
        let m2 = nv + cell.e[2];
        let parent = CellParent::Cell(k);
        let prov = EdgeProvenance::InteriorOfCell { parent: k };
        builder.add_cell([v0, m2, m1], parent, prov);
        builder.add_cell([m2, v1, m0], parent, prov);
        builder.add_cell([m1, m0, v2], parent, prov);
        builder.add_cell([m0, m1, m2], parent, prov);
    }
    builder.finish()
}

impl MeshHierarchy {
    /// Build levels 0..=max_level by repeated refinement.
    pub fn build(max_level: usize) -> Self {
        let mut levels = vec![build_initial_mesh()];
        for _ in 0..max_level {
            let next = refine(levels.last().unwrap());
            levels.push(next);
        }
        Self { levels }
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().unwrap()
    }
}

/// Geometry of one cell: affine map from the reference triangle
/// (0,0), (1,0), (0,1), plus per-edge lengths and outward normals.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub verts: [[f64; 2]; 3],
    /// Columns of the reference map Jacobian [v1 - v0 | v2 - v0].
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
    pub centroid: [f64; 2],
    pub diameter: f64,
    pub perimeter: f64,
    /// Per local edge (edge i opposite vertex i): endpoints in the global
    /// edge orientation, length, and outward unit normal.
    pub edges: [EdgeGeometry; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeGeometry {
    /// Physical position of the global edge's first endpoint (t = 0).
    pub a: [f64; 2],
    /// Physical position of the global edge's second endpoint (t = 1).
    pub b: [f64; 2],
    pub length: f64,
    pub normal: [f64; 2],
}

impl CellGeometry {
    pub fn map_reference(&self, xi: f64, eta: f64) -> [f64; 2] {
        [
            self.verts[0][0] + self.jacobian[0][0] * xi + self.jacobian[0][1] * eta,
            self.verts[0][1] + self.jacobian[1][0] * xi + self.jacobian[1][1] * eta,
        ]
    }
}

/// Affine geometry of `cell`; errors on degenerate (zero-area) cells.
pub fn cell_geometry(level: &MeshLevel, cell: usize) -> Result<CellGeometry> {
    let c = &level.cells[cell];
    let p: [[f64; 2]; 3] = std::array::from_fn(|i| {
        let v = level.vertices[c.v[i]];
        [v.x, v.y]
    });
    let jac = [
        [p[1][0] - p[0][0], p[2][0] - p[0][0]],
        [p[1][1] - p[0][1], p[2][1] - p[0][1]],
    ];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let area = 0.5 * det;
    if area <= f64::EPSILON {
        return Err(Error::DegenerateCell { cell, area });
    }
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    let mut diameter: f64 = 0.0;
    let mut perimeter = 0.0;
    let mut edges = [EdgeGeometry {
        a: [0.0; 2],
        b: [0.0; 2],
        length: 0.0,
        normal: [0.0; 2],
    }; 3];
    for i in 0..3 {
        let edge = &level.edges[c.e[i]];
        let va = level.vertices[edge.v[0]];
        let vb = level.vertices[edge.v[1]];
        let (a, b) = ([va.x, va.y], [vb.x, vb.y]);
        let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let tangent = [(b[0] - a[0]) / length, (b[1] - a[1]) / length];
        let mut normal = [tangent[1], -tangent[0]];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let outward = [mid[0] - centroid[0], mid[1] - centroid[1]];
        if normal[0] * outward[0] + normal[1] * outward[1] < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        diameter = diameter.max(length);
        perimeter += length;
        edges[i] = EdgeGeometry {
            a,
            b,
            length,
            normal,
        };
    }
    Ok(CellGeometry {
        verts: p,
        jacobian: jac,
        det,
        area,
        centroid,
        diameter,
        perimeter,
        edges,
    })
}

/// Vertices lying on the Dirichlet boundary, derived topologically: a vertex
/// is boundary iff it is an endpoint of a boundary edge.
pub fn boundary_vertices(level: &MeshLevel) -> Vec<bool> {
    let mut flags = vec![false; level.vertices.len()];
    for edge in &level.edges {
        if edge.boundary {
            flags[edge.v[0]] = true;
            flags[edge.v[1]] = true;
        }
    }
    flags
}

/// Check all single-level invariants; returns human-readable violations
/// (empty iff the level is valid).
pub fn validate(level: &MeshLevel) -> Vec<String> {
    let mut out = Vec::new();
    for (i, v) in level.vertices.iter().enumerate() {
        if !(-1e-12..=1.0 + 1e-12).contains(&v.x) || !(-1e-12..=1.0 + 1e-12).contains(&v.y) {
            out.push(format!("vertex {i} outside the unit square: ({}, {})", v.x, v.y));
        }
    }
    for (i, c) in level.cells.iter().enumerate() {
        let p: Vec<&Vertex> = c.v.iter().map(|&vi| &level.vertices[vi]).collect();
        let signed = 0.5
            * ((p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y));
        if signed <= 0.0 {
            out.push(format!("cell {i} is not counterclockwise (signed area {signed:.3e})"));
        }
        for k in 0..3 {
            let edge = &level.edges[c.e[k]];
            let expect = {
                let (a, b) = (c.v[(k + 1) % 3], c.v[(k + 2) % 3]);
                (a.min(b), a.max(b))
            };
            if (edge.v[0], edge.v[1]) != expect {
                out.push(format!("cell {i}: edge {k} does not connect the opposite vertices"));
            }
        }
    }
    for (i, e) in level.edges.iter().enumerate() {
        match e.cells.len() {
            1 => {
                if !e.boundary {
                    out.push(format!("edge {i} has one adjacent cell but is not boundary"));
                }
            }
            2 => {
                if e.boundary {
                    out.push(format!("edge {i} has two adjacent cells but is flagged boundary"));
                }
            }
            n => out.push(format!("edge {i} has {n} adjacent cells (conformity violation)")),
        }
    }
    let (v, e, c) = (
        level.vertices.len() as i64,
        level.edges.len() as i64,
        level.cells.len() as i64,
    );
    if v - e + (c + 1) != 2 {
        out.push(format!("Euler formula violated: V={v} E={e} C={c}"));
    }
    out
}

/// Plain-text dump of one level, one entity per line:
///
/// ```text
/// # level <k> h <h>
/// v <id> <x> <y>
/// e <id> <v0> <v1> <b|i> root | child <parent> <half> | interior <parent>
/// c <id> <v0> <v1> <v2> <e0> <e1> <e2> root | <parent-cell>
/// ```
pub fn dump_level(level: &MeshLevel) -> String {
    let mut s = String::new();
    writeln!(s, "# level {} h {}", level.level_index, level.h).unwrap();
    for (i, v) in level.vertices.iter().enumerate() {
        writeln!(s, "v {} {} {}", i, v.x, v.y).unwrap();
    }
    for (i, e) in level.edges.iter().enumerate() {
        let b = if e.boundary { "b" } else { "i" };
        let prov = match e.provenance {
            EdgeProvenance::Root => "root".to_string(),
            EdgeProvenance::ChildOfEdge { parent, half } => format!("child {parent} {half}"),
            EdgeProvenance::InteriorOfCell { parent } => format!("interior {parent}"),
        };
        writeln!(s, "e {} {} {} {} {}", i, e.v[0], e.v[1], b, prov).unwrap();
    }
    for (i, c) in level.cells.iter().enumerate() {
        let parent = match c.parent {
            CellParent::Root => "root".to_string(),
            CellParent::Cell(k) => format!("{k}"),
        };
        writeln!(
            s,
            "c {} {} {} {} {} {} {} {}",
            i, c.v[0], c.v[1], c.v[2], c.e[0], c.e[1], c.e[2], parent
        )
        .unwrap();
    }
    s
}

/// Interior (non-boundary) edge count of a level.
pub fn interior_edge_count(level: &MeshLevel) -> usize {
    level.edges.iter().filter(|e| !e.boundary).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_mesh_counts_match_the_figure() {
        let m = build_initial_mesh();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.edges.len(), 16);
        assert_eq!(m.cells.len(), 8);
        assert_eq!(m.edges.iter().filter(|e| e.boundary).count(), 8);
        assert_eq!(interior_edge_count(&m), 8);
        assert!((m.h - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn initial_mesh_diagonals_run_top_left_to_bottom_right() {
        let m = build_initial_mesh();
        // the BL subsquare's diagonal joins (0, 0.5) and (0.5, 0)
        let has = m.edges.iter().any(|e| {
            let a = m.vertices[e.v[0]];
            let b = m.vertices[e.v[1]];
            (a.x, a.y, b.x, b.y) == (0.5, 0.0, 0.0, 0.5) || (a.x, a.y, b.x, b.y) == (0.0, 0.5, 0.5, 0.0)
        });
        assert!(has, "anti-diagonal of the lower-left subsquare missing");
        // the main-diagonal direction must not appear
        let wrong = m.edges.iter().any(|e| {
            let a = m.vertices[e.v[0]];
            let b = m.vertices[e.v[1]];
            ((a.x, a.y) == (0.0, 0.0) && (b.x, b.y) == (0.5, 0.5))
                || ((a.x, a.y) == (0.5, 0.5) && (b.x, b.y) == (0.0, 0.0))
        });
        assert!(!wrong);
    }

    #[test]
    fn refinement_counts_follow_the_recurrence() {
        let mut level = build_initial_mesh();
        let (mut v, mut e, mut c) = (9usize, 16usize, 8usize);
        let mut boundary = 8usize;
        for _ in 0..4 {
            let fine = refine(&level);
            let (ev, ee, ec) = (v + e, 2 * e + 3 * c, 4 * c);
            boundary *= 2;
            assert_eq!(fine.vertices.len(), ev);
            assert_eq!(fine.edges.len(), ee);
            assert_eq!(fine.cells.len(), ec);
            assert_eq!(fine.edges.iter().filter(|x| x.boundary).count(), boundary);
            assert_eq!(interior_edge_count(&fine), ee - boundary);
            assert!((fine.h - level.h / 2.0).abs() <= 1e-14 * level.h);
            assert!(validate(&fine).is_empty());
            (v, e, c) = (ev, ee, ec);
            level = fine;
        }
        // level 1: 32 cells, 56 edges, 25 vertices, 40 interior edges
        let l1 = refine(&build_initial_mesh());
        assert_eq!(
            (l1.cells.len(), l1.edges.len(), l1.vertices.len(), interior_edge_count(&l1)),
            (32, 56, 25, 40)
        );
        // two refinements: 128 cells, 176 interior edges
        let l2 = refine(&l1);
        assert_eq!((l2.cells.len(), interior_edge_count(&l2)), (128, 176));
    }

    #[test]
    fn interior_edge_closed_form_holds_through_level_6() {
        let hier = MeshHierarchy::build(6);
        let (mut e, mut c, mut b) = (16usize, 8usize, 8usize);
        for level in &hier.levels[1..] {
            let enew = 2 * e + 3 * c;
            b *= 2;
            c *= 4;
            assert_eq!(interior_edge_count(level), enew - b);
            e = enew;
        }
    }

    #[test]
    fn interior_edges_connect_parent_edge_midpoints() {
        let coarse = build_initial_mesh();
        let fine = refine(&coarse);
        let mut found = vec![0usize; coarse.cells.len()];
        for edge in &fine.edges {
            if let EdgeProvenance::InteriorOfCell { parent } = edge.provenance {
                found[parent] += 1;
                let cell = &coarse.cells[parent];
                for &vid in &edge.v {
                    let v = fine.vertices[vid];
                    let is_midpoint = cell.e.iter().any(|&ce| {
                        let ce = &coarse.edges[ce];
                        let a = coarse.vertices[ce.v[0]];
                        let b = coarse.vertices[ce.v[1]];
                        let m = (0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
                        (v.x - m.0).abs() <= 1e-12 && (v.y - m.1).abs() <= 1e-12
                    });
                    assert!(is_midpoint);
                }
            }
        }
        assert!(found.iter().all(|&n| n == 3), "3 interior edges per coarse cell");
    }

    #[test]
    fn geometry_of_reference_like_cell() {
        let m = build_initial_mesh();
        for cell in 0..m.cells.len() {
            let g = cell_geometry(&m, cell).unwrap();
            assert!((g.area - 0.125).abs() < 1e-15);
            for eg in &g.edges {
                let norm = (eg.normal[0].powi(2) + eg.normal[1].powi(2)).sqrt();
                assert!((norm - 1.0).abs() < 1e-14);
                let mid = [0.5 * (eg.a[0] + eg.b[0]), 0.5 * (eg.a[1] + eg.b[1])];
                let dot = eg.normal[0] * (mid[0] - g.centroid[0])
                    + eg.normal[1] * (mid[1] - g.centroid[1]);
                assert!(dot > 0.0);
            }
        }
    }

    #[test]
    fn degenerate_cell_is_reported() {
        let mut m = build_initial_mesh();
        let v0 = m.cells[0].v[0];
        let v1 = m.cells[0].v[1];
        m.vertices[v0] = m.vertices[v1];
        assert!(matches!(
            cell_geometry(&m, 0),
            Err(Error::DegenerateCell { cell: 0, .. })
        ));
    }

    #[test]
    fn validate_flags_flipped_cell_and_dangling_edge() {
        let mut m = build_initial_mesh();
        m.cells[0].v.swap(0, 1);
        let violations = validate(&m);
        assert!(violations.iter().any(|v| v.contains("counterclockwise")));

        let mut m2 = build_initial_mesh();
        m2.edges.push(Edge {
            v: [0, 4],
            boundary: false,
            cells: vec![],
            provenance: EdgeProvenance::Root,
        });
        let violations = validate(&m2);
        assert!(violations.iter().any(|v| v.contains("adjacent cells")));
    }
}
