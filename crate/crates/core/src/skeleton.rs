//! Skeletal trace spaces: discontinuous degree-p Lagrange functions on the
//! interior edges, the scaled inner product ⟨·,·⟩_ℓ, traces of conforming
//! piecewise-linear functions and per-edge L2 projections.
//!
//! Degrees of freedom are nodal values at the p+1 equidistant points of each
//! interior edge, ordered edge by edge in edge-id (creation) order. Boundary
//! edges carry no unknowns: the trace space is zero on the Dirichlet boundary.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Error;
use crate::mesh::{boundary_vertices, cell_geometry, MeshLevel};
use crate::poly::Lagrange1d;
use crate::quadrature::{gauss_legendre, EDGE_SMOOTH_POINTS};
use crate::Result;

#[derive(Debug)]
pub struct SkeletonSpace {
    pub p: usize,
    pub level_index: usize,
    pub n_dofs: usize,
    /// Per mesh edge: offset of its first DoF, `None` for boundary edges.
    pub edge_offset: Vec<Option<usize>>,
    /// Interior edge ids in ascending order.
    pub interior_edges: Vec<usize>,
    pub basis: Lagrange1d,
}

impl SkeletonSpace {
    pub fn nodes_per_edge(&self) -> usize {
        self.p + 1
    }

    /// Global DoF index of (edge, node), `None` on boundary edges.
    pub fn dof(&self, edge: usize, node: usize) -> Option<usize> {
        debug_assert!(node <= self.p);
        self.edge_offset[edge].map(|o| o + node)
    }

    pub fn zero(self: &Arc<Self>) -> SkeletonVector {
        SkeletonVector {
            space: self.clone(),
            coeffs: DVector::zeros(self.n_dofs),
        }
    }

    pub fn vector_from(self: &Arc<Self>, coeffs: DVector<f64>) -> SkeletonVector {
        assert_eq!(coeffs.len(), self.n_dofs);
        SkeletonVector {
            space: self.clone(),
            coeffs,
        }
    }
}

/// Coefficient vector of a trace function λ in its space.
#[derive(Debug, Clone)]
pub struct SkeletonVector {
    pub space: Arc<SkeletonSpace>,
    pub coeffs: DVector<f64>,
}

/// Build the degree-p trace space on a mesh level (p >= 1).
pub fn build_space(level: &MeshLevel, p: usize) -> Arc<SkeletonSpace> {
    assert!(p >= 1, "skeleton degree must be at least 1");
    let mut edge_offset = vec![None; level.edges.len()];
    let mut interior_edges = Vec::new();
    let mut offset = 0;
    for (i, edge) in level.edges.iter().enumerate() {
        if !edge.boundary {
            edge_offset[i] = Some(offset);
            offset += p + 1;
            interior_edges.push(i);
        }
    }
    Arc::new(SkeletonSpace {
        p,
        level_index: level.level_index,
        n_dofs: offset,
        edge_offset,
        interior_edges,
        basis: Lagrange1d::new(p),
    })
}

/// Evaluate λ on an edge at parameter t in [0, 1] (from the edge's first to
/// second stored endpoint). Boundary edges evaluate to 0.
pub fn eval_on_edge(lambda: &SkeletonVector, edge: usize, t: f64) -> f64 {
    let space = &lambda.space;
    match space.edge_offset[edge] {
        None => 0.0,
        Some(o) => (0..=space.p)
            .map(|i| space.basis.eval(i, t) * lambda.coeffs[o + i])
            .sum(),
    }
}

/// Trace γ_ℓ w of the conforming piecewise-linear function with the given
/// vertex values; values at boundary vertices must vanish.
pub fn trace_conforming_p1(
    level: &MeshLevel,
    space: &Arc<SkeletonSpace>,
    vertex_values: &[f64],
) -> Result<SkeletonVector> {
    assert_eq!(vertex_values.len(), level.vertices.len());
    let on_boundary = boundary_vertices(level);
    for (v, (&val, &b)) in vertex_values.iter().zip(&on_boundary).enumerate() {
        if b && val != 0.0 {
            return Err(Error::NonzeroBoundaryValue { vertex: v, value: val });
        }
    }
    let mut out = space.zero();
    for &e in &space.interior_edges {
        let o = space.edge_offset[e].unwrap();
        let wa = vertex_values[level.edges[e].v[0]];
        let wb = vertex_values[level.edges[e].v[1]];
        for (i, &t) in space.basis.nodes.iter().enumerate() {
            out.coeffs[o + i] = (1.0 - t) * wa + t * wb;
        }
    }
    Ok(out)
}

/// The scaled skeleton inner product evaluated directly from its definition:
/// Σ_T (|T|/|∂T|) ∫_{∂T} λ μ dσ, with boundary faces contributing zero.
pub fn scaled_inner_product(
    level: &MeshLevel,
    lambda: &SkeletonVector,
    mu: &SkeletonVector,
) -> f64 {
    let space = &lambda.space;
    assert!(Arc::ptr_eq(space, &mu.space), "vectors from different spaces");
    let (gx, gw) = gauss_legendre(space.p + 2);
    let mut total = 0.0;
    for cell in 0..level.cells.len() {
        let geom = cell_geometry(level, cell).expect("valid cell");
        let weight = geom.area / geom.perimeter;
        for (le, eg) in geom.edges.iter().enumerate() {
            let e = level.cells[cell].e[le];
            if level.edges[e].boundary {
                continue;
            }
            let mut s = 0.0;
            for (&t, &w) in gx.iter().zip(&gw) {
                s += w * eval_on_edge(lambda, e, t) * eval_on_edge(mu, e, t);
            }
            total += weight * eg.length * s;
        }
    }
    total
}

/// Block-diagonal matrix realization of ⟨·,·⟩_ℓ in coefficients. Every
/// interior edge contributes the 1D Lagrange mass scaled by
/// |F|·Σ_{T ⊃ F} |T|/|∂T|.
#[derive(Debug, Clone)]
pub struct ScaledMass {
    pub base: DMatrix<f64>,
    base_chol: Cholesky<f64, nalgebra::Dyn>,
    /// Scale factor per interior edge, aligned with `SkeletonSpace::interior_edges`.
    pub factors: Vec<f64>,
    pub nodes: usize,
    pub n_dofs: usize,
}

pub fn build_scaled_mass(level: &MeshLevel, space: &SkeletonSpace) -> ScaledMass {
    let base = space.basis.mass();
    let base_chol = Cholesky::new(base.clone()).expect("1D Lagrange mass is SPD");
    let mut factors = vec![0.0; space.interior_edges.len()];
    for cell in 0..level.cells.len() {
        let geom = cell_geometry(level, cell).expect("valid cell");
        let weight = geom.area / geom.perimeter;
        for (le, eg) in geom.edges.iter().enumerate() {
            let e = level.cells[cell].e[le];
            if let Some(o) = space.edge_offset[e] {
                factors[o / (space.p + 1)] += weight * eg.length;
            }
        }
    }
    ScaledMass {
        base,
        base_chol,
        factors,
        nodes: space.p + 1,
        n_dofs: space.n_dofs,
    }
}

impl ScaledMass {
    /// y = M x.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n_dofs);
        let mut y = DVector::zeros(self.n_dofs);
        for (k, &f) in self.factors.iter().enumerate() {
            let o = k * self.nodes;
            for i in 0..self.nodes {
                let mut s = 0.0;
                for j in 0..self.nodes {
                    s += self.base[(i, j)] * x[o + j];
                }
                y[o + i] = f * s;
            }
        }
        y
    }

    /// y = M⁻¹ x (block solves).
    pub fn apply_inv(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n_dofs);
        let mut y = DVector::zeros(self.n_dofs);
        let mut block = DVector::zeros(self.nodes);
        for (k, &f) in self.factors.iter().enumerate() {
            let o = k * self.nodes;
            for i in 0..self.nodes {
                block[i] = x[o + i] / f;
            }
            let sol = self.base_chol.solve(&block);
            for i in 0..self.nodes {
                y[o + i] = sol[i];
            }
        }
        y
    }

    /// Quadratic/bilinear form xᵀ M y.
    pub fn form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.apply(y).dot(x)
    }

    /// Scaled skeleton norm ‖x‖_ℓ.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.form(x, x).max(0.0).sqrt()
    }

    /// The matrix as triplets (block diagonal).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.factors.len() * self.nodes * self.nodes);
        for (k, &f) in self.factors.iter().enumerate() {
            let o = k * self.nodes;
            for i in 0..self.nodes {
                for j in 0..self.nodes {
                    t.push((o + i, o + j, f * self.base[(i, j)]));
                }
            }
        }
        t
    }
}

/// Per-edge L2 projection Π∂_ℓ of a pointwise-evaluable function onto the
/// trace space. The scaled weights cancel edge by edge, so this is the plain
/// edge-wise projection with the 1D Lagrange mass.
pub fn project_boundary(
    level: &MeshLevel,
    space: &Arc<SkeletonSpace>,
    u: impl Fn(f64, f64) -> f64,
) -> SkeletonVector {
    let mass = space.basis.mass();
    let chol = Cholesky::new(mass).expect("1D Lagrange mass is SPD");
    let (gx, gw) = gauss_legendre(EDGE_SMOOTH_POINTS);
    let mut out = space.zero();
    for &e in &space.interior_edges {
        let o = space.edge_offset[e].unwrap();
        let edge = &level.edges[e];
        let a = level.vertices[edge.v[0]];
        let b = level.vertices[edge.v[1]];
        let mut g = DVector::zeros(space.p + 1);
        for (&t, &w) in gx.iter().zip(&gw) {
            let x = a.x + t * (b.x - a.x);
            let y = a.y + t * (b.y - a.y);
            let uv = u(x, y);
            for i in 0..=space.p {
                g[i] += w * uv * space.basis.eval(i, t);
            }
        }
        let c = chol.solve(&g);
        for i in 0..=space.p {
            out.coeffs[o + i] = c[i];
        }
    }
    out
}
