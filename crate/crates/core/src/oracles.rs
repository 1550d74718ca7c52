//! Verification support: an independent route to the HDG solution that
//! bypasses static condensation entirely.
//!
//! The full block system assembles all cell unknowns (q_T, u_T) together
//! with the skeleton trace λ into one monolithic matrix — the two local
//! equations per cell plus the global flux-balance equation per interior
//! edge DoF — and solves it densely. Used by the test suites to certify
//! that the condensed solve produces the same λ; not part of the solver
//! path and only feasible on coarse levels.

use nalgebra::{DMatrix, DVector};

use crate::hdg::{cell_bases, trace_dof_map, ScalarField, SolverKind};
use crate::mesh::{cell_geometry, MeshLevel};
use crate::poly::Lagrange1d;
use crate::quadrature::{gauss_legendre, triangle_rule_exact, triangle_rule_smooth};
use crate::skeleton::SkeletonSpace;
use crate::Result;

/// Solve the uncondensed (q, u, λ) system, returning the λ coefficients.
pub fn full_block_solve(
    level: &MeshLevel,
    space: &SkeletonSpace,
    kind: SolverKind,
    f: ScalarField,
) -> Result<DVector<f64>> {
    kind.validate()?;
    let p = kind.p();
    let tau = kind.tau(level.h);
    let trace = Lagrange1d::new(p);
    let (g1x, g1w) = gauss_legendre(p + 3);
    let rule = triangle_rule_exact(2 * p + 4);
    let smooth_rule = triangle_rule_smooth();

    // unknown layout: per cell [q_T | u_T], then λ
    let mut cell_offset = Vec::with_capacity(level.cells.len());
    let mut offset = 0;
    let mut dims = Vec::with_capacity(level.cells.len());
    for c in 0..level.cells.len() {
        let geom = cell_geometry(level, c)?;
        let (vb, wb) = cell_bases(&geom, kind);
        cell_offset.push(offset);
        offset += wb.len() + vb.len();
        dims.push((wb.len(), vb.len()));
    }
    let lambda_offset = offset;
    let n = offset + space.n_dofs;
    let mut k_mat = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);

    for c in 0..level.cells.len() {
        let geom = cell_geometry(level, c)?;
        let (vb, wb) = cell_bases(&geom, kind);
        let (nw, nv) = dims[c];
        let qo = cell_offset[c];
        let uo = qo + nw;
        let dof_map = trace_dof_map(level, space, c);

        // volume terms
        for (pt, wt) in rule.points.iter().zip(&rule.weights) {
            let x = geom.map_reference(pt[0], pt[1]);
            let jw = wt * geom.det;
            let (wx, wy) = wb.eval(x[0], x[1]);
            let dv = wb.div(x[0], x[1]);
            let v = vb.eval(x[0], x[1]);
            let (gx, gy) = vb.grad(x[0], x[1]);
            for i in 0..nw {
                for j in 0..nw {
                    // (q, p)_T
                    k_mat[(qo + i, qo + j)] += jw * (wx[i] * wx[j] + wy[i] * wy[j]);
                }
                for j in 0..nv {
                    // −(u, ∇·p)_T in equation 1
                    k_mat[(qo + i, uo + j)] -= jw * dv[i] * v[j];
                    // −(q, ∇v)_T in equation 2
                    k_mat[(uo + j, qo + i)] -= jw * (wx[i] * gx[j] + wy[i] * gy[j]);
                }
            }
        }
        // volume load ∫ f v
        for (pt, wt) in smooth_rule.points.iter().zip(&smooth_rule.weights) {
            let x = geom.map_reference(pt[0], pt[1]);
            let jw = wt * geom.det * f(x[0], x[1]);
            let v = vb.eval(x[0], x[1]);
            for j in 0..nv {
                rhs[uo + j] += jw * v[j];
            }
        }

        // boundary terms of the local equations and the global flux balance
        for le in 0..3 {
            let eg = geom.edges[le];
            for (&t, &w) in g1x.iter().zip(&g1w) {
                let x = [
                    eg.a[0] + t * (eg.b[0] - eg.a[0]),
                    eg.a[1] + t * (eg.b[1] - eg.a[1]),
                ];
                let sw = w * eg.length;
                let (wx, wy) = wb.eval(x[0], x[1]);
                let v = vb.eval(x[0], x[1]);
                let phi = trace.eval_all(t);
                for i in 0..nw {
                    let wn = eg.normal[0] * wx[i] + eg.normal[1] * wy[i];
                    // ⟨λ, p·ν⟩ in equation 1
                    for (node, &pv) in phi.iter().enumerate() {
                        if let Some(g) = dof_map[le * (p + 1) + node] {
                            k_mat[(qo + i, lambda_offset + g)] += sw * wn * pv;
                        }
                    }
                    // ⟨q·ν, v⟩ in equation 2 and in the flux balance
                    for j in 0..nv {
                        k_mat[(uo + j, qo + i)] += sw * wn * v[j];
                    }
                    for (node, &pv) in phi.iter().enumerate() {
                        if let Some(g) = dof_map[le * (p + 1) + node] {
                            k_mat[(lambda_offset + g, qo + i)] += sw * wn * pv;
                        }
                    }
                }
                for j in 0..nv {
                    // τ⟨u, v⟩ and −τ⟨λ, v⟩ in equation 2
                    for j2 in 0..nv {
                        k_mat[(uo + j, uo + j2)] += sw * tau * v[j] * v[j2];
                    }
                    for (node, &pv) in phi.iter().enumerate() {
                        if let Some(g) = dof_map[le * (p + 1) + node] {
                            k_mat[(uo + j, lambda_offset + g)] -= sw * tau * v[j] * pv;
                        }
                    }
                }
                // τ⟨u − λ, μ⟩ in the flux balance
                for (node, &pv) in phi.iter().enumerate() {
                    let Some(g) = dof_map[le * (p + 1) + node] else { continue };
                    for j in 0..nv {
                        k_mat[(lambda_offset + g, uo + j)] += sw * tau * pv * v[j];
                    }
                    for (node2, &pv2) in phi.iter().enumerate() {
                        if let Some(g2) = dof_map[le * (p + 1) + node2] {
                            k_mat[(lambda_offset + g, lambda_offset + g2)] -= sw * tau * pv * pv2;
                        }
                    }
                }
            }
        }
    }

    let sol = k_mat
        .lu()
        .solve(&rhs)
        .expect("full block system is invertible");
    Ok(sol.rows(lambda_offset, space.n_dofs).into_owned())
}
