//! The multigrid V-cycle on the skeleton hierarchy.
//!
//! One application of B_ℓ: m pre-smoothing steps with R^i (forward for odd i,
//! adjoint for even i), one coarse-grid correction q = B_{ℓ-1} Iᵀ (μ − A x),
//! then m post-smoothing steps continuing the smoother index at m+1. The
//! schedule makes B_ℓ self-adjoint; B_0 is the exact coarse inverse. The
//! outer stationary iteration x ← x + B(b − A x) stops at relative Euclidean
//! residual below the tolerance.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector, Dyn};
use nalgebra_sparse::CsrMatrix;

use crate::error::Error;
use crate::hdg::{assemble, LocalOperators, ScalarField, SolverKind};
use crate::mesh::MeshHierarchy;
use crate::skeleton::{build_space, SkeletonSpace, SkeletonVector};
use crate::sparse::{diagonal, spmv, to_dense};
use crate::transfer::{build_injection, restrict_euclidean, InjectionKind, TransferMatrix};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    Jacobi { omega: f64 },
    /// Symmetric Gauss-Seidel: one step is a forward sweep followed by a
    /// backward sweep, hence self-adjoint (R† = R). This is the step the
    /// reference iteration counts are calibrated against.
    GaussSeidel,
    /// A single directional sweep per step; the adjoint is the reverse
    /// sweep. Twice as many steps reproduce one GaussSeidel step.
    GaussSeidelSingle,
}

impl SmootherKind {
    pub fn name(&self) -> &'static str {
        match self {
            SmootherKind::Jacobi { .. } => "jacobi",
            SmootherKind::GaussSeidel => "gs",
            SmootherKind::GaussSeidelSingle => "gs-single",
        }
    }
}

/// Parameters of the V-cycle.
#[derive(Debug, Clone, Copy)]
pub struct MgConfig {
    /// Number of pre- and post-smoothing steps (m >= 1).
    pub m: usize,
    pub smoother: SmootherKind,
    pub injection: InjectionKind,
    pub kind: SolverKind,
    /// Coarsest internal level of the cycle.
    pub coarsest_level: usize,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            m: 1,
            smoother: SmootherKind::GaussSeidel,
            injection: InjectionKind::I1,
            kind: SolverKind::LdgH {
                p: 1,
                tau: crate::hdg::TauRule::OverH(1.0),
            },
            coarsest_level: 0,
        }
    }
}

/// One assembled level of the hierarchy.
pub struct LevelSystem {
    pub level_index: usize,
    pub space: Arc<SkeletonSpace>,
    pub matrix: CsrMatrix<f64>,
    pub diag: DVector<f64>,
    pub rhs: DVector<f64>,
}

/// All levels plus transfers, ready for V-cycles. `systems[0]` is the
/// coarsest level of the cycle.
pub struct LevelStack {
    pub config: MgConfig,
    pub systems: Vec<LevelSystem>,
    /// `transfers[k]` injects from `systems[k]` to `systems[k+1]`.
    pub transfers: Vec<TransferMatrix>,
    coarse_chol: Cholesky<f64, Dyn>,
}

/// Borrowed view of a (sub-)hierarchy, so callers can assemble levels once
/// and run many cycle configurations over slices of them.
pub struct StackRef<'a> {
    pub systems: &'a [LevelSystem],
    pub transfers: &'a [TransferMatrix],
    pub coarse_chol: &'a Cholesky<f64, Dyn>,
    pub m: usize,
    pub smoother: SmootherKind,
}

/// Assemble one level's condensed system in stack form. The right hand side
/// is included only when `f` is given.
pub fn assemble_level_system(
    hier: &MeshHierarchy,
    l: usize,
    kind: SolverKind,
    f: Option<ScalarField>,
) -> Result<LevelSystem> {
    let level = &hier.levels[l];
    let space = build_space(level, kind.p());
    let sys = assemble(level, &space, kind, f)?;
    let diag = diagonal(&sys.a);
    for (row, &d) in diag.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::ZeroDiagonal { row });
        }
    }
    Ok(LevelSystem {
        level_index: l,
        space,
        matrix: sys.a,
        diag,
        rhs: sys.b,
    })
}

/// Dense factorization of the coarsest-level matrix (B_0 = A_0⁻¹).
pub fn coarse_factorization(sys: &LevelSystem) -> Cholesky<f64, Dyn> {
    Cholesky::new(to_dense(&sys.matrix)).expect("coarsest matrix is SPD")
}

impl LevelStack {
    /// Assemble systems on internal levels `config.coarsest_level..=finest`
    /// and the injection matrices between them. The right hand side is
    /// assembled on the finest level only.
    pub fn build(
        hier: &MeshHierarchy,
        finest: usize,
        config: MgConfig,
        f: Option<ScalarField>,
    ) -> Result<Self> {
        assert!(config.m >= 1, "at least one smoothing step");
        assert!(finest > config.coarsest_level && finest < hier.levels.len());
        config.kind.validate()?;
        let mut systems: Vec<LevelSystem> = Vec::new();
        let mut transfers = Vec::new();
        for l in config.coarsest_level..=finest {
            let rhs_f = if l == finest { f } else { None };
            let sys = assemble_level_system(hier, l, config.kind, rhs_f)?;
            if let Some(prev) = systems.last() {
                let coarse_level = &hier.levels[prev.level_index];
                let ops = if config.injection.needs_local_ops() {
                    Some(LocalOperators::build(coarse_level, config.kind)?)
                } else {
                    None
                };
                transfers.push(build_injection(
                    config.injection,
                    coarse_level,
                    &prev.space,
                    &hier.levels[l],
                    &sys.space,
                    ops.as_ref(),
                )?);
            }
            systems.push(sys);
        }
        let coarse_chol = coarse_factorization(&systems[0]);
        Ok(Self {
            config,
            systems,
            transfers,
            coarse_chol,
        })
    }

    pub fn finest(&self) -> &LevelSystem {
        self.systems.last().unwrap()
    }

    pub fn as_ref(&self) -> StackRef<'_> {
        StackRef {
            systems: &self.systems,
            transfers: &self.transfers,
            coarse_chol: &self.coarse_chol,
            m: self.config.m,
            smoother: self.config.smoother,
        }
    }
}

/// One smoothing step x ← x + R (b − A x).
///
/// Jacobi uses R = ω D⁻¹ (self-adjoint). Gauss-Seidel sweeps run in
/// ascending DoF order; the Euclidean adjoint of a forward sweep is the
/// backward sweep, so the symmetric variant ignores the adjoint flag.
pub fn smooth(
    a: &CsrMatrix<f64>,
    diag: &DVector<f64>,
    x: &mut DVector<f64>,
    b: &DVector<f64>,
    kind: SmootherKind,
    adjoint: bool,
) {
    let sweep = |i: usize, x: &mut DVector<f64>| {
        let row = a.row(i);
        let mut s = b[i];
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    match kind {
        SmootherKind::Jacobi { omega } => {
            let r = b - spmv(a, x);
            for i in 0..x.len() {
                x[i] += omega * r[i] / diag[i];
            }
        }
        SmootherKind::GaussSeidel => {
            for i in 0..x.len() {
                sweep(i, x);
            }
            for i in (0..x.len()).rev() {
                sweep(i, x);
            }
        }
        SmootherKind::GaussSeidelSingle => {
            if adjoint {
                for i in (0..x.len()).rev() {
                    sweep(i, x);
                }
            } else {
                for i in 0..x.len() {
                    sweep(i, x);
                }
            }
        }
    }
}

/// Apply the V-cycle operator B at stack position `k` to `mu`.
pub fn vcycle(stack: &LevelStack, k: usize, mu: &DVector<f64>) -> DVector<f64> {
    vcycle_ref(&stack.as_ref(), k, mu)
}

/// V-cycle over a borrowed stack view.
pub fn vcycle_ref(stack: &StackRef, k: usize, mu: &DVector<f64>) -> DVector<f64> {
    if k == 0 {
        return stack.coarse_chol.solve(mu);
    }
    let sys = &stack.systems[k];
    let m = stack.m;
    let mut x = DVector::zeros(mu.len());
    for i in 1..=m {
        smooth(&sys.matrix, &sys.diag, &mut x, mu, stack.smoother, i % 2 == 0);
    }
    let residual = mu - spmv(&sys.matrix, &x);
    let coarse_rhs = restrict_euclidean(&stack.transfers[k - 1], &residual);
    let q = vcycle_ref(stack, k - 1, &coarse_rhs);
    x += stack.transfers[k - 1].inject(&q);
    for i in 1..=m {
        smooth(&sys.matrix, &sys.diag, &mut x, mu, stack.smoother, (i + m) % 2 == 0);
    }
    x
}

/// Result of the stationary outer iteration.
pub struct SolveStats {
    /// First iteration count k with ‖b − A x_k‖₂ / ‖b‖₂ < tol.
    pub iterations: usize,
    /// Euclidean residual norms ‖b − A x_k‖₂ for k = 0, 1, ....
    pub residual_history: Vec<f64>,
    pub lambda: SkeletonVector,
}

impl SolveStats {
    /// Geometric-mean contraction factor (r_K / r_0)^(1/K).
    pub fn contraction(&self) -> f64 {
        let k = self.iterations;
        if k == 0 {
            return 0.0;
        }
        let r0 = self.residual_history[0];
        let rk = self.residual_history[k];
        (rk / r0).powf(1.0 / k as f64)
    }
}

/// Abort threshold of the stationary iteration.
pub const MAX_STATIONARY_ITERATIONS: usize = 500;

/// Stationary iteration x ← x + B (b − A x) from x = 0 on the finest level
/// of the stack, stopping at relative Euclidean residual < `tol`.
pub fn solve_stationary(stack: &LevelStack, b: &DVector<f64>, tol: f64) -> Result<SolveStats> {
    solve_stationary_ref(&stack.as_ref(), b, tol)
}

/// `solve_stationary` over a borrowed stack view.
pub fn solve_stationary_ref(stack: &StackRef, b: &DVector<f64>, tol: f64) -> Result<SolveStats> {
    let sys = stack.systems.last().unwrap();
    let top = stack.systems.len() - 1;
    let b_norm = b.norm();
    assert!(b_norm > 0.0, "right hand side must be nonzero");
    let mut x = DVector::zeros(b.len());
    let mut history = Vec::new();
    let mut k = 0;
    loop {
        let r = b - spmv(&sys.matrix, &x);
        let rn = r.norm();
        history.push(rn);
        if rn / b_norm < tol {
            return Ok(SolveStats {
                iterations: k,
                residual_history: history,
                lambda: sys.space.vector_from(x),
            });
        }
        if k >= MAX_STATIONARY_ITERATIONS || rn > 10.0 * history[0] {
            return Err(Error::Diverged {
                iterations: k,
                residual: rn / b_norm,
            });
        }
        x += vcycle_ref(stack, top, &r);
        k += 1;
    }
}
