//! Property tests for the algebraic invariants that hold for arbitrary
//! coefficient data.

use hdg_multigrid::hdg::{SolverKind, TauRule};
use hdg_multigrid::mesh::{build_initial_mesh, refine, MeshHierarchy};
use hdg_multigrid::multigrid::{vcycle, LevelStack, MgConfig, SmootherKind};
use hdg_multigrid::skeleton::{build_scaled_mass, build_space, eval_on_edge, scaled_inner_product};
use hdg_multigrid::transfer::InjectionKind;
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Lagrange evaluation reproduces the polynomial behind any nodal data:
    /// sampling a random polynomial of degree p at the nodes and evaluating
    /// through the basis returns its values everywhere.
    #[test]
    fn edge_evaluation_reproduces_polynomials(
        coeffs in proptest::collection::vec(-10.0f64..10.0, 4),
        t in 0.0f64..1.0,
    ) {
        let level = build_initial_mesh();
        let space = build_space(&level, 3);
        let e = space.interior_edges[2];
        let o = space.edge_offset[e].unwrap();
        let poly = |t: f64| coeffs[0] + coeffs[1] * t + coeffs[2] * t * t + coeffs[3] * t * t * t;
        let mut lam = space.zero();
        for (i, &node) in space.basis.nodes.iter().enumerate() {
            lam.coeffs[o + i] = poly(node);
        }
        let got = eval_on_edge(&lam, e, t);
        prop_assert!((got - poly(t)).abs() <= 1e-11 * (1.0 + poly(t).abs()));
    }

    /// The scaled inner product is symmetric, bilinear and positive.
    #[test]
    fn scaled_inner_product_is_an_inner_product(
        seed in 0u64..1_000,
        scale in 0.1f64..10.0,
    ) {
        use rand::prelude::*;
        let level = refine(&build_initial_mesh());
        let space = build_space(&level, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = space.vector_from(DVector::from_fn(space.n_dofs, |_, _| rng.gen::<f64>() - 0.5));
        let b = space.vector_from(DVector::from_fn(space.n_dofs, |_, _| rng.gen::<f64>() - 0.5));
        let ab = scaled_inner_product(&level, &a, &b);
        let ba = scaled_inner_product(&level, &b, &a);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1e-30));
        let aa = scaled_inner_product(&level, &a, &a);
        prop_assert!(aa > 0.0);
        let scaled = space.vector_from(scale * &a.coeffs);
        let sab = scaled_inner_product(&level, &scaled, &b);
        prop_assert!((sab - scale * ab).abs() <= 1e-11 * sab.abs().max(1e-30));
        // agreement with the assembled mass matrix
        let mass = build_scaled_mass(&level, &space);
        let via = mass.form(&a.coeffs, &b.coeffs);
        prop_assert!((via - ab).abs() <= 1e-12 * ab.abs().max(1e-30));
    }
}

/// The V-cycle operator is linear in its input.
#[test]
fn vcycle_is_linear() {
    use rand::prelude::*;
    let hier = MeshHierarchy::build(2);
    let config = MgConfig {
        m: 1,
        smoother: SmootherKind::GaussSeidel,
        injection: InjectionKind::I2,
        kind: SolverKind::LdgH { p: 1, tau: TauRule::OverH(1.0) },
        coarsest_level: 0,
    };
    let stack = LevelStack::build(&hier, 2, config, None).unwrap();
    let top = stack.systems.len() - 1;
    let n = stack.finest().space.n_dofs;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let x = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let y = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        let (alpha, beta) = (rng.gen::<f64>() * 3.0 - 1.5, rng.gen::<f64>() * 3.0 - 1.5);
        let combo = vcycle(&stack, top, &(alpha * &x + beta * &y));
        let parts = alpha * vcycle(&stack, top, &x) + beta * vcycle(&stack, top, &y);
        let gap = (&combo - &parts).amax();
        assert!(gap <= 1e-11 * combo.amax().max(1.0), "nonlinear V-cycle: {gap}");
    }
}
