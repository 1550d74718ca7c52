//! Quadrature rules on the unit interval and the reference triangle.
//!
//! Two families are used: Gauss–Legendre rules sized for exact integration of
//! the polynomial integrands that appear in assembly, and fixed high-order
//! rules for smooth (non-polynomial) data such as manufactured right hand
//! sides and error norms. The reference triangle is (0,0), (1,0), (0,1).

/// Number of Gauss points used per edge for smooth integrands.
pub const EDGE_SMOOTH_POINTS: usize = 16;

/// Gauss–Legendre nodes and weights on [0, 1].
///
/// Computed by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the small point counts used here (n <= 32).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Integrate a function over the reference triangle.
    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }
}

/// Rule exact for bivariate polynomials of total degree <= `degree`,
/// built by collapsing a tensor Gauss rule onto the triangle.
pub fn triangle_rule_exact(degree: usize) -> TriangleRule {
    // After the Duffy map (u, v) -> (u, v(1-u)) with Jacobian (1-u), a total
    // degree d integrand has degree d+1 in u and d in v.
    let n = (degree + 3).div_ceil(2);
    let (gx, gw) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (u, wu) in gx.iter().zip(&gw) {
        for (v, wv) in gx.iter().zip(&gw) {
            points.push([*u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Symmetric Grundmann–Möller rule of index 5 (exact to total degree 11),
/// used for smooth integrands: manufactured loads, error norms, projections.
pub fn triangle_rule_smooth() -> TriangleRule {
    grundmann_moeller(5)
}

/// Grundmann–Möller simplex rule of index `s` on the reference triangle;
/// symmetric, exact for total degree 2s + 1, some weights negative.
fn grundmann_moeller(s: usize) -> TriangleRule {
    let dim = 2usize;
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut raw = Vec::new();
    for i in 0..=s {
        let denom = (d + dim - 2 * i) as f64;
        let coeff = neg_pow(i) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + dim - i) * 4f64.powi(s as i32));
        // all barycentric multi-indices (b0, b1, b2) with sum s - i
        let total = s - i;
        for b0 in 0..=total {
            for b1 in 0..=(total - b0) {
                let b2 = total - b0 - b1;
                let l1 = (2 * b1 + 1) as f64 / denom;
                let l2 = (2 * b2 + 1) as f64 / denom;
                let _ = b0;
                points.push([l1, l2]);
                raw.push(coeff);
            }
        }
    }
    // Normalize so the rule integrates constants exactly over area 1/2.
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| 0.5 * w / sum).collect();
    TriangleRule { points, weights }
}

fn neg_pow(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}
