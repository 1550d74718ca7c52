//! Polynomial bases: 1D Lagrange functions on equidistant nodes for the
//! skeleton, and centered/scaled monomials for the cell-local spaces.

use nalgebra::{DMatrix, DVector};

use crate::quadrature::gauss_legendre;

/// Lagrange basis of degree p on [0, 1] with equidistant nodes t_i = i/p
/// (endpoints included). For p = 0 the single node sits at t = 0.5.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub p: usize,
    pub nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(p: usize) -> Self {
        let nodes = if p == 0 {
            vec![0.5]
        } else {
            (0..=p).map(|i| i as f64 / p as f64).collect()
        };
        Self { p, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value of the i-th basis function at parameter t.
    pub fn eval(&self, i: usize, t: f64) -> f64 {
        let ti = self.nodes[i];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &tj)| (t - tj) / (ti - tj))
            .product()
    }

    /// All basis values at parameter t.
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, t)).collect()
    }

    /// Mass matrix ∫₀¹ ℓ_i ℓ_j dt.
    pub fn mass(&self) -> DMatrix<f64> {
        let n = self.len();
        let (gx, gw) = gauss_legendre(n + 2);
        let mut m = DMatrix::zeros(n, n);
        for (t, w) in gx.iter().zip(&gw) {
            let vals = self.eval_all(*t);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * vals[i] * vals[j];
                }
            }
        }
        m
    }
}

/// Scalar monomial basis of total degree <= `deg`, centered at `center` and
/// scaled by `scale` for conditioning: m_k(x) = ((x-cx)/s)^a ((y-cy)/s)^b.
#[derive(Debug, Clone)]
pub struct ScalarBasis {
    pub exps: Vec<(u32, u32)>,
    pub center: [f64; 2],
    pub scale: f64,
}

/// Number of bivariate monomials of total degree <= deg.
pub fn space_dim(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

impl ScalarBasis {
    pub fn new(deg: usize, center: [f64; 2], scale: f64) -> Self {
        let mut exps = Vec::with_capacity(space_dim(deg));
        for total in 0..=deg as u32 {
            for a in (0..=total).rev() {
                exps.push((a, total - a));
            }
        }
        Self {
            exps,
            center,
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.center[0]) / self.scale,
            (y - self.center[1]) / self.scale,
        )
    }

    pub fn eval(&self, x: f64, y: f64) -> DVector<f64> {
        let (u, v) = self.local(x, y);
        DVector::from_iterator(
            self.len(),
            self.exps
                .iter()
                .map(|&(a, b)| u.powi(a as i32) * v.powi(b as i32)),
        )
    }

    /// Gradients (d/dx, d/dy) of every basis function at (x, y).
    pub fn grad(&self, x: f64, y: f64) -> (DVector<f64>, DVector<f64>) {
        let (u, v) = self.local(x, y);
        let mut gx = DVector::zeros(self.len());
        let mut gy = DVector::zeros(self.len());
        for (k, &(a, b)) in self.exps.iter().enumerate() {
            if a > 0 {
                gx[k] = a as f64 * u.powi(a as i32 - 1) * v.powi(b as i32) / self.scale;
            }
            if b > 0 {
                gy[k] = b as f64 * u.powi(a as i32) * v.powi(b as i32 - 1) / self.scale;
            }
        }
        (gx, gy)
    }
}

/// Vector-valued basis for the flux space W_T.
///
/// `Full(p)` spans [P_p]^2 as component-wise monomials. `RaviartThomas(p)`
/// appends the tail x̂·(homogeneous degree-p monomials), spanning
/// [P_p]^2 + x P̃_p. An optional column transform re-combines the raw basis
/// (used to orthonormalize the RT basis per cell).
#[derive(Debug, Clone)]
pub struct VectorBasis {
    scalar: ScalarBasis,
    rt_tail: bool,
    p: usize,
    transform: Option<DMatrix<f64>>,
}

impl VectorBasis {
    pub fn full(p: usize, center: [f64; 2], scale: f64) -> Self {
        Self {
            scalar: ScalarBasis::new(p, center, scale),
            rt_tail: false,
            p,
            transform: None,
        }
    }

    pub fn raviart_thomas(p: usize, center: [f64; 2], scale: f64) -> Self {
        Self {
            scalar: ScalarBasis::new(p, center, scale),
            rt_tail: true,
            p,
            transform: None,
        }
    }

    pub fn len(&self) -> usize {
        let raw = 2 * self.scalar.len() + if self.rt_tail { self.p + 1 } else { 0 };
        match &self.transform {
            Some(c) => c.ncols(),
            None => raw,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn raw_len(&self) -> usize {
        2 * self.scalar.len() + if self.rt_tail { self.p + 1 } else { 0 }
    }

    /// Replace the basis by raw * C (columns of C define the new functions).
    pub fn set_transform(&mut self, c: DMatrix<f64>) {
        assert_eq!(c.nrows(), self.raw_len());
        self.transform = Some(c);
    }

    /// Component values (w_x, w_y) of every basis function at (x, y).
    pub fn eval(&self, x: f64, y: f64) -> (DVector<f64>, DVector<f64>) {
        let m = self.scalar.eval(x, y);
        let np = self.scalar.len();
        let mut vx = DVector::zeros(self.raw_len());
        let mut vy = DVector::zeros(self.raw_len());
        for k in 0..np {
            vx[k] = m[k];
            vy[np + k] = m[k];
        }
        if self.rt_tail {
            let (u, v) = self.scalar.local(x, y);
            for a in 0..=self.p {
                let hom = u.powi(a as i32) * v.powi((self.p - a) as i32);
                vx[2 * np + a] = u * hom;
                vy[2 * np + a] = v * hom;
            }
        }
        match &self.transform {
            Some(c) => (c.transpose() * vx, c.transpose() * vy),
            None => (vx, vy),
        }
    }

    /// Divergence of every basis function at (x, y).
    pub fn div(&self, x: f64, y: f64) -> DVector<f64> {
        let (gx, gy) = self.scalar.grad(x, y);
        let np = self.scalar.len();
        let mut d = DVector::zeros(self.raw_len());
        for k in 0..np {
            d[k] = gx[k];
            d[np + k] = gy[k];
        }
        if self.rt_tail {
            let (u, v) = self.scalar.local(x, y);
            for a in 0..=self.p {
                let hom = u.powi(a as i32) * v.powi((self.p - a) as i32);
                d[2 * np + a] = (self.p as f64 + 2.0) * hom / self.scalar.scale;
            }
        }
        match &self.transform {
            Some(c) => c.transpose() * d,
            None => d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_is_nodal_and_partitions_unity() {
        for p in 1..=4 {
            let basis = Lagrange1d::new(p);
            for (i, &ti) in basis.nodes.iter().enumerate() {
                for (j, _) in basis.nodes.iter().enumerate() {
                    let v = basis.eval(j, ti);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-12);
                }
            }
            for t in [0.0, 0.17, 0.5, 0.83, 1.0] {
                let s: f64 = basis.eval_all(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lagrange_reproduces_polynomials_up_to_degree_p() {
        for p in 1..=3usize {
            let basis = Lagrange1d::new(p);
            // coefficients = nodal values of t^p
            let coeffs: Vec<f64> = basis.nodes.iter().map(|t| t.powi(p as i32)).collect();
            for t in [0.1, 0.35, 0.77] {
                let vals = basis.eval_all(t);
                let got: f64 = vals.iter().zip(&coeffs).map(|(v, c)| v * c).sum();
                assert!((got - t.powi(p as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let basis = VectorBasis::raviart_thomas(2, [0.3, 0.4], 0.5);
        let (x, y) = (0.45, 0.61);
        let h = 1e-6;
        let d = basis.div(x, y);
        let (vxp, _) = basis.eval(x + h, y);
        let (vxm, _) = basis.eval(x - h, y);
        let (_, vyp) = basis.eval(x, y + h);
        let (_, vym) = basis.eval(x, y - h);
        for k in 0..basis.len() {
            let fd = (vxp[k] - vxm[k]) / (2.0 * h) + (vyp[k] - vym[k]) / (2.0 * h);
            assert!((d[k] - fd).abs() < 1e-5, "k={k}: {} vs {}", d[k], fd);
        }
    }
}
