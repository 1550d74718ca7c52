//! Benchmark configuration: JSON-file backed, every field overridable by a
//! command line flag (flags win).

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hdg_multigrid::hdg::TauRule;
use hdg_multigrid::multigrid::SmootherKind;
use hdg_multigrid::transfer::InjectionKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Injection kinds to benchmark ("i0".."i3").
    pub injections: Vec<String>,
    /// Polynomial degrees.
    pub p: Vec<usize>,
    /// Stabilization rules ("1/h", "1", or "c/h", "c" with a literal c).
    pub taus: Vec<String>,
    /// Smoothing step counts.
    pub m: Vec<usize>,
    /// Finest paper level (paper level k = internal level k-1).
    pub max_paper_level: usize,
    /// "gs" (symmetric Gauss-Seidel), "gs-single", or "jacobi".
    pub smoother: String,
    /// Relaxation factor for the Jacobi smoother.
    pub jacobi_omega: f64,
    /// Relative Euclidean residual tolerance of the stationary iteration.
    pub tol: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            injections: vec!["i0".into(), "i1".into(), "i2".into(), "i3".into()],
            p: vec![1, 2, 3],
            taus: vec!["1/h".into(), "1".into()],
            m: vec![1, 2],
            max_paper_level: 7,
            smoother: "gs".into(),
            jacobi_omega: 2.0 / 3.0,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_paper_level < 2 {
            bail!("max paper level must be at least 2 (got {})", self.max_paper_level);
        }
        if !(self.tol > 0.0) {
            bail!("tolerance must be positive (got {})", self.tol);
        }
        if self.injections.is_empty() || self.p.is_empty() || self.taus.is_empty() || self.m.is_empty()
        {
            bail!("injections, p, taus and m must be non-empty");
        }
        for inj in &self.injections {
            parse_injection(inj)?;
        }
        for tau in &self.taus {
            parse_tau(tau)?;
        }
        for &p in &self.p {
            if !(1..=3).contains(&p) {
                bail!("polynomial degree must be 1, 2 or 3 (got {p})");
            }
        }
        for &m in &self.m {
            if m == 0 {
                bail!("smoothing step count must be at least 1");
            }
        }
        parse_smoother(&self.smoother, self.jacobi_omega)?;
        Ok(())
    }
}

pub fn parse_injection(s: &str) -> Result<InjectionKind> {
    match s.to_ascii_lowercase().as_str() {
        "i0" => Ok(InjectionKind::I0),
        "i1" => Ok(InjectionKind::I1),
        "i2" => Ok(InjectionKind::I2),
        "i3" => Ok(InjectionKind::I3),
        other => bail!("unknown injection kind '{other}' (expected i0..i3)"),
    }
}

pub fn parse_tau(s: &str) -> Result<TauRule> {
    let s = s.trim();
    if let Some(c) = s.strip_suffix("/h") {
        let c: f64 = if c.is_empty() { 1.0 } else { c.parse().context("tau coefficient")? };
        if !(c > 0.0) {
            bail!("tau coefficient must be positive");
        }
        Ok(TauRule::OverH(c))
    } else {
        let c: f64 = s.parse().context("tau value")?;
        if !(c > 0.0) {
            bail!("tau must be positive");
        }
        Ok(TauRule::Constant(c))
    }
}

pub fn parse_smoother(s: &str, omega: f64) -> Result<SmootherKind> {
    match s.to_ascii_lowercase().as_str() {
        "gs" | "gauss-seidel" => Ok(SmootherKind::GaussSeidel),
        "gs-single" => Ok(SmootherKind::GaussSeidelSingle),
        "jacobi" => {
            if !(omega > 0.0 && omega <= 1.0) {
                bail!("jacobi relaxation must satisfy 0 < omega <= 1 (got {omega})");
            }
            Ok(SmootherKind::Jacobi { omega })
        }
        other => bail!("unknown smoother '{other}' (expected gs, gs-single or jacobi)"),
    }
}
