//! The iteration-count benchmark: assemble the hierarchy once per method
//! variant, run the stationary V-cycle iteration for every configured
//! combination, and emit CSV plus a markdown table in the reference layout.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use hdg_multigrid::hdg::{LocalOperators, ScalarField, SolverKind};
use hdg_multigrid::mesh::MeshHierarchy;
use hdg_multigrid::multigrid::{
    assemble_level_system, coarse_factorization, solve_stationary_ref, StackRef,
};
use hdg_multigrid::transfer::{build_injection, InjectionKind, TransferMatrix};

use crate::config::{parse_injection, parse_smoother, parse_tau, BenchConfig};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub injection: String,
    pub p: usize,
    pub tau: String,
    pub paper_level: usize,
    pub dofs: usize,
    pub m: usize,
    /// `None` flags divergence.
    pub iterations: Option<usize>,
    pub rho: f64,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn any_diverged(&self) -> bool {
        self.rows.iter().any(|r| r.iterations.is_none())
    }

    /// CSV with the stable schema; `zero_wall` replaces wall times by 0 for
    /// byte-reproducible output (active when an explicit seed is passed).
    pub fn to_csv(&self, zero_wall: bool) -> String {
        let mut s = String::from("injection,p,tau,paper_level,dofs,m,iterations,rho,wall_ms\n");
        for r in &self.rows {
            let iters = match r.iterations {
                Some(k) => k.to_string(),
                None => "DIVERGED".to_string(),
            };
            let wall = if zero_wall { 0 } else { r.wall_ms };
            writeln!(
                s,
                "{},{},{},{},{},{},{},{:.4},{}",
                r.injection, r.p, r.tau, r.paper_level, r.dofs, r.m, iters, r.rho, wall
            )
            .unwrap();
        }
        s
    }

    /// Markdown tables in the reference layout: one table per (injection, p)
    /// with levels as columns and m as sub-columns.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let mut keys: Vec<(String, usize)> = Vec::new();
        for r in &self.rows {
            let key = (r.injection.clone(), r.p);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        for (injection, p) in keys {
            let rows: Vec<&BenchRow> = self
                .rows
                .iter()
                .filter(|r| r.injection == injection && r.p == p)
                .collect();
            let mut levels: Vec<usize> = rows.iter().map(|r| r.paper_level).collect();
            levels.sort_unstable();
            levels.dedup();
            let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
            ms.sort_unstable();
            ms.dedup();
            let mut taus: Vec<String> = Vec::new();
            for r in &rows {
                if !taus.contains(&r.tau) {
                    taus.push(r.tau.clone());
                }
            }
            writeln!(s, "## injection {injection} (p = {p})\n").unwrap();
            write!(s, "| tau |").unwrap();
            for l in &levels {
                for m in &ms {
                    write!(s, " {l}/{m} |").unwrap();
                }
            }
            writeln!(s).unwrap();
            write!(s, "|---|").unwrap();
            for _ in levels.iter().flat_map(|_| ms.iter()) {
                write!(s, "---|").unwrap();
            }
            writeln!(s).unwrap();
            write!(s, "| #DoFs |").unwrap();
            for l in &levels {
                let dofs = rows
                    .iter()
                    .find(|r| r.paper_level == *l)
                    .map(|r| r.dofs)
                    .unwrap_or(0);
                for _ in &ms {
                    write!(s, " {dofs} |").unwrap();
                }
            }
            writeln!(s).unwrap();
            for tau in &taus {
                write!(s, "| {tau} |").unwrap();
                for l in &levels {
                    for m in &ms {
                        let cell = rows
                            .iter()
                            .find(|r| r.paper_level == *l && r.m == *m && &r.tau == tau);
                        match cell {
                            Some(r) => match r.iterations {
                                Some(k) => write!(s, " {k} |").unwrap(),
                                None => write!(s, " div |").unwrap(),
                            },
                            None => write!(s, " - |").unwrap(),
                        }
                    }
                }
                writeln!(s).unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }

    /// Parse the output of [`BenchReport::to_markdown`] back into rows
    /// (iterations and DoF counts; timings are not part of the table).
    pub fn parse_markdown(md: &str) -> Result<Vec<ParsedCell>> {
        let mut out = Vec::new();
        let mut injection = String::new();
        let mut p = 0usize;
        let mut columns: Vec<(usize, usize)> = Vec::new();
        let mut dofs_by_level: Vec<(usize, usize)> = Vec::new();
        for line in md.lines() {
            if let Some(rest) = line.strip_prefix("## injection ") {
                let mut parts = rest.split_whitespace();
                injection = parts.next().context("injection name")?.to_string();
                let pval = rest.split("p = ").nth(1).context("degree")?;
                p = pval.trim_end_matches(')').trim().parse()?;
                columns.clear();
                dofs_by_level.clear();
            } else if line.starts_with("| tau |") {
                columns = line
                    .split('|')
                    .map(str::trim)
                    .filter(|c| c.contains('/') && !c.is_empty())
                    .map(|c| {
                        let (l, m) = c.split_once('/').unwrap();
                        Ok((l.parse()?, m.parse()?))
                    })
                    .collect::<Result<_>>()?;
            } else if line.starts_with("| #DoFs |") {
                let cells: Vec<&str> = line
                    .split('|')
                    .map(str::trim)
                    .filter(|c| !c.is_empty() && *c != "#DoFs")
                    .collect();
                for (col, cell) in columns.iter().zip(cells) {
                    let d: usize = cell.parse()?;
                    if !dofs_by_level.contains(&(col.0, d)) {
                        dofs_by_level.push((col.0, d));
                    }
                }
            } else if line.starts_with('|') && !line.starts_with("|---") && !line.starts_with("| tau")
            {
                let cells: Vec<&str> =
                    line.split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
                if cells.is_empty() || columns.is_empty() {
                    continue;
                }
                let tau = cells[0].to_string();
                if tau == "#DoFs" {
                    continue;
                }
                if cells.len() != columns.len() + 1 {
                    bail!("malformed table row: {line}");
                }
                for ((level, m), cell) in columns.iter().zip(&cells[1..]) {
                    if *cell == "-" {
                        continue;
                    }
                    let iterations = if *cell == "div" { None } else { Some(cell.parse()?) };
                    let dofs = dofs_by_level
                        .iter()
                        .find(|(l, _)| l == level)
                        .map(|(_, d)| *d)
                        .unwrap_or(0);
                    out.push(ParsedCell {
                        injection: injection.clone(),
                        p,
                        tau: tau.clone(),
                        paper_level: *level,
                        m: *m,
                        iterations,
                        dofs,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// One parsed markdown cell; the round-trip image of a bench row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCell {
    pub injection: String,
    pub p: usize,
    pub tau: String,
    pub paper_level: usize,
    pub m: usize,
    pub iterations: Option<usize>,
    pub dofs: usize,
}

/// Run the full benchmark matrix of the configuration (f ≡ 1 per the model
/// problem). Combinations are grouped by (p, tau), whose hierarchies are
/// assembled once; within a group all solves run in a worker pool. Rows come
/// back ordered by the configuration's combination order.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let smoother = parse_smoother(&config.smoother, config.jacobi_omega)?;
    let injections: Vec<InjectionKind> = config
        .injections
        .iter()
        .map(|s| parse_injection(s))
        .collect::<Result<_>>()?;
    let max_internal = config.max_paper_level - 1;
    let hier = MeshHierarchy::build(max_internal);
    let one: ScalarField = &|_, _| 1.0;

    let mut report = vec![None; config.p.len() * config.taus.len() * injections.len() * config.m.len() * (config.max_paper_level - 1)];
    let row_index = |pi: usize, ti: usize, ii: usize, mi: usize, li: usize| {
        (((ii * config.p.len() + pi) * config.taus.len() + ti) * (config.max_paper_level - 1) + li)
            * config.m.len()
            + mi
    };

    for (pi, &p) in config.p.iter().enumerate() {
        for (ti, tau_str) in config.taus.iter().enumerate() {
            let tau = parse_tau(tau_str)?;
            let kind = SolverKind::LdgH { p, tau };
            // systems with f ≡ 1 on every level; each run uses its own level's b
            let systems: Vec<_> = (0..=max_internal)
                .map(|l| assemble_level_system(&hier, l, kind, Some(one)))
                .collect::<hdg_multigrid::Result<_>>()?;
            let coarse_chol = coarse_factorization(&systems[0]);
            let local_ops: Vec<LocalOperators> = (0..max_internal)
                .map(|l| LocalOperators::build(&hier.levels[l], kind))
                .collect::<hdg_multigrid::Result<_>>()?;
            let mut transfer_sets: Vec<(InjectionKind, Vec<TransferMatrix>)> = Vec::new();
            for &injection in &injections {
                let transfers: Vec<TransferMatrix> = (0..max_internal)
                    .map(|l| {
                        build_injection(
                            injection,
                            &hier.levels[l],
                            &systems[l].space,
                            &hier.levels[l + 1],
                            &systems[l + 1].space,
                            Some(&local_ops[l]),
                        )
                    })
                    .collect::<hdg_multigrid::Result<_>>()?;
                transfer_sets.push((injection, transfers));
            }

            // all (injection, m, level) solves of this group, in parallel
            let mut tasks = Vec::new();
            for (ii, _) in injections.iter().enumerate() {
                for (mi, &m) in config.m.iter().enumerate() {
                    for paper_level in 2..=config.max_paper_level {
                        tasks.push((ii, mi, m, paper_level));
                    }
                }
            }
            let results: Vec<(usize, BenchRow)> = tasks
                .par_iter()
                .map(|&(ii, mi, m, paper_level)| {
                    let finest = paper_level - 1;
                    let stack = StackRef {
                        systems: &systems[0..=finest],
                        transfers: &transfer_sets[ii].1[0..finest],
                        coarse_chol: &coarse_chol,
                        m,
                        smoother,
                    };
                    let b = &systems[finest].rhs;
                    let t0 = Instant::now();
                    let solve = solve_stationary_ref(&stack, b, config.tol);
                    let wall_ms = t0.elapsed().as_millis();
                    let (iterations, rho) = match solve {
                        Ok(stats) => (Some(stats.iterations), stats.contraction()),
                        Err(_) => (None, f64::NAN),
                    };
                    let row = BenchRow {
                        injection: transfer_sets[ii].0.name().to_string(),
                        p,
                        tau: tau.label(),
                        paper_level,
                        dofs: systems[finest].space.n_dofs,
                        m,
                        iterations,
                        rho,
                        wall_ms,
                    };
                    (row_index(pi, ti, ii, mi, paper_level - 2), row)
                })
                .collect();
            for (idx, row) in results {
                report[idx] = Some(row);
            }
        }
    }

    Ok(BenchReport {
        rows: report.into_iter().map(|r| r.expect("all combinations computed")).collect(),
    })
}
