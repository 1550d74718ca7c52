//! Single-problem solves with field export, and the mesh information dump.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use hdg_multigrid::diagnostics::{manufactured, solve_level};
use hdg_multigrid::hdg::{reconstruct, SolverKind, TauRule};
use hdg_multigrid::mesh::{dump_level, interior_edge_count, MeshHierarchy};
use hdg_multigrid::skeleton::{build_space, SkeletonVector};

use crate::vtk::bulk_field_vtk;

pub enum RhsSpec {
    ConstantOne,
    ManufacturedSine,
}

impl RhsSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" | "one" | "1" => Ok(RhsSpec::ConstantOne),
            "sine" | "manufactured" => Ok(RhsSpec::ManufacturedSine),
            other => bail!("unknown right hand side '{other}' (expected constant or sine)"),
        }
    }
}

pub fn parse_kind(kind: &str, p: usize, tau: TauRule) -> Result<SolverKind> {
    let kind = match kind.to_ascii_lowercase().as_str() {
        "ldg-h" | "ldgh" => SolverKind::LdgH { p, tau },
        "rt-h" | "rth" => SolverKind::RtH { p },
        "bdm-h" | "bdmh" => SolverKind::BdmH { p },
        other => bail!("unknown method '{other}' (expected ldg-h, rt-h or bdm-h)"),
    };
    kind.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(kind)
}

/// Per-edge CSV of the trace coefficients: `edge,t,value`.
pub fn lambda_csv(lambda: &SkeletonVector) -> String {
    let mut s = String::from("edge,t,value\n");
    let space = &lambda.space;
    for &e in &space.interior_edges {
        let o = space.edge_offset[e].unwrap();
        for (i, &t) in space.basis.nodes.iter().enumerate() {
            writeln!(s, "{e},{t},{}", lambda.coeffs[o + i]).unwrap();
        }
    }
    s
}

/// Solve one problem and write λ (CSV) plus the reconstructed bulk fields
/// (legacy ASCII VTK) into `out_dir`. Returns the measured L2 error of u for
/// the manufactured case.
pub fn cmd_solve(
    paper_level: usize,
    kind: SolverKind,
    rhs: RhsSpec,
    out_dir: &Path,
) -> Result<Option<f64>> {
    if paper_level < 1 {
        bail!("paper level must be at least 1");
    }
    let internal = paper_level - 1;
    let hier = MeshHierarchy::build(internal.max(1));
    let level = &hier.levels[internal];
    let space = build_space(level, kind.p());
    fs::create_dir_all(out_dir).context("creating output directory")?;

    let (lambda, field, u_err) = match rhs {
        RhsSpec::ConstantOne => {
            let f = |_: f64, _: f64| 1.0;
            let lambda = solve_level(&hier, internal, kind, &f)?;
            let field = reconstruct(level, &space, kind, &lambda, Some(&f))?;
            (lambda, field, None)
        }
        RhsSpec::ManufacturedSine => {
            let (_, f, _) = manufactured();
            let lambda = solve_level(&hier, internal, kind, &f)?;
            let field = reconstruct(level, &space, kind, &lambda, Some(&f))?;
            let rows =
                hdg_multigrid::diagnostics::convergence_study(&hier, kind, &[internal])?;
            (lambda, field, Some(rows[0].u_err))
        }
    };

    fs::write(out_dir.join("lambda.csv"), lambda_csv(&lambda)).context("writing lambda.csv")?;
    let vtk = bulk_field_vtk(level, &field, "hdg solution");
    fs::write(out_dir.join("solution.vtk"), vtk).context("writing solution.vtk")?;
    Ok(u_err)
}

/// Level table plus optional full dumps for `mesh-info`.
pub fn mesh_info(max_paper_level: usize, dump_dir: Option<&Path>) -> Result<String> {
    let hier = MeshHierarchy::build(max_paper_level.saturating_sub(1));
    let mut s = String::from("paper_level,internal_level,vertices,edges,interior_edges,cells,h\n");
    for level in &hier.levels {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            level.level_index + 1,
            level.level_index,
            level.vertices.len(),
            level.edges.len(),
            interior_edge_count(level),
            level.cells.len(),
            level.h
        )
        .unwrap();
    }
    if let Some(dir) = dump_dir {
        fs::create_dir_all(dir)?;
        for level in &hier.levels {
            let path = dir.join(format!("mesh_level{}.txt", level.level_index));
            fs::write(path, dump_level(level))?;
        }
    }
    Ok(s)
}
