use std::fmt;
use std::path::Path;

use brinkman_vem::analysis::{
    boundary_mismatch, cell_averages, compute_errors, convergence, max_speed, nu_sweep, ConvergenceRecord,
    ErrorReport,
};
use brinkman_vem::assembly::{assemble, DiscreteSolution};
use brinkman_vem::mesh::{generate, io, PolygonalMesh};

use crate::config::{parse_domain, RunConfig};
use crate::vtk::to_vtk;
use crate::CliError;

fn output_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn run_mesh(family: &str, cells: usize, seed: u64, domain: &str, output: &Path) -> Result<PolygonalMesh, CliError> {
    let family = family.parse().map_err(|e: brinkman_vem::Error| CliError::Config(e.to_string()))?;
    let mesh = generate(family, cells, seed, &parse_domain(domain)?)?;
    io::write(&mesh, output).map_err(|e| output_error(output, e))?;
    Ok(mesh)
}

/// Outcome of a single solve.
#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub n_cells: usize,
    pub h: f64,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub residual: f64,
    /// Largest `|Π^0 u_h|` at cell quadrature points.
    pub max_speed: f64,
    /// Boundary data misfit per Dirichlet or slip tag.
    pub mismatch: Vec<(String, f64)>,
    pub errors: Option<ErrorReport>,
    pub solution: DiscreteSolution,
}

impl fmt::Display for SolveSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cells            {}", self.n_cells)?;
        writeln!(f, "h                {:.6e}", self.h)?;
        writeln!(f, "velocity dofs    {}", self.n_velocity)?;
        writeln!(f, "pressure dofs    {}", self.n_pressure)?;
        writeln!(f, "residual         {:.3e}", self.residual)?;
        writeln!(f, "max |u_h|        {:.6e}", self.max_speed)?;
        for (tag, m) in &self.mismatch {
            writeln!(f, "misfit {tag:<10} {m:.6e}")?;
        }
        if let Some(e) = &self.errors {
            writeln!(f, "e(u)             {:.6e}", e.velocity())?;
            writeln!(f, "e(p)             {:.6e}", e.pressure)?;
            writeln!(f, "div_norm         {:.6e}", e.divergence)?;
        }
        Ok(())
    }
}

fn write_dofs(path: &Path, solution: &DiscreteSolution) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    let rows = solution
        .velocity
        .iter()
        .enumerate()
        .map(|(i, v)| ("velocity", i, *v))
        .chain(solution.pressure.iter().enumerate().map(|(i, p)| ("pressure", i, *p)))
        .chain(std::iter::once(("multiplier", 0, solution.multiplier)));
    w.write_record(["kind", "index", "value"]).map_err(|e| output_error(path, e))?;
    for (kind, i, v) in rows {
        w.write_record([kind.to_string(), i.to_string(), format!("{v:e}")])
            .map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

/// Assembles and solves the configured problem and writes the requested
/// outputs.
pub fn run_solve(config: &RunConfig) -> Result<SolveSummary, CliError> {
    let mesh = config.build_mesh()?;
    let problem = config.problem()?;
    let solution = assemble(&mesh, &problem)?.solve()?;
    let errors = match config.manufactured()? {
        Some(case) => Some(compute_errors(&mesh, &problem, &solution, &case.exact)?),
        None => None,
    };
    if let Some(path) = &config.output.vtk {
        let cells = cell_averages(&mesh, &solution)?;
        std::fs::write(path, to_vtk(&mesh, &cells, "brinkman-vem solution")).map_err(|e| output_error(path, e))?;
    }
    if let Some(path) = &config.output.csv {
        write_dofs(path, &solution)?;
    }
    Ok(SolveSummary {
        n_cells: mesh.num_cells(),
        h: mesh.h(),
        n_velocity: solution.dofs.n_velocity,
        n_pressure: solution.dofs.n_pressure,
        residual: solution.residual,
        max_speed: max_speed(&mesh, &solution)?,
        mismatch: boundary_mismatch(&mesh, &problem, &solution)?,
        errors,
        solution,
    })
}

const COLUMNS: [&str; 9] = ["N", "h", "e_u", "r_u", "e_p", "r_p", "div_norm", "e_u_volume", "e_u_boundary"];

/// RFC-4180 table of error histories; a leading `nu` column when more than
/// one history is given. Absent rates are empty fields.
pub fn convergence_csv(tables: &[(f64, Vec<ConvergenceRecord>)], with_nu: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_nu {
        header.insert(0, "nu");
    }
    w.write_record(&header).expect("in-memory write");
    let rate = |r: Option<f64>| r.map(|v| format!("{v:e}")).unwrap_or_default();
    for (nu, rows) in tables {
        for r in rows {
            let mut record = vec![
                r.n_cells.to_string(),
                format!("{:e}", r.h),
                format!("{:e}", r.e_u),
                rate(r.r_u),
                format!("{:e}", r.e_p),
                rate(r.r_p),
                format!("{:e}", r.div_norm),
                format!("{:e}", r.e_u_volume),
                format!("{:e}", r.e_u_boundary),
            ];
            if with_nu {
                record.insert(0, format!("{nu:e}"));
            }
            w.write_record(&record).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Runs the configured study, or one study per viscosity of `sweep`
/// (falling back to the configuration's sweep list).
pub fn run_convergence(config: &RunConfig, levels: Option<usize>, sweep: &[f64]) -> Result<String, CliError> {
    let case = config
        .manufactured()?
        .ok_or_else(|| CliError::Config("convergence studies need an [exact] section".into()))?;
    let settings = config.convergence.clone();
    let levels = levels.or(settings.as_ref().map(|c| c.levels)).unwrap_or(4);
    let study = config.study(levels)?;
    let sweep = if sweep.is_empty() { settings.map(|c| c.nu_sweep).unwrap_or_default() } else { sweep.to_vec() };
    if sweep.is_empty() {
        Ok(convergence_csv(&[(config.nu, convergence(&case, &study)?)], false))
    } else {
        Ok(convergence_csv(&nu_sweep(&case, &study, &sweep)?, true))
    }
}
