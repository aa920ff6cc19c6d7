//! Manufactured solutions, discretization errors, convergence rates and
//! numerical well-posedness probes.

mod manufactured;
mod post;
mod probes;

use rayon::prelude::*;

use crate::assembly::{assemble, cell_conditions, DiscreteSolution, Problem};
use crate::element::{ElementKernel, ReferenceData};
use crate::mesh::{generate, Domain, Family, PolygonalMesh};
use crate::nitsche::EdgeKind;
use crate::{Error, Point, Result};

pub use manufactured::{ExactSolution, ManufacturedCase, ScalarField, SideCondition, TensorFn};
pub use post::{boundary_mismatch, cell_averages, max_speed, CellAverage};
pub use probes::{coercivity_probe, inf_sup_constant, CoercivitySample};

/// Discretization errors of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `Σ_K ‖K^{-1/2}(u - Π^0 u_h)‖² + ν‖ε(u) - ε(Π^ε u_h)‖² + ‖div(u - u_h)‖²`, square-rooted.
    pub velocity_volume: f64,
    /// `‖u - u_h‖_{1/2,h,D}² + ‖(u - u_h)·n‖_{1/2,h,N}²`, square-rooted.
    pub velocity_boundary: f64,
    pub pressure: f64,
    /// `‖div u_h‖_{0,Ω}`.
    pub divergence: f64,
}

impl ErrorReport {
    /// Error in the mesh-dependent norm, volume and boundary parts together.
    pub fn velocity(&self) -> f64 {
        self.velocity_volume.hypot(self.velocity_boundary)
    }
}

fn quad_form(kinv: [[f64; 2]; 2], w: Point) -> f64 {
    w[0] * (kinv[0][0] * w[0] + kinv[0][1] * w[1]) + w[1] * (kinv[1][0] * w[0] + kinv[1][1] * w[1])
}

#[derive(Default, Clone, Copy)]
struct CellErrors {
    volume: f64,
    boundary: f64,
    pressure: f64,
    divergence: f64,
}

/// Errors of `solution` against the exact fields of `case`. Cell integrals
/// use quadrature of degree `2k + 4`, boundary terms the exact edge traces
/// of `u_h`.
pub fn compute_errors(
    mesh: &PolygonalMesh,
    problem: &Problem,
    solution: &DiscreteSolution,
    exact: &ExactSolution,
) -> Result<ErrorReport> {
    let k = solution.dofs.k;
    let reference = ReferenceData::new(k)?;
    let conditions = cell_conditions(mesh, &problem.boundary)?;
    let nu = problem.nu;
    let per_cell: Vec<CellErrors> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let kernel = ElementKernel::new(mesh, cell, &reference)?;
            let kinv = problem.permeability.inverse_at(kernel.centroid)?;
            let local = solution.local_velocity(mesh, cell);
            let p = &kernel.projections;
            let zero = (&p.zero_k * &local).as_slice().to_vec();
            let eps = (&p.eps * &local).as_slice().to_vec();
            let div = (&p.div * &local).as_slice().to_vec();
            let pressure = solution.local_pressure(cell);
            let rule = kernel.cell_rule(2 * k + 4);
            let mut out = CellErrors::default();
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let u = (exact.velocity)(x);
                let uh = kernel.eval_vector(&zero, x);
                out.volume += w * quad_form(kinv, [u[0] - uh[0], u[1] - uh[1]]);
                let e = exact.strain(x);
                let eh = kernel.strain(&eps, x);
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s += (e[a][b] - eh[a][b]).powi(2);
                    }
                }
                out.volume += w * nu * s;
                let divh = kernel.eval_scalar(&div, x);
                out.volume += w * (exact.divergence(x) - divh).powi(2);
                out.divergence += w * divh * divh;
                out.pressure += w * ((exact.pressure)(x) - kernel.eval_scalar(pressure, x)).powi(2);
            }
            for &(l, cond) in &conditions[cell] {
                let kind = cond.kind();
                if kind == EdgeKind::FreeOutflow {
                    continue;
                }
                let edge = &kernel.edges[l];
                let mut s = 0.0;
                for (q, (&x, &w)) in edge.rule.points.iter().zip(&edge.rule.weights).enumerate() {
                    let u = (exact.velocity)(x);
                    let t = edge.trace(q, local.as_slice());
                    let d = [u[0] - t[0], u[1] - t[1]];
                    s += w * match kind {
                        EdgeKind::Dirichlet => d[0] * d[0] + d[1] * d[1],
                        _ => (d[0] * edge.normal[0] + d[1] * edge.normal[1]).powi(2),
                    };
                }
                out.boundary += s / edge.length;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let total = per_cell.iter().fold(CellErrors::default(), |a, c| CellErrors {
        volume: a.volume + c.volume,
        boundary: a.boundary + c.boundary,
        pressure: a.pressure + c.pressure,
        divergence: a.divergence + c.divergence,
    });
    Ok(ErrorReport {
        velocity_volume: total.volume.sqrt(),
        velocity_boundary: total.boundary.sqrt(),
        pressure: total.pressure.sqrt(),
        divergence: total.divergence.sqrt(),
    })
}

/// One row of an error history table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub n_cells: usize,
    pub h: f64,
    pub e_u: f64,
    pub r_u: Option<f64>,
    pub e_p: f64,
    pub r_p: Option<f64>,
    pub div_norm: f64,
    pub e_u_volume: f64,
    pub e_u_boundary: f64,
}

impl ConvergenceRecord {
    pub fn new(n_cells: usize, h: f64, errors: &ErrorReport) -> Self {
        Self {
            n_cells,
            h,
            e_u: errors.velocity(),
            r_u: None,
            e_p: errors.pressure,
            r_p: None,
            div_norm: errors.divergence,
            e_u_volume: errors.velocity_volume,
            e_u_boundary: errors.velocity_boundary,
        }
    }
}

/// `r_i = (log e_{i-1} - log e_i) / (log h_{i-1} - log h_i)`, absent on the
/// first row.
pub fn rates(records: &[ConvergenceRecord]) -> Result<Vec<ConvergenceRecord>> {
    if records.len() < 2 {
        return Err(Error::InvalidParameter("rates need at least two records".into()));
    }
    if records.windows(2).any(|w| !(w[1].h < w[0].h)) {
        return Err(Error::InvalidParameter("mesh sizes must decrease strictly".into()));
    }
    let rate = |e0: f64, e1: f64, h0: f64, h1: f64| (e0.ln() - e1.ln()) / (h0.ln() - h1.ln());
    let mut out = records.to_vec();
    for i in 1..out.len() {
        let (a, b) = (&records[i - 1], &records[i]);
        out[i].r_u = Some(rate(a.e_u, b.e_u, a.h, b.h));
        out[i].r_p = Some(rate(a.e_p, b.e_p, a.h, b.h));
    }
    out[0].r_u = None;
    out[0].r_p = None;
    Ok(out)
}

/// Mesh ladder and discretization settings of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub family: Family,
    pub k: usize,
    pub cells: Vec<usize>,
    pub seed: u64,
    pub domain: Domain,
    /// Overrides the default `γ_D = γ_N = 100(k+1)²`.
    pub gamma: Option<f64>,
}

impl Study {
    /// `levels` meshes starting at `n0` cells, four times more per level.
    pub fn ladder(family: Family, k: usize, n0: usize, levels: usize) -> Self {
        Self { family, k, cells: (0..levels).map(|i| n0 * 4usize.pow(i as u32)).collect(), seed: 0, domain: Domain::unit_square(), gamma: None }
    }

    pub fn meshes(&self, case: &ManufacturedCase) -> Result<Vec<PolygonalMesh>> {
        self.cells
            .iter()
            .map(|&n| generate(self.family, n, self.seed, &self.domain)?.tag_boundary(&case.tag_rules()))
            .collect()
    }
}

/// Solves `case` on one mesh and measures the errors.
pub fn solve_case(mesh: &PolygonalMesh, case: &ManufacturedCase, k: usize, gamma: Option<f64>) -> Result<(DiscreteSolution, ErrorReport)> {
    let mut problem = case.problem(k)?;
    if let Some(g) = gamma {
        problem.nitsche = crate::nitsche::NitscheParams::uniform(g);
    }
    let solution = assemble(mesh, &problem)?.solve()?;
    let errors = compute_errors(mesh, &problem, &solution, &case.exact)?;
    Ok((solution, errors))
}

fn history(meshes: &[PolygonalMesh], case: &ManufacturedCase, study: &Study) -> Result<Vec<ConvergenceRecord>> {
    let records = meshes
        .iter()
        .map(|mesh| {
            let (_, errors) = solve_case(mesh, case, study.k, study.gamma)?;
            Ok(ConvergenceRecord::new(mesh.num_cells(), mesh.h(), &errors))
        })
        .collect::<Result<Vec<_>>>()?;
    rates(&records)
}

/// Error history of `case` over the meshes of `study`.
pub fn convergence(case: &ManufacturedCase, study: &Study) -> Result<Vec<ConvergenceRecord>> {
    history(&study.meshes(case)?, case, study)
}

/// One error history per viscosity, all on the same meshes.
pub fn nu_sweep(case: &ManufacturedCase, study: &Study, nus: &[f64]) -> Result<Vec<(f64, Vec<ConvergenceRecord>)>> {
    if let Some(bad) = nus.iter().find(|&&nu| !(nu > 0.0 && nu <= 1.0)) {
        return Err(Error::InvalidParameter(format!("viscosity must lie in (0, 1], got {bad}")));
    }
    let meshes = study.meshes(case)?;
    nus.iter()
        .map(|&nu| {
            let case = ManufacturedCase { nu, ..case.clone() };
            Ok((nu, history(&meshes, &case, study)?))
        })
        .collect()
}

/// `L²` norm of a scalar field over the mesh, by cell quadrature of `degree`.
pub fn l2_norm(mesh: &PolygonalMesh, degree: usize, f: &(dyn Fn(Point) -> f64 + Sync)) -> Result<f64> {
    let reference = ReferenceData::new(2)?;
    let parts: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let kernel = ElementKernel::new(mesh, cell, &reference)?;
            let rule = kernel.cell_rule(degree);
            Ok(rule.points.iter().zip(&rule.weights).map(|(&x, &w)| w * f(x) * f(x)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests;
