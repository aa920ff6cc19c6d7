use rayon::prelude::*;

use crate::assembly::{cell_conditions, DiscreteSolution, Problem};
use crate::element::ReferenceData;
use crate::mesh::PolygonalMesh;
use crate::nitsche::Condition;
use crate::Result;

/// Cell averages of the polynomial views of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAverage {
    /// Mean of `Π^0 u_h`.
    pub velocity: [f64; 2],
    pub speed: f64,
    pub divergence: f64,
    pub pressure: f64,
}

pub fn cell_averages(mesh: &PolygonalMesh, solution: &DiscreteSolution) -> Result<Vec<CellAverage>> {
    let reference = ReferenceData::new(solution.dofs.k)?;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let view = solution.cell(mesh, &reference, cell)?;
            let velocity = view.mean_velocity();
            Ok(CellAverage {
                velocity,
                speed: velocity[0].hypot(velocity[1]),
                divergence: view.mean_divergence(),
                pressure: view.mean_pressure(),
            })
        })
        .collect()
}

/// Largest `|Π^0 u_h|` over the cell quadrature points of degree `2k`.
pub fn max_speed(mesh: &PolygonalMesh, solution: &DiscreteSolution) -> Result<f64> {
    let k = solution.dofs.k;
    let reference = ReferenceData::new(k)?;
    let per_cell: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let view = solution.cell(mesh, &reference, cell)?;
            let zero = view.zero();
            let rule = view.kernel.cell_rule(2 * k);
            Ok(rule
                .points
                .iter()
                .map(|&x| {
                    let v = view.kernel.eval_vector(zero.as_slice(), x);
                    v[0].hypot(v[1])
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().fold(0.0, f64::max))
}

/// Edge `L²` misfit of the boundary data per tag: `‖u_h - g‖` on Dirichlet
/// tags and `‖(u_h - g1)·n‖` on slip tags. Free-outflow tags are omitted.
pub fn boundary_mismatch(
    mesh: &PolygonalMesh,
    problem: &Problem,
    solution: &DiscreteSolution,
) -> Result<Vec<(String, f64)>> {
    let reference = ReferenceData::new(solution.dofs.k)?;
    let conditions = cell_conditions(mesh, &problem.boundary)?;
    let mut sums: Vec<(String, f64)> = problem
        .boundary
        .tags()
        .filter(|t| !matches!(problem.boundary.get(t), Some(Condition::FreeOutflow)))
        .filter(|t| mesh.boundary_edges().iter().any(|b| b.tag == *t))
        .map(|t| (t.to_string(), 0.0))
        .collect();
    for b in mesh.boundary_edges() {
        let Some(slot) = sums.iter().position(|(t, _)| *t == b.tag) else {
            continue;
        };
        let view = solution.cell(mesh, &reference, b.cell)?;
        let edge = &view.kernel.edges[b.local];
        let cond = conditions[b.cell].iter().find(|(l, _)| *l == b.local).map(|(_, c)| *c);
        let mut s = 0.0;
        for (q, (&x, &w)) in edge.rule.points.iter().zip(&edge.rule.weights).enumerate() {
            let t = edge.trace(q, view.dofs.as_slice());
            s += w * match cond {
                Some(Condition::Dirichlet { g }) => {
                    let g = g(x);
                    (t[0] - g[0]).powi(2) + (t[1] - g[1]).powi(2)
                }
                Some(Condition::Slip { g1, .. }) => {
                    let g = g1(x);
                    ((t[0] - g[0]) * edge.normal[0] + (t[1] - g[1]) * edge.normal[1]).powi(2)
                }
                _ => 0.0,
            };
        }
        sums[slot].1 += s;
    }
    Ok(sums.into_iter().map(|(t, s)| (t, s.sqrt())).collect())
}
