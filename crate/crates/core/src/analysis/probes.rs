use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{cell_conditions, cell_parts, csc_from_entries, csc_mul_add, DofMap, Problem};
use crate::element::ReferenceData;
use crate::mesh::PolygonalMesh;
use crate::nitsche::{edge_matrices, NitscheParams};
use crate::{Error, Result};

type Entries = Vec<(usize, usize, f64)>;

fn scatter(out: &mut Entries, rows: &[usize], cols: &[usize], m: &DMatrix<f64>) {
    for (jl, &jg) in cols.iter().enumerate() {
        for (il, &ig) in rows.iter().enumerate() {
            out.push((ig, jg, m[(il, jl)]));
        }
    }
}

/// Extremes of the coercivity ratios over the random samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivitySample {
    /// `min_v (m_h + a_h + N_h)(v, v) / (m_h + a_h + P_h)(v, v)`.
    pub full: f64,
    /// `min_v (a_h + N_h)(v, v) / (a_h + P_h)(v, v)`.
    pub viscous: f64,
}

/// Samples the discrete velocity forms of `problem` on random DOF vectors.
/// `N_h` collects every Nitsche velocity term, `P_h` only the penalties.
pub fn coercivity_probe(mesh: &PolygonalMesh, problem: &Problem, samples: usize, seed: u64) -> Result<CoercivitySample> {
    problem.validate()?;
    let dofs = DofMap::new(mesh, problem.k)?;
    let reference = ReferenceData::new(problem.k)?;
    let conditions = cell_conditions(mesh, &problem.boundary)?;
    let (mut mass, mut visc, mut pen, mut cons) = (Entries::new(), Entries::new(), Entries::new(), Entries::new());
    for cell in 0..mesh.num_cells() {
        let (_, parts) = cell_parts(mesh, problem, &dofs, &reference, cell, &conditions[cell])?;
        let vd = &parts.velocity_dofs;
        scatter(&mut mass, vd, vd, &parts.forms.m);
        scatter(&mut visc, vd, vd, &parts.forms.a);
        scatter(&mut pen, vd, vd, &parts.penalty);
        scatter(&mut cons, vd, vd, &parts.consistency);
    }
    let n = dofs.n_velocity;
    let [mass, visc, pen, cons] = [mass, visc, pen, cons].map(|e| csc_from_entries(n, n, e));
    let form = |m: &faer::sparse::SparseColMat<usize, f64>, v: &[f64]| {
        let mut y = vec![0.0; n];
        csc_mul_add(m, v, &mut y);
        y.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CoercivitySample { full: f64::INFINITY, viscous: f64::INFINITY };
    for _ in 0..samples {
        let v: Vec<f64> = (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0).collect();
        let (m, a, p, c) = (form(&mass, &v), form(&visc, &v), form(&pen, &v), form(&cons, &v));
        out.full = out.full.min((m + a + p + c) / (m + a + p));
        out.viscous = out.viscous.min((a + p + c) / (a + p));
    }
    Ok(out)
}

/// Smallest singular value of the coupling block of `problem`, measured in
/// the `L²` norm for pressures and the mesh-dependent norm
/// `‖K^{-1/2}v‖² + ν‖ε(v)‖² + ‖div v‖² + ‖v‖²_{1/2,h,D} + ‖v·n‖²_{1/2,h,N}`
/// for velocities. With the zero-mean constraint active the constant
/// pressure is excluded.
pub fn inf_sup_constant(mesh: &PolygonalMesh, problem: &Problem) -> Result<f64> {
    problem.validate()?;
    let k = problem.k;
    let dofs = DofMap::new(mesh, k)?;
    let reference = ReferenceData::new(k)?;
    let conditions = cell_conditions(mesh, &problem.boundary)?;
    let unit = NitscheParams::uniform(1.0);
    let (mut norm, mut coupling) = (Entries::new(), Entries::new());
    let np = dofs.n_pressure;
    let mut pmass = DMatrix::zeros(np, np);
    for cell in 0..mesh.num_cells() {
        let (kernel, parts) = cell_parts(mesh, problem, &dofs, &reference, cell, &conditions[cell])?;
        let vd = &parts.velocity_dofs;
        let local_mass = kernel.integrals.mass(k - 1);
        let div = &kernel.projections.div;
        let mut x = &parts.forms.m + &parts.forms.a + div.transpose() * &local_mass * div;
        for &(l, cond) in &conditions[cell] {
            x += edge_matrices(&kernel, l, cond.kind(), problem.nu, &unit).penalty;
        }
        scatter(&mut norm, vd, vd, &x);
        let pd: Vec<usize> = parts.pressure_dofs.clone().collect();
        scatter(&mut coupling, &pd, vd, &parts.b);
        let r = parts.pressure_dofs.start;
        pmass.view_mut((r, r), local_mass.shape()).copy_from(&local_mass);
    }
    let nu = dofs.n_velocity;
    let x = csc_from_entries(nu, nu, norm);
    let b = csc_from_entries(np, nu, coupling);
    let llt = x.sp_cholesky(Side::Lower).map_err(|e| Error::Factorization(format!("velocity norm matrix: {e:?}")))?;
    // Y = X⁻¹ Bᵀ
    let mut y = Mat::<f64>::zeros(nu, np);
    let (sym, vals) = b.parts();
    for j in 0..nu {
        for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
            y[(j, sym.row_idx()[p])] = vals[p];
        }
    }
    llt.solve_in_place(y.as_mut());
    let mut s = DMatrix::zeros(np, np);
    for c in 0..np {
        let col: Vec<f64> = (0..nu).map(|i| y[(i, c)]).collect();
        let mut bc = vec![0.0; np];
        csc_mul_add(&b, &col, &mut bc);
        for r in 0..np {
            s[(r, c)] = bc[r];
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let l = pmass.cholesky().ok_or(Error::Factorization("pressure mass matrix".into()))?.unpack();
    let linv = l.clone().try_inverse().ok_or(Error::Factorization("pressure mass matrix".into()))?;
    let mut c = &linv * s * linv.transpose();
    if problem.constrained(mesh) {
        let per_cell = np / mesh.num_cells();
        let ones = DVector::from_fn(np, |i, _| if i % per_cell == 0 { 1.0 } else { 0.0 });
        let w = (l.transpose() * ones).normalize();
        let proj = DMatrix::identity(np, np) - &w * w.transpose();
        let scale = c.trace();
        c = &proj * c * &proj + &w * w.transpose() * scale;
    }
    let eig = c.symmetric_eigen().eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(min.max(0.0).sqrt())
}
