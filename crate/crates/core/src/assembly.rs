//! Global numbering, assembly of the saddle-point system and its sparse
//! direct solve.
//!
//! The unknowns are ordered as vertex values, edge node values, cell moments
//! (cell-major) and pressure coefficients (cell-major). With the zero-mean
//! constraint active the system is bordered by one multiplier:
//!
//! ```text
//! [ A  Bᵀ 0 ] [u]   [F]
//! [ B  0  c ] [p] = [G]
//! [ 0  cᵀ 0 ] [λ]   [0]
//! ```

use std::ops::Range;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Par, Side};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::element::{ElementKernel, LocalForms, Permeability, ReferenceData};
use crate::mesh::PolygonalMesh;
use crate::nitsche::{edge_matrices, edge_rhs, BoundarySpec, Condition, NitscheParams, VectorFn};
use crate::polyspace::dim;
use crate::{Error, Point, Result};

/// Tolerance on `‖Kx - b‖ / ‖b‖` after refinement.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 10;
/// `δ` relative to the largest pressure pivot.
const PIVOT_REGULARIZATION: f64 = 1e-10;
const CHUNK: usize = 2048;

/// Global DOF numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub k: usize,
    pub edge_offset: usize,
    pub interior_offset: usize,
    pub n_velocity: usize,
    pub n_pressure: usize,
    interior_start: Vec<usize>,
    interior_len: usize,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        let edge_offset = 2 * mesh.num_vertices();
        let interior_offset = edge_offset + 2 * (k - 1) * mesh.edges().len();
        let interior_len = if k >= 3 { dim(k - 3) } else { 0 } + dim(k - 1) - 1;
        let interior_start = (0..mesh.num_cells()).map(|c| c * interior_len).collect();
        let n_velocity = interior_offset + interior_len * mesh.num_cells();
        let n_pressure = dim(k - 1) * mesh.num_cells();
        Ok(Self { k, edge_offset, interior_offset, n_velocity, n_pressure, interior_start, interior_len })
    }

    /// Global index of every local velocity DOF of `cell`.
    pub fn cell_velocity_dofs(&self, mesh: &PolygonalMesh, cell: usize) -> Vec<usize> {
        let k = self.k;
        let verts = mesh.cell(cell);
        let nv = verts.len();
        let mut out = Vec::with_capacity(2 * nv * k + self.interior_len);
        for &v in verts {
            out.extend([2 * v, 2 * v + 1]);
        }
        for (l, &e) in mesh.cell_edges(cell).iter().enumerate() {
            let forward = mesh.edges()[e].vertices[0] == verts[l];
            for m in 0..k - 1 {
                let gm = if forward { m } else { k - 2 - m };
                let base = self.edge_offset + 2 * (k - 1) * e + 2 * gm;
                out.extend([base, base + 1]);
            }
        }
        let start = self.interior_offset + self.interior_start[cell];
        out.extend(start..start + self.interior_len);
        out
    }

    /// Pressure coefficients of `cell`, numbered from zero.
    pub fn cell_pressure_dofs(&self, cell: usize) -> Range<usize> {
        let n = dim(self.k - 1);
        cell * n..(cell + 1) * n
    }
}

/// Whether the zero-mean pressure row is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanConstraint {
    /// Active unless some boundary edge is free outflow.
    #[default]
    Auto,
    Always,
    Never,
}

/// Data and parameters of a Brinkman problem.
#[derive(Clone)]
pub struct Problem {
    pub k: usize,
    pub nu: f64,
    pub permeability: Permeability,
    pub boundary: BoundarySpec,
    pub nitsche: NitscheParams,
    pub source: Option<VectorFn>,
    pub mean_constraint: MeanConstraint,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("k", &self.k)
            .field("nu", &self.nu)
            .field("permeability", &self.permeability)
            .field("boundary", &self.boundary)
            .field("nitsche", &self.nitsche)
            .field("source", &self.source.is_some())
            .field("mean_constraint", &self.mean_constraint)
            .finish()
    }
}

impl Problem {
    pub fn new(k: usize, nu: f64, boundary: BoundarySpec) -> Self {
        Self {
            k,
            nu,
            permeability: Permeability::default(),
            boundary,
            nitsche: NitscheParams::default_for(k),
            source: None,
            mean_constraint: MeanConstraint::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::UnsupportedOrder(self.k));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParameter(format!("viscosity must lie in (0, 1], got {}", self.nu)));
        }
        self.permeability.validate()?;
        self.nitsche.validate()
    }

    pub fn constrained(&self, mesh: &PolygonalMesh) -> bool {
        match self.mean_constraint {
            MeanConstraint::Auto => !self.boundary.has_free_outflow(mesh),
            MeanConstraint::Always => true,
            MeanConstraint::Never => false,
        }
    }
}

/// Local matrices of one cell, Nitsche terms split out.
#[derive(Debug, Clone)]
pub struct CellParts {
    pub velocity_dofs: Vec<usize>,
    pub pressure_dofs: Range<usize>,
    pub forms: LocalForms,
    pub penalty: DMatrix<f64>,
    /// Consistency term with both insertions.
    pub consistency: DMatrix<f64>,
    /// `b^K` plus the edge pressure terms.
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g: DVector<f64>,
    /// `∫_K m_j` for the pressure basis.
    pub c: DVector<f64>,
}

impl CellParts {
    pub fn velocity(&self) -> DMatrix<f64> {
        &self.forms.m + &self.forms.a + &self.penalty + &self.consistency
    }
}

/// Boundary conditions of each cell's boundary edges as `(local edge, condition)`.
pub fn cell_conditions<'a>(mesh: &PolygonalMesh, spec: &'a BoundarySpec) -> Result<Vec<Vec<(usize, &'a Condition)>>> {
    let conds = spec.resolve(mesh)?;
    let mut out = vec![Vec::new(); mesh.num_cells()];
    for (b, cond) in mesh.boundary_edges().iter().zip(conds) {
        out[b.cell].push((b.local, cond));
    }
    Ok(out)
}

pub fn cell_parts(
    mesh: &PolygonalMesh,
    problem: &Problem,
    dofs: &DofMap,
    reference: &ReferenceData,
    cell: usize,
    conditions: &[(usize, &Condition)],
) -> Result<(ElementKernel, CellParts)> {
    let kernel = ElementKernel::new(mesh, cell, reference)?;
    let kinv = problem.permeability.inverse_at(kernel.centroid)?;
    let source = problem.source.as_deref().map(|f| f as &(dyn Fn(_) -> _ + Sync));
    let forms = LocalForms::new(&kernel, problem.nu, kinv, source)?;
    let n = kernel.ndofs();
    let np = dim(problem.k - 1);
    let mut penalty = DMatrix::zeros(n, n);
    let mut consistency = DMatrix::zeros(n, n);
    let mut b = forms.b.clone();
    let mut f = forms.f.clone();
    let mut g = DVector::zeros(np);
    for &(local, cond) in conditions {
        let m = edge_matrices(&kernel, local, cond.kind(), problem.nu, &problem.nitsche);
        penalty += &m.penalty;
        consistency += &m.consistency + m.consistency.transpose();
        b += &m.pressure;
        let (fe, ge) = edge_rhs(&kernel, local, cond, problem.nu, &problem.nitsche);
        f += fe;
        g += ge;
    }
    let c = DVector::from_fn(np, |j, _| kernel.integrals.get(j));
    let parts = CellParts {
        velocity_dofs: dofs.cell_velocity_dofs(mesh, cell),
        pressure_dofs: dofs.cell_pressure_dofs(cell),
        forms,
        penalty,
        consistency,
        b,
        f,
        g,
        c,
    };
    Ok((kernel, parts))
}

/// Column-compressed matrix from `(row, col, value)` entries; duplicates are
/// summed in input order.
pub fn csc_from_entries(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> SparseColMat<usize, f64> {
    entries.sort_by_key(|&(r, c, _)| (c, r));
    let mut col_ptr = vec![0usize; ncols + 1];
    let mut rows = Vec::with_capacity(entries.len());
    let mut vals = Vec::with_capacity(entries.len());
    let mut last = None;
    for (r, c, v) in entries {
        if last == Some((r, c)) {
            *vals.last_mut().unwrap() += v;
        } else {
            rows.push(r);
            vals.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
    }
    for j in 0..ncols {
        col_ptr[j + 1] += col_ptr[j];
    }
    let symbolic = SymbolicSparseColMat::new_checked(nrows, ncols, col_ptr, None, rows);
    SparseColMat::new(symbolic, vals)
}

/// `y += A x`.
pub fn csc_mul_add(a: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    let (sym, vals) = a.parts();
    let col_ptr = sym.col_ptr();
    let rows = sym.row_idx();
    for j in 0..sym.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for p in col_ptr[j]..col_ptr[j + 1] {
            y[rows[p]] += vals[p] * xj;
        }
    }
}

/// `y += Aᵀ x`.
pub fn csc_mul_t_add(a: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    let (sym, vals) = a.parts();
    let col_ptr = sym.col_ptr();
    let rows = sym.row_idx();
    for j in 0..sym.ncols() {
        let mut s = 0.0;
        for p in col_ptr[j]..col_ptr[j + 1] {
            s += vals[p] * x[rows[p]];
        }
        y[j] += s;
    }
}

/// Supernodal `LDLᵀ` of the skeleton matrix in minimum degree order.
///
/// Velocity pivots are expected positive and cell means negative; a pivot
/// of the wrong sign or too small is replaced by `±δ`. The perturbation is
/// removed by iterative refinement on the full system.
struct SkeletonLdlt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl SkeletonLdlt {
    fn new(matrix: &SparseColMat<usize, f64>, first_pressure: usize) -> Result<Self> {
        let m = matrix.nrows();
        let err = |e: &dyn std::fmt::Debug| Error::Factorization(format!("{e:?}"));
        let (sym, vals) = matrix.parts();
        // size of the pressure pivots once the velocity neighbours are gone
        let mut diag = vec![0.0; m];
        for j in 0..m {
            for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                if sym.row_idx()[p] == j {
                    diag[j] = vals[p];
                }
            }
        }
        let mut pressure_scale = 0.0f64;
        for j in first_pressure..m {
            let mut s = 0.0;
            for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                let i = sym.row_idx()[p];
                if i < first_pressure && diag[i] > 0.0 {
                    s += vals[p] * vals[p] / diag[i];
                }
            }
            pressure_scale = pressure_scale.max(s);
        }
        let delta = PIVOT_REGULARIZATION * pressure_scale.max(f64::MIN_POSITIVE);
        let signs: Vec<i8> = (0..m).map(|i| if i < first_pressure { 1 } else { -1 }).collect();
        let symbolic = factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, Default::default())
            .map_err(|e| err(&e))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(&signs),
            dynamic_regularization_delta: delta,
            dynamic_regularization_epsilon: delta,
        };
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                matrix.as_ref(),
                Side::Lower,
                regularization,
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| err(&e))?;
        Ok(Self { symbolic, values })
    }

    fn solve(&self, r: &[f64]) -> Vec<f64> {
        let m = r.len();
        let mut x = Mat::from_fn(m, 1, |i, _| r[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            x.as_mut(),
            Par::Seq,
            MemStack::new(&mut mem),
        );
        (0..m).map(|i| x[(i, 0)]).collect()
    }
}

/// Elimination of the cell-interior unknowns of one cell.
///
/// The pressure basis is switched to `1, m_j - mean(m_j)`; the interior
/// velocity moments and the zero-mean pressure components form the interior
/// block, the boundary velocity DOFs and the cell mean form the skeleton.
#[derive(Debug, Clone)]
struct CellCondensation {
    /// Skeleton indices, boundary velocity DOFs then the cell mean.
    skeleton: Vec<usize>,
    interior_velocity: Range<usize>,
    pressure: Range<usize>,
    /// Cell means of the pressure basis functions.
    means: Vec<f64>,
    /// `K_II⁻¹`.
    kii_inv: DMatrix<f64>,
    /// `K_II⁻¹ K_IS`.
    w: DMatrix<f64>,
}

fn condense(dofs: &DofMap, cell: usize, parts: &CellParts, area: f64) -> Result<(CellCondensation, DMatrix<f64>)> {
    let vel = parts.velocity();
    let n = vel.nrows();
    let np = parts.c.len();
    let nb = n - dofs.interior_len;
    let means: Vec<f64> = parts.c.iter().map(|c| c / area).collect();
    // Tᵀ B with p = T p̃
    let mut bt = parts.b.clone();
    for i in 1..np {
        for j in 0..n {
            bt[(i, j)] -= means[i] * parts.b[(0, j)];
        }
    }
    let total = n + np;
    let mut full = DMatrix::zeros(total, total);
    full.view_mut((0, 0), (n, n)).copy_from(&vel);
    full.view_mut((n, 0), (np, n)).copy_from(&bt);
    full.view_mut((0, n), (n, np)).copy_from(&bt.transpose());
    let s_idx: Vec<usize> = (0..nb).chain([n]).collect();
    let i_idx: Vec<usize> = (nb..n).chain(n + 1..total).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], cols[j])]);
    let kii = pick(&i_idx, &i_idx);
    let kis = pick(&i_idx, &s_idx);
    let kss = pick(&s_idx, &s_idx);
    let kii_inv = kii.try_inverse().ok_or(Error::SingularCell { cell, what: "interior block" })?;
    if !kii_inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularCell { cell, what: "interior block" });
    }
    let w = &kii_inv * &kis;
    let schur = kss - kis.transpose() * &w;
    let mut skeleton = parts.velocity_dofs[..nb].to_vec();
    skeleton.push(dofs.interior_offset + cell);
    let start = dofs.interior_offset + dofs.interior_start[cell];
    let cond = CellCondensation {
        skeleton,
        interior_velocity: start..start + dofs.interior_len,
        pressure: parts.pressure_dofs.clone(),
        means,
        kii_inv,
        w,
    };
    Ok((cond, schur))
}

/// Assembled saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub dofs: DofMap,
    /// Velocity block `m_h + a_h` plus Nitsche terms.
    pub a: SparseColMat<usize, f64>,
    /// Coupling block, pressure rows by velocity columns.
    pub b: SparseColMat<usize, f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Integral of each pressure basis function.
    pub c: Vec<f64>,
    pub constrained: bool,
    /// Schur complement on the skeleton, unbordered.
    skeleton: SparseColMat<usize, f64>,
    condensation: Vec<CellCondensation>,
}

pub fn assemble(mesh: &PolygonalMesh, problem: &Problem) -> Result<SaddleSystem> {
    problem.validate()?;
    let dofs = DofMap::new(mesh, problem.k)?;
    let reference = ReferenceData::new(problem.k)?;
    let conditions = cell_conditions(mesh, &problem.boundary)?;
    let (nu, np) = (dofs.n_velocity, dofs.n_pressure);
    let ns = dofs.interior_offset + mesh.num_cells();
    let mut a_entries = Vec::new();
    let mut b_entries = Vec::new();
    let mut s_entries = Vec::new();
    let mut condensation = Vec::with_capacity(mesh.num_cells());
    let mut f = vec![0.0; nu];
    let mut g = vec![0.0; np];
    let mut c = vec![0.0; np];
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    for chunk in cells.chunks(CHUNK) {
        let parts: Vec<(CellParts, CellCondensation, DMatrix<f64>)> = chunk
            .par_iter()
            .map(|&cell| {
                let (kernel, p) = cell_parts(mesh, problem, &dofs, &reference, cell, &conditions[cell])?;
                let (cond, schur) = condense(&dofs, cell, &p, kernel.area)?;
                Ok((p, cond, schur))
            })
            .collect::<Result<_>>()?;
        for (p, cond, schur) in parts {
            let vel = p.velocity();
            let vd = &p.velocity_dofs;
            for (jl, &jg) in vd.iter().enumerate() {
                for (il, &ig) in vd.iter().enumerate() {
                    a_entries.push((ig, jg, vel[(il, jl)]));
                }
            }
            for (jl, &jg) in vd.iter().enumerate() {
                for (il, ig) in p.pressure_dofs.clone().enumerate() {
                    b_entries.push((ig, jg, p.b[(il, jl)]));
                }
                f[jg] += p.f[jl];
            }
            for (il, ig) in p.pressure_dofs.clone().enumerate() {
                g[ig] += p.g[il];
                c[ig] += p.c[il];
            }
            for (jl, &jg) in cond.skeleton.iter().enumerate() {
                for (il, &ig) in cond.skeleton.iter().enumerate() {
                    s_entries.push((ig, jg, schur[(il, jl)]));
                }
            }
            condensation.push(cond);
        }
    }
    let a = csc_from_entries(nu, nu, a_entries);
    let b = csc_from_entries(np, nu, b_entries);
    let skeleton = csc_from_entries(ns, ns, s_entries);
    Ok(SaddleSystem { dofs, a, b, f, g, c, constrained: problem.constrained(mesh), skeleton, condensation })
}

impl SaddleSystem {
    pub fn size(&self) -> usize {
        self.dofs.n_velocity + self.dofs.n_pressure + usize::from(self.constrained)
    }

    /// Number of unknowns left after eliminating the cell interiors.
    pub fn skeleton_size(&self) -> usize {
        self.skeleton.nrows() + usize::from(self.constrained)
    }

    /// The full bordered matrix.
    pub fn matrix(&self) -> SparseColMat<usize, f64> {
        let nu = self.dofs.n_velocity;
        let n = self.size();
        let mut entries = Vec::with_capacity(self.a.compute_nnz() + 2 * self.b.compute_nnz() + 2 * self.c.len());
        let push_csc = |m: &SparseColMat<usize, f64>, r0: usize, c0: usize, transpose: bool, out: &mut Vec<_>| {
            let (sym, vals) = m.parts();
            for j in 0..sym.ncols() {
                for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                    let i = sym.row_idx()[p];
                    if transpose {
                        out.push((r0 + j, c0 + i, vals[p]));
                    } else {
                        out.push((r0 + i, c0 + j, vals[p]));
                    }
                }
            }
        };
        push_csc(&self.a, 0, 0, false, &mut entries);
        push_csc(&self.b, nu, 0, false, &mut entries);
        push_csc(&self.b, 0, nu, true, &mut entries);
        if self.constrained {
            for (i, &ci) in self.c.iter().enumerate() {
                entries.push((nu + i, n - 1, ci));
                entries.push((n - 1, nu + i, ci));
            }
        }
        csc_from_entries(n, n, entries)
    }

    /// `K x` for the full bordered matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let nu = self.dofs.n_velocity;
        let np = self.dofs.n_pressure;
        let mut y = vec![0.0; self.size()];
        let (yu, rest) = y.split_at_mut(nu);
        csc_mul_add(&self.a, &x[..nu], yu);
        csc_mul_t_add(&self.b, &x[nu..nu + np], yu);
        csc_mul_add(&self.b, &x[..nu], &mut rest[..np]);
        if self.constrained {
            let lambda = x[nu + np];
            for (i, ci) in self.c.iter().enumerate() {
                rest[i] += ci * lambda;
            }
            rest[np] = self.c.iter().zip(&x[nu..nu + np]).map(|(c, p)| c * p).sum();
        }
        y
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.size());
        b.extend_from_slice(&self.f);
        b.extend_from_slice(&self.g);
        if self.constrained {
            b.push(0.0);
        }
        b
    }

    /// Relative size of `Bᵀ 1`, where `1` is the constant pressure.
    pub fn constant_pressure_defect(&self) -> f64 {
        let np = dim(self.dofs.k - 1);
        let ones: Vec<f64> = (0..self.dofs.n_pressure).map(|i| if i % np == 0 { 1.0 } else { 0.0 }).collect();
        let mut r = vec![0.0; self.dofs.n_velocity];
        csc_mul_t_add(&self.b, &ones, &mut r);
        let (_, vals) = self.b.parts();
        let scale = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.iter().map(|v| v * v).sum::<f64>().sqrt() / scale.max(f64::MIN_POSITIVE)
    }

    /// Solver for the bordered skeleton system. The dense border would ruin
    /// the fill of a sparse factorization, so with the constraint active the
    /// factored matrix is the unbordered one with its first pressure
    /// diagonal entry shifted by `-s`, and the border is recovered from two
    /// extra solves.
    fn factor_skeleton(&self) -> Result<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> {
        let m = self.skeleton.nrows();
        let pin = self.dofs.interior_offset;
        let shift = if self.constrained {
            let (_, vals) = self.b.parts();
            vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0)
        } else {
            0.0
        };
        let (sym, vals) = self.skeleton.parts();
        let mut entries = Vec::with_capacity(vals.len() + 1);
        for j in 0..m {
            for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                entries.push((sym.row_idx()[p], j, vals[p]));
            }
        }
        if self.constrained {
            entries.push((pin, pin, -shift));
        }
        let matrix = csc_from_entries(m, m, entries);
        let ldlt = SkeletonLdlt::new(&matrix, pin)?;
        let base = move |r: &[f64]| ldlt.solve(r);
        if !self.constrained {
            return Ok(Box::new(base));
        }
        let mut unit = vec![0.0; m];
        unit[pin] = 1.0;
        let xe = base(&unit);
        let mut border = vec![0.0; m];
        for (cell, cond) in self.condensation.iter().enumerate() {
            border[pin + cell] = self.c[cond.pressure.start];
        }
        let xc = base(&border);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // unknowns μ = x[pin] and the multiplier λ
        let m11 = 1.0 + shift * xe[pin];
        let m12 = xc[pin];
        let m21 = -shift * dot(&border, &xe);
        let m22 = -dot(&border, &xc);
        let det = m11 * m22 - m12 * m21;
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Factorization("singular bordered system".into()));
        }
        Ok(Box::new(move |r: &[f64]| {
            let xr = base(&r[..m]);
            let r1 = xr[pin];
            let r2 = r[m] - dot(&border, &xr);
            let mu = (r1 * m22 - m12 * r2) / det;
            let lambda = (m11 * r2 - m21 * r1) / det;
            let mut x: Vec<f64> = (0..m).map(|i| xr[i] - shift * mu * xe[i] - lambda * xc[i]).collect();
            x.push(lambda);
            x
        }))
    }

    /// Solves the full system through the skeleton.
    fn factor(&self) -> Result<impl Fn(&[f64]) -> Vec<f64> + '_> {
        let skeleton = self.factor_skeleton()?;
        let nu = self.dofs.n_velocity;
        let np = self.dofs.n_pressure;
        let ns = self.skeleton.nrows();
        let io = self.dofs.interior_offset;
        Ok(move |r: &[f64]| {
            let mut rs = vec![0.0; self.skeleton_size()];
            rs[..io].copy_from_slice(&r[..io]);
            if self.constrained {
                rs[ns] = r[nu + np];
            }
            let mut interior = Vec::with_capacity(self.condensation.len());
            for (cell, cond) in self.condensation.iter().enumerate() {
                let rp = &r[nu + cond.pressure.start..nu + cond.pressure.end];
                let ri = DVector::from_iterator(
                    cond.kii_inv.nrows(),
                    r[cond.interior_velocity.clone()].iter().copied().chain((1..rp.len()).map(|i| rp[i] - cond.means[i] * rp[0])),
                );
                rs[io + cell] = rp[0];
                let correction = cond.w.tr_mul(&ri);
                for (l, &s) in cond.skeleton.iter().enumerate() {
                    rs[s] -= correction[l];
                }
                interior.push(&cond.kii_inv * ri);
            }
            let xs = skeleton(&rs);
            let mut x = vec![0.0; self.size()];
            x[..io].copy_from_slice(&xs[..io]);
            if self.constrained {
                x[nu + np] = xs[ns];
            }
            for (cond, zi) in self.condensation.iter().zip(interior) {
                let xsl = DVector::from_iterator(cond.skeleton.len(), cond.skeleton.iter().map(|&s| xs[s]));
                let xi = zi - &cond.w * xsl;
                let nv = cond.interior_velocity.len();
                x[cond.interior_velocity.clone()].copy_from_slice(&xi.as_slice()[..nv]);
                let p0 = xs[*cond.skeleton.last().unwrap()];
                let out = &mut x[nu + cond.pressure.start..nu + cond.pressure.end];
                out[0] = p0;
                for j in 1..out.len() {
                    out[j] = xi[nv + j - 1];
                    out[0] -= cond.means[j] * out[j];
                }
            }
            x
        })
    }

    /// Static condensation of the cell interiors, sparse `LDLᵀ` of the skeleton
    /// and iterative refinement on the full system.
    pub fn solve(&self) -> Result<DiscreteSolution> {
        if !self.constrained && self.constant_pressure_defect() < 1e-12 {
            return Err(Error::Factorization(
                "constant pressures lie in the null space of the coupling block".into(),
            ));
        }
        let rhs = self.rhs();
        let n = rhs.len();
        let solve = self.factor()?;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bnorm = norm(&rhs);
        let residual_of = |x: &[f64]| {
            let kx = self.apply(x);
            rhs.iter().zip(&kx).map(|(b, y)| b - y).collect::<Vec<f64>>()
        };
        let mut x = solve(&rhs);
        let mut r = residual_of(&x);
        let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
        for _ in 0..REFINEMENT_STEPS {
            if norm(&r) <= 1e-14 * scale || !x.iter().all(|v| v.is_finite()) {
                break;
            }
            let dx = solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = residual_of(&x);
        }
        let residual = norm(&r) / scale;
        if !(residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::Residual { residual, tolerance: RESIDUAL_TOLERANCE });
        }
        let nu = self.dofs.n_velocity;
        let np = self.dofs.n_pressure;
        Ok(DiscreteSolution {
            dofs: self.dofs.clone(),
            velocity: x[..nu].to_vec(),
            pressure: x[nu..nu + np].to_vec(),
            multiplier: if self.constrained { x[n - 1] } else { 0.0 },
            residual,
        })
    }

    /// `Aᵀ - A` measured relative to the largest entry of `A`.
    pub fn asymmetry(&self) -> f64 {
        let (sym, vals) = self.a.parts();
        let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        let mut lookup = std::collections::HashMap::with_capacity(vals.len());
        for j in 0..sym.ncols() {
            for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
                lookup.insert((sym.row_idx()[p], j), vals[p]);
            }
        }
        for (&(i, j), &v) in &lookup {
            let w = lookup.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - w).abs());
        }
        if max > 0.0 {
            worst / max
        } else {
            0.0
        }
    }
}

/// Velocity DOFs and pressure coefficients of a solved system.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub dofs: DofMap,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

/// Polynomial views of a solution on one cell.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub kernel: ElementKernel,
    pub dofs: DVector<f64>,
    /// Coefficients of `p_h` in the scaled monomials of `P_{k-1}`.
    pub pressure: Vec<f64>,
}

impl CellSolution {
    pub fn eps(&self) -> DVector<f64> {
        &self.kernel.projections.eps * &self.dofs
    }

    pub fn zero(&self) -> DVector<f64> {
        &self.kernel.projections.zero_k * &self.dofs
    }

    pub fn div(&self) -> DVector<f64> {
        &self.kernel.projections.div * &self.dofs
    }

    /// `|K|⁻¹ ∫_K Π^0 u_h`.
    pub fn mean_velocity(&self) -> [f64; 2] {
        let z = self.zero();
        let nk = z.len() / 2;
        let ints = &self.kernel.integrals;
        let mut out = [0.0; 2];
        for j in 0..nk {
            out[0] += z[j] * ints.get(j);
            out[1] += z[nk + j] * ints.get(j);
        }
        [out[0] / self.kernel.area, out[1] / self.kernel.area]
    }

    pub fn mean_pressure(&self) -> f64 {
        let ints = &self.kernel.integrals;
        self.pressure.iter().enumerate().map(|(j, p)| p * ints.get(j)).sum::<f64>() / self.kernel.area
    }

    pub fn mean_divergence(&self) -> f64 {
        let d = self.div();
        let ints = &self.kernel.integrals;
        d.iter().enumerate().map(|(j, v)| v * ints.get(j)).sum::<f64>() / self.kernel.area
    }
}

impl DiscreteSolution {
    pub fn local_velocity(&self, mesh: &PolygonalMesh, cell: usize) -> DVector<f64> {
        let idx = self.dofs.cell_velocity_dofs(mesh, cell);
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.velocity[i]))
    }

    pub fn local_pressure(&self, cell: usize) -> &[f64] {
        &self.pressure[self.dofs.cell_pressure_dofs(cell)]
    }

    pub fn cell(&self, mesh: &PolygonalMesh, reference: &ReferenceData, cell: usize) -> Result<CellSolution> {
        Ok(CellSolution {
            kernel: ElementKernel::new(mesh, cell, reference)?,
            dofs: self.local_velocity(mesh, cell),
            pressure: self.local_pressure(cell).to_vec(),
        })
    }

    /// `∫_Ω p_h`.
    pub fn pressure_integral(&self, system: &SaddleSystem) -> f64 {
        self.pressure.iter().zip(&system.c).map(|(p, c)| p * c).sum()
    }
}

/// Global velocity DOFs of a smooth field.
pub fn interpolate_velocity(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    reference: &ReferenceData,
    u: &(dyn Fn(Point) -> Point + Sync),
    div_u: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let locals: Vec<(Vec<usize>, DVector<f64>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let kernel = ElementKernel::new(mesh, cell, reference)?;
            Ok((dofs.cell_velocity_dofs(mesh, cell), kernel.interpolate(u, div_u)))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; dofs.n_velocity];
    for (idx, vals) in locals {
        for (&i, &v) in idx.iter().zip(vals.iter()) {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Cellwise `L²` projection of a scalar field onto `P_{k-1}`.
pub fn project_pressure(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    reference: &ReferenceData,
    p: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let k = dofs.k;
    let locals: Vec<Vec<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let kernel = ElementKernel::new(mesh, cell, reference)?;
            let n = dim(k - 1);
            let rule = kernel.cell_rule(2 * k + 4);
            let mut rhs = DVector::zeros(n);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let vals = kernel.basis.eval(*x);
                let px = p(*x);
                for j in 0..n {
                    rhs[j] += w * px * vals[j];
                }
            }
            let mass = kernel.integrals.mass(k - 1);
            let sol = mass.lu().solve(&rhs).ok_or(Error::SingularCell { cell, what: "pressure mass matrix" })?;
            Ok(sol.iter().copied().collect())
        })
        .collect::<Result<_>>()?;
    Ok(locals.concat())
}
