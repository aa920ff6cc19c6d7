//! Per-cell DOF layout, projections and local forms of the enhanced
//! divergence-conforming virtual element space.
//!
//! Polynomial coefficient vectors of `[P_k]²` use the raw layout of
//! [`crate::polyspace`]: entry `c·dim(k) + j` multiplies `m_j e_c`.

mod dofs;
mod forms;

use nalgebra::{DMatrix, DVector};

use crate::mesh::PolygonalMesh;
use crate::polyspace::monomial::{derivative_terms, laplacian_coefficients};
use crate::polyspace::{dim, exponents, index, MonomialIntegrals, QuadratureRule, ScaledMonomialBasis, VectorPolySplit};
use crate::{Error, Point, Result};

pub use dofs::{lagrange_values, DofLayout, EdgeData};
pub use forms::{LocalForms, Permeability, Tensor};

/// Cell-independent data shared by every element of order `k`.
#[derive(Debug, Clone)]
pub struct ReferenceData {
    pub k: usize,
    split_k: VectorPolySplit,
    split_km2: VectorPolySplit,
}

impl ReferenceData {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::UnsupportedOrder(k));
        }
        Ok(Self { k, split_k: VectorPolySplit::new(k), split_km2: VectorPolySplit::new(k - 2) })
    }

    /// Number of Gauss points used on edges.
    pub fn edge_points(&self) -> usize {
        self.k + 2
    }
}

/// Matrices mapping local DOF vectors to polynomial coefficients.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    /// `Π^∇`, raw `[P_k]²` coefficients.
    pub nabla: DMatrix<f64>,
    /// `Π^ε`, raw `[P_k]²` coefficients.
    pub eps: DMatrix<f64>,
    /// `Π^{0,k}`, raw `[P_k]²` coefficients.
    pub zero_k: DMatrix<f64>,
    /// `Π^{0,k-1}`, raw `[P_{k-1}]²` coefficients.
    pub zero_km1: DMatrix<f64>,
    /// Coefficients of `div v` in the scaled monomials of `P_{k-1}`.
    pub div: DMatrix<f64>,
}

/// Everything needed to evaluate the discrete forms on one cell.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    pub cell: usize,
    pub k: usize,
    pub vertices: Vec<Point>,
    pub area: f64,
    pub h: f64,
    pub centroid: Point,
    pub kernel_point: Point,
    pub basis: ScaledMonomialBasis,
    pub integrals: MonomialIntegrals,
    pub layout: DofLayout,
    pub edges: Vec<EdgeData>,
    pub projections: ProjectionSet,
    /// Column `r` holds the DOFs of raw basis polynomial `r` of `[P_k]²`.
    pub poly_dofs: DMatrix<f64>,
}

/// Inverse with a relative pivot check.
fn checked_inverse(m: DMatrix<f64>, cell: usize, what: &'static str) -> Result<DMatrix<f64>> {
    let lu = m.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < 1e-12 * max {
        return Err(Error::SingularCell { cell, what });
    }
    lu.try_inverse().ok_or(Error::SingularCell { cell, what })
}

/// Sparse polynomial: `(monomial index, coefficient)` pairs.
type Sparse = Vec<(usize, f64)>;

/// Physical gradient tensor of raw basis function `r`:
/// `grad[a][b] = ∂_b r_a` as sparse polynomials.
fn raw_gradient(r: usize, nk: usize, exps: &[(usize, usize)], h: f64) -> [[Sparse; 2]; 2] {
    let (c, j) = (r / nk, r % nk);
    let (a, b) = exps[j];
    let (dx, dy) = derivative_terms(a, b, h);
    let mut out: [[Sparse; 2]; 2] = Default::default();
    out[c][0] = dx.into_iter().collect();
    out[c][1] = dy.into_iter().collect();
    out
}

fn strain_of(grad: &[[Sparse; 2]; 2]) -> [[Sparse; 2]; 2] {
    let mut eps: [[Sparse; 2]; 2] = Default::default();
    for a in 0..2 {
        for b in 0..2 {
            let mut terms: Sparse = Vec::new();
            for &(i, v) in &grad[a][b] {
                terms.push((i, 0.5 * v));
            }
            for &(i, v) in &grad[b][a] {
                terms.push((i, 0.5 * v));
            }
            eps[a][b] = terms;
        }
    }
    eps
}

fn integrate_product(ints: &MonomialIntegrals, p: &Sparse, q: &Sparse) -> f64 {
    let mut s = 0.0;
    for &(i, a) in p {
        for &(j, b) in q {
            s += a * b * ints.product(i, j);
        }
    }
    s
}

fn eval_sparse(p: &Sparse, values: &[f64]) -> f64 {
    p.iter().map(|&(i, c)| c * values[i]).sum()
}

/// Physical second derivative `∂_s ∂_t m_{(a, b)}` as a sparse polynomial.
fn second_derivative(a: usize, b: usize, s: usize, t: usize, h: f64) -> Sparse {
    let (mut a, mut b) = (a as i64, b as i64);
    let mut coef = 1.0 / (h * h);
    for d in [s, t] {
        if d == 0 {
            coef *= a as f64;
            a -= 1;
        } else {
            coef *= b as f64;
            b -= 1;
        }
    }
    if a < 0 || b < 0 || coef == 0.0 {
        Vec::new()
    } else {
        vec![(index(a as usize, b as usize), coef)]
    }
}

impl ElementKernel {
    pub fn new(mesh: &PolygonalMesh, cell: usize, reference: &ReferenceData) -> Result<Self> {
        let g = mesh.geometry(cell);
        Self::from_polygon(cell, mesh.cell_points(cell), g.centroid, g.area, g.diameter, g.kernel_point, reference)
    }

    pub fn from_polygon(
        cell: usize,
        vertices: Vec<Point>,
        centroid: Point,
        area: f64,
        h: f64,
        kernel_point: Point,
        reference: &ReferenceData,
    ) -> Result<Self> {
        let k = reference.k;
        let nv = vertices.len();
        let layout = DofLayout::new(nv, k)?;
        let n = layout.len();
        let basis = ScaledMonomialBasis::new(centroid, h, k);
        let integrals = MonomialIntegrals::new(&vertices, &basis, 2 * k + 2);
        let edges: Vec<EdgeData> = (0..nv)
            .map(|l| EdgeData::new(&layout, l, vertices[l], vertices[(l + 1) % nv], reference.edge_points()))
            .collect();
        let (nk, nkm1, nkm2) = (dim(k), dim(k - 1), dim(k - 2));
        let exps = exponents(k + 1);
        let wide = ScaledMonomialBasis::new(centroid, h, k + 1);

        // trace · n and trace components as rows over the local DOFs
        let mut flux_rows: Vec<Vec<(Vec<(usize, f64)>, [f64; 2])>> = Vec::with_capacity(nv);
        for e in &edges {
            let per_q = (0..e.rule.len())
                .map(|q| {
                    let entries = e
                        .nodes
                        .iter()
                        .enumerate()
                        .flat_map(|(m, node)| {
                            let w = e.lagrange[q][m];
                            [(node[0], w), (node[1], w)]
                        })
                        .collect::<Vec<_>>();
                    (entries, e.rule.points[q])
                })
                .collect();
            flux_rows.push(per_q);
        }
        // accumulates ∮ φ(x) (v·w(x)) into `row`, with w given per point
        let edge_moment = |row: &mut DVector<f64>, weight: &dyn Fn(usize, Point, Point) -> [f64; 2]| {
            for (l, e) in edges.iter().enumerate() {
                for (q, (entries, p)) in flux_rows[l].iter().enumerate() {
                    let w = weight(l, *p, e.normal);
                    let jw = e.rule.weights[q];
                    for (i, &(dof, lw)) in entries.iter().enumerate() {
                        row[dof] += jw * lw * w[i % 2];
                    }
                }
            }
        };

        // divergence coefficients
        let mut mu = DMatrix::zeros(nkm1, n);
        let mut flux = DVector::zeros(n);
        edge_moment(&mut flux, &|_, _, nrm| nrm);
        for j in 0..nkm1 {
            let mean = integrals.get(j) / area;
            let mut row = flux.clone() * mean;
            if j > 0 {
                row[layout.divergence_start() + j - 1] += area / h;
            }
            mu.set_row(j, &row.transpose());
        }
        let mass_km1 = integrals.mass(k - 1);
        let div = checked_inverse(mass_km1, cell, "divergence mass matrix")? * mu;

        // ∫ v·∇_ξ m_α for 1 <= |α| <= k + 1
        let n_grad = dim(k + 1) - 1;
        let mut grad_moments = DMatrix::zeros(n_grad, n);
        for (row_idx, alpha) in (1..dim(k + 1)).enumerate() {
            let mut row = DVector::zeros(n);
            edge_moment(&mut row, &|_, p, nrm| {
                let m = wide.eval(p)[alpha];
                [m * nrm[0], m * nrm[1]]
            });
            for j in 0..nkm1 {
                let c = integrals.product(j, alpha);
                for i in 0..n {
                    row[i] -= div[(j, i)] * c;
                }
            }
            grad_moments.set_row(row_idx, &(row * h).transpose());
        }

        // complement moment row for x^⊥ m_β taken from the DOFs
        let comp_dof_row = |beta: usize| {
            let mut row = DVector::zeros(n);
            row[layout.complement_start() + beta] = area;
            row
        };

        // raw moments of order k - 2
        let split2 = &reference.split_km2;
        let mut s2 = DMatrix::zeros(2 * nkm2, n);
        let g2 = split2.gradient_count();
        s2.rows_mut(0, g2).copy_from(&grad_moments.rows(0, g2));
        for b in 0..split2.complement_count() {
            s2.set_row(g2 + b, &comp_dof_row(b).transpose());
        }
        let raw_km2 = &split2.inverse * s2;

        // Π^∇
        let grads: Vec<[Sparse; 2]> = exponents(k)
            .into_iter()
            .map(|(a, b)| {
                let (dx, dy) = derivative_terms(a, b, h);
                [dx.into_iter().collect(), dy.into_iter().collect()]
            })
            .collect();
        let mut stiff = DMatrix::zeros(nk, nk);
        for i in 0..nk {
            for j in 0..nk {
                stiff[(i, j)] = (0..2).map(|d| integrate_product(&integrals, &grads[i][d], &grads[j][d])).sum();
            }
        }
        for j in 0..nk {
            stiff[(0, j)] = integrals.get(j) / area;
        }
        let stiff_inv = checked_inverse(stiff, cell, "gradient projection")?;
        let lap = laplacian_coefficients(k, h);
        let mut nabla = DMatrix::zeros(2 * nk, n);
        for c in 0..2 {
            let mut rhs = DMatrix::zeros(nk, n);
            for j in 0..nk {
                let mut row = DVector::zeros(n);
                if j == 0 {
                    row += raw_km2.row(c * nkm2).transpose() / area;
                } else {
                    for &(i, coef) in &lap[j] {
                        row -= raw_km2.row(c * nkm2 + i).transpose() * coef;
                    }
                    edge_moment(&mut row, &|_, p, nrm| {
                        let gm = basis.grad(p)[j];
                        let dn = gm[0] * nrm[0] + gm[1] * nrm[1];
                        if c == 0 {
                            [dn, 0.0]
                        } else {
                            [0.0, dn]
                        }
                    });
                }
                rhs.set_row(j, &row.transpose());
            }
            nabla.rows_mut(c * nk, nk).copy_from(&(&stiff_inv * rhs));
        }

        // ∫ r·x^⊥ m_β for raw r of [P_k]²
        let perp_row = |beta: usize| {
            let (a, b) = exps[beta];
            let up = index(a, b + 1);
            let right = index(a + 1, b);
            DVector::from_fn(2 * nk, |r, _| {
                let (c, j) = (r / nk, r % nk);
                if c == 0 {
                    integrals.product(j, up)
                } else {
                    -integrals.product(j, right)
                }
            })
        };

        // raw moments of order k, with the enhancement for the top complement
        let split = &reference.split_k;
        let mut sk = DMatrix::zeros(2 * nk, n);
        let gk = split.gradient_count();
        sk.rows_mut(0, gk).copy_from(&grad_moments);
        for beta in 0..split.complement_count() {
            let (a, b) = exps[beta];
            let row = if a + b + 3 <= k {
                comp_dof_row(beta)
            } else {
                (perp_row(beta).transpose() * &nabla).transpose()
            };
            sk.set_row(gk + beta, &row.transpose());
        }
        let raw_k = &split.inverse * sk;

        let mass_k = integrals.mass(k);
        let mass_k_inv = checked_inverse(mass_k, cell, "L2 projection")?;
        let mass_km1_inv = checked_inverse(integrals.mass(k - 1), cell, "L2 projection")?;
        let mut zero_k = DMatrix::zeros(2 * nk, n);
        let mut zero_km1 = DMatrix::zeros(2 * nkm1, n);
        for c in 0..2 {
            zero_k.rows_mut(c * nk, nk).copy_from(&(&mass_k_inv * raw_k.rows(c * nk, nk)));
            zero_km1
                .rows_mut(c * nkm1, nkm1)
                .copy_from(&(&mass_km1_inv * raw_k.rows(c * nk, nkm1)));
        }

        // Π^ε with rigid-motion fixing
        let raw_exps = exponents(k);
        let strains: Vec<[[Sparse; 2]; 2]> =
            (0..2 * nk).map(|r| strain_of(&raw_gradient(r, nk, &raw_exps, h))).collect();
        let energy = strain_energy(&integrals, &strains);
        let mut bordered = DMatrix::zeros(2 * nk + 3, 2 * nk + 3);
        bordered.view_mut((0, 0), (2 * nk, 2 * nk)).copy_from(&energy);
        let (xi, eta) = (index(1, 0), index(0, 1));
        for j in 0..nk {
            let c = [
                (0, j, integrals.get(j)),
                (1, nk + j, integrals.get(j)),
                (2, j, -integrals.product(j, eta)),
                (2, nk + j, integrals.product(j, xi)),
            ];
            for (row, col, v) in c {
                bordered[(2 * nk + row, col)] = v / area;
                bordered[(col, 2 * nk + row)] = v / area;
            }
        }
        let mut rhs = DMatrix::zeros(2 * nk + 3, n);
        for r in 0..2 * nk {
            let (c, j) = (r / nk, r % nk);
            let (a, b) = raw_exps[j];
            let d = 1 - c;
            // div ε(m_j e_c) = (∂_cc + ½∂_dd) m_j e_c + ½ ∂_cd m_j e_d
            let mut row = DVector::zeros(n);
            let mut own: Sparse = second_derivative(a, b, c, c, h);
            own.extend(second_derivative(a, b, d, d, h).into_iter().map(|(i, v)| (i, 0.5 * v)));
            let cross: Sparse = second_derivative(a, b, c, d, h).into_iter().map(|(i, v)| (i, 0.5 * v)).collect();
            for &(i, v) in &own {
                row -= raw_km2.row(c * nkm2 + i).transpose() * v;
            }
            for &(i, v) in &cross {
                row -= raw_km2.row(d * nkm2 + i).transpose() * v;
            }
            let eps_r = &strains[r];
            edge_moment(&mut row, &|_, p, nrm| {
                let vals = basis.eval(p);
                let e = [
                    [eval_sparse(&eps_r[0][0], &vals), eval_sparse(&eps_r[0][1], &vals)],
                    [eval_sparse(&eps_r[1][0], &vals), eval_sparse(&eps_r[1][1], &vals)],
                ];
                [e[0][0] * nrm[0] + e[0][1] * nrm[1], e[1][0] * nrm[0] + e[1][1] * nrm[1]]
            });
            rhs.set_row(r, &row.transpose());
        }
        let rigid = [
            raw_k.row(0).clone_owned(),
            raw_k.row(nk).clone_owned(),
            raw_k.row(nk + xi) - raw_k.row(eta),
        ];
        for (l, row) in rigid.iter().enumerate() {
            rhs.set_row(2 * nk + l, &(row / area));
        }
        let eps_full = checked_inverse(bordered, cell, "strain projection")? * rhs;
        let eps = eps_full.rows(0, 2 * nk).clone_owned();

        let projections = ProjectionSet { nabla, eps, zero_k, zero_km1, div };
        let mut kernel = Self {
            cell,
            k,
            vertices,
            area,
            h,
            centroid,
            kernel_point,
            basis,
            integrals,
            layout,
            edges,
            projections,
            poly_dofs: DMatrix::zeros(0, 0),
        };
        kernel.poly_dofs = kernel.polynomial_dofs();
        Ok(kernel)
    }

    pub fn ndofs(&self) -> usize {
        self.layout.len()
    }

    /// DOF vectors of the raw basis of `[P_k]²`, one per column.
    fn polynomial_dofs(&self) -> DMatrix<f64> {
        let k = self.k;
        let nk = dim(k);
        let n = self.ndofs();
        let exps = exponents(k);
        let wide = exponents(k + 1);
        let mut out = DMatrix::zeros(n, 2 * nk);
        let node_values = |p: Point| self.basis.eval(p);
        for (j, &v) in self.vertices.iter().enumerate() {
            let vals = node_values(v);
            for c in 0..2 {
                for jj in 0..nk {
                    out[(self.layout.vertex(j, c), c * nk + jj)] = vals[jj];
                }
            }
        }
        for (l, e) in self.edges.iter().enumerate() {
            for m in 1..k {
                let vals = node_values(e.node_point(k, m));
                for c in 0..2 {
                    for jj in 0..nk {
                        out[(self.layout.edge(l, m - 1, c), c * nk + jj)] = vals[jj];
                    }
                }
            }
        }
        let ints = &self.integrals;
        for beta in 0..self.layout.complement_count() {
            let (a, b) = wide[beta];
            let row = self.layout.complement_start() + beta;
            for jj in 0..nk {
                out[(row, jj)] = ints.product(jj, index(a, b + 1)) / self.area;
                out[(row, nk + jj)] = -ints.product(jj, index(a + 1, b)) / self.area;
            }
        }
        for g in 1..dim(k - 1) {
            let row = self.layout.divergence_start() + g - 1;
            let mean = ints.get(g) / self.area;
            for c in 0..2 {
                for (jj, &(a, b)) in exps.iter().enumerate() {
                    let (dx, dy) = derivative_terms(a, b, self.h);
                    if let Some((i, coef)) = if c == 0 { dx } else { dy } {
                        let moment = ints.product(i, g) - mean * ints.get(i);
                        out[(row, c * nk + jj)] = self.h / self.area * coef * moment;
                    }
                }
            }
        }
        out
    }

    /// DOFs of a smooth field from point values and its divergence, with
    /// cell moments by quadrature.
    pub fn interpolate(&self, u: &dyn Fn(Point) -> Point, div_u: &dyn Fn(Point) -> f64) -> DVector<f64> {
        let k = self.k;
        let mut v = DVector::zeros(self.ndofs());
        for (j, &p) in self.vertices.iter().enumerate() {
            let val = u(p);
            v[self.layout.vertex(j, 0)] = val[0];
            v[self.layout.vertex(j, 1)] = val[1];
        }
        for (l, e) in self.edges.iter().enumerate() {
            for m in 1..k {
                let val = u(e.node_point(k, m));
                v[self.layout.edge(l, m - 1, 0)] = val[0];
                v[self.layout.edge(l, m - 1, 1)] = val[1];
            }
        }
        let rule = self.cell_rule(2 * k + 4);
        let wide = ScaledMonomialBasis::new(self.centroid, self.h, k.max(2));
        let exps = exponents(k);
        for beta in 0..self.layout.complement_count() {
            let (a, b) = exps[beta];
            let s = rule.integrate(|p| {
                let m = wide.eval(p);
                let val = u(p);
                val[0] * m[index(a, b + 1)] - val[1] * m[index(a + 1, b)]
            });
            v[self.layout.complement_start() + beta] = s / self.area;
        }
        let means: Vec<f64> = (0..dim(k - 1)).map(|g| self.integrals.get(g) / self.area).collect();
        for g in 1..dim(k - 1) {
            let s = rule.integrate(|p| div_u(p) * (self.basis.eval(p)[g] - means[g]));
            v[self.layout.divergence_start() + g - 1] = self.h / self.area * s;
        }
        v
    }

    /// Fan quadrature from the kernel point, exact to `degree`.
    pub fn cell_rule(&self, degree: usize) -> QuadratureRule {
        QuadratureRule::polygon(&self.vertices, self.kernel_point, degree)
    }

    /// Value at `p` of the raw `[P_k]²` polynomial with coefficients `coeffs`.
    pub fn eval_vector(&self, coeffs: &[f64], p: Point) -> Point {
        let nk = coeffs.len() / 2;
        let vals = self.basis_values(p, nk);
        let mut out = [0.0; 2];
        for j in 0..nk {
            out[0] += coeffs[j] * vals[j];
            out[1] += coeffs[nk + j] * vals[j];
        }
        out
    }

    /// Value at `p` of the scalar polynomial with coefficients `coeffs`.
    pub fn eval_scalar(&self, coeffs: &[f64], p: Point) -> f64 {
        let vals = self.basis_values(p, coeffs.len());
        coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }

    fn basis_values(&self, p: Point, len: usize) -> Vec<f64> {
        let mut order = 0;
        while dim(order) < len {
            order += 1;
        }
        ScaledMonomialBasis::new(self.centroid, self.h, order).eval(p)
    }

    /// Symmetric gradient at `p` of the raw `[P_k]²` polynomial `coeffs`.
    pub fn strain(&self, coeffs: &[f64], p: Point) -> [[f64; 2]; 2] {
        let nk = dim(self.k);
        let grads = self.basis.grad(p);
        let mut g = [[0.0; 2]; 2];
        for j in 0..nk {
            for c in 0..2 {
                g[c][0] += coeffs[c * nk + j] * grads[j][0];
                g[c][1] += coeffs[c * nk + j] * grads[j][1];
            }
        }
        let off = 0.5 * (g[0][1] + g[1][0]);
        [[g[0][0], off], [off, g[1][1]]]
    }

    /// Strain of `Π^ε φ_i` at `p` for every local basis function `φ_i`.
    pub fn projected_strains(&self, p: Point) -> Vec<[[f64; 2]; 2]> {
        let nk = dim(self.k);
        let grads = self.basis.grad(p);
        let eps = &self.projections.eps;
        (0..self.ndofs())
            .map(|i| {
                let mut g = [[0.0; 2]; 2];
                for j in 0..nk {
                    for c in 0..2 {
                        let coef = eps[(c * nk + j, i)];
                        g[c][0] += coef * grads[j][0];
                        g[c][1] += coef * grads[j][1];
                    }
                }
                let off = 0.5 * (g[0][1] + g[1][0]);
                [[g[0][0], off], [off, g[1][1]]]
            })
            .collect()
    }

    /// `∫ ε(r_i):ε(r_j)` over the raw basis of `[P_k]²`.
    pub fn strain_energy_matrix(&self) -> DMatrix<f64> {
        let nk = dim(self.k);
        let exps = exponents(self.k);
        let strains: Vec<_> = (0..2 * nk).map(|r| strain_of(&raw_gradient(r, nk, &exps, self.h))).collect();
        strain_energy(&self.integrals, &strains)
    }
}

fn strain_energy(ints: &MonomialIntegrals, strains: &[[[Sparse; 2]; 2]]) -> DMatrix<f64> {
    let n = strains.len();
    let mut e = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += integrate_product(ints, &strains[i][a][b], &strains[j][a][b]);
                }
            }
            e[(i, j)] = s;
            e[(j, i)] = s;
        }
    }
    e
}

#[cfg(test)]
mod tests;
