use nalgebra::{DMatrix, DVector};

use super::ElementKernel;
use crate::mesh::Predicate;
use crate::polyspace::dim;
use crate::{Error, Point, Result};

pub type Tensor = [[f64; 2]; 2];

/// Permeability tensor `K`, constant on each cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Permeability {
    Scalar(f64),
    Matrix(Tensor),
    /// First matching predicate at the cell centroid wins.
    Regions { regions: Vec<(Predicate, Tensor)>, default: Tensor },
}

impl Default for Permeability {
    fn default() -> Self {
        Permeability::Scalar(1.0)
    }
}

fn check_spd(k: &Tensor) -> Result<()> {
    let sym = (k[0][1] - k[1][0]).abs() <= 1e-12 * (k[0][0].abs() + k[1][1].abs());
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    if sym && k[0][0] > 0.0 && det > 0.0 && det.is_finite() {
        Ok(())
    } else {
        Err(Error::PermeabilityNotSpd(format!("{k:?}")))
    }
}

impl Permeability {
    pub fn validate(&self) -> Result<()> {
        match self {
            Permeability::Scalar(s) => check_spd(&[[*s, 0.0], [0.0, *s]]),
            Permeability::Matrix(m) => check_spd(m),
            Permeability::Regions { regions, default } => {
                regions.iter().try_for_each(|(_, m)| check_spd(m))?;
                check_spd(default)
            }
        }
    }

    pub fn tensor_at(&self, p: Point) -> Tensor {
        match self {
            Permeability::Scalar(s) => [[*s, 0.0], [0.0, *s]],
            Permeability::Matrix(m) => *m,
            Permeability::Regions { regions, default } => {
                regions.iter().find(|(pred, _)| pred.contains(p)).map(|(_, m)| *m).unwrap_or(*default)
            }
        }
    }

    /// `K⁻¹` at `p`.
    pub fn inverse_at(&self, p: Point) -> Result<Tensor> {
        let k = self.tensor_at(p);
        check_spd(&k)?;
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        Ok([[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]])
    }
}

/// Local matrices of one cell.
#[derive(Debug, Clone)]
pub struct LocalForms {
    /// `m_h^K`, stabilization included.
    pub m: DMatrix<f64>,
    /// `a_h^K`, stabilization included.
    pub a: DMatrix<f64>,
    pub s0: DMatrix<f64>,
    pub seps: DMatrix<f64>,
    /// `b^K(φ_i, m_j) = -∫ m_j div φ_i`, row `j`, column `i`.
    pub b: DMatrix<f64>,
    /// `∫ f·Π^{0,k-1} φ_i`.
    pub f: DVector<f64>,
}

/// `Σ_i dof_i((I - P)·)²` as a matrix.
fn dofi_dofi(kernel: &ElementKernel, projection: &DMatrix<f64>) -> DMatrix<f64> {
    let n = kernel.ndofs();
    let r = DMatrix::identity(n, n) - &kernel.poly_dofs * projection;
    r.transpose() * r
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl LocalForms {
    pub fn new(
        kernel: &ElementKernel,
        nu: f64,
        kinv: Tensor,
        f: Option<&(dyn Fn(Point) -> Point + Sync)>,
    ) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {nu}")));
        }
        let k = kernel.k;
        let (nk, nkm1) = (dim(k), dim(k - 1));
        let ints = &kernel.integrals;
        let p = &kernel.projections;

        let mut m_poly = DMatrix::zeros(2 * nk, 2 * nk);
        for c in 0..2 {
            for d in 0..2 {
                for i in 0..nk {
                    for j in 0..nk {
                        m_poly[(c * nk + i, d * nk + j)] = kinv[c][d] * ints.product(i, j);
                    }
                }
            }
        }
        let mu_m = kernel.area * 0.5 * (kinv[0][0] + kinv[1][1]);
        let s0 = dofi_dofi(kernel, &p.zero_k) * mu_m;
        let m = symmetrize(p.zero_k.transpose() * m_poly * &p.zero_k + &s0);

        let energy = kernel.strain_energy_matrix();
        let seps = dofi_dofi(kernel, &p.eps) * nu;
        let a = symmetrize((p.eps.transpose() * energy * &p.eps) * nu + &seps);

        let mass = ints.mass(k - 1);
        let b = -(mass * &p.div);

        let mut load = DVector::zeros(kernel.ndofs());
        if let Some(f) = f {
            let rule = kernel.cell_rule(2 * k + 2);
            let mut moments = DVector::zeros(2 * nkm1);
            let basis = crate::polyspace::ScaledMonomialBasis::new(kernel.centroid, kernel.h, k - 1);
            let mut vals = vec![0.0; nkm1];
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let fv = f(*pt);
                basis.eval_into(*pt, &mut vals);
                for j in 0..nkm1 {
                    moments[j] += w * fv[0] * vals[j];
                    moments[nkm1 + j] += w * fv[1] * vals[j];
                }
            }
            load = p.zero_km1.transpose() * moments;
        }
        Ok(Self { m, a, s0, seps, b, f: load })
    }
}
