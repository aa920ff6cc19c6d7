//! Polynomial spaces on cells and edges.
//!
//! All polynomial coefficients live in the scaled monomial basis of the cell
//! they belong to, so matrices built from them have `h`-independent
//! conditioning. Vector polynomials `[P_k]²` use the "raw" layout: first the
//! `x`-component coefficients, then the `y`-component coefficients.

pub mod monomial;
pub mod quadrature;

use nalgebra::DMatrix;

use crate::Point;
pub use monomial::{dim, exponents, index, ScaledMonomialBasis};
pub use quadrature::{gauss_legendre, lobatto_interior, QuadratureRule};

/// Builds the scaled monomial basis of order `k` on a cell.
pub fn cell_basis(center: Point, h: f64, k: usize) -> ScaledMonomialBasis {
    ScaledMonomialBasis::new(center, h, k)
}

/// Exact integrals of every scaled monomial over a polygon, by the
/// divergence theorem and Gauss quadrature on the edges.
#[derive(Debug, Clone)]
pub struct MonomialIntegrals {
    values: Vec<f64>,
    exps: Vec<(usize, usize)>,
    max_degree: usize,
}

impl MonomialIntegrals {
    pub fn new(vertices: &[Point], basis: &ScaledMonomialBasis, max_degree: usize) -> Self {
        let n_mono = dim(max_degree);
        let mut values = vec![0.0; n_mono];
        let exps = exponents(max_degree);
        // ∫_K ξ^a η^b = ∮ h ξ^(a+1) η^b / (a + 1) n_x ds, and n_x ds = dy dt
        let (nodes, weights) = gauss_legendre(max_degree / 2 + 2);
        let mut powers = vec![0.0; dim(max_degree + 1)];
        let nv = vertices.len();
        for i in 0..nv {
            let (p, q) = (vertices[i], vertices[(i + 1) % nv]);
            let dy = q[1] - p[1];
            if dy == 0.0 {
                continue;
            }
            for (s, w) in nodes.iter().zip(&weights) {
                let t = 0.5 * (s + 1.0);
                let pt = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                let (xi, eta) = basis.local(pt);
                monomial::eval_monomials(xi, eta, max_degree + 1, &mut powers);
                let scale = 0.5 * w * dy * basis.h;
                for (slot, &(a, b)) in values.iter_mut().zip(&exps) {
                    *slot += scale * powers[index(a + 1, b)] / (a + 1) as f64;
                }
            }
        }
        Self { values, exps, max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `∫_K m_i`.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `∫_K m_i m_j`.
    pub fn product(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.exps[i];
        let (c, d) = self.exps[j];
        self.values[index(a + c, b + d)]
    }

    /// Scalar mass matrix `∫_K m_i m_j` of the order-`k` basis.
    pub fn mass(&self, k: usize) -> DMatrix<f64> {
        let n = dim(k);
        DMatrix::from_fn(n, n, |i, j| self.product(i, j))
    }
}

/// Ordered basis of `[P_k]²` split into the gradient part
/// `G_k = ∇P_{k+1}` and the complement `x^⊥ P_{k-1}`, with
/// `x^⊥ = ((y - y_K) / h_K, -(x - x_K) / h_K)`.
///
/// Gradients are taken in scaled coordinates, so the change of basis is the
/// same on every cell.
#[derive(Debug, Clone)]
pub struct VectorPolySplit {
    pub order: usize,
    /// Row `i` holds the raw `[P_k]²` coefficients of split function `i`.
    pub transform: DMatrix<f64>,
    /// Inverse of `transform`.
    pub inverse: DMatrix<f64>,
    pub condition: f64,
}

impl VectorPolySplit {
    pub fn new(order: usize) -> Self {
        let n = dim(order);
        let total = 2 * n;
        let mut transform = DMatrix::zeros(total, total);
        let mut row = 0;
        for (a, b) in exponents(order + 1).into_iter().skip(1) {
            if a > 0 {
                transform[(row, index(a - 1, b))] = a as f64;
            }
            if b > 0 {
                transform[(row, n + index(a, b - 1))] = b as f64;
            }
            row += 1;
        }
        if order >= 1 {
            for (a, b) in exponents(order - 1) {
                transform[(row, index(a, b + 1))] = 1.0;
                transform[(row, n + index(a + 1, b))] = -1.0;
                row += 1;
            }
        }
        debug_assert_eq!(row, total);
        let svd = transform.clone().svd(false, false);
        let condition = svd.singular_values.max() / svd.singular_values.min();
        let inverse = transform.clone().try_inverse().expect("split basis spans [P_k]^2");
        Self { order, transform, inverse, condition }
    }

    pub fn gradient_count(&self) -> usize {
        gradient_dim(self.order)
    }

    pub fn complement_count(&self) -> usize {
        complement_dim(self.order)
    }
}

/// `dim G_k = dim P_{k+1} - 1`.
pub const fn gradient_dim(k: usize) -> usize {
    dim(k + 1) - 1
}

/// `dim x^⊥ P_{k-1}`, zero for `k = 0`.
pub const fn complement_dim(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        dim(k - 1)
    }
}

/// Convenience constructor mirroring [`cell_basis`]; the split is
/// cell-independent in scaled coordinates.
pub fn grad_complement_split(k: usize) -> VectorPolySplit {
    VectorPolySplit::new(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    #[test]
    fn monomial_integrals_on_unit_square() {
        // centred at the origin with h = 1 the integrals are plain x^a y^b moments
        let basis = ScaledMonomialBasis::new([0.0, 0.0], 1.0, 4);
        let ints = MonomialIntegrals::new(&unit_square(), &basis, 4);
        for (i, (a, b)) in exponents(4).into_iter().enumerate() {
            let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
            assert!((ints.get(i) - exact).abs() < 1e-13);
        }
        // quadrature agrees with the divergence-theorem values for a shifted basis
        let basis = ScaledMonomialBasis::new([0.5, 0.5], 2f64.sqrt(), 4);
        let ints = MonomialIntegrals::new(&unit_square(), &basis, 4);
        let rule = QuadratureRule::polygon(&unit_square(), [0.5, 0.5], 4);
        for i in 0..dim(4) {
            let q = rule.integrate(|p| basis.eval(p)[i]);
            assert!((q - ints.get(i)).abs() < 1e-13);
        }
    }

    #[test]
    fn fan_quadrature_matches_divergence_theorem_on_convex_cell() {
        let hexagon: Vec<Point> = (0..6)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 3.0 + 0.1;
                [0.2 + 0.3 * t.cos() * (1.0 + 0.1 * i as f64), -0.1 + 0.25 * t.sin()]
            })
            .collect();
        for k in 2..=4 {
            let degree = 2 * k + 2;
            let basis = ScaledMonomialBasis::new([0.2, -0.1], 0.6, degree);
            let ints = MonomialIntegrals::new(&hexagon, &basis, degree);
            let rule = QuadratureRule::polygon(&hexagon, [0.2, -0.1], degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for i in 0..dim(degree) {
                let q = rule.integrate(|p| basis.eval(p)[i]);
                assert!((q - ints.get(i)).abs() < 1e-12, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn split_dimensions() {
        let s0 = VectorPolySplit::new(0);
        assert_eq!((s0.gradient_count(), s0.complement_count()), (2, 0));
        let s2 = VectorPolySplit::new(2);
        assert_eq!(s2.transform.nrows(), 12);
        assert_eq!((s2.gradient_count(), s2.complement_count()), (9, 3));
        assert_eq!(s2.transform.clone().rank(1e-12), 12);
        for k in 0..=4 {
            let s = VectorPolySplit::new(k);
            assert_eq!(s.gradient_count(), (k + 2) * (k + 3) / 2 - 1);
            assert_eq!(s.gradient_count() + s.complement_count(), (k + 1) * (k + 2));
            assert!(s.condition < 1e8, "k={k} cond={}", s.condition);
        }
    }

    #[test]
    fn split_reconstructs_random_vector_polynomial() {
        let s = VectorPolySplit::new(2);
        let mut state = 12345u64;
        let raw: Vec<f64> = (0..12)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let target = nalgebra::DVector::from_vec(raw);
        // least-squares reconstruction from the split functions
        let basis_t = s.transform.transpose();
        let coeffs = basis_t.clone().svd(true, true).solve(&target, 1e-14).unwrap();
        let back = basis_t * coeffs;
        assert!((back - &target).norm() <= 1e-11 * target.norm());
    }
}
