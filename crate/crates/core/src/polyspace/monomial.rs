use crate::Point;

/// Number of bivariate monomials of total degree at most `k`.
pub const fn dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Position of `ξ^a η^b` in the degree-graded ordering
/// `1, ξ, η, ξ², ξη, η², ...`.
pub const fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exponent pairs in index order up to degree `k`.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim(k));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Scaled monomials `m_α(x) = ((x - x_K) / h_K)^α` of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMonomialBasis {
    pub center: Point,
    pub h: f64,
    pub order: usize,
}

impl ScaledMonomialBasis {
    pub fn new(center: Point, h: f64, order: usize) -> Self {
        Self { center, h, order }
    }

    pub fn len(&self) -> usize {
        dim(self.order)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn local(&self, p: Point) -> (f64, f64) {
        ((p[0] - self.center[0]) / self.h, (p[1] - self.center[1]) / self.h)
    }

    /// Values of every basis monomial at `p`.
    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(p, &mut out);
        out
    }

    pub fn eval_into(&self, p: Point, out: &mut [f64]) {
        let (xi, eta) = self.local(p);
        eval_monomials(xi, eta, self.order, out);
    }

    /// Physical-coordinate gradients of every basis monomial at `p`.
    pub fn grad(&self, p: Point) -> Vec<[f64; 2]> {
        let (xi, eta) = self.local(p);
        let mut vals = vec![0.0; dim(self.order)];
        eval_monomials(xi, eta, self.order, &mut vals);
        let inv_h = 1.0 / self.h;
        exponents(self.order)
            .into_iter()
            .map(|(a, b)| {
                let dx = if a > 0 { a as f64 * vals[index(a - 1, b)] } else { 0.0 };
                let dy = if b > 0 { b as f64 * vals[index(a, b - 1)] } else { 0.0 };
                [dx * inv_h, dy * inv_h]
            })
            .collect()
    }
}

/// Fills `out[index(a, b)] = ξ^a η^b` for `a + b <= k`.
pub fn eval_monomials(xi: f64, eta: f64, k: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for d in 1..=k {
        let base = index(d, 0);
        let prev = index(d - 1, 0);
        out[base] = out[prev] * xi;
        for b in 1..=d {
            out[base + b] = out[prev + b - 1] * eta;
        }
    }
}

/// Coefficients, in the basis of order `k - 2`, of the physical Laplacian of
/// each order-`k` monomial. Row `i` of the result is `Δ m_i`.
pub fn laplacian_coefficients(k: usize, h: f64) -> Vec<Vec<(usize, f64)>> {
    let s = 1.0 / (h * h);
    exponents(k)
        .into_iter()
        .map(|(a, b)| {
            let mut terms = Vec::new();
            if a >= 2 {
                terms.push((index(a - 2, b), s * (a * (a - 1)) as f64));
            }
            if b >= 2 {
                terms.push((index(a, b - 2), s * (b * (b - 1)) as f64));
            }
            terms
        })
        .collect()
}

/// Physical first derivatives of monomial `(a, b)` as sparse coefficient
/// lists in the scaled basis: `(∂x, ∂y)`.
pub fn derivative_terms(a: usize, b: usize, h: f64) -> (Option<(usize, f64)>, Option<(usize, f64)>) {
    let dx = (a > 0).then(|| (index(a - 1, b), a as f64 / h));
    let dy = (b > 0).then(|| (index(a, b - 1), b as f64 / h));
    (dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_ordering() {
        assert_eq!(dim(0), 1);
        assert_eq!(dim(2), 6);
        let ex = exponents(3);
        assert_eq!(ex.len(), dim(3));
        for (i, &(a, b)) in ex.iter().enumerate() {
            assert_eq!(index(a, b), i);
        }
    }

    #[test]
    fn constant_and_bounded() {
        let basis = ScaledMonomialBasis::new([0.3, -0.2], 0.5, 4);
        let v = basis.eval([0.1, 0.05]);
        assert_eq!(v[0], 1.0);
        // |ξ|, |η| <= 1 implies every monomial is bounded by 1
        for p in [[0.8, 0.3], [-0.2, -0.7], [0.3, 0.3], [-0.1, 0.29]] {
            for m in basis.eval(p) {
                assert!(m.abs() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = ScaledMonomialBasis::new([0.3, -0.2], 0.5, 3);
        let p = [0.41, -0.07];
        let g = basis.grad(p);
        let eps = 1e-6;
        let fx = |dx: f64, dy: f64| basis.eval([p[0] + dx, p[1] + dy]);
        let (xp, xm, yp, ym) = (fx(eps, 0.0), fx(-eps, 0.0), fx(0.0, eps), fx(0.0, -eps));
        for i in 0..basis.len() {
            assert!((g[i][0] - (xp[i] - xm[i]) / (2.0 * eps)).abs() < 1e-7);
            assert!((g[i][1] - (yp[i] - ym[i]) / (2.0 * eps)).abs() < 1e-7);
        }
    }
}
