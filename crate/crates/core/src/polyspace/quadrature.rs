use crate::Point;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= 2.0 / total;
    }
    (nodes, weights)
}

/// `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Interior Gauss–Lobatto nodes of the `(k + 1)`-point rule, mapped to
/// `(0, 1)` and ascending. These are the roots of `P_k'`.
pub fn lobatto_interior(k: usize) -> Vec<f64> {
    if k < 2 {
        return Vec::new();
    }
    let kf = k as f64;
    let mut out: Vec<f64> = (1..k)
        .map(|j| {
            let mut x = -(std::f64::consts::PI * j as f64 / kf).cos();
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(k, x);
                let dp = kf * (x * p - p_prev) / (x * x - 1.0);
                let ddp = (2.0 * x * dp - kf * (kf + 1.0) * p) / (1.0 - x * x);
                let dx = dp / ddp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            0.5 * (x + 1.0)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Points and positive weights for integration over a segment or polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(Point) -> f64) -> f64 {
        // Kahan summation
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (&p, &w) in self.points.iter().zip(&self.weights) {
            let term = w * f(p) - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        sum
    }

    /// Gauss rule with `n` points on the segment `a -> b`; weights include
    /// the segment length. Exact to degree `2n - 1`.
    pub fn segment(a: Point, b: Point, n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let points = nodes
            .iter()
            .map(|&s| {
                let t = 0.5 * (s + 1.0);
                [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
            })
            .collect();
        let weights = weights.iter().map(|w| 0.5 * w * len).collect();
        Self { points, weights, degree: 2 * n - 1 }
    }

    /// Collapsed-coordinate Gauss rule on a triangle, exact to `degree`.
    pub fn triangle(a: Point, b: Point, c: Point, degree: usize) -> Self {
        let mut rule = Self { points: Vec::new(), weights: Vec::new(), degree };
        rule.push_triangle(a, b, c);
        rule
    }

    fn push_triangle(&mut self, a: Point, b: Point, c: Point) {
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        // the Jacobian of the collapse adds one degree in the first direction
        let nu = (self.degree + 2).div_ceil(2);
        let nv = (self.degree + 1).div_ceil(2).max(1);
        let (su, wu) = gauss_legendre(nu);
        let (sv, wv) = gauss_legendre(nv);
        for (i, &s) in su.iter().enumerate() {
            let u = 0.5 * (s + 1.0);
            for (j, &t) in sv.iter().enumerate() {
                let v = 0.5 * (t + 1.0) * (1.0 - u);
                let w = 0.25 * wu[i] * wv[j] * (1.0 - u) * area2;
                self.points.push([
                    a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]),
                    a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]),
                ]);
                self.weights.push(w);
            }
        }
    }

    /// Fan triangulation of a polygon from `center`, which must see every
    /// edge (a point of the polygon's kernel). Exact to `degree`.
    pub fn polygon(vertices: &[Point], center: Point, degree: usize) -> Self {
        let mut rule = Self { points: Vec::new(), weights: Vec::new(), degree };
        if vertices.len() == 3 {
            rule.push_triangle(vertices[0], vertices[1], vertices[2]);
            return rule;
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let area2 = (a[0] - center[0]) * (b[1] - center[1]) - (a[1] - center[1]) * (b[0] - center[0]);
            // the kernel point can sit on the line of a reflex-adjacent edge
            if area2 <= 1e-14 * (a[0] - b[0]).hypot(a[1] - b[1]).powi(2) {
                continue;
            }
            rule.push_triangle(center, a, b);
        }
        rule
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!(w.iter().all(|&w| w > 0.0));
            for p in 0..(2 * n) {
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn lobatto_points_are_symmetric_roots() {
        assert!(lobatto_interior(1).is_empty());
        assert_eq!(lobatto_interior(2), vec![0.5]);
        let p3 = lobatto_interior(3);
        let expected = 0.5 * (1.0 - 1.0 / 5f64.sqrt());
        assert!((p3[0] - expected).abs() < 1e-15);
        assert!((p3[1] - (1.0 - expected)).abs() < 1e-15);
        for k in 2..8 {
            let pts = lobatto_interior(k);
            assert_eq!(pts.len(), k - 1);
            for (a, b) in pts.iter().zip(pts.iter().rev()) {
                assert!((a + b - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_square_integrals() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let rule = QuadratureRule::polygon(&sq, [0.5, 0.5], 6);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let one = rule.integrate(|_| 1.0);
        assert!((one - 1.0).abs() < 1e-15, "{:e}", one - 1.0);
        let v = rule.integrate(|p| p[0] * p[0] * p[1] * p[1]);
        assert!((v - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn edge_cubic() {
        let rule = QuadratureRule::segment([0.0, 0.0], [1.0, 0.0], 4);
        assert!((rule.integrate(|p| p[0].powi(3)) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn triangle_monomials() {
        // ∫_T x^a y^b over the reference triangle = a! b! / (a + b + 2)!
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        for degree in 0..12 {
            let rule = QuadratureRule::triangle([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], degree);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let q = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    assert!((q - exact).abs() < 1e-15, "degree {degree}: {a},{b}");
                }
            }
        }
    }
}
