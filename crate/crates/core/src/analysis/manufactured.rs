use std::sync::Arc;

use crate::assembly::{MeanConstraint, Problem};
use crate::dataexpr::{Expr, Var};
use crate::element::{Permeability, Tensor};
use crate::mesh::{Predicate, TagRule};
use crate::nitsche::{BoundarySpec, Condition, NitscheParams, VectorFn};
use crate::{Point, Result};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> Tensor + Send + Sync>;

/// Smooth exact velocity and pressure with the derivatives the error norms
/// and the data need.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorFn,
    /// `g[i][j] = ∂u_i/∂x_j`.
    pub gradient: TensorFn,
    /// `div ε(u)`.
    pub strain_divergence: VectorFn,
    pub pressure: ScalarField,
    pub pressure_gradient: VectorFn,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    /// `u = (∂φ/∂y, -∂φ/∂x)` with `φ = -256 x²(x-1)² y(y-1)(2y-1)` and
    /// `p = sin(x - y)`.
    pub fn stream_function() -> Self {
        // φ = -256 A(x) B(y)
        let a = |x: f64| x * x * (x - 1.0) * (x - 1.0);
        let a1 = |x: f64| 4.0 * x * x * x - 6.0 * x * x + 2.0 * x;
        let a2 = |x: f64| 12.0 * x * x - 12.0 * x + 2.0;
        let a3 = |x: f64| 24.0 * x - 12.0;
        let b = |y: f64| y * (y - 1.0) * (2.0 * y - 1.0);
        let b1 = |y: f64| 6.0 * y * y - 6.0 * y + 1.0;
        let b2 = |y: f64| 12.0 * y - 6.0;
        let b3 = 12.0;
        Self {
            velocity: Arc::new(move |p: Point| {
                let (x, y) = (p[0], p[1]);
                [-256.0 * a(x) * b1(y), 256.0 * a1(x) * b(y)]
            }),
            gradient: Arc::new(move |p: Point| {
                let (x, y) = (p[0], p[1]);
                [
                    [-256.0 * a1(x) * b1(y), -256.0 * a(x) * b2(y)],
                    [256.0 * a2(x) * b(y), 256.0 * a1(x) * b1(y)],
                ]
            }),
            // div u = 0, so div ε(u) = Δu / 2
            strain_divergence: Arc::new(move |p: Point| {
                let (x, y) = (p[0], p[1]);
                [
                    -128.0 * (a2(x) * b1(y) + a(x) * b3),
                    128.0 * (a3(x) * b(y) + a1(x) * b2(y)),
                ]
            }),
            pressure: Arc::new(|p: Point| (p[0] - p[1]).sin()),
            pressure_gradient: Arc::new(|p: Point| {
                let c = (p[0] - p[1]).cos();
                [c, -c]
            }),
        }
    }

    /// Exact solution given by expressions, differentiated symbolically.
    pub fn from_expressions(u1: &Expr, u2: &Expr, p: &Expr) -> Self {
        let d = |e: &Expr, v: Var| e.differentiate(v);
        let field = |e: Expr| move |q: Point| e.eval(q[0], q[1]).unwrap_or(f64::NAN);
        let (u1x, u1y, u2x, u2y) = (d(u1, Var::X), d(u1, Var::Y), d(u2, Var::X), d(u2, Var::Y));
        let (f1, f2) = (field(u1.clone()), field(u2.clone()));
        let (g11, g12, g21, g22) = (field(u1x.clone()), field(u1y.clone()), field(u2x.clone()), field(u2y.clone()));
        let u1xx = field(d(&u1x, Var::X));
        let u1yy = field(d(&u1y, Var::Y));
        let u1xy = field(d(&u1x, Var::Y));
        let u2xx = field(d(&u2x, Var::X));
        let u2yy = field(d(&u2y, Var::Y));
        let u2xy = field(d(&u2x, Var::Y));
        let pf = field(p.clone());
        let (px, py) = (field(d(p, Var::X)), field(d(p, Var::Y)));
        Self {
            velocity: Arc::new(move |q| [f1(q), f2(q)]),
            gradient: Arc::new(move |q| [[g11(q), g12(q)], [g21(q), g22(q)]]),
            strain_divergence: Arc::new(move |q| {
                [u1xx(q) + 0.5 * (u1yy(q) + u2xy(q)), 0.5 * (u2xx(q) + u1xy(q)) + u2yy(q)]
            }),
            pressure: Arc::new(pf),
            pressure_gradient: Arc::new(move |q| [px(q), py(q)]),
        }
    }

    pub fn divergence(&self, p: Point) -> f64 {
        let g = (self.gradient)(p);
        g[0][0] + g[1][1]
    }

    pub fn strain(&self, p: Point) -> Tensor {
        let g = (self.gradient)(p);
        let off = 0.5 * (g[0][1] + g[1][0]);
        [[g[0][0], off], [off, g[1][1]]]
    }
}

/// How one side of the domain is closed in a manufactured problem.
#[derive(Debug, Clone, PartialEq)]
pub enum SideCondition {
    Dirichlet,
    /// Slip with the outward unit normal of the side.
    Slip { normal: Point },
}

/// An exact solution together with the physical parameters it is posed for.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub exact: ExactSolution,
    pub nu: f64,
    pub permeability: Permeability,
    /// Boundary predicates, first match wins.
    pub sides: Vec<(String, Predicate, SideCondition)>,
}

impl ManufacturedCase {
    /// Stream-function flow on the unit square, Dirichlet on `x = 0, 1` and
    /// slip on `y = 0, 1`, `K = I`.
    pub fn unit_square(nu: f64) -> Self {
        Self::with_unit_square_sides(ExactSolution::stream_function(), nu)
    }

    pub fn with_unit_square_sides(exact: ExactSolution, nu: f64) -> Self {
        let side = |s: &str| s.parse::<Predicate>().expect("builtin predicate");
        Self {
            exact,
            nu,
            permeability: Permeability::default(),
            sides: vec![
                ("bottom".into(), side("y = 0"), SideCondition::Slip { normal: [0.0, -1.0] }),
                ("top".into(), side("y = 1"), SideCondition::Slip { normal: [0.0, 1.0] }),
                ("left".into(), side("x = 0"), SideCondition::Dirichlet),
                ("right".into(), side("x = 1"), SideCondition::Dirichlet),
            ],
        }
    }

    /// `f = K⁻¹u - ν div ε(u) + ∇p`.
    pub fn source(&self) -> Result<VectorFn> {
        self.permeability.validate()?;
        let exact = self.exact.clone();
        let perm = self.permeability.clone();
        let nu = self.nu;
        Ok(Arc::new(move |x: Point| {
            let u = (exact.velocity)(x);
            let d = (exact.strain_divergence)(x);
            let g = (exact.pressure_gradient)(x);
            let kinv = perm.inverse_at(x).unwrap_or([[f64::NAN; 2]; 2]);
            [
                kinv[0][0] * u[0] + kinv[0][1] * u[1] - nu * d[0] + g[0],
                kinv[1][0] * u[0] + kinv[1][1] * u[1] - nu * d[1] + g[1],
            ]
        }))
    }

    pub fn tag_rules(&self) -> Vec<TagRule> {
        self.sides.iter().map(|(tag, pred, _)| TagRule::new(*pred, tag.clone())).collect()
    }

    /// Dirichlet data `g = u`; slip data `g1 = u` and `g2 = ν ε(u) n`.
    pub fn boundary(&self) -> BoundarySpec {
        let mut spec = BoundarySpec::new();
        for (tag, _, cond) in &self.sides {
            let condition = match cond {
                SideCondition::Dirichlet => Condition::Dirichlet { g: self.exact.velocity.clone() },
                SideCondition::Slip { normal } => {
                    let exact = self.exact.clone();
                    let (n, nu) = (*normal, self.nu);
                    let traction: VectorFn = Arc::new(move |x: Point| {
                        let e = exact.strain(x);
                        [nu * (e[0][0] * n[0] + e[0][1] * n[1]), nu * (e[1][0] * n[0] + e[1][1] * n[1])]
                    });
                    Condition::Slip { g1: self.exact.velocity.clone(), g2: traction }
                }
            };
            spec.insert(tag.clone(), condition);
        }
        spec
    }

    pub fn problem(&self, k: usize) -> Result<Problem> {
        let mut problem = Problem::new(k, self.nu, self.boundary());
        problem.permeability = self.permeability.clone();
        problem.source = Some(self.source()?);
        problem.nitsche = NitscheParams::default_for(k);
        problem.mean_constraint = MeanConstraint::Auto;
        Ok(problem)
    }
}
