//! Edge terms imposing Dirichlet and slip conditions weakly.
//!
//! For a boundary edge `e` of cell `K_e` with outward normal `n`, tangent
//! `t = (-n₂, n₁)` and length `h_e`:
//!
//! | condition | penalty | consistency | pressure |
//! |---|---|---|---|
//! | Dirichlet | `γ_D h_e⁻¹ ∮ u·v` | `-∮ (ν ε(Π^ε u) n)·v` | `∮ q n·v` |
//! | slip | `γ_N h_e⁻¹ ∮ (u·n)(v·n)` | `-∮ (nᵀ ν ε(Π^ε u) n)(v·n)` | `∮ q v·n` |
//!
//! The consistency term enters the velocity block together with its
//! transpose.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::element::ElementKernel;
use crate::mesh::PolygonalMesh;
use crate::polyspace::dim;
use crate::{Error, Point, Result};

/// Shareable vector field.
pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

pub fn constant_field(v: Point) -> VectorFn {
    Arc::new(move |_| v)
}

#[derive(Clone)]
pub enum Condition {
    Dirichlet { g: VectorFn },
    /// `u·n = g1·n` and `(ν ε(u) n)·t = g2·t`.
    Slip { g1: VectorFn, g2: VectorFn },
    FreeOutflow,
}

impl Condition {
    pub fn no_slip() -> Self {
        Condition::Dirichlet { g: constant_field([0.0, 0.0]) }
    }

    pub fn free_slip() -> Self {
        Condition::Slip { g1: constant_field([0.0, 0.0]), g2: constant_field([0.0, 0.0]) }
    }

    pub fn kind(&self) -> EdgeKind {
        match self {
            Condition::Dirichlet { .. } => EdgeKind::Dirichlet,
            Condition::Slip { .. } => EdgeKind::Slip,
            Condition::FreeOutflow => EdgeKind::FreeOutflow,
        }
    }
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Dirichlet,
    Slip,
    FreeOutflow,
}

/// Boundary condition per tag.
#[derive(Debug, Clone, Default)]
pub struct BoundarySpec {
    conditions: BTreeMap<String, Condition>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: impl Into<String>, condition: Condition) -> Self {
        self.insert(tag, condition);
        self
    }

    pub fn insert(&mut self, tag: impl Into<String>, condition: Condition) {
        self.conditions.insert(tag.into(), condition);
    }

    pub fn get(&self, tag: &str) -> Option<&Condition> {
        self.conditions.get(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.conditions.keys().map(String::as_str)
    }

    /// Condition of every boundary edge of `mesh`, in boundary order.
    pub fn resolve<'a>(&'a self, mesh: &PolygonalMesh) -> Result<Vec<&'a Condition>> {
        mesh.boundary_edges()
            .iter()
            .map(|b| self.get(&b.tag).ok_or_else(|| Error::UnresolvedTag(b.tag.clone())))
            .collect()
    }

    pub fn has_free_outflow(&self, mesh: &PolygonalMesh) -> bool {
        mesh.boundary_edges()
            .iter()
            .any(|b| matches!(self.get(&b.tag), Some(Condition::FreeOutflow)))
    }
}

/// Nitsche penalties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheParams {
    pub gamma_d: f64,
    pub gamma_n: f64,
}

impl NitscheParams {
    /// `γ_D = γ_N = 100 (k + 1)²`.
    pub fn default_for(k: usize) -> Self {
        let g = 100.0 * ((k + 1) * (k + 1)) as f64;
        Self { gamma_d: g, gamma_n: g }
    }

    pub fn uniform(gamma: f64) -> Self {
        Self { gamma_d: gamma, gamma_n: gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_d > 0.0 && self.gamma_n > 0.0 && self.gamma_d.is_finite() && self.gamma_n.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("Nitsche penalties must be positive, got {self:?}")))
        }
    }
}

/// Local edge matrices over the cell's velocity and pressure DOFs.
#[derive(Debug, Clone)]
pub struct EdgeMatrices {
    /// Penalty term, `(i, j) = N^S(φ_j, φ_i)`.
    pub penalty: DMatrix<f64>,
    /// Consistency term, `(i, j) = N^B(φ_j, φ_i)`.
    pub consistency: DMatrix<f64>,
    /// Pressure term, `(j, i) = N^b(φ_i, m_j)`.
    pub pressure: DMatrix<f64>,
}

impl EdgeMatrices {
    /// Contribution to the velocity block: penalty plus both consistency
    /// insertions.
    pub fn velocity(&self) -> DMatrix<f64> {
        &self.penalty + &self.consistency + self.consistency.transpose()
    }
}

/// Per quadrature point data shared by the matrices and the loads.
struct EdgePoint {
    x: Point,
    weight: f64,
    /// `(dof, value, component)` of each trace basis function.
    trace: Vec<(usize, f64, usize)>,
    /// `ν ε(Π^ε φ_i) n` for every DOF.
    traction: Vec<Point>,
    pressure: Vec<f64>,
}

fn edge_points(kernel: &ElementKernel, local: usize, nu: f64) -> (Point, f64, Vec<EdgePoint>) {
    let e = &kernel.edges[local];
    let n = e.normal;
    let npres = dim(kernel.k - 1);
    let points = (0..e.rule.len())
        .map(|q| {
            let x = e.rule.points[q];
            let trace = e
                .nodes
                .iter()
                .enumerate()
                .flat_map(|(m, node)| {
                    let w = e.lagrange[q][m];
                    [(node[0], w, 0), (node[1], w, 1)]
                })
                .collect();
            let traction = kernel
                .projected_strains(x)
                .into_iter()
                .map(|s| [nu * (s[0][0] * n[0] + s[0][1] * n[1]), nu * (s[1][0] * n[0] + s[1][1] * n[1])])
                .collect();
            let pressure = kernel.basis.eval(x)[..npres].to_vec();
            EdgePoint { x, weight: e.rule.weights[q], trace, traction, pressure }
        })
        .collect();
    (n, e.length, points)
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Edge matrices of local edge `local` of the kernel's cell. Free outflow
/// edges give zero matrices.
pub fn edge_matrices(kernel: &ElementKernel, local: usize, kind: EdgeKind, nu: f64, params: &NitscheParams) -> EdgeMatrices {
    let nd = kernel.ndofs();
    let npres = dim(kernel.k - 1);
    let mut penalty = DMatrix::zeros(nd, nd);
    let mut consistency = DMatrix::zeros(nd, nd);
    let mut pressure = DMatrix::zeros(npres, nd);
    if kind == EdgeKind::FreeOutflow {
        return EdgeMatrices { penalty, consistency, pressure };
    }
    let (n, he, points) = edge_points(kernel, local, nu);
    for p in &points {
        let w = p.weight;
        match kind {
            EdgeKind::Dirichlet => {
                let s = params.gamma_d / he * w;
                for &(i, vi, ci) in &p.trace {
                    for &(j, vj, cj) in &p.trace {
                        if ci == cj {
                            penalty[(i, j)] += s * vi * vj;
                        }
                    }
                    for (j, t) in p.traction.iter().enumerate() {
                        consistency[(i, j)] -= w * t[ci] * vi;
                    }
                    for (l, &m) in p.pressure.iter().enumerate() {
                        pressure[(l, i)] += w * m * n[ci] * vi;
                    }
                }
            }
            EdgeKind::Slip => {
                let s = params.gamma_n / he * w;
                for &(i, vi, ci) in &p.trace {
                    let vin = vi * n[ci];
                    for &(j, vj, cj) in &p.trace {
                        penalty[(i, j)] += s * vin * vj * n[cj];
                    }
                    for (j, t) in p.traction.iter().enumerate() {
                        consistency[(i, j)] -= w * dot(*t, n) * vin;
                    }
                    for (l, &m) in p.pressure.iter().enumerate() {
                        pressure[(l, i)] += w * m * vin;
                    }
                }
            }
            EdgeKind::FreeOutflow => unreachable!(),
        }
    }
    EdgeMatrices { penalty, consistency, pressure }
}

/// Velocity and pressure loads of one boundary edge.
pub fn edge_rhs(
    kernel: &ElementKernel,
    local: usize,
    condition: &Condition,
    nu: f64,
    params: &NitscheParams,
) -> (DVector<f64>, DVector<f64>) {
    let nd = kernel.ndofs();
    let npres = dim(kernel.k - 1);
    let mut f = DVector::zeros(nd);
    let mut g = DVector::zeros(npres);
    if matches!(condition, Condition::FreeOutflow) {
        return (f, g);
    }
    let (n, he, points) = edge_points(kernel, local, nu);
    let t = [-n[1], n[0]];
    for p in &points {
        let w = p.weight;
        match condition {
            Condition::Dirichlet { g: data } => {
                let gv = data(p.x);
                let s = params.gamma_d / he * w;
                for &(i, vi, ci) in &p.trace {
                    f[i] += s * gv[ci] * vi;
                }
                for (i, tr) in p.traction.iter().enumerate() {
                    f[i] -= w * dot(gv, *tr);
                }
                let gn = dot(gv, n);
                for (l, &m) in p.pressure.iter().enumerate() {
                    g[l] += w * m * gn;
                }
            }
            Condition::Slip { g1, g2 } => {
                let gn = dot(g1(p.x), n);
                let gt = dot(g2(p.x), t);
                let s = params.gamma_n / he * w;
                for &(i, vi, ci) in &p.trace {
                    f[i] += (s * gn * n[ci] + w * gt * t[ci]) * vi;
                }
                for (i, tr) in p.traction.iter().enumerate() {
                    f[i] -= w * dot(*tr, n) * gn;
                }
                for (l, &m) in p.pressure.iter().enumerate() {
                    g[l] += w * m * gn;
                }
            }
            Condition::FreeOutflow => unreachable!(),
        }
    }
    (f, g)
}

/// `h_e⁻¹ ‖v‖²_{0,e}` for the trace of the local DOF vector `v`, or of its
/// normal component when `normal_only`.
pub fn edge_seminorm(kernel: &ElementKernel, local: usize, v: &[f64], normal_only: bool) -> f64 {
    let e = &kernel.edges[local];
    let mut s = 0.0;
    for q in 0..e.rule.len() {
        let tr = e.trace(q, v);
        let val = if normal_only { dot(tr, e.normal).powi(2) } else { dot(tr, tr) };
        s += e.rule.weights[q] * val;
    }
    s / e.length
}

/// Checks that `(cell, local)` lies on the boundary and returns the boundary
/// edge index.
pub fn boundary_index(mesh: &PolygonalMesh, cell: usize, local: usize) -> Result<usize> {
    let edge = mesh.cell_edges(cell)[local];
    let info = &mesh.edges()[edge];
    info.boundary.ok_or(Error::NotBoundaryEdge(info.vertices[0], info.vertices[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ReferenceData;
    use crate::mesh::{generate, Domain, Family};

    fn square(k: usize) -> (PolygonalMesh, ElementKernel) {
        let mesh = PolygonalMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![vec![0, 1, 2, 3]]).unwrap();
        let kernel = ElementKernel::new(&mesh, 0, &ReferenceData::new(k).unwrap()).unwrap();
        (mesh, kernel)
    }

    fn dofs_of(kernel: &ElementKernel, u: impl Fn(Point) -> Point, div: impl Fn(Point) -> f64) -> DVector<f64> {
        kernel.interpolate(&u, &div)
    }

    #[test]
    fn constant_penalty_and_pressure_normal() {
        let (_, kernel) = square(2);
        let params = NitscheParams::default_for(2);
        let m = edge_matrices(&kernel, 0, EdgeKind::Dirichlet, 1.0, &params);
        let one = dofs_of(&kernel, |_| [1.0, 0.0], |_| 0.0);
        assert!((one.dot(&(&m.penalty * &one)) - params.gamma_d).abs() < 1e-10);
        assert!((&m.consistency * &one).amax() < 1e-12);
        // bottom edge: n = (0, -1)
        let n = dofs_of(&kernel, |_| [0.0, -1.0], |_| 0.0);
        let nb = &m.pressure * &n;
        assert!((nb[0] - 1.0).abs() < 1e-12);
        let slip = edge_matrices(&kernel, 0, EdgeKind::Slip, 1.0, &params);
        assert!((n.dot(&(&slip.penalty * &n)) - params.gamma_n).abs() < 1e-9);
    }

    #[test]
    fn tangential_fields_are_invisible_to_slip_terms() {
        let (_, kernel) = square(3);
        let params = NitscheParams::default_for(3);
        let m = edge_matrices(&kernel, 0, EdgeKind::Slip, 0.5, &params);
        // v·n = -v₂ = 0 on y = 0
        let v = dofs_of(&kernel, |x| [x[0] * x[1] + 1.0, x[1] * (1.0 - x[0])], |x| x[1] + 1.0 - x[0]);
        assert!((&m.penalty * &v).amax() < 1e-12);
        assert!((m.consistency.transpose() * &v).amax() < 1e-12);
        assert!((&m.pressure * &v).amax() < 1e-12);
    }

    #[test]
    fn penalty_scales_with_inverse_edge_length() {
        let params = NitscheParams::uniform(10.0);
        let reference = ReferenceData::new(2).unwrap();
        let diag = |n: usize| {
            let mesh = generate(Family::Quad, n, 0, &Domain::unit_square()).unwrap();
            let kernel = ElementKernel::new(&mesh, 0, &reference).unwrap();
            let m = edge_matrices(&kernel, 0, EdgeKind::Dirichlet, 1.0, &params);
            m.penalty[(0, 0)]
        };
        let (coarse, fine) = (diag(4), diag(16));
        assert!((coarse / fine - 1.0).abs() < 1e-12, "{coarse} {fine}");
    }

    #[test]
    fn zero_data_gives_zero_loads() {
        let (_, kernel) = square(2);
        let params = NitscheParams::default_for(2);
        for c in [Condition::no_slip(), Condition::free_slip(), Condition::FreeOutflow] {
            let (f, g) = edge_rhs(&kernel, 1, &c, 1.0, &params);
            assert_eq!(f.amax(), 0.0);
            assert_eq!(g.amax(), 0.0);
        }
    }

    #[test]
    fn load_matches_matrix_action_for_polynomial_data() {
        let (_, kernel) = square(2);
        let params = NitscheParams::default_for(2);
        let u = |x: Point| [x[1] * x[1], x[0]];
        let du = |_: Point| 0.0;
        let ui = dofs_of(&kernel, u, du);
        for local in 0..4 {
            let m = edge_matrices(&kernel, local, EdgeKind::Dirichlet, 0.3, &params);
            let (f, g) = edge_rhs(&kernel, local, &Condition::Dirichlet { g: Arc::new(u) }, 0.3, &params);
            let lhs = &m.penalty * &ui + m.consistency.transpose() * &ui;
            assert!((lhs - f).amax() < 1e-10);
            assert!((&m.pressure * &ui - g).amax() < 1e-12);
            let ms = edge_matrices(&kernel, local, EdgeKind::Slip, 0.3, &params);
            let cond = Condition::Slip { g1: Arc::new(u), g2: Arc::new(|_| [0.0, 0.0]) };
            let (fs, gs) = edge_rhs(&kernel, local, &cond, 0.3, &params);
            let lhs = &ms.penalty * &ui + ms.consistency.transpose() * &ui;
            assert!((lhs - fs).amax() < 1e-10);
            assert!((&ms.pressure * &ui - gs).amax() < 1e-12);
        }
    }

    #[test]
    fn slip_residual_vanishes_for_compatible_polynomial() {
        // u = (y², 0) on y = 0: u·n = 0 and ε(u)n·t = -∂_y u₁ / 2 = -y = 0
        let (_, kernel) = square(2);
        let params = NitscheParams::default_for(2);
        let ui = dofs_of(&kernel, |x| [x[1] * x[1], 0.0], |_| 0.0);
        let m = edge_matrices(&kernel, 0, EdgeKind::Slip, 1.0, &params);
        let (f, g) = edge_rhs(&kernel, 0, &Condition::free_slip(), 1.0, &params);
        // the natural tangential traction term vanishes, so the full residual does
        let r = m.velocity() * &ui - f;
        assert!(r.amax() < 1e-10 * (1.0 + params.gamma_n), "{}", r.amax());
        assert!((&m.pressure * &ui - g).amax() < 1e-12);
    }

    #[test]
    fn boundary_norms_are_exact_for_polynomial_traces() {
        let (_, kernel) = square(2);
        let v = dofs_of(&kernel, |x| [x[0] * x[0], 1.0], |x| 2.0 * x[0]);
        // bottom edge: ∫_0^1 x⁴ + 1 dx = 6/5, normal part ∫ 1 = 1
        assert!((edge_seminorm(&kernel, 0, v.as_slice(), false) - 1.2).abs() < 1e-13);
        assert!((edge_seminorm(&kernel, 0, v.as_slice(), true) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn interior_edge_is_rejected() {
        let mesh = generate(Family::Quad, 4, 0, &Domain::unit_square()).unwrap();
        let err = (0..4).find_map(|l| boundary_index(&mesh, 0, l).err()).unwrap();
        assert!(matches!(err, Error::NotBoundaryEdge(..)));
        assert!(boundary_index(&mesh, 0, 0).is_ok());
    }

    #[test]
    fn unresolved_tag_is_named() {
        let mesh = generate(Family::Quad, 4, 0, &Domain::unit_square()).unwrap();
        let spec = BoundarySpec::new().with("wall", Condition::no_slip());
        assert!(matches!(spec.resolve(&mesh), Err(Error::UnresolvedTag(t)) if t == "boundary"));
        assert!(NitscheParams::uniform(0.0).validate().is_err());
    }
}
