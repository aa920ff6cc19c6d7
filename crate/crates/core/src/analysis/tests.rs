use proptest::prelude::*;

use super::*;
use crate::assembly::{interpolate_velocity, project_pressure, DofMap, Problem};
use crate::dataexpr::parse;
use crate::nitsche::{BoundarySpec, Condition};

fn record(h: f64, e: f64) -> ConvergenceRecord {
    ConvergenceRecord { n_cells: 0, h, e_u: e, r_u: None, e_p: e, r_p: None, div_norm: 0.0, e_u_volume: e, e_u_boundary: 0.0 }
}

#[test]
fn rate_of_simple_sequences() {
    let halves = rates(&[record(0.2, 1.0), record(0.1, 0.5)]).unwrap();
    assert!((halves[1].r_u.unwrap() - 1.0).abs() < 1e-14);
    assert!(halves[0].r_u.is_none());
    let quarters = rates(&[record(0.2, 1.0), record(0.1, 0.25)]).unwrap();
    assert!((quarters[1].r_p.unwrap() - 2.0).abs() < 1e-14);
}

#[test]
fn rates_of_known_triangle_history() {
    let e = [1.94, 6.16e-1, 1.79e-1, 4.76e-2, 1.22e-2];
    // tabulated h are rounded; the rates use exact halving
    let rows: Vec<_> = e.iter().enumerate().map(|(i, &e)| record(0.177 / 2f64.powi(i as i32), e)).collect();
    let out = rates(&rows).unwrap();
    for (row, expect) in out[1..].iter().zip([1.66, 1.78, 1.91, 1.97]) {
        assert!((row.r_u.unwrap() - expect).abs() < 0.01, "{} vs {expect}", row.r_u.unwrap());
    }
}

#[test]
fn rates_reject_bad_input() {
    assert!(rates(&[record(0.1, 1.0)]).is_err());
    assert!(rates(&[record(0.1, 1.0), record(0.2, 0.5)]).is_err());
    assert!(rates(&[record(0.1, 1.0), record(0.1, 0.5)]).is_err());
}

proptest! {
    #[test]
    fn rates_are_scale_invariant(
        errors in proptest::collection::vec(1e-6f64..10.0, 3..6),
        scale in 1e-3f64..1e3,
    ) {
        let rows: Vec<_> = errors.iter().enumerate().map(|(i, &e)| record(0.5f64.powi(i as i32), e)).collect();
        let scaled: Vec<_> = rows.iter().map(|r| record(r.h, r.e_u * scale)).collect();
        let (a, b) = (rates(&rows).unwrap(), rates(&scaled).unwrap());
        for (x, y) in a.iter().zip(&b).skip(1) {
            prop_assert!((x.r_u.unwrap() - y.r_u.unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn stream_function_matches_symbolic_derivatives() {
    let phi = parse("-256*x^2*(x-1)^2*y*(y-1)*(2*y-1)").unwrap();
    let u1 = phi.differentiate(crate::dataexpr::Var::Y);
    let u2 = crate::dataexpr::Expr::Neg(Box::new(phi.differentiate(crate::dataexpr::Var::X)));
    let symbolic = ExactSolution::from_expressions(&u1, &u2, &parse("sin(x-y)").unwrap());
    let hand = ExactSolution::stream_function();
    for i in 0..7 {
        for j in 0..7 {
            let x = [0.05 + 0.15 * i as f64, 0.1 + 0.13 * j as f64];
            assert!(hand.divergence(x).abs() < 1e-12);
            let pairs = [
                ((hand.velocity)(x), (symbolic.velocity)(x)),
                ((hand.strain_divergence)(x), (symbolic.strain_divergence)(x)),
                ((hand.pressure_gradient)(x), (symbolic.pressure_gradient)(x)),
            ];
            for (a, b) in pairs {
                assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() < 1e-10, "{a:?} {b:?}");
            }
            let (g, s) = ((hand.gradient)(x), (symbolic.gradient)(x));
            for r in 0..2 {
                for c in 0..2 {
                    assert!((g[r][c] - s[r][c]).abs() < 1e-10);
                }
            }
            assert_eq!((hand.pressure)(x), (symbolic.pressure)(x));
        }
    }
}

#[test]
fn stream_function_pressure_has_zero_mean() {
    let mesh = generate(Family::Quad, 64, 0, &Domain::unit_square()).unwrap();
    let reference = ReferenceData::new(2).unwrap();
    let exact = ExactSolution::stream_function();
    let mut mean = 0.0;
    for cell in 0..mesh.num_cells() {
        let rule = ElementKernel::new(&mesh, cell, &reference).unwrap().cell_rule(12);
        mean += rule.points.iter().zip(&rule.weights).map(|(&x, &w)| w * (exact.pressure)(x)).sum::<f64>();
    }
    assert!(mean.abs() < 1e-14);
}

fn zero_solution(mesh: &PolygonalMesh, k: usize) -> DiscreteSolution {
    let dofs = DofMap::new(mesh, k).unwrap();
    DiscreteSolution {
        velocity: vec![0.0; dofs.n_velocity],
        pressure: vec![0.0; dofs.n_pressure],
        dofs,
        multiplier: 0.0,
        residual: 0.0,
    }
}

#[test]
fn norms_of_zero_discrete_solution() {
    let mesh = generate(Family::Voronoi, 16, 1, &Domain::unit_square()).unwrap();
    let outflow = Problem::new(2, 1.0, BoundarySpec::new().with("boundary", Condition::FreeOutflow));
    let exact = ExactSolution::from_expressions(&parse("1").unwrap(), &parse("0").unwrap(), &parse("sin(x-y)").unwrap());
    let report = compute_errors(&mesh, &outflow, &zero_solution(&mesh, 2), &exact).unwrap();
    assert!((report.velocity() - 1.0).abs() < 1e-12, "{report:?}");
    assert_eq!(report.velocity_boundary, 0.0);
    let expect = ((1.0 + 2f64.cos()) / 4.0).sqrt();
    assert!((report.pressure - expect).abs() < 1e-9, "{} {expect}", report.pressure);
    assert!((l2_norm(&mesh, 12, &|x| (x[0] - x[1]).sin()).unwrap() - expect).abs() < 1e-9);
}

fn interpolant(mesh: &PolygonalMesh, k: usize, exact: &ExactSolution) -> DiscreteSolution {
    let dofs = DofMap::new(mesh, k).unwrap();
    let reference = ReferenceData::new(k).unwrap();
    let u = exact.velocity.clone();
    let velocity = interpolate_velocity(mesh, &dofs, &reference, &move |x| u(x), &|x| exact.divergence(x)).unwrap();
    let p = exact.pressure.clone();
    let pressure = project_pressure(mesh, &dofs, &reference, &move |x| p(x)).unwrap();
    DiscreteSolution { dofs, velocity, pressure, multiplier: 0.0, residual: 0.0 }
}

#[test]
fn polynomial_interpolant_has_no_error() {
    let exact = ExactSolution::from_expressions(&parse("y").unwrap(), &parse("x").unwrap(), &parse("x - 1/2").unwrap());
    let case = ManufacturedCase::with_unit_square_sides(exact, 1.0);
    for family in [Family::Quad, Family::Voronoi, Family::Nonconvex] {
        let mesh = generate(family, 64, 3, &Domain::unit_square()).unwrap().tag_boundary(&case.tag_rules()).unwrap();
        let problem = case.problem(2).unwrap();
        let report = compute_errors(&mesh, &problem, &interpolant(&mesh, 2, &case.exact), &case.exact).unwrap();
        assert!(report.velocity() < 1e-8 && report.pressure < 1e-12, "{family}: {report:?}");
    }
}

#[test]
fn interpolation_error_decays_at_order_k() {
    let case = ManufacturedCase::unit_square(1.0);
    for k in [2, 3] {
        let errors: Vec<(f64, f64)> = [64, 256, 1024]
            .iter()
            .map(|&n| {
                let mesh = generate(Family::Quad, n, 0, &Domain::unit_square()).unwrap().tag_boundary(&case.tag_rules()).unwrap();
                let problem = case.problem(k).unwrap();
                let report = compute_errors(&mesh, &problem, &interpolant(&mesh, k, &case.exact), &case.exact).unwrap();
                (mesh.h(), report.velocity())
            })
            .collect();
        for w in errors.windows(2) {
            let r = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(r >= k as f64 - 0.1, "k={k}: rate {r}");
        }
    }
}

#[test]
fn errors_are_deterministic() {
    let case = ManufacturedCase::unit_square(1.0);
    let mesh = generate(Family::Voronoi, 64, 2, &Domain::unit_square()).unwrap().tag_boundary(&case.tag_rules()).unwrap();
    let a = solve_case(&mesh, &case, 2, None).unwrap().1;
    let b = solve_case(&mesh, &case, 2, None).unwrap().1;
    assert_eq!(a, b);
}

#[test]
fn manufactured_source_balances_the_equations() {
    let mut case = ManufacturedCase::unit_square(0.3);
    case.permeability = crate::element::Permeability::Matrix([[2.0, 0.5], [0.5, 1.0]]);
    let f = case.source().unwrap();
    let x = [0.3, 0.6];
    let u = (case.exact.velocity)(x);
    let kinv = case.permeability.inverse_at(x).unwrap();
    let d = (case.exact.strain_divergence)(x);
    let g = (case.exact.pressure_gradient)(x);
    let expect0 = kinv[0][0] * u[0] + kinv[0][1] * u[1] - 0.3 * d[0] + g[0];
    assert!((f(x)[0] - expect0).abs() < 1e-12);
    let spec = case.boundary();
    assert_eq!(spec.tags().count(), 4);
}

#[test]
fn nu_sweep_rejects_invalid_viscosity() {
    let case = ManufacturedCase::unit_square(1.0);
    let study = Study::ladder(Family::Quad, 2, 16, 2);
    assert!(nu_sweep(&case, &study, &[1e-3, 0.0]).is_err());
    assert!(nu_sweep(&case, &study, &[2.0]).is_err());
}

#[test]
fn probes_on_small_meshes() {
    let mesh = generate(Family::Quad, 16, 0, &Domain::unit_square()).unwrap();
    let problem = Problem::new(2, 1.0, BoundarySpec::new().with("boundary", Condition::no_slip()));
    let c = coercivity_probe(&mesh, &problem, 20, 1).unwrap();
    assert!(c.full > 0.0 && c.viscous >= 0.25, "{c:?}");
    let beta = inf_sup_constant(&mesh, &problem).unwrap();
    assert!(beta > 0.05 && beta < 10.0, "{beta}");
    // without the constant-pressure deflation the constant is a null vector
    let mut free = problem.clone();
    free.mean_constraint = crate::assembly::MeanConstraint::Never;
    assert!(inf_sup_constant(&mesh, &free).unwrap() < 1e-6);
}
