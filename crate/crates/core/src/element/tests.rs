use super::*;
use crate::mesh::{generate, Domain, Family};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn sample_cells() -> Vec<(PolygonalMesh, usize)> {
    let sq = Domain::unit_square();
    let mut out = Vec::new();
    for (family, n) in [(Family::Quad, 16), (Family::Triangle, 32), (Family::Voronoi, 20), (Family::Nonconvex, 16)] {
        let mesh = generate(family, n, 5, &sq).unwrap();
        for c in [0, 5] {
            out.push((mesh.clone(), c));
        }
    }
    out
}

fn kernels(k: usize) -> Vec<ElementKernel> {
    let reference = ReferenceData::new(k).unwrap();
    sample_cells().iter().map(|(m, c)| ElementKernel::new(m, *c, &reference).unwrap()).collect()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Raw coefficients of `div` applied to a raw `[P_k]²` vector, in `P_{k-1}`.
fn div_coeffs(k: usize, h: f64, coeffs: &DVector<f64>) -> DVector<f64> {
    let nk = dim(k);
    let mut out = DVector::zeros(dim(k - 1));
    for (j, &(a, b)) in exponents(k).iter().enumerate() {
        let (dx, dy) = derivative_terms(a, b, h);
        if let Some((i, c)) = dx {
            out[i] += c * coeffs[j];
        }
        if let Some((i, c)) = dy {
            out[i] += c * coeffs[nk + j];
        }
    }
    out
}

#[test]
fn projectors_reproduce_random_polynomials() {
    for k in [2, 3, 4] {
        let nk = dim(k);
        // mass matrices of degree 4 monomials have condition numbers near 1e6
        let tol = if k < 4 { 1e-10 } else { 1e-9 };
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for kernel in kernels(k) {
            let p = &kernel.projections;
            for _ in 0..100 {
                let coeffs = DVector::from_fn(2 * nk, |_, _| unit(&mut rng));
                let dofs = &kernel.poly_dofs * &coeffs;
                for (name, proj) in [("nabla", &p.nabla), ("eps", &p.eps), ("zero_k", &p.zero_k)] {
                    let err = (proj * &dofs - &coeffs).norm() / coeffs.norm();
                    assert!(err < tol, "k={k} cell {} {name}: {err:e}", kernel.cell);
                }
                let div = div_coeffs(k, kernel.h, &coeffs);
                assert!((&p.div * &dofs - div).amax() < 1e-10);
            }
            // Π^{0,k-1} is exact on [P_{k-1}]²
            let nkm1 = dim(k - 1);
            for _ in 0..20 {
                let low = DVector::from_fn(2 * nk, |r, _| if r % nk < nkm1 { unit(&mut rng) } else { 0.0 });
                let expect = DVector::from_fn(2 * nkm1, |r, _| low[(r / nkm1) * nk + r % nkm1]);
                let err = (&p.zero_km1 * (&kernel.poly_dofs * &low) - expect).amax();
                assert!(err < 1e-10, "zero_km1 {err:e}");
            }
        }
    }
}

#[test]
fn quadrature_interpolation_matches_exact_dofs() {
    let k = 3;
    let nk = dim(k);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kernel in kernels(k) {
        let coeffs = DVector::from_fn(2 * nk, |_, _| unit(&mut rng));
        let div = div_coeffs(k, kernel.h, &coeffs);
        let c = coeffs.as_slice().to_vec();
        let d = div.as_slice().to_vec();
        let u = |x: Point| kernel.eval_vector(&c, x);
        let du = |x: Point| kernel.eval_scalar(&d, x);
        let dofs = kernel.interpolate(&u, &du);
        let exact = &kernel.poly_dofs * &coeffs;
        assert!((dofs - exact).amax() < 1e-11);
    }
}

#[test]
fn constants_and_rotation() {
    let k = 2;
    let nk = dim(k);
    for kernel in kernels(k) {
        let p = &kernel.projections;
        let mut e1 = DVector::zeros(2 * nk);
        e1[0] = 1.0;
        let dofs = &kernel.poly_dofs * &e1;
        assert!((&p.eps * &dofs - &e1).amax() < 1e-12);
        assert!((&p.zero_k * &dofs - &e1).amax() < 1e-12);
        assert!((&p.div * &dofs).amax() < 1e-12);
        // (-(y - y_K), x - x_K) = h (-η, ξ)
        let mut rot = DVector::zeros(2 * nk);
        rot[index(0, 1)] = -kernel.h;
        rot[nk + index(1, 0)] = kernel.h;
        let dofs = &kernel.poly_dofs * &rot;
        assert!((&p.eps * &dofs - &rot).amax() < 1e-12);
        let forms = LocalForms::new(&kernel, 1.0, [[1.0, 0.0], [0.0, 1.0]], None).unwrap();
        assert!((&forms.a * &dofs).amax() < 1e-10);
    }
}

#[test]
fn local_forms_structure() {
    for k in [2, 3] {
        let nk = dim(k);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kernel in kernels(k) {
            let kinv = [[2.0, 0.3], [0.3, 1.0]];
            let forms = LocalForms::new(&kernel, 0.7, kinv, None).unwrap();
            let scale_m = max_abs(&forms.m);
            let scale_a = max_abs(&forms.a);
            assert!(max_abs(&(&forms.m - forms.m.transpose())) <= 1e-12 * scale_m);
            assert!(max_abs(&(&forms.a - forms.a.transpose())) <= 1e-12 * scale_a);
            assert!(forms.m.clone().cholesky().is_some(), "M_h not positive definite");
            let eig = forms.a.clone().symmetric_eigen().eigenvalues;
            let mut ev: Vec<f64> = eig.iter().cloned().collect();
            ev.sort_by(|a, b| a.total_cmp(b));
            assert!(ev[0] > -1e-10 * scale_a);
            assert!(ev[2] < 1e-10 * scale_a && ev[3] > 1e-8 * scale_a, "{:?}", &ev[..4]);
            for _ in 0..20 {
                let coeffs = DVector::from_fn(2 * nk, |_, _| unit(&mut rng));
                let dofs = &kernel.poly_dofs * &coeffs;
                assert!((&forms.seps * &dofs).amax() < 1e-10);
                assert!((&forms.s0 * &dofs).amax() < 1e-10);
            }
        }
    }
}

#[test]
fn coupling_is_exact_on_polynomials() {
    let k = 3;
    let nk = dim(k);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kernel in kernels(k) {
        let forms = LocalForms::new(&kernel, 1.0, [[1.0, 0.0], [0.0, 1.0]], None).unwrap();
        let coeffs = DVector::from_fn(2 * nk, |_, _| unit(&mut rng));
        let div = div_coeffs(k, kernel.h, &coeffs);
        let d = div.as_slice().to_vec();
        let rule = kernel.cell_rule(2 * k);
        let bp = &forms.b * (&kernel.poly_dofs * &coeffs);
        for j in 0..dim(k - 1) {
            let expect = -rule.integrate(|x| kernel.basis.eval(x)[j] * kernel.eval_scalar(&d, x));
            assert!((bp[j] - expect).abs() < 1e-11, "{} vs {expect}", bp[j]);
        }
    }
}

#[test]
fn divergence_theorem_for_random_dofs() {
    for k in [2, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kernel in kernels(k) {
            let v = DVector::from_fn(kernel.ndofs(), |_, _| unit(&mut rng));
            let div = &kernel.projections.div * &v;
            let volume: f64 = (0..div.len()).map(|l| div[l] * kernel.integrals.get(l)).sum();
            let mut flux = 0.0;
            for e in &kernel.edges {
                for q in 0..e.rule.len() {
                    let t = e.trace(q, v.as_slice());
                    flux += e.rule.weights[q] * (t[0] * e.normal[0] + t[1] * e.normal[1]);
                }
            }
            assert!((volume - flux).abs() < 1e-11, "{volume} {flux}");
        }
    }
}

#[test]
fn load_reproduces_mass_action_for_low_degree_data() {
    let k = 2;
    let nk = dim(k);
    let kinv = [[1.0, 0.0], [0.0, 1.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kernel in kernels(k) {
        let u = |x: Point| [x[1], x[0]];
        let forms = LocalForms::new(&kernel, 1.0, kinv, Some(&u)).unwrap();
        let mut coeffs = DVector::zeros(2 * nk);
        coeffs[0] = kernel.centroid[1];
        coeffs[index(0, 1)] = kernel.h;
        coeffs[nk] = kernel.centroid[0];
        coeffs[nk + index(1, 0)] = kernel.h;
        let dofs = &kernel.poly_dofs * &coeffs;
        let v = DVector::from_fn(kernel.ndofs(), |_, _| unit(&mut rng));
        let lhs = (&forms.m * &dofs).dot(&v);
        let rhs = forms.f.dot(&v);
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()), "{lhs} {rhs}");
    }
}

#[test]
fn singular_geometry_is_reported() {
    let reference = ReferenceData::new(2).unwrap();
    let pts = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 1e-300], [1.0, 1e-300]];
    let err = ElementKernel::from_polygon(7, pts, [1.0, 0.0], 1e-300, 2.0, [1.0, 0.0], &reference).unwrap_err();
    assert!(matches!(err, Error::SingularCell { cell: 7, .. }), "{err}");
}

#[test]
fn permeability_inverse() {
    let k = Permeability::Matrix([[2.0, 1.0], [1.0, 2.0]]);
    let inv = k.inverse_at([0.0, 0.0]).unwrap();
    assert!((inv[0][0] - 2.0 / 3.0).abs() < 1e-15 && (inv[0][1] + 1.0 / 3.0).abs() < 1e-15);
    assert!(Permeability::Matrix([[1.0, 2.0], [2.0, 1.0]]).validate().is_err());
    assert!(Permeability::Scalar(-1.0).validate().is_err());
    assert_eq!(Permeability::Scalar(1e8).inverse_at([0.0, 0.0]).unwrap()[1][1], 1e-8);
}
