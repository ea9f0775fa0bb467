mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tanno_core::error::Error;
use tanno_core::extended_operator::{
    assemble_l, eigenstructure_at, lagrange_projector, minimal_polynomial_of, mu_hessian_residual,
    poly_star, product_block_check, projector_from_solution, spectrum, spectrum_relative,
    star_power, star_product, ExtendedMatrix, PointClass, PolynomialReal, DEFAULT_CLUSTER_TOL,
};
use tanno_core::jet::Jet;
use tanno_core::model_manifolds::{
    cpn_height_function, flat_kahler_chart, fubini_study_chart, sample_points,
};
use tanno_core::tanno_system::{bundle_from_f, SolutionBundle, TannoProblem};
use tanno_core::tensor_calculus::{
    ChartPoint, ClosedFormField, KahlerChart, ScalarField, SharedField,
};

fn pt(x: &[f64]) -> ChartPoint {
    ChartPoint::new(x.to_vec()).unwrap()
}

fn cp(n: usize, axis: usize) -> TannoProblem {
    TannoProblem::new(
        fubini_study_chart(n).unwrap(),
        cpn_height_function(n, axis).unwrap().shared(),
        0.25,
    )
    .unwrap()
    .rescaled()
    .unwrap()
}

fn constant(dim: usize, v: f64) -> SharedField {
    ClosedFormField::constant(dim, v).shared()
}

fn polynomial_field(dim: usize, w: [f64; 3]) -> SharedField {
    ClosedFormField::new(dim, "poly", move |x: &[Jet]| {
        let mut f = x[0].constant_like(w[0]);
        f.axpy(w[1], &x[1]);
        f.axpy(w[2], &(&x[0] * &x[dim - 1]));
        f
    })
    .shared()
}

fn value(f: &dyn ScalarField, x: &[f64]) -> f64 {
    f.value_at(&pt(x)).unwrap()
}

/// `−2FH − ½ g^{ab} F_a H_b` from oracle gradients.
fn oracle_star(chart: &KahlerChart, f: &dyn ScalarField, h: &dyn ScalarField, x: &[f64]) -> f64 {
    let ginv = common::metric(chart, x).try_inverse().unwrap();
    let df = DVector::from_vec(common::fd_gradient(&|y: &[f64]| value(f, y), x));
    let dh = DVector::from_vec(common::fd_gradient(&|y: &[f64]| value(h, y), x));
    -2.0 * value(f, x) * value(h, x) - 0.5 * df.dot(&(ginv * dh))
}

#[test]
fn l_matches_oracle_assembly() {
    let prob = cp(2, 1);
    let x = [0.3, 0.1, -0.4, 0.2];
    let f = prob.field.as_ref();
    let chart = &prob.chart;
    let val = value(f, &x);
    let g = common::metric(chart, &x);
    let bundle = SolutionBundle {
        a: -common::covariant_hessian(chart, f, &x) - &g * (2.0 * val),
        grad: DVector::from_vec(common::fd_gradient(&|y: &[f64]| value(f, y), &x)),
        mu: -2.0 * val,
    };
    let j = chart.complex_structure_at(&pt(&x)).unwrap();
    let oracle = ExtendedMatrix::from_bundle(&bundle, &g, &j, pt(&x)).unwrap();
    let exact = assemble_l(&prob, &pt(&x)).unwrap();
    assert_eq!(exact.size(), 6);
    assert!((exact.entries - oracle.entries).amax() < 1e-6);
}

#[test]
fn constant_fields_give_identity_and_zero() {
    let fs = fubini_study_chart(2).unwrap();
    let p = pt(&[0.2, -0.3, 0.1, 0.5]);
    let half = TannoProblem::new(fs.clone(), constant(4, -0.5), 1.0).unwrap();
    let l = assemble_l(&half, &p).unwrap();
    assert!((l.entries - DMatrix::identity(6, 6)).amax() < 1e-15);
    let zero = TannoProblem::new(fs, constant(4, 0.0), 1.0).unwrap();
    assert_eq!(assemble_l(&zero, &p).unwrap().entries, DMatrix::zeros(6, 6));
}

#[test]
fn corner_blocks_vanish_where_mu_is_extremal() {
    // The height is extremal at the origin of the chart.
    let prob = cp(1, 0);
    let l = assemble_l(&prob, &ChartPoint::origin(2)).unwrap();
    for i in 0..2 {
        for k in 2..4 {
            assert!(l.entries[(i, k)].abs() < 1e-14);
            assert!(l.entries[(k, i)].abs() < 1e-14);
        }
    }
    let away = assemble_l(&prob, &pt(&[0.4, 0.0])).unwrap();
    assert!(away.entries[(0, 2)].abs() > 0.1);
}

#[test]
fn star_product_unit_and_constants() {
    let fs = fubini_study_chart(1).unwrap();
    let h = cpn_height_function(1, 0).unwrap().shared();
    let x = [0.3, -0.7];
    let unit = star_product(&fs, constant(2, -0.5), Arc::clone(&h));
    assert!((value(unit.as_ref(), &x) - value(h.as_ref(), &x)).abs() < 1e-15);
    let c = star_product(&fs, constant(2, 3.0), constant(2, 0.5));
    assert_eq!(value(c.as_ref(), &x), -3.0);
}

#[test]
fn star_product_matches_oracle() {
    let fs = fubini_study_chart(2).unwrap();
    let f = cpn_height_function(2, 0).unwrap().shared();
    let h = polynomial_field(4, [0.2, 1.0, -0.5]);
    for x in [[0.1, 0.2, -0.3, 0.4], [0.6, -0.1, 0.0, 0.3]] {
        let exact = star_product(&fs, Arc::clone(&f), Arc::clone(&h));
        let oracle = oracle_star(&fs, f.as_ref(), h.as_ref(), &x);
        assert!((value(exact.as_ref(), &x) - oracle).abs() < 1e-8);
    }
}

#[test]
fn star_powers_are_matrix_powers() {
    let prob = cp(2, 0);
    let p = pt(&[0.1, 0.4, -0.2, 0.3]);
    let l = assemble_l(&prob, &p).unwrap().entries;
    assert!(Arc::ptr_eq(
        &star_power(&prob.chart, Arc::clone(&prob.field), 1),
        &prob.field
    ));
    let zeroth = star_power(&prob.chart, Arc::clone(&prob.field), 0);
    assert_eq!(value(zeroth.as_ref(), p.coords()), -0.5);
    let cube = prob
        .with_field(star_power(&prob.chart, Arc::clone(&prob.field), 3))
        .unwrap();
    assert!((assemble_l(&cube, &p).unwrap().entries - &l * &l * &l).norm() < 1e-9);

    let flat = flat_kahler_chart(1, 1).unwrap();
    let c = star_power(&flat, constant(4, 2.0), 3);
    // 2*2 = −8, 2*(−8) = 32.
    assert_eq!(value(c.as_ref(), &[0.0; 4]), 32.0);
}

#[test]
fn poly_star_of_identity_and_one() {
    let prob = cp(1, 0);
    let x = [0.5, -0.2];
    let t = poly_star(
        &prob.chart,
        Arc::clone(&prob.field),
        &PolynomialReal::new(vec![0.0, 1.0]),
    );
    assert_eq!(value(t.as_ref(), &x), value(prob.field.as_ref(), &x));
    let one = poly_star(&prob.chart, Arc::clone(&prob.field), &PolynomialReal::one());
    assert_eq!(value(one.as_ref(), &x), -0.5);

    let quad = PolynomialReal::new(vec![0.5, -1.0, 0.25]);
    let field = poly_star(&prob.chart, Arc::clone(&prob.field), &quad);
    let p = pt(&x);
    let l = assemble_l(&prob, &p).unwrap().entries;
    let lhs = assemble_l(&prob.with_field(field).unwrap(), &p)
        .unwrap()
        .entries;
    assert!((lhs - quad.eval_matrix(&l)).norm() < 1e-10);
}

#[test]
fn block_formula_and_product_closure() {
    let prob = cp(2, 0);
    let p = pt(&[0.2, 0.1, -0.3, 0.25]);
    let same = product_block_check(&prob, &prob, &p).unwrap();
    assert!(same.block_deviation < 1e-10);
    assert!(same.shape_deviation.unwrap() < 1e-10);

    let other = prob
        .with_field(polynomial_field(4, [0.1, 0.7, 0.3]))
        .unwrap();
    let mixed = product_block_check(&prob, &other, &p).unwrap();
    assert!(mixed.block_deviation < 1e-10);
    assert!(mixed.commutation_residual > 1e-3 || mixed.orthogonality_residual > 1e-3);
    assert!(mixed.shape_deviation.is_none());

    let elsewhere = TannoProblem::new(
        flat_kahler_chart(2, 0).unwrap(),
        polynomial_field(4, [0.0, 1.0, 0.0]),
        1.0,
    )
    .unwrap();
    assert!(product_block_check(&prob, &elsewhere, &p).is_err());
    let quarter = TannoProblem::new(prob.chart.clone(), Arc::clone(&prob.field), 0.25).unwrap();
    assert!(matches!(
        product_block_check(&quarter, &prob, &p),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn spectra_of_simple_matrices() {
    let id = spectrum_relative(&DMatrix::identity(4, 4), 1e-9).unwrap();
    assert_eq!(id.real.len(), 1);
    assert_eq!(id.real[0].multiplicity, 4);
    assert!(id.complex.is_empty());

    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -2.0, 2.0, -2.0]));
    let s = spectrum_relative(&d, 1e-9).unwrap();
    assert_eq!(s.real_values(), vec![-2.0, 2.0]);
    assert!(s.real.iter().all(|c| c.multiplicity == 2));
    assert_eq!(s.spectral_radius(), 2.0);
    assert_eq!(s.distance(&s), 0.0);
}

#[test]
fn minimal_polynomials() {
    let id = minimal_polynomial_of(&DMatrix::identity(5, 5), 1e-8).unwrap();
    assert_eq!(id.coefficients(), &[-1.0, 1.0]);
    let proj = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
    let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.0, 1.0, 0.2, 0.1, 0.0, 1.0]);
    let conj = &q * proj * q.try_inverse().unwrap();
    let p = minimal_polynomial_of(&conj, 1e-8).unwrap();
    assert!(p.max_coeff_diff(&PolynomialReal::new(vec![0.0, -1.0, 1.0])) < 1e-10);
    assert!(minimal_polynomial_of(&conj, 0.0).is_err());
}

#[test]
fn lagrange_projector_examples() {
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -2.0, 2.0, 2.0]));
    let poly = lagrange_projector(&spectrum_relative(&d, 1e-9).unwrap()).unwrap();
    assert!(poly.max_coeff_diff(&PolynomialReal::new(vec![0.5, 0.25])) < 1e-15);
    let single = spectrum_relative(&DMatrix::identity(3, 3), 1e-9).unwrap();
    assert!(matches!(
        lagrange_projector(&single),
        Err(Error::NoRealSplit { real_clusters: 1 })
    ));
}

#[test]
fn cp1_projector() {
    let prob = cp(1, 0);
    let samples = sample_points(&prob.chart, 6, 3, 1.5).unwrap();
    let sol = projector_from_solution(&prob, &samples, 1e-7).unwrap();
    assert!(
        sol.polynomial
            .max_coeff_diff(&PolynomialReal::new(vec![0.5, 0.25]))
            < 1e-9
    );
    assert!((sol.trace - 2.0).abs() < 1e-9);
    assert!(sol.max_idempotency() < 1e-7);
    for p in &samples {
        let f = value(prob.field.as_ref(), p.coords());
        let check = value(sol.field.as_ref(), p.coords());
        assert!((check - (0.25 * f - 0.25)).abs() < 1e-9);
    }
}

#[test]
fn cp2_projector_has_even_rank() {
    let prob = cp(2, 0);
    let samples = sample_points(&prob.chart, 5, 9, 1.5).unwrap();
    let l = assemble_l(&prob, &samples[0]).unwrap();
    let spec = spectrum(&l, 1e-6).unwrap();
    assert_eq!(spec.real_values().len(), 2);
    assert!((spec.real[0].value + 4.0).abs() < 1e-9 && spec.real[0].multiplicity == 2);
    assert!((spec.real[1].value - 2.0).abs() < 1e-9 && spec.real[1].multiplicity == 4);

    let sol = projector_from_solution(&prob, &samples, 1e-7).unwrap();
    assert!(
        sol.polynomial
            .max_coeff_diff(&PolynomialReal::new(vec![2.0 / 3.0, 1.0 / 6.0]))
            < 1e-9
    );
    let rank = sol.trace.round();
    assert!((sol.trace - rank).abs() < 1e-9);
    assert_eq!(rank as i64 % 2, 0);
    assert_eq!(rank, 4.0);
}

#[test]
fn projector_failures() {
    let flat = flat_kahler_chart(1, 1).unwrap();
    let half = TannoProblem::new(flat.clone(), constant(4, -0.5), 1.0).unwrap();
    let samples = [pt(&[0.1, 0.0, 0.2, 0.0])];
    assert!(matches!(
        projector_from_solution(&half, &samples, 1e-7),
        Err(Error::NoRealSplit { .. })
    ));
    assert!(projector_from_solution(&half, &[], 1e-7).is_err());

    // Not a solution: L(P*(f)) drifts away from a projector.
    let cubic = ClosedFormField::new(4, "x1^3 - 1/2", |x: &[Jet]| x[0].powi(3) - 0.5).shared();
    let prob = TannoProblem::new(flat, cubic, 1.0).unwrap();
    let pts = [pt(&[0.3, 0.1, 0.2, 0.0]), pt(&[-0.4, 0.2, 0.1, 0.3])];
    assert!(projector_from_solution(&prob, &pts, 1e-7).is_err());
}

#[test]
fn eigenstructure_on_cp2() {
    let prob = cp(2, 0);
    let samples = sample_points(&prob.chart, 3, 1, 1.2).unwrap();
    let sol = projector_from_solution(&prob, &samples, 1e-7).unwrap();
    let checked = prob.with_field(sol.field).unwrap();

    let origin = eigenstructure_at(&checked, &ChartPoint::origin(4), DEFAULT_CLUSTER_TOL).unwrap();
    assert_eq!(origin.k_param, 1);
    assert_eq!(origin.classification, PointClass::MuMin);
    assert!(origin.matches_expected, "{origin:?}");

    for p in &samples {
        let r = eigenstructure_at(&checked, p, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(r.classification, PointClass::Interior);
        assert!(r.matches_expected, "{r:?}");
        assert!(r.mu > 0.0 && r.mu < 1.0);
    }

    let not_projector = eigenstructure_at(&prob, &samples[0], DEFAULT_CLUSTER_TOL);
    assert!(matches!(not_projector, Err(Error::NotProjector { .. })));
}

#[test]
fn mu_hessian_identity_per_oracle() {
    let flat = flat_kahler_chart(1, 1).unwrap();
    let quartic = ClosedFormField::new(4, "x1^4", |x: &[Jet]| x[0].powi(4));
    let prob = TannoProblem::new(flat.clone(), quartic.clone().shared(), 1.0).unwrap();
    let x = [0.7, 0.1, -0.2, 0.3];
    assert!(mu_hessian_residual(&prob, &pt(&x)).unwrap() < 1e-12);

    // μ_{,ij} from the oracle against 2a − 2μg from the library bundle.
    let b = bundle_from_f(&prob, &pt(&x)).unwrap();
    let mu_hess = common::fd_hessian(&|y: &[f64]| -2.0 * value(&quartic, y), &x);
    let g = common::metric(&flat, &x);
    let expected = &b.a * 2.0 - g * (2.0 * b.mu);
    assert!((mu_hess - expected).amax() < 1e-6);
}

fn field_strategy() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0_f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn star_product_is_commutative(
        u in field_strategy(),
        v in field_strategy(),
        x in prop::collection::vec(-0.9..0.9_f64, 4),
    ) {
        let fs = fubini_study_chart(2).unwrap();
        let (f, h) = (polynomial_field(4, u), polynomial_field(4, v));
        let fh = star_product(&fs, Arc::clone(&f), Arc::clone(&h));
        let hf = star_product(&fs, h, f);
        prop_assert!((value(fh.as_ref(), &x) - value(hf.as_ref(), &x)).abs() < 1e-12);
    }

    #[test]
    fn star_product_is_bilinear(
        u in field_strategy(),
        v in field_strategy(),
        w in field_strategy(),
        alpha in -2.0..2.0_f64,
        x in prop::collection::vec(-0.9..0.9_f64, 4),
    ) {
        let fs = fubini_study_chart(2).unwrap();
        let combined: [f64; 3] = std::array::from_fn(|i| alpha * u[i] + v[i]);
        let lhs = star_product(&fs, polynomial_field(4, combined), polynomial_field(4, w));
        let a = star_product(&fs, polynomial_field(4, u), polynomial_field(4, w));
        let b = star_product(&fs, polynomial_field(4, v), polynomial_field(4, w));
        let rhs = alpha * value(a.as_ref(), &x) + value(b.as_ref(), &x);
        prop_assert!((value(lhs.as_ref(), &x) - rhs).abs() < 1e-10);
    }
}
