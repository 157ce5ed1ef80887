mod common;

use algebroid_core::chern_weil::{
    bott_delta_with_nodes, chern_form, chern_polarized, chern_scalar,
};
use algebroid_core::{
    form_distance, form_residual, generalized_delta, sample_points, AConnection, AForm,
    FieldMatrix, FormMatrix, Morphism, ScalarField,
};
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pts() -> Vec<Vec<f64>> {
    sample_points(2, 12, 42)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn matrix_residual(m: &FormMatrix, points: &[Vec<f64>]) -> f64 {
    m.entries()
        .iter()
        .map(|e| form_residual(e, points).unwrap())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn wedge_is_graded_commutative(
        (a, b, p, q) in (0usize..3, 0usize..3).prop_flat_map(|(p, q)| (form(4, p), form(4, q), Just(p), Just(q)))
    ) {
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(form_distance(&ab, &ba.scale_const(sign), &pts()).unwrap() < 1e-12);
    }

    #[test]
    fn wedge_is_associative(a in form(5, 1), b in form(5, 2), c in form(5, 1)) {
        let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(form_distance(&left, &right, &pts()).unwrap() < 1e-10);
    }

    #[test]
    fn d_squares_to_zero(chart in 0usize..6, f in poly(), one in form(9, 1), two in form(9, 2)) {
        let (_, a) = &all_charts()[chart];
        let s = a.rank();
        let zero = AForm::function(s, f);
        for w in [zero, restrict(&one, s), restrict(&two, s)] {
            let dd = a.d(&a.d(&w).unwrap()).unwrap();
            prop_assert!(form_residual(&dd, &pts()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn d_is_a_graded_derivation(chart in 0usize..5, a in form(3, 1), b in form(3, 1), f in poly()) {
        let (_, c) = &all_charts()[chart];
        let s = c.rank();
        let (a, b) = (restrict(&a, s), restrict(&b, s));
        let lhs = c.d(&a.wedge(&b).unwrap()).unwrap();
        let rhs = c.d(&a).unwrap().wedge(&b).unwrap().sub(&a.wedge(&c.d(&b).unwrap()).unwrap());
        prop_assert!(form_distance(&lhs, &rhs, &pts()).unwrap() < 1e-9);
        // functions: d(f a) = df ∧ a + f da
        let fa = a.scale(&f);
        let rhs = c.d_function(&f).wedge(&a).unwrap().add(&c.d(&a).unwrap().scale(&f));
        prop_assert!(form_distance(&c.d(&fa).unwrap(), &rhs, &pts()).unwrap() < 1e-9);
    }

    #[test]
    fn pullback_commutes_with_d(w0 in form(2, 0), w1 in form(2, 1), which in 0usize..2) {
        let phi = match which {
            0 => {
                let a = solvable();
                let b = lie(&["x", "y"], 2, &[]);
                let m = vec![vec![ScalarField::one(), ScalarField::zero()], vec![ScalarField::zero(); 2]];
                Morphism::new(a, b, m).unwrap()
            }
            _ => {
                let a = action();
                let x = ScalarField::var(0);
                Morphism::new(a, tangent(), vec![vec![x, ScalarField::zero()]]).unwrap()
            }
        };
        for w in [w0, w1] {
            let lhs = phi.source().d(&phi.pullback(&w).unwrap()).unwrap();
            let rhs = phi.pullback(&phi.target().d(&w).unwrap()).unwrap();
            prop_assert!(form_distance(&lhs, &rhs, &pts()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn bianchi_identity(chart in 0usize..5, m in form_matrix(3, 1, 2)) {
        let (_, a) = &all_charts()[chart];
        let s = a.rank();
        let m = FormMatrix::from_entries(s, 1, 2, m.entries().iter().map(|e| restrict(e, s)).collect()).unwrap();
        let c = AConnection::new(a.clone(), "e", m).unwrap();
        let omega = c.curvature().unwrap();
        let lhs = omega.d(a).unwrap();
        let rhs = c.matrix().wedge(&omega).unwrap().sub(&omega.wedge(c.matrix()).unwrap());
        prop_assert!(matrix_residual(&lhs.sub(&rhs), &pts()) < 1e-9);
    }

    #[test]
    fn chern_forms_are_ad_invariant(m in form_matrix(3, 2, 3), p in prop::collection::vec(-1.0f64..1.0, 9), h in 1usize..4) {
        let pm = DMatrix::from_row_slice(3, 3, &p) + DMatrix::identity(3, 3) * 3.0;
        let inv = pm.clone().try_inverse().unwrap();
        let to_fields = |d: &DMatrix<f64>| FieldMatrix::from_fn(3, 3, |i, j| ScalarField::constant(d[(i, j)]));
        let conj = m.fields_mul(&to_fields(&inv)).unwrap().mul_fields(&to_fields(&pm)).unwrap();
        let a = chern_form(&m, h).unwrap();
        let b = chern_form(&conj, h).unwrap();
        let scale = form_residual(&a, &pts()).unwrap().max(1.0);
        prop_assert!(form_distance(&a, &b, &pts()).unwrap() < 1e-9 * scale);
    }

    #[test]
    fn polarization_matches_brute_force(
        (first, rest, h) in (1usize..5, 1usize..4)
            .prop_filter("h ≤ r", |(r, h)| h <= r)
            .prop_flat_map(|(r, h)| (form_matrix(4, 1, r), form_matrix(4, 2, r), Just(h)))
    ) {
        let mut args = vec![&first];
        args.extend(std::iter::repeat_n(&rest, h - 1));
        let fast = chern_polarized(&args).unwrap();
        let slow = brute_force(&args);
        prop_assert!(form_distance(&fast, &slow, &pts()).unwrap() < 1e-10);
    }

    #[test]
    fn polarization_agrees_with_minors(v in prop::collection::vec(-2.0f64..2.0, 16), h in 1usize..5) {
        let m = FormMatrix::from_fn(1, 0, 4, |u, t| AForm::function(1, ScalarField::constant(v[4 * u + t])));
        let got = chern_form(&m, h).unwrap().coeff(algebroid_core::MultiIndex::EMPTY).as_const().unwrap_or(0.0);
        let want = chern_scalar(&DMatrix::from_row_slice(4, 4, &v), h).unwrap();
        prop_assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn doubling_quadrature_nodes_is_stable(m0 in form_matrix(2, 1, 2), m1 in form_matrix(2, 1, 2), h in 1usize..3) {
        let t = tangent();
        let c0 = AConnection::new(t.clone(), "e", m0).unwrap();
        let c1 = AConnection::new(t, "e", m1).unwrap();
        let n = h;
        let base = bott_delta_with_nodes(&[c0.clone(), c1.clone()], h, Some(n)).unwrap();
        let doubled = bott_delta_with_nodes(&[c0, c1], h, Some(2 * n)).unwrap();
        let scale = form_residual(&base, &pts()).unwrap().max(1.0);
        prop_assert!(form_distance(&base, &doubled, &pts()).unwrap() <= 1e-13 * scale);
    }
}

/// `(1/h!) Σ_σ Σ_π sign(π) ∧_i (A_i)_{σ_i}^{σ_π(i)}` over ordered distinct `σ`.
fn brute_force(args: &[&FormMatrix]) -> AForm {
    let h = args.len();
    let n = args[0].dim();
    let rank = args[0].rank();
    let degree = args.iter().map(|a| a.degree()).sum();
    let mut total = AForm::zero(rank, degree);
    let tuples = ordered_tuples(n, h);
    let perms = ordered_tuples(h, h);
    for sigma in &tuples {
        for pi in &perms {
            let kappa: Vec<usize> = pi.iter().map(|&p| sigma[p]).collect();
            let sign = generalized_delta(sigma, &kappa);
            let mut term = AForm::function(rank, ScalarField::one());
            for i in 0..h {
                term = term.wedge(args[i].get(sigma[i], kappa[i])).unwrap();
            }
            total = total.add(&term.scale_const(f64::from(sign)));
        }
    }
    let fact: f64 = (1..=h).map(|k| k as f64).product();
    total.scale_const(1.0 / fact)
}

fn ordered_tuples(n: usize, h: usize) -> Vec<Vec<usize>> {
    if h == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for t in ordered_tuples(n, h - 1) {
        for v in 0..n {
            if !t.contains(&v) {
                let mut next = t.clone();
                next.push(v);
                out.push(next);
            }
        }
    }
    out
}
