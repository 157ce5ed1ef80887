#![allow(dead_code)]

use std::sync::Arc;

use algebroid_core::algebroid::jet_prolong;
use algebroid_core::{
    parse_expression, AForm, AlgebroidChart, FormMatrix, MultiIndex, ScalarField,
};
use proptest::prelude::*;

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn lie(
    coords: &[&str],
    n: usize,
    brackets: &[(usize, usize, usize, f64)],
) -> Arc<AlgebroidChart> {
    let mut c = vec![vec![vec![0.0; n]; n]; n];
    for &(i, j, k, v) in brackets {
        c[i][j][k] += v;
        c[j][i][k] -= v;
    }
    AlgebroidChart::lie_algebra(names(coords), &c)
        .unwrap()
        .shared()
}

pub fn tangent() -> Arc<AlgebroidChart> {
    AlgebroidChart::tangent(names(&["x", "y"])).shared()
}

pub fn so3() -> Arc<AlgebroidChart> {
    lie(
        &["x", "y"],
        3,
        &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)],
    )
}

pub fn solvable() -> Arc<AlgebroidChart> {
    lie(&["x", "y"], 2, &[(0, 1, 1, 1.0)])
}

/// `e ↦ x ∂/∂x` on the line, extended trivially in `y`.
pub fn action() -> Arc<AlgebroidChart> {
    let coords = names(&["x", "y"]);
    let x = parse_expression("x", &coords).unwrap();
    AlgebroidChart::new(
        coords,
        names(&["e"]),
        vec![vec![x, ScalarField::zero()]],
        vec![],
    )
    .unwrap()
    .shared()
}

/// Cotangent algebroid of the Poisson bivector `(1 + x y) ∂x ∧ ∂y`.
pub fn poisson() -> Arc<AlgebroidChart> {
    let coords = names(&["x", "y"]);
    let p = |s: &str| parse_expression(s, &coords).unwrap();
    let f = p("1 + x*y");
    AlgebroidChart::new(
        coords.clone(),
        names(&["dx", "dy"]),
        vec![
            vec![ScalarField::zero(), f.clone()],
            vec![-f, ScalarField::zero()],
        ],
        vec![(0, 1, vec![p("y"), p("x")])],
    )
    .unwrap()
    .shared()
}

pub fn jet_so3() -> Arc<AlgebroidChart> {
    Arc::new(jet_prolong(&so3()).unwrap())
}

pub fn all_charts() -> Vec<(&'static str, Arc<AlgebroidChart>)> {
    vec![
        ("tangent", tangent()),
        ("so3", so3()),
        ("solvable", solvable()),
        ("action", action()),
        ("poisson", poisson()),
        ("jet_so3", jet_so3()),
    ]
}

/// Polynomials in `x, y` with small integer exponents.
pub fn poly() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec((-2.0f64..2.0, 0i32..3, 0i32..3), 0..3).prop_map(|terms| {
        ScalarField::sum(terms.into_iter().map(|(c, a, b)| {
            ScalarField::constant(c) * ScalarField::var(0).powi(a) * ScalarField::var(1).powi(b)
        }))
    })
}

/// A random form of the given rank and degree, with at most a few terms.
pub fn form(rank: usize, degree: usize) -> impl Strategy<Value = AForm> {
    let keys = MultiIndex::all(rank, degree);
    let n = keys.len();
    prop::collection::vec((0..n.max(1), poly()), 0..4).prop_map(move |picks| {
        let mut out = AForm::zero(rank, degree);
        for (i, c) in picks {
            if n > 0 {
                out.add_term(keys[i], c);
            }
        }
        out
    })
}

pub fn form_matrix(rank: usize, degree: usize, dim: usize) -> impl Strategy<Value = FormMatrix> {
    prop::collection::vec(form(rank, degree), dim * dim)
        .prop_map(move |entries| FormMatrix::from_entries(rank, degree, dim, entries).unwrap())
}

/// Drops terms that involve indices `≥ rank` and re-homes the form on `rank`.
pub fn restrict(w: &AForm, rank: usize) -> AForm {
    let mut out = AForm::zero(rank, w.degree());
    for (k, c) in w.terms() {
        if k.max_index().is_none_or(|m| m < rank) {
            out.add_term(*k, c.clone());
        }
    }
    out
}

/// Structure constants of the Lie algebra spanned by `basis` under the
/// commutator, solved coefficient-wise by least squares.
pub fn matrix_lie_constants(basis: &[nalgebra::DMatrix<f64>]) -> Vec<Vec<Vec<f64>>> {
    let n = basis.len();
    let cols: Vec<nalgebra::DVector<f64>> = basis
        .iter()
        .map(|m| nalgebra::DVector::from_column_slice(m.as_slice()))
        .collect();
    let frame = nalgebra::DMatrix::from_columns(&cols);
    let svd = frame.clone().svd(true, true);
    let mut c = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            let br = &basis[i] * &basis[j] - &basis[j] * &basis[i];
            let rhs = nalgebra::DVector::from_column_slice(br.as_slice());
            let x = svd.solve(&rhs, 1e-12).unwrap();
            assert!(
                (&frame * &x - &rhs).amax() < 1e-12,
                "basis is not closed under brackets"
            );
            for k in 0..n {
                c[i][j][k] = x[k].round();
            }
        }
    }
    c
}

/// `sa(3) = sl(3, ℝ) ⋉ ℝ³` as 4×4 matrices, over the coordinates `x, y`.
pub fn sa3() -> Arc<AlgebroidChart> {
    let e = |i: usize, j: usize| {
        let mut m = nalgebra::DMatrix::zeros(4, 4);
        m[(i, j)] = 1.0;
        m
    };
    let mut basis = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
        basis.push(e(i, j));
    }
    basis.push(e(0, 0) - e(1, 1));
    basis.push(e(1, 1) - e(2, 2));
    for i in 0..3 {
        basis.push(e(i, 3));
    }
    AlgebroidChart::lie_algebra(names(&["x", "y"]), &matrix_lie_constants(&basis))
        .unwrap()
        .shared()
}
