//! Lie algebroid charts: anchor, structure functions, bracket and `d_A`.

mod jet;
mod morphism;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::check::CheckReport;
use crate::error::{Error, Result};
use crate::expr::{ScalarField, Tape};
use crate::form::{AForm, MultiIndex, MAX_RANK};

pub use jet::{jet_defining_section, jet_index, jet_lift, jet_projection, jet_prolong};
pub use morphism::Morphism;

/// Section `ξ^i b_i` of a rank-`s` algebroid.
#[derive(Clone, Debug)]
pub struct Section(pub Vec<ScalarField>);

impl Section {
    pub fn zero(rank: usize) -> Self {
        Section(vec![ScalarField::zero(); rank])
    }

    pub fn basis(rank: usize, i: usize) -> Self {
        let mut v = vec![ScalarField::zero(); rank];
        v[i] = ScalarField::one();
        Section(v)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.0
    }

    pub fn scale(&self, f: &ScalarField) -> Section {
        Section(self.0.iter().map(|c| f * c).collect())
    }

    pub fn add(&self, other: &Section) -> Section {
        Section(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Section) -> Section {
        Section(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// A Lie algebroid presented over one coordinate chart.
#[derive(Clone, Debug)]
pub struct AlgebroidChart {
    coords: Vec<String>,
    basis: Vec<String>,
    /// `anchor[i][j] = ρ_i^j`
    anchor: Vec<Vec<ScalarField>>,
    /// dense `γ_ij^k` at `(i * s + j) * s + k`, antisymmetric in `(i, j)`
    gamma: Vec<ScalarField>,
}

impl AlgebroidChart {
    /// `brackets` lists `(i, j, [γ_ij^1, ..])` for the pairs that have a
    /// nonzero bracket; pairs given with `i > j` are stored negated.
    pub fn new(
        coords: Vec<String>,
        basis: Vec<String>,
        anchor: Vec<Vec<ScalarField>>,
        brackets: Vec<(usize, usize, Vec<ScalarField>)>,
    ) -> Result<Self> {
        let m = coords.len();
        let s = basis.len();
        if s > MAX_RANK {
            return Err(Error::Shape(format!("rank {s} exceeds {MAX_RANK}")));
        }
        if anchor.len() != s {
            return Err(Error::Shape(format!(
                "anchor has {} rows, rank is {s}",
                anchor.len()
            )));
        }
        for (i, row) in anchor.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Shape(format!(
                    "anchor row {} has {} entries, base dimension is {m}",
                    i + 1,
                    row.len()
                )));
            }
        }
        let mut gamma = vec![ScalarField::zero(); s * s * s];
        for (i, j, coeffs) in brackets {
            if i >= s || j >= s {
                return Err(Error::Shape(format!(
                    "bracket pair ({}, {}) out of range for rank {s}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::Invalid(format!(
                    "bracket of b{} with itself must vanish",
                    i + 1
                )));
            }
            if coeffs.len() != s {
                return Err(Error::Shape(format!(
                    "bracket ({}, {}) has {} coefficients, rank is {s}",
                    i + 1,
                    j + 1,
                    coeffs.len()
                )));
            }
            let (lo, hi, neg) = if i < j { (i, j, false) } else { (j, i, true) };
            for (k, c) in coeffs.into_iter().enumerate() {
                let c = if neg { -c } else { c };
                let idx = (lo * s + hi) * s + k;
                gamma[idx] = &gamma[idx] + &c;
            }
        }
        for i in 0..s {
            for j in (i + 1)..s {
                for k in 0..s {
                    gamma[(j * s + i) * s + k] = -&gamma[(i * s + j) * s + k];
                }
            }
        }
        Ok(AlgebroidChart {
            coords,
            basis,
            anchor,
            gamma,
        })
    }

    /// Tangent algebroid of the coordinate chart (identity anchor, zero bracket).
    pub fn tangent(coords: Vec<String>) -> Self {
        let m = coords.len();
        let basis = coords.iter().map(|c| format!("d{c}")).collect();
        let anchor = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            ScalarField::one()
                        } else {
                            ScalarField::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        AlgebroidChart::new(coords, basis, anchor, Vec::new())
            .expect("tangent chart is well formed")
    }

    /// Zero-anchor algebroid from structure constants `c[i][j][k]`.
    pub fn lie_algebra(coords: Vec<String>, structure: &[Vec<Vec<f64>>]) -> Result<Self> {
        let s = structure.len();
        let m = coords.len();
        let basis = (1..=s).map(|i| format!("b{i}")).collect();
        let anchor = vec![vec![ScalarField::zero(); m]; s];
        let mut brackets = Vec::new();
        for (i, row) in structure.iter().enumerate() {
            if row.len() != s {
                return Err(Error::Shape("structure constants must be s×s×s".into()));
            }
            for (j, gamma) in row.iter().enumerate().skip(i + 1) {
                if gamma.len() != s {
                    return Err(Error::Shape("structure constants must be s×s×s".into()));
                }
                let coeffs: Vec<ScalarField> =
                    gamma.iter().map(|&c| ScalarField::constant(c)).collect();
                if coeffs.iter().any(|c| !c.is_zero()) {
                    brackets.push((i, j, coeffs));
                }
            }
        }
        AlgebroidChart::new(coords, basis, anchor, brackets)
    }

    pub fn base_dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis
    }

    /// `ρ_i^j`
    pub fn anchor(&self, i: usize, j: usize) -> &ScalarField {
        &self.anchor[i][j]
    }

    pub fn anchor_rows(&self) -> &[Vec<ScalarField>] {
        &self.anchor
    }

    /// `γ_ij^k`
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> &ScalarField {
        let s = self.rank();
        &self.gamma[(i * s + j) * s + k]
    }

    /// Nonzero `(i, j, [γ_ij^k]_k)` with `i < j`.
    pub fn bracket_table(&self) -> Vec<(usize, usize, Vec<ScalarField>)> {
        let s = self.rank();
        let mut out = Vec::new();
        for i in 0..s {
            for j in (i + 1)..s {
                let row: Vec<ScalarField> = (0..s).map(|k| self.gamma(i, j, k).clone()).collect();
                if row.iter().any(|c| !c.is_zero()) {
                    out.push((i, j, row));
                }
            }
        }
        out
    }

    pub fn has_zero_anchor(&self) -> bool {
        self.anchor.iter().flatten().all(|c| c.is_zero())
    }

    /// `ρ_i(f) = ρ_i^j ∂_j f`
    pub fn anchor_derivative(&self, i: usize, f: &ScalarField) -> ScalarField {
        ScalarField::sum(
            self.anchor[i]
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.is_zero())
                .map(|(j, r)| r * f.derivative(j)),
        )
    }

    /// `♯a(f) = ξ^i ρ_i^j ∂_j f`
    pub fn anchor_apply(&self, a: &Section, f: &ScalarField) -> Result<ScalarField> {
        self.check_section(a)?;
        let grads: Vec<ScalarField> = (0..self.base_dim()).map(|j| f.derivative(j)).collect();
        Ok(self.anchor_apply_grad(a, &grads))
    }

    fn anchor_apply_grad(&self, a: &Section, grads: &[ScalarField]) -> ScalarField {
        let mut terms = Vec::new();
        for (i, xi) in a.0.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, g) in grads.iter().enumerate() {
                let r = &self.anchor[i][j];
                if !r.is_zero() && !g.is_zero() {
                    terms.push(xi * r * g);
                }
            }
        }
        ScalarField::sum(terms)
    }

    fn check_section(&self, a: &Section) -> Result<()> {
        if a.rank() != self.rank() {
            return Err(Error::Shape(format!(
                "section of rank {} on a rank-{} algebroid",
                a.rank(),
                self.rank()
            )));
        }
        Ok(())
    }

    /// Leibniz bracket of sections.
    pub fn bracket(&self, a: &Section, b: &Section) -> Result<Section> {
        self.check_section(a)?;
        self.check_section(b)?;
        let s = self.rank();
        let mut out = Vec::with_capacity(s);
        for k in 0..s {
            let mut terms = Vec::new();
            for i in 0..s {
                if a.0[i].is_zero() {
                    continue;
                }
                for j in 0..s {
                    let g = self.gamma(i, j, k);
                    if g.is_zero() || b.0[j].is_zero() {
                        continue;
                    }
                    terms.push(&a.0[i] * &b.0[j] * g);
                }
            }
            let bk = &b.0[k];
            if !bk.is_zero() {
                terms.push(self.anchor_apply(a, bk)?);
            }
            let ak = &a.0[k];
            if !ak.is_zero() {
                terms.push(-self.anchor_apply(b, ak)?);
            }
            out.push(ScalarField::sum(terms));
        }
        Ok(Section(out))
    }

    /// Evaluation `ω(a)` of a 1-form on a section.
    pub fn pair(&self, omega: &AForm, a: &Section) -> ScalarField {
        debug_assert_eq!(omega.degree(), 1);
        ScalarField::sum(omega.terms().filter_map(|(k, c)| {
            let i = k.max_index().unwrap();
            let xi = &a.0[i];
            (!xi.is_zero()).then(|| c * xi)
        }))
    }

    /// `d_A f = ρ_i(f) b*^i`
    pub fn d_function(&self, f: &ScalarField) -> AForm {
        let mut out = AForm::zero(self.rank(), 1);
        for i in 0..self.rank() {
            out.add_term(MultiIndex::single(i), self.anchor_derivative(i, f));
        }
        out
    }

    /// The algebroid exterior differential.
    pub fn d(&self, omega: &AForm) -> Result<AForm> {
        let s = self.rank();
        if omega.rank() != s {
            return Err(Error::Shape(format!(
                "form of rank {} on a rank-{s} algebroid",
                omega.rank()
            )));
        }
        let k = omega.degree();
        if k + 1 > s {
            return Ok(AForm::zero(s, k + 1));
        }
        // structurally nonzero (a, b) pairs for each target l
        let mut pairs_by_l: Vec<Vec<(usize, usize, &ScalarField)>> = vec![Vec::new(); s];
        for a in 0..s {
            for b in (a + 1)..s {
                for (l, pairs) in pairs_by_l.iter_mut().enumerate() {
                    let g = self.gamma(a, b, l);
                    if !g.is_zero() {
                        pairs.push((a, b, g));
                    }
                }
            }
        }
        let mut acc: BTreeMap<MultiIndex, Vec<ScalarField>> = BTreeMap::new();
        for (set, c) in omega.terms() {
            let set = *set;
            // anchor terms
            let grads: Vec<ScalarField> = (0..self.base_dim()).map(|j| c.derivative(j)).collect();
            if grads.iter().any(|g| !g.is_zero()) {
                for i in 0..s {
                    if set.contains(i) {
                        continue;
                    }
                    let rho_c = ScalarField::sum(
                        self.anchor[i]
                            .iter()
                            .zip(&grads)
                            .filter(|(r, g)| !r.is_zero() && !g.is_zero())
                            .map(|(r, g)| r * g),
                    );
                    if rho_c.is_zero() {
                        continue;
                    }
                    let term = if set.count_below(i) % 2 == 1 {
                        -rho_c
                    } else {
                        rho_c
                    };
                    acc.entry(set.union(MultiIndex::single(i)))
                        .or_default()
                        .push(term);
                }
            }
            // bracket terms: ω(b_l, R) with R = set \ {l}
            for l in set.indices() {
                let rest = set.without(MultiIndex::single(l));
                let sign_l = if set.count_below(l) % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                for &(a, b, g) in &pairs_by_l[l] {
                    if rest.contains(a) || rest.contains(b) {
                        continue;
                    }
                    let target = rest
                        .union(MultiIndex::single(a))
                        .union(MultiIndex::single(b));
                    let r = target.count_below(a);
                    let t = target.count_below(b);
                    let sign = if (r + t) % 2 == 1 { -sign_l } else { sign_l };
                    acc.entry(target).or_default().push(g * c * sign);
                }
            }
        }
        let mut out = AForm::zero(s, k + 1);
        for (key, terms) in acc {
            out.add_term(key, ScalarField::sum(terms));
        }
        Ok(out)
    }

    /// Checks at seeded points that the anchor maps brackets to vector-field
    /// brackets and that the Jacobiator of every basis triple vanishes.
    pub fn verify_axioms(&self, points: &[Vec<f64>], tol: f64) -> Result<AxiomReport> {
        let s = self.rank();
        let m = self.base_dim();
        let mut anchor_fields = Vec::new();
        let mut anchor_labels = Vec::new();
        for i in 0..s {
            for j in (i + 1)..s {
                for h in 0..m {
                    let lhs =
                        ScalarField::sum((0..s).map(|k| self.gamma(i, j, k) * &self.anchor[k][h]));
                    let rhs = self.anchor_derivative(i, &self.anchor[j][h])
                        - self.anchor_derivative(j, &self.anchor[i][h]);
                    anchor_fields.push(lhs - rhs);
                    anchor_labels.push((i, j));
                }
            }
        }
        let mut jacobi_fields = Vec::new();
        let mut jacobi_labels = Vec::new();
        let basis: Vec<Section> = (0..s).map(|i| Section::basis(s, i)).collect();
        let brackets: Vec<Vec<Section>> = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| self.bracket(&basis[i], &basis[j]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for i in 0..s {
            for j in (i + 1)..s {
                for k in (j + 1)..s {
                    let t1 = self.bracket(&brackets[i][j], &basis[k])?;
                    let t2 = self.bracket(&brackets[j][k], &basis[i])?;
                    let t3 = self.bracket(&brackets[k][i], &basis[j])?;
                    for n in 0..s {
                        jacobi_fields.push(&t1.0[n] + &t2.0[n] + &t3.0[n]);
                        jacobi_labels.push((i, j, k));
                    }
                }
            }
        }
        let (anchor_residual, anchor_at) = worst_over(&anchor_fields, points)?;
        let (jacobi_residual, jacobi_at) = worst_over(&jacobi_fields, points)?;
        Ok(AxiomReport {
            basis: self.basis.clone(),
            anchor_residual,
            anchor_worst: anchor_at.map(|n| anchor_labels[n]),
            jacobi_residual,
            jacobi_worst: jacobi_at.map(|n| jacobi_labels[n]),
            probes: points.len(),
            tol,
        })
    }

    /// Product with `T Δ^k`: new coordinates `t_1..t_k` appended to the base
    /// and new basis sections `∂/∂t_a` appended to the frame.
    pub fn product_with_simplex(&self, k: usize) -> AlgebroidChart {
        let m = self.base_dim();
        let s = self.rank();
        let mut coords = self.coords.clone();
        let mut basis = self.basis.clone();
        for a in 0..k {
            let name = fresh_name(
                &coords,
                if k == 1 {
                    "tau".into()
                } else {
                    format!("t{}", a + 1)
                },
            );
            basis.push(format!("d{name}"));
            coords.push(name);
        }
        let mut anchor: Vec<Vec<ScalarField>> = self
            .anchor
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.extend(std::iter::repeat_n(ScalarField::zero(), k));
                r
            })
            .collect();
        for a in 0..k {
            let mut r = vec![ScalarField::zero(); m + k];
            r[m + a] = ScalarField::one();
            anchor.push(r);
        }
        let brackets = self
            .bracket_table()
            .into_iter()
            .map(|(i, j, mut row)| {
                row.extend(std::iter::repeat_n(ScalarField::zero(), k));
                (i, j, row)
            })
            .collect();
        debug_assert_eq!(anchor.len(), s + k);
        AlgebroidChart::new(coords, basis, anchor, brackets).expect("product chart is well formed")
    }

    /// Product with `T[0, 1]`, the chart carrying links between connections.
    pub fn build_link_chart(&self) -> AlgebroidChart {
        self.product_with_simplex(1)
    }

    pub fn shared(self) -> Arc<AlgebroidChart> {
        Arc::new(self)
    }
}

fn fresh_name(existing: &[String], base: String) -> String {
    let mut name = base;
    while existing.contains(&name) {
        name.push('_');
    }
    name
}

/// Index of the field with the largest absolute value across points, and that
/// value.
pub fn worst_over(fields: &[ScalarField], points: &[Vec<f64>]) -> Result<(f64, Option<usize>)> {
    let live: Vec<usize> = (0..fields.len())
        .filter(|&n| !fields[n].is_zero())
        .collect();
    if live.is_empty() {
        return Ok((0.0, None));
    }
    let tape = Tape::compile(live.iter().map(|&n| &fields[n]));
    let mut vals = Vec::new();
    let mut worst = 0.0f64;
    let mut at = None;
    for p in points {
        tape.eval(p, &mut vals)?;
        for (slot, v) in vals.iter().enumerate() {
            let a = v.abs();
            if a.is_nan() {
                return Ok((f64::NAN, Some(live[slot])));
            }
            if a > worst {
                worst = a;
                at = Some(live[slot]);
            }
        }
    }
    Ok((worst, at))
}

/// Residuals of the algebroid axioms at sample points.
#[derive(Clone, Debug)]
pub struct AxiomReport {
    basis: Vec<String>,
    pub anchor_residual: f64,
    pub anchor_worst: Option<(usize, usize)>,
    pub jacobi_residual: f64,
    pub jacobi_worst: Option<(usize, usize, usize)>,
    pub probes: usize,
    pub tol: f64,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.anchor_residual <= self.tol && self.jacobi_residual <= self.tol
    }

    pub fn checks(&self, prefix: &str) -> Vec<CheckReport> {
        let mut anchor = CheckReport::new(
            format!("{prefix}anchor_morphism"),
            self.anchor_residual,
            self.tol,
            self.probes,
        );
        if let (false, Some((i, j))) = (anchor.pass, self.anchor_worst) {
            anchor =
                anchor.with_detail(format!("worst pair ({}, {})", self.basis[i], self.basis[j]));
        }
        let mut jacobi = CheckReport::new(
            format!("{prefix}jacobi"),
            self.jacobi_residual,
            self.tol,
            self.probes,
        );
        if let (false, Some((i, j, k))) = (jacobi.pass, self.jacobi_worst) {
            jacobi = jacobi.with_detail(format!(
                "worst triple ({}, {}, {})",
                self.basis[i], self.basis[j], self.basis[k]
            ));
        }
        vec![anchor, jacobi]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{form_residual, sample_points};
    use crate::expr::parse_expression;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn so3() -> AlgebroidChart {
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[i][j][k] = 1.0;
            c[j][i][k] = -1.0;
        }
        AlgebroidChart::lie_algebra(names(&["x", "y"]), &c).unwrap()
    }

    fn action_x() -> AlgebroidChart {
        let coords = names(&["x"]);
        let rho = parse_expression("x", &coords).unwrap();
        AlgebroidChart::new(coords, names(&["b1"]), vec![vec![rho]], vec![]).unwrap()
    }

    fn eval(f: &ScalarField, p: &[f64]) -> f64 {
        f.eval(p).unwrap()
    }

    #[test]
    fn anchor_apply_examples() {
        let t = AlgebroidChart::tangent(names(&["x", "y"]));
        let f = parse_expression("x^2", t.coords()).unwrap();
        let r = t.anchor_apply(&Section::basis(2, 0), &f).unwrap();
        assert_eq!(eval(&r, &[0.7, 0.1]), 1.4);
        let z = so3();
        assert!(z.anchor_apply(&Section::basis(3, 1), &f).unwrap().is_zero());
        let a = action_x();
        let r = a
            .anchor_apply(&Section::basis(1, 0), &ScalarField::var(0))
            .unwrap();
        assert_eq!(eval(&r, &[0.3]), 0.3);
    }

    #[test]
    fn bracket_examples() {
        let t = AlgebroidChart::tangent(names(&["x", "y"]));
        let a = Section(vec![ScalarField::zero(), ScalarField::var(0)]);
        let b = Section::basis(2, 0);
        let r = t.bracket(&a, &b).unwrap();
        assert!(r.0[0].is_zero());
        assert_eq!(eval(&r.0[1], &[0.2, 0.4]), -1.0);
        assert!(t
            .bracket(&a, &a)
            .unwrap()
            .0
            .iter()
            .all(|c| eval(c, &[0.3, 0.1]) == 0.0));
        let g = so3();
        let r = g
            .bracket(&Section::basis(3, 0), &Section::basis(3, 1))
            .unwrap();
        assert_eq!(
            r.0.iter()
                .map(|c| c.as_const().unwrap())
                .collect::<Vec<_>>(),
            vec![0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn d_examples() {
        let t = AlgebroidChart::tangent(names(&["x", "y"]));
        let w = AForm::basis(2, 1).scale(&ScalarField::var(0));
        let dw = t.d(&w).unwrap();
        assert_eq!(
            dw.coeff(MultiIndex::from_sorted(&[0, 1]).unwrap())
                .as_const(),
            Some(1.0)
        );
        let g = so3();
        assert!(g
            .d(&AForm::function(3, ScalarField::constant(2.5)))
            .unwrap()
            .is_empty());
        let d3 = g.d(&AForm::basis(3, 2)).unwrap();
        assert_eq!(dw.len(), 1);
        assert_eq!(d3.len(), 1);
        assert_eq!(
            d3.coeff(MultiIndex::from_sorted(&[0, 1]).unwrap())
                .as_const(),
            Some(-1.0)
        );
    }

    #[test]
    fn d_squared_vanishes_on_action_and_so3() {
        let pts = sample_points(2, 20, 5);
        let g = so3();
        let f = parse_expression("x^2*y + sin(y)", g.coords()).unwrap();
        let w = AForm::basis(3, 0)
            .scale(&f)
            .add(&AForm::basis(3, 2).scale(&ScalarField::var(1)));
        let ddw = g.d(&g.d(&w).unwrap()).unwrap();
        assert!(form_residual(&ddw, &pts).unwrap() < 1e-12);
        let a = AlgebroidChart::tangent(names(&["x", "y"]));
        let ddf = a.d(&a.d(&AForm::function(2, f)).unwrap()).unwrap();
        assert!(form_residual(&ddf, &pts).unwrap() < 1e-12);
    }

    #[test]
    fn axioms_pass_and_fail() {
        let pts = sample_points(2, 10, 42);
        let r = so3().verify_axioms(&pts, 1e-9).unwrap();
        assert!(r.pass());
        assert_eq!(r.jacobi_residual, 0.0);
        assert!(AlgebroidChart::tangent(names(&["x", "y"]))
            .verify_axioms(&pts, 1e-9)
            .unwrap()
            .pass());
        // [b1, b2] = b3 + b1 breaks Jacobi
        let one = ScalarField::one;
        let zero = ScalarField::zero;
        let broken = AlgebroidChart::new(
            names(&["x"]),
            names(&["b1", "b2", "b3"]),
            vec![vec![zero()]; 3],
            vec![
                (0, 1, vec![one(), zero(), one()]),
                (1, 2, vec![one(), zero(), zero()]),
                (2, 0, vec![zero(), one(), zero()]),
            ],
        )
        .unwrap();
        let r = broken.verify_axioms(&pts, 1e-9).unwrap();
        assert!(!r.pass());
        assert!((r.jacobi_residual - 1.0).abs() < 1e-15);
        assert_eq!(r.jacobi_worst, Some((0, 1, 2)));
        let checks = r.checks("");
        assert!(checks[1].detail.as_deref().unwrap().contains("b1, b2, b3"));
    }

    #[test]
    fn flipping_one_so3_sign_is_still_a_lie_algebra() {
        // γ_23^1 = -1 gives sl(2, R), which satisfies Jacobi
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        c[0][1][2] = 1.0;
        c[1][2][0] = -1.0;
        c[2][0][1] = 1.0;
        let g = AlgebroidChart::lie_algebra(names(&["x"]), &c).unwrap();
        let r = g.verify_axioms(&sample_points(1, 3, 1), 1e-12).unwrap();
        assert!(r.pass());
    }

    #[test]
    fn broken_anchor_is_detected() {
        // ρ = x∂x with [b1,b2] = b2 but b2 ↦ ∂x: ρ[b1,b2] = ∂x, [x∂x, ∂x] = -∂x
        let coords = names(&["x"]);
        let chart = AlgebroidChart::new(
            coords,
            names(&["b1", "b2"]),
            vec![vec![ScalarField::var(0)], vec![ScalarField::one()]],
            vec![(0, 1, vec![ScalarField::zero(), ScalarField::one()])],
        )
        .unwrap();
        let r = chart.verify_axioms(&sample_points(1, 4, 2), 1e-9).unwrap();
        assert!((r.anchor_residual - 2.0).abs() < 1e-15);
        assert_eq!(r.anchor_worst, Some((0, 1)));
    }

    #[test]
    fn link_chart_layout() {
        let g = so3();
        let l = g.build_link_chart();
        assert_eq!(l.rank(), 4);
        assert_eq!(l.coords(), &names(&["x", "y", "tau"])[..]);
        for i in 0..3 {
            assert!(l.anchor_rows()[i].iter().all(|c| c.is_zero()));
        }
        assert!(l.anchor(3, 2).is_one());
        assert!(l
            .verify_axioms(&sample_points(3, 5, 3), 1e-12)
            .unwrap()
            .pass());
        let t = AlgebroidChart::tangent(names(&["x"])).build_link_chart();
        assert!(t.anchor(0, 0).is_one() && t.anchor(1, 1).is_one());
        assert!(t.anchor(0, 1).is_zero() && t.anchor(1, 0).is_zero());
        let c = AlgebroidChart::tangent(names(&["tau"])).build_link_chart();
        assert_eq!(c.coords()[1], "tau_");
    }

    #[test]
    fn shape_errors() {
        let coords = names(&["x"]);
        assert!(AlgebroidChart::new(coords.clone(), names(&["b1"]), vec![vec![]], vec![]).is_err());
        assert!(AlgebroidChart::new(
            coords.clone(),
            names(&["b1"]),
            vec![vec![ScalarField::zero()]],
            vec![(0, 0, vec![ScalarField::zero()])]
        )
        .is_err());
        assert!(AlgebroidChart::new(
            coords,
            names(&["b1", "b2"]),
            vec![vec![ScalarField::zero()]; 2],
            vec![(0, 2, vec![ScalarField::zero(); 2])]
        )
        .is_err());
    }

    #[test]
    fn reversed_pairs_are_negated() {
        let zero = ScalarField::zero;
        let c = AlgebroidChart::new(
            names(&["x"]),
            names(&["b1", "b2"]),
            vec![vec![zero()]; 2],
            vec![(1, 0, vec![zero(), ScalarField::one()])],
        )
        .unwrap();
        assert_eq!(c.gamma(0, 1, 1).as_const(), Some(-1.0));
        assert_eq!(c.gamma(1, 0, 1).as_const(), Some(1.0));
    }
}
