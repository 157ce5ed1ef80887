use nalgebra::DMatrix;

use super::AConnection;
use crate::algebroid::{worst_over, Morphism};
use crate::check::{CheckReport, Probes};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::MultiIndex;
use crate::matrix::FieldMatrix;

/// Possibly degenerate symmetric (`sign = +1`) or skew (`sign = -1`) form.
#[derive(Clone, Debug)]
pub struct QuasiMetric {
    pub sign: f64,
    pub matrix: FieldMatrix,
}

/// `g_±((v₁,ν₁),(v₂,ν₂)) = ν₂(φ v₁) ± ν₁(φ v₂)` on `S = A ⊕ A'*`.
pub fn quasi_metric_on_s(phi: &Morphism) -> (QuasiMetric, QuasiMetric) {
    let (s, t) = (phi.source().rank(), phi.target().rank());
    let build = |sign: f64| {
        let m = FieldMatrix::from_fn(s + t, s + t, |a, b| {
            if a < s && b >= s {
                phi.entry(a, b - s).clone()
            } else if a >= s && b < s {
                phi.entry(b, a - s) * sign
            } else {
                ScalarField::zero()
            }
        });
        QuasiMetric { sign, matrix: m }
    };
    (build(1.0), build(-1.0))
}

/// Largest `|♯b_i(g_uv) − ω_u^t(b_i) g_tv − ω_v^t(b_i) g_ut|`.
pub fn metric_compat_check(
    conn: &AConnection,
    g: &QuasiMetric,
    probes: &Probes,
) -> Result<CheckReport> {
    let n = conn.bundle_rank();
    if g.matrix.rows() != n || g.matrix.cols() != n {
        return Err(Error::Shape("metric and connection bundle differ".into()));
    }
    let chart = conn.chart();
    let mut fields = Vec::new();
    for i in 0..chart.rank() {
        let w: Vec<Vec<ScalarField>> = (0..n)
            .map(|u| (0..n).map(|t| conn.coefficient(i, u, t)).collect())
            .collect();
        for u in 0..n {
            for v in 0..n {
                let mut terms = vec![chart.anchor_derivative(i, g.matrix.get(u, v))];
                for (t, wut) in w[u].iter().enumerate() {
                    if !wut.is_zero() && !g.matrix.get(t, v).is_zero() {
                        terms.push(-(wut * g.matrix.get(t, v)));
                    }
                    if !w[v][t].is_zero() && !g.matrix.get(u, t).is_zero() {
                        terms.push(-(&w[v][t] * g.matrix.get(u, t)));
                    }
                }
                fields.push(ScalarField::sum(terms));
            }
        }
    }
    let (r, _) = worst_over(&fields, &probes.points)?;
    Ok(probes.report("metric_compatibility", r))
}

/// Compares the nullity of `g` with `dim ker φ + dim ker ᵗφ` at each probe.
pub fn annihilator_check(g: &QuasiMetric, phi: &Morphism, probes: &Probes) -> Result<CheckReport> {
    let (s, t) = (phi.source().rank(), phi.target().rank());
    let pm = FieldMatrix::from_rows(phi.matrix().to_vec())?;
    let mut worst = 0usize;
    for p in &probes.points {
        let gm = g.matrix.eval(p)?;
        let rank_phi = numeric_rank(&pm.eval(p)?);
        let expected = (s - rank_phi) + (t - rank_phi);
        let nullity = gm.nrows() - numeric_rank(&gm);
        worst = worst.max(expected.abs_diff(nullity));
    }
    Ok(CheckReport::new(
        "annihilator_dimension",
        worst as f64,
        0.0,
        probes.len(),
    ))
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let scale = sv.iter().fold(0.0f64, |a, &b| a.max(b)).max(1.0);
    sv.iter().filter(|&&v| v > 1e-9 * scale).count()
}

/// Constant-rank kernel frames: vectors of `ker φ ⊂ A` (length `s`) and of
/// `ker ᵗφ ⊂ A'*` (length `s'`).
#[derive(Clone, Debug, Default)]
pub struct KernelFrames {
    pub ker: Vec<Vec<ScalarField>>,
    pub coker: Vec<Vec<ScalarField>>,
}

impl KernelFrames {
    /// Largest `|k^i φ_i^u|` and `|φ_i^u α_u|` over the frames.
    pub fn defect(&self, phi: &Morphism, probes: &Probes) -> Result<f64> {
        let (s, t) = (phi.source().rank(), phi.target().rank());
        let mut fields = Vec::new();
        for k in &self.ker {
            if k.len() != s {
                return Err(Error::Shape("kernel vector has the wrong length".into()));
            }
            for u in 0..t {
                fields.push(ScalarField::sum((0..s).map(|i| &k[i] * phi.entry(i, u))));
            }
        }
        for a in &self.coker {
            if a.len() != t {
                return Err(Error::Shape(
                    "cokernel covector has the wrong length".into(),
                ));
            }
            for i in 0..s {
                fields.push(ScalarField::sum((0..t).map(|u| phi.entry(i, u) * &a[u])));
            }
        }
        Ok(worst_over(&fields, &probes.points)?.0)
    }

    /// Frame vectors as sections of `S = A ⊕ A'*`.
    pub fn in_s(&self, s: usize, t: usize) -> Vec<Vec<ScalarField>> {
        let mut out = Vec::new();
        for k in &self.ker {
            let mut v = k.clone();
            v.extend(std::iter::repeat_n(ScalarField::zero(), t));
            out.push(v);
        }
        for a in &self.coker {
            let mut v = vec![ScalarField::zero(); s];
            v.extend(a.iter().cloned());
            out.push(v);
        }
        out
    }
}

/// Largest component of `R(b_i, b_j) k` over the kernel frames, with
/// `(R v)^t = ν^u Ω_u^t(b_i, b_j)`.
pub fn k_flatness_check(
    conn: &AConnection,
    phi: &Morphism,
    frames: &KernelFrames,
    probes: &Probes,
) -> Result<CheckReport> {
    let (s, t) = (phi.source().rank(), phi.target().rank());
    if conn.bundle_rank() != s + t {
        return Err(Error::Shape("connection does not live on A ⊕ A'*".into()));
    }
    let omega = conn.curvature()?;
    let n = s + t;
    let rank = conn.chart().rank();
    let mut fields = Vec::new();
    for v in frames.in_s(s, t) {
        for key in MultiIndex::all(rank, 2) {
            for col in 0..n {
                fields.push(ScalarField::sum(
                    (0..n)
                        .filter(|&u| !v[u].is_zero())
                        .map(|u| &v[u] * omega.get(u, col).coeff(key)),
                ));
            }
        }
    }
    let (r, _) = worst_over(&fields, &probes.points)?;
    Ok(probes.report("k_flatness", r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::AlgebroidChart;
    use crate::connection::{distinguished_pair, orthogonal_connection, s_connection};
    use crate::form::AForm;
    use crate::matrix::FormMatrix;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn solvable_to_abelian() -> Morphism {
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][1][1] = 1.0;
        c[1][0][1] = -1.0;
        let a = AlgebroidChart::lie_algebra(names(&["x"]), &c)
            .unwrap()
            .shared();
        let b = AlgebroidChart::lie_algebra(names(&["x"]), &[vec![vec![0.0]]])
            .unwrap()
            .shared();
        Morphism::new(
            a,
            b,
            vec![vec![ScalarField::one()], vec![ScalarField::zero()]],
        )
        .unwrap()
    }

    fn frames() -> KernelFrames {
        KernelFrames {
            ker: vec![vec![ScalarField::zero(), ScalarField::one()]],
            coker: vec![],
        }
    }

    #[test]
    fn distinguished_sum_is_compatible() {
        let phi = solvable_to_abelian();
        let pr = Probes::new(1, 10, 42, 1e-12);
        let (n, n2) = distinguished_pair(&phi, &pr).unwrap();
        assert!(n2.matrix().is_zero());
        let ns = s_connection(&n, &n2).unwrap();
        let (gp, gm) = quasi_metric_on_s(&phi);
        assert!(metric_compat_check(&ns, &gp, &pr).unwrap().pass);
        assert!(metric_compat_check(&ns, &gm, &pr).unwrap().pass);
        assert!(annihilator_check(&gp, &phi, &pr).unwrap().pass);
        assert!(annihilator_check(&gm, &phi, &pr).unwrap().pass);
        assert_eq!(frames().defect(&phi, &pr).unwrap(), 0.0);
        assert!(k_flatness_check(&ns, &phi, &frames(), &pr).unwrap().pass);
    }

    #[test]
    fn perturbed_target_connection_breaks_compatibility() {
        let phi = solvable_to_abelian();
        let pr = Probes::new(1, 10, 42, 1e-12);
        let (n, n2) = distinguished_pair(&phi, &pr).unwrap();
        let mut m = n2.matrix().clone();
        m.set(0, 0, AForm::basis(2, 1).scale_const(0.3));
        let bumped = AConnection::new(n2.chart().clone(), "b'", m).unwrap();
        let ns = s_connection(&n, &bumped).unwrap();
        let (gp, _) = quasi_metric_on_s(&phi);
        let r = metric_compat_check(&ns, &gp, &pr).unwrap();
        assert!(!r.pass);
        assert!((r.max_residual - 0.3).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_sum_is_not_k_flat_here() {
        // ∇⁰ = 0 ⊕ 0 is flat, so use a metric with a nonconstant entry
        let phi = solvable_to_abelian();
        let pr = Probes::new(1, 10, 42, 1e-10);
        let a = phi.source().clone();
        let coords = a.coords().to_vec();
        let g = FieldMatrix::from_rows(vec![
            vec![
                crate::parse_expression("2 + x", &coords).unwrap(),
                ScalarField::constant(0.5),
            ],
            vec![ScalarField::constant(0.5), ScalarField::one()],
        ])
        .unwrap();
        let o = orthogonal_connection(a.clone(), &g, &pr).unwrap();
        let o2 = AConnection::trivial(a, 1, "b'");
        let ns = s_connection(&o, &o2).unwrap();
        // zero anchor: d_A of functions vanishes, so ω = 0 and R = 0
        assert!(k_flatness_check(&ns, &phi, &frames(), &pr).unwrap().pass);
        // a non-distinguished constant perturbation is not K-flat
        let mut m = FormMatrix::zero(2, 1, 3);
        m.set(1, 0, AForm::basis(2, 0));
        m.set(0, 1, AForm::basis(2, 1));
        let c = AConnection::new(ns.chart().clone(), "s", m).unwrap();
        assert!(!k_flatness_check(&c, &phi, &frames(), &pr).unwrap().pass);
    }
}
