use std::sync::Arc;

use super::AConnection;
use crate::algebroid::AlgebroidChart;
use crate::error::Result;
use crate::expr::ScalarField;
use crate::form::AForm;
use crate::matrix::{FieldMatrix, FormMatrix};

/// Connection on `A × T[0, 1]` written as `ω_(τ) + λ dτ`, where `ω_(τ)` is a
/// τ-dependent matrix of 1-forms on `A` and `λ` the transverse component.
/// The coordinate τ is base variable index `m`.
#[derive(Clone, Debug)]
pub struct ConnectionFamily {
    base: Arc<AlgebroidChart>,
    link: Arc<AlgebroidChart>,
    omega: FormMatrix,
    lambda: FieldMatrix,
}

impl ConnectionFamily {
    pub fn new(base: Arc<AlgebroidChart>, omega: FormMatrix, lambda: FieldMatrix) -> Result<Self> {
        let link = Arc::new(base.build_link_chart());
        AConnection::new(base.clone(), "family", omega.clone())?;
        if lambda.rows() != omega.dim() || lambda.cols() != omega.dim() {
            return Err(crate::error::Error::Shape(
                "transverse matrix has the wrong size".into(),
            ));
        }
        Ok(ConnectionFamily {
            base,
            link,
            omega,
            lambda,
        })
    }

    /// `(1 − τ) ∇⁰ + τ ∇¹` with no transverse part.
    pub fn affine(c0: &AConnection, c1: &AConnection) -> Result<Self> {
        c0.same_bundle(c1)?;
        let tau = ScalarField::var(c0.chart().base_dim());
        let omega = c0
            .matrix()
            .scale(&(ScalarField::one() - &tau))
            .try_add(&c1.matrix().scale(&tau))?;
        let n = c0.bundle_rank();
        ConnectionFamily::new(c0.chart().clone(), omega, FieldMatrix::zeros(n, n))
    }

    pub fn link_chart(&self) -> &Arc<AlgebroidChart> {
        &self.link
    }

    pub fn omega(&self) -> &FormMatrix {
        &self.omega
    }

    pub fn lambda(&self) -> &FieldMatrix {
        &self.lambda
    }

    fn tau_index(&self) -> usize {
        self.base.base_dim()
    }

    /// The slice at a fixed parameter value.
    pub fn slice(&self, tau: f64) -> Result<AConnection> {
        let m = self
            .omega
            .substitute(self.tau_index(), &ScalarField::constant(tau));
        AConnection::new(self.base.clone(), format!("tau={tau}"), m)
    }

    /// The family as one connection on the link chart.
    pub fn as_link_connection(&self) -> Result<AConnection> {
        let s = self.base.rank();
        let mut m = self.omega.embed(s + 1);
        let dtau = AForm::basis(s + 1, s);
        for u in 0..m.dim() {
            for t in 0..m.dim() {
                let l = self.lambda.get(u, t);
                if !l.is_zero() {
                    let e = m.get(u, t).add(&dtau.scale(l));
                    m.set(u, t, e);
                }
            }
        }
        AConnection::new(self.link.clone(), "link", m)
    }

    /// `(Ω_(τ), Λ)` with the link curvature equal to `Ω_(τ) + Λ ∧ dτ`:
    /// `Ω_(τ) = d_A ω − ω∧ω`, `Λ = d_A λ + λω − ωλ − ∂_τ ω`.
    pub fn link_curvature(&self) -> Result<(FormMatrix, FormMatrix)> {
        let omega_tau = self
            .omega
            .d(&self.base)?
            .try_sub(&self.omega.wedge(&self.omega)?)?;
        let tau = self.tau_index();
        let d_tau = self.omega.map(|e| e.map(|c| c.derivative(tau)));
        let lam = self
            .lambda
            .d(&self.base)?
            .try_add(&self.omega.fields_mul(&self.lambda)?)?
            .try_sub(&self.omega.mul_fields(&self.lambda)?)?
            .try_sub(&d_tau)?;
        Ok((omega_tau, lam))
    }

    /// Assembles `Ω_(τ) + Λ ∧ dτ` on the link chart.
    pub fn assemble_link_curvature(
        &self,
        omega_tau: &FormMatrix,
        lam: &FormMatrix,
    ) -> Result<FormMatrix> {
        let s = self.base.rank();
        let dtau = AForm::basis(s + 1, s);
        let lifted = lam.embed(s + 1);
        let tail = lifted.map(|e| e.wedge(&dtau).expect("ranks agree"));
        omega_tau.embed(s + 1).try_add(&tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::Morphism;
    use crate::check::Probes;
    use crate::check::{form_residual, sample_points};
    use crate::connection::distinguished_pair;
    use crate::expr::parse_expression;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn max_entry(m: &FormMatrix, pts: &[Vec<f64>]) -> f64 {
        m.entries()
            .iter()
            .map(|e| form_residual(e, pts).unwrap())
            .fold(0.0, f64::max)
    }

    #[test]
    fn affine_link_transverse_part_is_minus_alpha() {
        let t = AlgebroidChart::tangent(names(&["x", "y"])).shared();
        let coords = t.coords().to_vec();
        let p = |s: &str| parse_expression(s, &coords).unwrap();
        let mut m0 = FormMatrix::zero(2, 1, 2);
        m0.set(0, 1, AForm::basis(2, 0).scale(&p("x*y")));
        let mut m1 = FormMatrix::zero(2, 1, 2);
        m1.set(1, 0, AForm::basis(2, 1).scale(&p("sin(x)")));
        m1.set(0, 0, AForm::basis(2, 0).scale(&p("y^2")));
        let c0 = AConnection::new(t.clone(), "e", m0).unwrap();
        let c1 = AConnection::new(t.clone(), "e", m1).unwrap();
        let fam = ConnectionFamily::affine(&c0, &c1).unwrap();
        let (_, lam) = fam.link_curvature().unwrap();
        let alpha = c0.difference(&c1).unwrap();
        let pts = sample_points(3, 20, 4);
        assert!(max_entry(&lam.add(&alpha), &pts) < 1e-14);
    }

    #[test]
    fn decomposition_matches_generic_curvature() {
        let t = AlgebroidChart::tangent(names(&["x"])).shared();
        let coords = names(&["x", "tau"]);
        let p = |s: &str| parse_expression(s, &coords).unwrap();
        let mut om = FormMatrix::zero(1, 1, 2);
        om.set(0, 1, AForm::basis(1, 0).scale(&p("x*tau^2")));
        om.set(1, 1, AForm::basis(1, 0).scale(&p("cos(tau) + x")));
        let lam =
            FieldMatrix::from_rows(vec![vec![p("tau*x"), p("1")], vec![p("x^2"), p("0")]]).unwrap();
        let fam = ConnectionFamily::new(t, om, lam).unwrap();
        let (o, l) = fam.link_curvature().unwrap();
        let assembled = fam.assemble_link_curvature(&o, &l).unwrap();
        let generic = fam.as_link_connection().unwrap().curvature().unwrap();
        let pts = sample_points(2, 30, 8);
        assert!(max_entry(&assembled.sub(&generic), &pts) < 1e-12);
    }

    #[test]
    fn zero_anchor_affine_slice_curvature() {
        // Ω_(τ) = τ(1−τ) α∧α when both ends are flat and the anchor is zero
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][1][1] = 1.0;
        c[1][0][1] = -1.0;
        let a = AlgebroidChart::lie_algebra(names(&["x"]), &c)
            .unwrap()
            .shared();
        let id = Morphism::identity(a.clone());
        let (d, _) = distinguished_pair(&id, &Probes::new(1, 5, 1, 1e-9)).unwrap();
        let z = AConnection::trivial(a, 2, "b");
        assert!(d.curvature().unwrap().is_zero());
        let fam = ConnectionFamily::affine(&z, &d).unwrap();
        let (o, _) = fam.link_curvature().unwrap();
        let alpha = z.difference(&d).unwrap();
        let aa = alpha.wedge(&alpha).unwrap();
        let tau = ScalarField::var(1);
        let want = aa.scale(&(&tau * (ScalarField::one() - &tau)));
        assert!(max_entry(&o.sub(&want), &sample_points(2, 10, 2)) < 1e-14);
    }

    #[test]
    fn constant_family_has_no_transverse_curvature() {
        let t = AlgebroidChart::tangent(names(&["x"])).shared();
        let mut m = FormMatrix::zero(1, 1, 1);
        m.set(0, 0, AForm::basis(1, 0).scale(&ScalarField::var(0)));
        let c = AConnection::new(t, "e", m).unwrap();
        let fam = ConnectionFamily::affine(&c, &c).unwrap();
        let (_, lam) = fam.link_curvature().unwrap();
        assert!(max_entry(&lam, &sample_points(2, 5, 3)) < 1e-15);
        let mid = fam.slice(0.5).unwrap();
        assert!(
            form_residual(
                &mid.matrix().get(0, 0).sub(c.matrix().get(0, 0)),
                &sample_points(1, 4, 1)
            )
            .unwrap()
                < 1e-15
        );
    }
}
