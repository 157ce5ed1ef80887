//! Modular forms and representatives of the secondary classes of a morphism:
//! `μ_{2h−1}`, bi-characteristic, relative and jet-relative classes.

use std::sync::Arc;

use serde::Serialize;

use crate::algebroid::{jet_projection, jet_prolong};
use crate::algebroid::{AlgebroidChart, Morphism};
use crate::check::{form_distance, form_residual, CheckReport, Probes};
use crate::chern_weil::bott_delta;
use crate::connection::{distinguished_pair, orthogonal_connection, s_connection, AConnection};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::{multi_index_label, AForm, MultiIndex};
use crate::matrix::FieldMatrix;

/// A class representative with the data it was built from.
#[derive(Clone, Debug)]
pub struct ClassReport {
    pub class: String,
    pub chart: Arc<AlgebroidChart>,
    pub form: AForm,
    pub connections: Vec<String>,
    pub closedness: CheckReport,
}

impl ClassReport {
    fn new(
        class: String,
        chart: Arc<AlgebroidChart>,
        form: AForm,
        connections: Vec<String>,
        probes: &Probes,
    ) -> Result<Self> {
        let closedness = closedness_check(&chart, &form, probes, format!("{class}_closed"))?;
        Ok(ClassReport {
            class,
            chart,
            form,
            connections,
            closedness,
        })
    }

    pub fn degree(&self) -> usize {
        self.form.degree()
    }

    /// Coefficients as expression strings with their values at `points`.
    pub fn dump(&self, points: &[Vec<f64>]) -> Result<FormDump> {
        FormDump::new(&self.form, self.chart.coords(), points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormDump {
    pub degree: usize,
    pub rank: usize,
    pub terms: Vec<TermDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermDump {
    pub index: String,
    pub expression: String,
    pub values: Vec<f64>,
}

impl FormDump {
    pub fn new(form: &AForm, coords: &[String], points: &[Vec<f64>]) -> Result<Self> {
        let compiled = form.compile();
        let mut values: Vec<Vec<f64>> =
            vec![Vec::with_capacity(points.len()); compiled.keys().len()];
        for p in points {
            for (n, (_, v)) in compiled.eval(p)?.into_iter().enumerate() {
                values[n].push(v);
            }
        }
        let terms = form
            .terms()
            .zip(values)
            .map(|((key, c), values)| TermDump {
                index: multi_index_label(*key),
                expression: c.display(coords).to_string(),
                values,
            })
            .collect();
        Ok(FormDump {
            degree: form.degree(),
            rank: form.rank(),
            terms,
        })
    }
}

/// `max |d_A form|` over the probe points.
pub fn closedness_check(
    chart: &AlgebroidChart,
    form: &AForm,
    probes: &Probes,
    name: impl Into<String>,
) -> Result<CheckReport> {
    let r = form_residual(&chart.d(form)?, &probes.points)?;
    Ok(probes.report(name, r))
}

/// `λ = Σ_i (Σ_k γ_ik^k + Σ_j ∂_j ρ_i^j) b*^i`.
pub fn modular_form(chart: &AlgebroidChart) -> AForm {
    let s = chart.rank();
    let mut out = AForm::zero(s, 1);
    for i in 0..s {
        let mut terms: Vec<ScalarField> = (0..s).map(|k| chart.gamma(i, k, k).clone()).collect();
        terms.extend((0..chart.base_dim()).map(|j| chart.anchor(i, j).derivative(j)));
        out.add_term(MultiIndex::single(i), ScalarField::sum(terms));
    }
    out
}

/// `λ_A − φ*λ_A'`.
pub fn modular_form_morphism(phi: &Morphism, probes: &Probes) -> Result<AForm> {
    phi.require_valid(&probes.points, probes.tol)?;
    let pulled = phi.pullback(&modular_form(phi.target()))?;
    modular_form(phi.source()).try_sub(&pulled)
}

/// Fiber metrics on the two summands of `S = E ⊕ F*`; `None` means the
/// identity matrix in the working frame.
#[derive(Clone, Debug, Default)]
pub struct MetricPair {
    pub first: Option<FieldMatrix>,
    pub second: Option<FieldMatrix>,
}

impl MetricPair {
    pub fn new(first: Option<FieldMatrix>, second: Option<FieldMatrix>) -> Self {
        MetricPair { first, second }
    }
}

/// `orth(g_E) ⊕ orth(g_F)*` as `A`-connections on `E ⊕ F*`.
fn orthogonal_s_connection(
    chart: &Arc<AlgebroidChart>,
    dims: (usize, usize),
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<AConnection> {
    let pick =
        |g: &Option<FieldMatrix>, n: usize| g.clone().unwrap_or_else(|| FieldMatrix::identity(n));
    let g1 = pick(&metrics.first, dims.0);
    let g2 = pick(&metrics.second, dims.1);
    if g1.rows() != dims.0 || g2.rows() != dims.1 {
        return Err(Error::Shape("metric size does not match its bundle".into()));
    }
    let o1 = orthogonal_connection(chart.clone(), &g1, probes)?;
    let o2 = orthogonal_connection(chart.clone(), &g2, probes)?;
    s_connection(&o1, &o2)
}

/// The connections `(∇⁰, ∇¹)` on `S = A ⊕ A'*` used for `μ_{2h−1}(φ)`.
pub fn mu_connections(
    phi: &Morphism,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<(AConnection, AConnection)> {
    let (d, d2) = distinguished_pair(phi, probes)?;
    let n1 = s_connection(&d, &d2)?;
    let dims = (phi.source().rank(), phi.target().rank());
    let n0 = orthogonal_s_connection(phi.source(), dims, metrics, probes)?;
    Ok((n0, n1))
}

/// `Ξ_{2h−1} = Δ(∇⁰, ∇¹) c_{2h−1}` with `∇⁰` orthogonal and `∇¹` the
/// distinguished connection on `S`.
pub fn mu_form(
    phi: &Morphism,
    h: usize,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<ClassReport> {
    let (n0, n1) = mu_connections(phi, metrics, probes)?;
    mu_form_with(phi, h, &n0, &n1, probes)
}

/// `Δ(∇⁰, ∇¹) c_{2h−1}` for caller-supplied connections on `S`.
pub fn mu_form_with(
    phi: &Morphism,
    h: usize,
    n0: &AConnection,
    n1: &AConnection,
    probes: &Probes,
) -> Result<ClassReport> {
    if h == 0 {
        return Err(Error::Invalid("classes are indexed from h = 1".into()));
    }
    let form = bott_delta(&[n0.clone(), n1.clone()], 2 * h - 1)?;
    ClassReport::new(
        format!("mu_{}", 2 * h - 1),
        phi.source().clone(),
        form,
        vec![n0.frame().to_string(), n1.frame().to_string()],
        probes,
    )
}

/// `Δ(∇¹, ∇²) c_{2h−1}` for the distinguished connections of `φ₁` and `φ₂`,
/// with the check `μ(φ₁) − μ(φ₂) + bi = d_A Δ(∇⁰, ∇¹, ∇²) c_{2h−1}`.
pub fn bi_characteristic(
    phi1: &Morphism,
    phi2: &Morphism,
    h: usize,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<(ClassReport, CheckReport)> {
    if phi1.source().rank() != phi2.source().rank() || phi1.target().rank() != phi2.target().rank()
    {
        return Err(Error::Shape(
            "morphisms act between different algebroids".into(),
        ));
    }
    let (n0, n1) = mu_connections(phi1, metrics, probes)?;
    let (_, n2) = mu_connections(phi2, metrics, probes)?;
    let c = 2 * h - 1;
    let bi = bott_delta(&[n1.clone(), n2.clone()], c)?;
    let mu1 = bott_delta(&[n0.clone(), n1.clone()], c)?;
    let mu2 = bott_delta(&[n0.clone(), n2.clone()], c)?;
    let chart = phi1.source().clone();
    let exact = chart.d(&bott_delta(&[n0, n1.clone(), n2.clone()], c)?)?;
    let lhs = mu1.try_sub(&mu2)?.try_add(&bi)?;
    let identity = probes.report(
        format!("bi_characteristic_identity_c{c}"),
        form_distance(&lhs, &exact, &probes.points)?,
    );
    let report = ClassReport::new(
        format!("bi_{c}"),
        chart,
        bi,
        vec![n1.frame().to_string(), n2.frame().to_string()],
        probes,
    )?;
    Ok((report, identity))
}

/// `A`-connections `∇'_{b_i} = [φ b_i, ·]` on `A'` and `∇''_{b_i} = [ψφ b_i, ·]`
/// on `A''`, summed into `D¹` on `A' ⊕ A''*`, with `D⁰` orthogonal.
pub fn relative_connections(
    phi: &Morphism,
    psi: &Morphism,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<(AConnection, AConnection)> {
    let composite = phi.compose(psi)?;
    let (_, on_mid) = distinguished_pair(phi, probes)?;
    psi.require_valid(&probes.points, probes.tol)?;
    let (_, on_far) = distinguished_pair(&composite, probes)?;
    let d1 = s_connection(&on_mid, &on_far)?;
    let dims = (phi.target().rank(), psi.target().rank());
    let d0 = orthogonal_s_connection(phi.source(), dims, metrics, probes)?;
    Ok((d0, d1))
}

/// `μ_{2h−1}(ψ mod φ) = Δ(D⁰, D¹) c_{2h−1}`, a form on `A`.
pub fn relative_mu(
    phi: &Morphism,
    psi: &Morphism,
    h: usize,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<ClassReport> {
    let (d0, d1) = relative_connections(phi, psi, metrics, probes)?;
    if h == 0 {
        return Err(Error::Invalid("classes are indexed from h = 1".into()));
    }
    let form = bott_delta(&[d0.clone(), d1.clone()], 2 * h - 1)?;
    ClassReport::new(
        format!("relative_mu_{}", 2 * h - 1),
        phi.source().clone(),
        form,
        vec![d0.frame().to_string(), d1.frame().to_string()],
        probes,
    )
}

/// Metrics on `A`, `A'`, `A''` for a chain `A → A' → A''`.
#[derive(Clone, Debug, Default)]
pub struct ChainMetrics {
    pub a: Option<FieldMatrix>,
    pub a1: Option<FieldMatrix>,
    pub a2: Option<FieldMatrix>,
}

/// First-class composition laws for `φ: A → A'`, `ψ: A' → A''`:
/// `μ₁(ψ mod φ) = φ*μ₁(ψ)`, `μ₁(ψφ) = μ₁(φ) + μ₁(ψ mod φ)` and
/// `μ₁(ψφ) = μ₁(φ) + φ*μ₁(ψ)`, each compared pointwise.
pub fn composition_checks(
    phi: &Morphism,
    psi: &Morphism,
    metrics: &ChainMetrics,
    probes: &Probes,
) -> Result<Vec<CheckReport>> {
    let composite = phi.compose(psi)?;
    let on_phi = MetricPair::new(metrics.a.clone(), metrics.a1.clone());
    let on_psi = MetricPair::new(metrics.a1.clone(), metrics.a2.clone());
    let on_comp = MetricPair::new(metrics.a.clone(), metrics.a2.clone());
    let mu_phi = mu_form(phi, 1, &on_phi, probes)?.form;
    let mu_psi = mu_form(psi, 1, &on_psi, probes)?.form;
    let mu_comp = mu_form(&composite, 1, &on_comp, probes)?.form;
    let rel = relative_mu(phi, psi, 1, &on_psi, probes)?.form;
    let pulled = phi.pullback(&mu_psi)?;
    let pts = &probes.points;
    Ok(vec![
        probes.report("relative_is_pullback", form_distance(&rel, &pulled, pts)?),
        probes.report(
            "composition_relative",
            form_distance(&mu_comp, &mu_phi.try_add(&rel)?, pts)?,
        ),
        probes.report(
            "composition_pullback",
            form_distance(&mu_comp, &mu_phi.try_add(&pulled)?, pts)?,
        ),
    ])
}

/// Representative of `μ_{2h−1}(φ mod π¹)` on `J¹A`, built from the flat
/// `J¹A`-connections `∇_{j¹u} = [u, ·]` on `A` and `[φu, ·]` on `A'`, plus
/// the check against `π¹*` of the absolute representative and the flatness
/// of both jet connections.
pub fn jet_relative(
    phi: &Morphism,
    h: usize,
    metrics: &MetricPair,
    probes: &Probes,
) -> Result<JetReport> {
    let base = phi.source().clone();
    let jet = Arc::new(jet_prolong(&base)?);
    let pi = jet_projection(base, jet.clone())?;
    let relative = relative_mu(&pi, phi, h, metrics, probes)?;
    let (_, on_a) = distinguished_pair(&pi, probes)?;
    let (_, on_target) = distinguished_pair(&pi.compose(phi)?, probes)?;
    let mut flatness = Vec::new();
    for (name, c) in [("jet_flat_source", &on_a), ("jet_flat_target", &on_target)] {
        let r = c
            .curvature()?
            .entries()
            .iter()
            .map(|e| form_residual(e, &probes.points))
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))?;
        flatness.push(probes.report(name, r));
    }
    let absolute = mu_form(phi, h, metrics, probes)?;
    let pulled = pi.pullback(&absolute.form)?;
    let agreement = probes.report(
        format!("jet_relative_is_pullback_c{}", 2 * h - 1),
        form_distance(&relative.form, &pulled, &probes.points)?,
    );
    Ok(JetReport {
        relative: ClassReport {
            class: format!("jet_relative_mu_{}", 2 * h - 1),
            ..relative
        },
        absolute,
        agreement,
        flatness,
    })
}

#[derive(Clone, Debug)]
pub struct JetReport {
    pub relative: ClassReport,
    pub absolute: ClassReport,
    pub agreement: CheckReport,
    pub flatness: Vec<CheckReport>,
}

/// Replacing the orthogonal connection changes `Ξ` by
/// `d_A Δ(∇⁰_old, ∇⁰_new, ∇¹) − Δ(∇⁰_old, ∇⁰_new)`; the check compares both
/// sides of that identity.
pub fn orthogonal_change_check(
    phi: &Morphism,
    h: usize,
    old: &MetricPair,
    new: &MetricPair,
    probes: &Probes,
) -> Result<CheckReport> {
    let (o, n1) = mu_connections(phi, old, probes)?;
    let (n, _) = mu_connections(phi, new, probes)?;
    let c = 2 * h - 1;
    let chart = phi.source();
    let diff = bott_delta(&[n.clone(), n1.clone()], c)?
        .try_sub(&bott_delta(&[o.clone(), n1.clone()], c)?)?;
    let witness = chart
        .d(&bott_delta(&[o.clone(), n.clone(), n1], c)?)?
        .try_sub(&bott_delta(&[o, n], c)?)?;
    Ok(probes.report(
        format!("orthogonal_change_exact_c{c}"),
        form_distance(&diff, &witness, &probes.points)?,
    ))
}
