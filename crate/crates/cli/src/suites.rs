//! Verification suites over a loaded fixture.

use std::str::FromStr;
use std::sync::Arc;

use algebroid_core::algebroid::{jet_projection, jet_prolong};
use algebroid_core::chern_weil::{chern_form, cocycle_check, transgression_check};
use algebroid_core::classes::{
    bi_characteristic, closedness_check, composition_checks, jet_relative, modular_form,
    modular_form_morphism, mu_connections, mu_form, orthogonal_change_check, ChainMetrics,
    FormDump, MetricPair,
};
use algebroid_core::connection::{
    annihilator_check, distinguished_pair, k_flatness_check, metric_compat_check,
    orthogonal_connection, quasi_metric_on_s,
};
use algebroid_core::{
    form_distance, form_residual, sample_points, AConnection, AForm, AlgebroidChart, CheckReport,
    FieldMatrix, FormMatrix, Morphism, MultiIndex, Probes, ScalarField,
};

use crate::fixture::{Fixture, MorphismEntry};
use crate::report::{NamedDump, Options, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Axioms,
    Connections,
    Transgression,
    Classes,
    Composition,
    Jet,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Axioms,
        Suite::Connections,
        Suite::Transgression,
        Suite::Classes,
        Suite::Composition,
        Suite::Jet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Axioms => "axioms",
            Suite::Connections => "connections",
            Suite::Transgression => "transgression",
            Suite::Classes => "classes",
            Suite::Composition => "composition",
            Suite::Jet => "jet",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown suite `{0}` (expected axioms, connections, transgression, classes, composition, jet or all)")]
pub struct UnknownSuite(pub String);

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(Suite::All)
            .chain(Suite::EACH)
            .find(|x| x.name() == s)
            .ok_or_else(|| UnknownSuite(s.to_string()))
    }
}

/// Tolerance relative to the base tolerance (1e-9 by default).
#[derive(Clone, Copy)]
enum Scale {
    /// ×10, for identities that go through τ-quadrature
    Loose,
    /// ÷10, for identities that are exact in floating point
    Tight,
}

pub struct Context<'a> {
    pub fixture: &'a Fixture,
    pub options: &'a Options,
    pub probes: Probes,
}

impl<'a> Context<'a> {
    pub fn new(fixture: &'a Fixture, options: &'a Options) -> Self {
        let probes = Probes::new(
            fixture.coords.len(),
            options.points,
            options.seed,
            options.tol,
        );
        Context {
            fixture,
            options,
            probes,
        }
    }

    fn scaled(&self, scale: Scale) -> Probes {
        let tol = self.options.tol;
        self.probes.with_tol(match scale {
            Scale::Loose => tol * 10.0,
            Scale::Tight => tol / 10.0,
        })
    }

    fn metrics(&self, entry: &MorphismEntry) -> MetricPair {
        MetricPair::new(
            self.fixture
                .metric_for(&entry.from, entry.source_metric.as_ref()),
            self.fixture
                .metric_for(&entry.to, entry.target_metric.as_ref()),
        )
    }

    /// Ordered pairs of distinct morphisms with the same source and target.
    fn parallel_pairs(&self) -> Vec<(&'a str, &'a MorphismEntry, &'a str, &'a MorphismEntry)> {
        let ms: Vec<_> = self.fixture.morphisms.iter().collect();
        let mut out = Vec::new();
        for (a, (n1, m1)) in ms.iter().enumerate() {
            for (n2, m2) in &ms[a + 1..] {
                if m1.from == m2.from && m1.to == m2.to {
                    out.push((n1.as_str(), *m1, n2.as_str(), *m2));
                }
            }
        }
        out
    }
}

/// Runs `f`, turning an error into a failing check named `name`.
fn guarded<F>(name: String, f: F) -> Vec<CheckReport>
where
    F: FnOnce() -> algebroid_core::Result<Vec<CheckReport>>,
{
    match f() {
        Ok(checks) => checks,
        Err(e) => {
            vec![CheckReport::new(name, f64::INFINITY, 0.0, 0).with_detail(format!("error: {e}"))]
        }
    }
}

fn renamed(mut c: CheckReport, name: String) -> CheckReport {
    c.name = name;
    c
}

fn matrix_residual(m: &FormMatrix, points: &[Vec<f64>]) -> algebroid_core::Result<f64> {
    m.entries()
        .iter()
        .map(|e| form_residual(e, points))
        .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
}

fn bianchi(c: &AConnection, probes: &Probes, name: String) -> algebroid_core::Result<CheckReport> {
    let omega = c.curvature()?;
    let lhs = omega.d(c.chart())?;
    let rhs = c
        .matrix()
        .wedge(&omega)?
        .try_sub(&omega.wedge(c.matrix())?)?;
    Ok(probes.report(name, matrix_residual(&lhs.try_sub(&rhs)?, &probes.points)?))
}

/// Quadratic polynomial in the base coordinates with coefficients in `[-1, 1]`
/// drawn from `stream`.
fn polynomial(m: usize, seed: u64, stream: u64) -> ScalarField {
    let n = 1 + m + m * (m + 1) / 2;
    let c = &sample_points(n, 1, seed.wrapping_mul(1_000_003).wrapping_add(stream))[0];
    let mut terms = vec![ScalarField::constant(c[0])];
    let mut k = 1;
    for j in 0..m {
        terms.push(ScalarField::constant(c[k]) * ScalarField::var(j));
        k += 1;
    }
    for j in 0..m {
        for l in j..m {
            terms.push(ScalarField::constant(c[k]) * ScalarField::var(j) * ScalarField::var(l));
            k += 1;
        }
    }
    ScalarField::sum(terms)
}

fn polynomial_one_form(chart: &AlgebroidChart, seed: u64, stream: u64) -> AForm {
    let s = chart.rank();
    let mut w = AForm::zero(s, 1);
    for i in 0..s {
        w.add_term(
            MultiIndex::single(i),
            polynomial(chart.base_dim(), seed, stream * 64 + i as u64),
        );
    }
    w
}

fn polynomial_connection(
    chart: &Arc<AlgebroidChart>,
    n: usize,
    seed: u64,
) -> algebroid_core::Result<AConnection> {
    let mut stream = 1000;
    let m = FormMatrix::from_fn(chart.rank(), 1, n, |_, _| {
        stream += 1;
        polynomial_one_form(chart, seed, stream)
    });
    AConnection::new(chart.clone(), "e", m)
}

/// `diag(2 + x₁², 1, …)`, or the identity on a zero-dimensional base.
fn synthetic_metric(chart: &AlgebroidChart) -> FieldMatrix {
    let s = chart.rank();
    FieldMatrix::from_fn(s, s, |i, j| {
        if i != j {
            ScalarField::zero()
        } else if i == 0 && chart.base_dim() > 0 {
            ScalarField::constant(2.0) + ScalarField::var(0).powi(2)
        } else {
            ScalarField::one()
        }
    })
}

pub fn axioms(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = &ctx.probes;
    for (name, a) in &ctx.fixture.algebroids {
        out.extend(chart_axioms(a, &format!("axioms.{name}"), ctx));
    }
    for (name, m) in &ctx.fixture.morphisms {
        out.extend(guarded(format!("axioms.{name}.morphism"), || {
            Ok(m.morphism
                .check(&p.points, p.tol)?
                .checks(&format!("axioms.{name}.")))
        }));
    }
    out
}

fn chart_axioms(a: &AlgebroidChart, prefix: &str, ctx: &Context) -> Vec<CheckReport> {
    let p = &ctx.probes;
    guarded(format!("{prefix}.axioms"), || {
        let mut out = a
            .verify_axioms(&p.points, p.tol)?
            .checks(&format!("{prefix}."));
        let seed = ctx.options.seed;
        let f = AForm::function(a.rank(), polynomial(a.base_dim(), seed, 0));
        let w = polynomial_one_form(a, seed, 1);
        let mut worst = 0.0f64;
        for form in [f, w] {
            worst = worst.max(form_residual(&a.d(&a.d(&form)?)?, &p.points)?);
        }
        out.push(p.report(format!("{prefix}.d_squared"), worst));
        Ok(out)
    })
}

pub fn connections(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = &ctx.probes;
    let seed = ctx.options.seed;
    for (name, a) in &ctx.fixture.algebroids {
        let pre = format!("connections.{name}");
        out.extend(guarded(format!("{pre}.bianchi"), || {
            let poly = polynomial_connection(a, 2, seed)?;
            let (adjoint, _) = distinguished_pair(&Morphism::identity(a.clone()), p)?;
            let g = ctx
                .fixture
                .metric_for(name, None)
                .unwrap_or_else(|| synthetic_metric(a));
            let orth = orthogonal_connection(a.clone(), &g, p)?;
            Ok(vec![
                bianchi(&poly, p, format!("{pre}.bianchi_polynomial"))?,
                bianchi(&adjoint, p, format!("{pre}.bianchi_distinguished"))?,
                bianchi(&orth, p, format!("{pre}.bianchi_orthogonal"))?,
            ])
        }));
    }
    for (name, m) in &ctx.fixture.morphisms {
        let pre = format!("connections.{name}");
        out.extend(guarded(format!("{pre}.s_connections"), || {
            let phi = &m.morphism;
            let (n0, n1) = mu_connections(phi, &ctx.metrics(m), p)?;
            let (g_plus, g_minus) = quasi_metric_on_s(phi);
            let mut checks = vec![
                bianchi(&n0, p, format!("{pre}.bianchi_s_orthogonal"))?,
                bianchi(&n1, p, format!("{pre}.bianchi_s_distinguished"))?,
                renamed(
                    metric_compat_check(&n1, &g_plus, p)?,
                    format!("{pre}.compatible_g_plus"),
                ),
                renamed(
                    metric_compat_check(&n1, &g_minus, p)?,
                    format!("{pre}.compatible_g_minus"),
                ),
            ];
            if let Some(frames) = ctx.fixture.kernels.get(name) {
                checks.push(p.report(format!("{pre}.kernel_frames"), frames.defect(phi, p)?));
                let flat = k_flatness_check(&n1, phi, frames, &ctx.scaled(Scale::Tight))?;
                checks.push(renamed(flat, format!("{pre}.k_flatness")));
                checks.push(renamed(
                    annihilator_check(&g_plus, phi, p)?,
                    format!("{pre}.annihilator"),
                ));
            }
            Ok(checks)
        }));
    }
    out
}

/// Chern degrees checked for a bundle of the given rank.
fn chern_degrees(rank: usize) -> std::ops::RangeInclusive<usize> {
    1..=rank.min(2)
}

pub fn transgression(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = ctx.scaled(Scale::Loose);
    for (name, m) in &ctx.fixture.morphisms {
        let pre = format!("transgression.{name}");
        out.extend(guarded(pre.clone(), || {
            let (n0, n1) = mu_connections(&m.morphism, &ctx.metrics(m), &p)?;
            // both ends are usually flat on S, so a polynomial connection is
            // paired with ∇¹ as well to get nonzero Chern forms (S of rank
            // ≤ 6 only, beyond which the dense forms get slow)
            let poly = if n1.bundle_rank() <= 6 {
                Some(polynomial_connection(
                    n1.chart(),
                    n1.bundle_rank(),
                    ctx.options.seed,
                )?)
            } else {
                None
            };
            let mut checks = Vec::new();
            for h in chern_degrees(n0.bundle_rank()) {
                checks.push(renamed(
                    transgression_check(&n0, &n1, h, &p)?,
                    format!("{pre}.c{h}"),
                ));
                if let Some(poly) = &poly {
                    checks.push(renamed(
                        transgression_check(poly, &n1, h, &p)?,
                        format!("{pre}.polynomial_c{h}"),
                    ));
                }
            }
            Ok(checks)
        }));
    }
    for (n1, m1, n2, m2) in ctx.parallel_pairs() {
        let pre = format!("transgression.{n1}+{n2}");
        out.extend(guarded(pre.clone(), || {
            let (c0, c1) = mu_connections(&m1.morphism, &ctx.metrics(m1), &p)?;
            let (_, c2) = mu_connections(&m2.morphism, &ctx.metrics(m2), &p)?;
            chern_degrees(c0.bundle_rank())
                .map(|h| {
                    Ok(renamed(
                        cocycle_check(&c0, &c1, &c2, h, &p)?,
                        format!("{pre}.cocycle_c{h}"),
                    ))
                })
                .collect()
        }));
    }
    out
}

pub fn classes(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = &ctx.probes;
    for (name, a) in &ctx.fixture.algebroids {
        out.extend(guarded(format!("classes.{name}.modular"), || {
            Ok(vec![closedness_check(
                a,
                &modular_form(a),
                p,
                format!("classes.{name}.modular_closed"),
            )?])
        }));
    }
    for (name, m) in &ctx.fixture.morphisms {
        let pre = format!("classes.{name}");
        out.extend(guarded(pre.clone(), || {
            let metrics = ctx.metrics(m);
            let mut checks = Vec::new();
            let (n0, n1) = mu_connections(&m.morphism, &metrics, p)?;
            for (label, c) in [("orthogonal", &n0), ("distinguished", &n1)] {
                let curv = c.curvature()?;
                for h in chern_degrees(c.bundle_rank()) {
                    let form = chern_form(&curv, h)?;
                    checks.push(closedness_check(
                        c.chart(),
                        &form,
                        p,
                        format!("{pre}.chern_c{h}_{label}_closed"),
                    )?);
                }
            }
            for h in 1..=2 {
                let xi = mu_form(&m.morphism, h, &metrics, p)?;
                checks.push(renamed(
                    xi.closedness,
                    format!("{pre}.mu_{}_closed", 2 * h - 1),
                ));
            }
            checks.extend(class_identities_for(ctx, name, m)?);
            Ok(checks)
        }));
    }
    out.extend(bi_identities(ctx));
    out
}

/// Identities for one morphism: `Ξ₁ = λ − φ*λ'` and, when the fixture
/// supplies metrics, exactness of the change of orthogonal connection.
fn class_identities_for(
    ctx: &Context,
    name: &str,
    m: &MorphismEntry,
) -> algebroid_core::Result<Vec<CheckReport>> {
    let pre = format!("classes.{name}");
    let p = &ctx.probes;
    let metrics = ctx.metrics(m);
    // pointwise equality needs a trace-free ∇⁰, i.e. the identity metrics;
    // other metrics shift Ξ₁ by d_A log det, covered by the change check
    let xi = mu_form(&m.morphism, 1, &MetricPair::default(), p)?;
    let lambda = modular_form_morphism(&m.morphism, p)?;
    let mut checks = vec![ctx.scaled(Scale::Tight).report(
        format!("{pre}.mu_1_is_modular"),
        form_distance(&xi.form, &lambda, &p.points)?,
    )];
    if metrics.first.is_some() || metrics.second.is_some() {
        let loose = ctx.scaled(Scale::Loose);
        for h in 1..=2 {
            let c =
                orthogonal_change_check(&m.morphism, h, &MetricPair::default(), &metrics, &loose)?;
            checks.push(renamed(
                c,
                format!("{pre}.orthogonal_change_c{}", 2 * h - 1),
            ));
        }
    }
    Ok(checks)
}

fn bi_identities(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = ctx.scaled(Scale::Loose);
    for (n1, m1, n2, _) in ctx.parallel_pairs() {
        let pre = format!("classes.{n1}+{n2}");
        let m2 = &ctx.fixture.morphisms[n2];
        out.extend(guarded(pre.clone(), || {
            (1..=2)
                .map(|h| {
                    let (_, identity) =
                        bi_characteristic(&m1.morphism, &m2.morphism, h, &ctx.metrics(m1), &p)?;
                    Ok(renamed(
                        identity,
                        format!("{pre}.bi_identity_c{}", 2 * h - 1),
                    ))
                })
                .collect()
        }));
    }
    out
}

pub fn composition(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let p = &ctx.probes;
    let f = ctx.fixture;
    for (n1, m1) in &f.morphisms {
        for (n2, m2) in &f.morphisms {
            if m1.to != m2.from {
                continue;
            }
            let pre = format!("composition.{n1}>{n2}");
            out.extend(guarded(pre.clone(), || {
                let metrics = ChainMetrics {
                    a: f.metric_for(&m1.from, m1.source_metric.as_ref()),
                    a1: f.metric_for(&m1.to, m1.target_metric.as_ref()),
                    a2: f.metric_for(&m2.to, m2.target_metric.as_ref()),
                };
                Ok(composition_checks(&m1.morphism, &m2.morphism, &metrics, p)?
                    .into_iter()
                    .map(|c| {
                        let n = format!("{pre}.{}", c.name);
                        renamed(c, n)
                    })
                    .collect())
            }));
        }
    }
    out
}

pub fn jet(ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for name in ctx.fixture.algebroids.keys() {
        out.extend(jet_checks(ctx, name).0);
    }
    out
}

/// Checks on `J¹A` for the named algebroid, with dumps of the jet-relative
/// forms of every morphism leaving it.
pub fn jet_checks(ctx: &Context, algebroid: &str) -> (Vec<CheckReport>, Vec<NamedDump>) {
    let p = &ctx.probes;
    let f = ctx.fixture;
    let pre = format!("jet.{algebroid}");
    let a = &f.algebroids[algebroid];
    let mut out = Vec::new();
    let mut dumps = Vec::new();
    match jet_prolong(a) {
        Ok(j) => {
            let j = Arc::new(j);
            out.extend(chart_axioms(&j, &format!("{pre}.prolongation"), ctx));
            out.extend(guarded(format!("{pre}.flat"), || {
                let pi = jet_projection(a.clone(), j.clone())?;
                let (_, on_a) = distinguished_pair(&pi, p)?;
                let r = matrix_residual(&on_a.curvature()?, &p.points)?;
                Ok(vec![ctx
                    .scaled(Scale::Tight)
                    .report(format!("{pre}.flat_connection"), r)])
            }));
        }
        Err(e) => out.push(
            CheckReport::new(format!("{pre}.prolongation"), f64::INFINITY, 0.0, 0)
                .with_detail(format!("error: {e}")),
        ),
    }
    for (name, m) in f.morphisms.iter().filter(|(_, m)| m.from == algebroid) {
        let mpre = format!("{pre}.{name}");
        out.extend(guarded(mpre.clone(), || {
            let r = jet_relative(&m.morphism, 1, &ctx.metrics(m), p)?;
            let tight = ctx.scaled(Scale::Tight);
            let mut checks = vec![renamed(r.agreement, format!("{mpre}.relative_is_pullback"))];
            checks.extend(r.flatness.into_iter().map(|c| {
                let n = format!("{mpre}.{}", c.name);
                CheckReport::new(n, c.max_residual, tight.tol, c.probes)
            }));
            checks.push(renamed(
                r.relative.closedness.clone(),
                format!("{mpre}.relative_closed"),
            ));
            dumps.push(NamedDump {
                name: mpre.clone(),
                class: r.relative.class.clone(),
                dump: r.relative.dump(&p.points)?,
            });
            Ok(checks)
        }));
    }
    (out, dumps)
}

pub fn run_suite(fixture: &Fixture, suite: Suite, options: &Options) -> Report {
    let ctx = Context::new(fixture, options);
    let mut report = Report::new(
        &fixture.name,
        format!("verify --suite {}", suite.name()),
        options,
    );
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    for s in suites {
        report.extend(match s {
            Suite::Axioms => axioms(&ctx),
            Suite::Connections => connections(&ctx),
            Suite::Transgression => transgression(&ctx),
            Suite::Classes => classes(&ctx),
            Suite::Composition => composition(&ctx),
            Suite::Jet => jet(&ctx),
            Suite::All => unreachable!(),
        });
    }
    report.finish()
}

/// Transgression, cocycle, composition, bi-characteristic and class identities.
pub fn identities(fixture: &Fixture, options: &Options) -> Report {
    let ctx = Context::new(fixture, options);
    let mut report = Report::new(&fixture.name, "identities", options);
    report.extend(transgression(&ctx));
    report.extend(composition(&ctx));
    report.extend(bi_identities(&ctx));
    for (name, m) in &fixture.morphisms {
        report.extend(guarded(format!("classes.{name}"), || {
            class_identities_for(&ctx, name, m)
        }));
    }
    report.finish()
}

pub fn modular(fixture: &Fixture, algebroid: &str, options: &Options) -> Report {
    let ctx = Context::new(fixture, options);
    let a = &fixture.algebroids[algebroid];
    let mut report = Report::new(
        &fixture.name,
        format!("modular --algebroid {algebroid}"),
        options,
    );
    let lambda = modular_form(a);
    let pre = format!("modular.{algebroid}");
    report.extend(guarded(pre.clone(), || {
        Ok(vec![closedness_check(
            a,
            &lambda,
            &ctx.probes,
            format!("{pre}.closed"),
        )?])
    }));
    match FormDump::new(&lambda, &fixture.coords, &ctx.probes.points) {
        Ok(dump) => report.dumps.push(NamedDump {
            name: pre,
            class: "lambda".into(),
            dump,
        }),
        Err(e) => report.extend([
            CheckReport::new(format!("{pre}.dump"), f64::INFINITY, 0.0, 0)
                .with_detail(format!("error: {e}")),
        ]),
    }
    report.finish()
}

pub fn mu(fixture: &Fixture, morphism: &str, h: usize, options: &Options) -> Report {
    let ctx = Context::new(fixture, options);
    let m = &fixture.morphisms[morphism];
    let mut report = Report::new(
        &fixture.name,
        format!("mu --morphism {morphism} --h {h}"),
        options,
    );
    let pre = format!("mu.{morphism}");
    let mut dumps = Vec::new();
    report.extend(guarded(pre.clone(), || {
        let xi = mu_form(&m.morphism, h, &ctx.metrics(m), &ctx.probes)?;
        let mut checks = vec![renamed(
            xi.closedness.clone(),
            format!("{pre}.{}_closed", xi.class),
        )];
        if h == 1 {
            let standard = mu_form(&m.morphism, 1, &MetricPair::default(), &ctx.probes)?;
            let lambda = modular_form_morphism(&m.morphism, &ctx.probes)?;
            let r = form_distance(&standard.form, &lambda, &ctx.probes.points)?;
            checks.push(
                ctx.scaled(Scale::Tight)
                    .report(format!("{pre}.mu_1_is_modular"), r),
            );
        }
        dumps.push(NamedDump {
            name: pre.clone(),
            class: xi.class.clone(),
            dump: xi.dump(&ctx.probes.points)?,
        });
        Ok(checks)
    }));
    report.dumps = dumps;
    report.finish()
}

pub fn jet_report(fixture: &Fixture, algebroid: &str, options: &Options) -> Report {
    let ctx = Context::new(fixture, options);
    let mut report = Report::new(
        &fixture.name,
        format!("jet --algebroid {algebroid}"),
        options,
    );
    let (checks, dumps) = jet_checks(&ctx, algebroid);
    report.extend(checks);
    report.dumps = dumps;
    report.finish()
}
