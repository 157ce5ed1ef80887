use std::collections::BTreeMap;

use super::quadrature::{nodes_for_degree, simplex_rule};
use super::{chern_form, chern_polarized};
use crate::algebroid::AlgebroidChart;
use crate::check::{form_distance, form_residual, CheckReport, Probes};
use crate::connection::{AConnection, ConnectionFamily};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::{AForm, MultiIndex};
use crate::matrix::FormMatrix;

/// Integrates a form on `A × TΔ^k` over the simplex. Only terms carrying all
/// of `dt_1 … dt_k` survive; their coefficients are integrated in the simplex
/// coordinates, which follow the base coordinates of `base`. The rule is exact
/// for polynomial dependence up to `degree`; if a rule with one more node
/// disagrees at a probe point the dependence is not polynomial of that degree.
pub fn fiber_integrate(
    form: &AForm,
    base: &AlgebroidChart,
    k: usize,
    degree: usize,
    probes: &Probes,
) -> Result<AForm> {
    if !(1..=2).contains(&k) {
        return Err(Error::Unsupported(format!(
            "integration over the {k}-simplex"
        )));
    }
    let (s, m) = (base.rank(), base.base_dim());
    if form.rank() != s + k {
        return Err(Error::Shape(format!(
            "form of rank {} over a rank-{s} algebroid times a {k}-simplex",
            form.rank()
        )));
    }
    let out_degree = form.degree().saturating_sub(k);
    let fiber = fiber_mask(s, k);
    let mut base_part = BTreeMap::new();
    if form.degree() >= k {
        for (key, c) in form.terms() {
            if fiber.bits() & !key.bits() == 0 {
                base_part.insert(key.without(fiber), c.clone());
            }
        }
    }
    let integrate = |n: usize| {
        let rule = simplex_rule(k, n);
        let mut out = AForm::zero(s, out_degree);
        for (key, c) in &base_part {
            let parts = rule.iter().map(|(t, w)| {
                let mut v = c.clone();
                for (a, &ta) in t.iter().enumerate() {
                    v = v.substitute(m + a, &ScalarField::constant(ta));
                }
                v * *w
            });
            out.add_term(*key, ScalarField::sum(parts));
        }
        out
    };
    let n = nodes_for_degree(k, degree);
    let result = integrate(n);
    let finer = integrate(n + 1);
    let gap = form_distance(&result, &finer, &probes.points)?;
    let scale = form_residual(&result, &probes.points)?.max(1.0);
    if gap > 1e-10 * scale {
        return Err(Error::NotPolynomial { degree });
    }
    Ok(result)
}

fn fiber_mask(s: usize, k: usize) -> MultiIndex {
    MultiIndex::from_sorted(&(s..s + k).collect::<Vec<_>>()).expect("increasing")
}

fn bott_sign(k: usize) -> f64 {
    if k.div_ceil(2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn shared_bundle(connections: &[AConnection], h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::Invalid(
            "c_0 is constant; h must be at least 1".into(),
        ));
    }
    let first = connections
        .first()
        .ok_or_else(|| Error::Invalid("at least one connection required".into()))?;
    for c in &connections[1..] {
        first.same_bundle(c)?;
    }
    Ok(())
}

/// `Δ(∇⁰, …, ∇^k) c_h`, a form of degree `2h − k`, for `k ≤ 2`.
///
/// For `k = 1` this is `h ∫₀¹ c_h(α, Ω_τ, …, Ω_τ) dτ` with `α = ω¹ − ω⁰`
/// and `Ω_τ` the curvature of `(1 − τ)∇⁰ + τ∇¹`.
pub fn bott_delta(connections: &[AConnection], h: usize) -> Result<AForm> {
    bott_delta_with_nodes(connections, h, None)
}

/// [`bott_delta`] with the number of quadrature nodes per simplex direction
/// overridden; `None` picks the smallest exact rule.
pub fn bott_delta_with_nodes(
    connections: &[AConnection],
    h: usize,
    nodes: Option<usize>,
) -> Result<AForm> {
    shared_bundle(connections, h)?;
    match connections.len() {
        1 => chern_form(&connections[0].curvature()?, h),
        2 => two_connection_delta(&connections[0], &connections[1], h, nodes),
        3 => product_delta(connections, h, nodes),
        n => Err(Error::Unsupported(format!("Bott forms for k = {}", n - 1))),
    }
}

fn two_connection_delta(
    c0: &AConnection,
    c1: &AConnection,
    h: usize,
    nodes: Option<usize>,
) -> Result<AForm> {
    let chart = c0.chart();
    let s = chart.rank();
    let out_degree = 2 * h - 1;
    let family = ConnectionFamily::affine(c0, c1)?;
    let (omega_tau, lam) = family.link_curvature()?;
    if lam.is_zero() {
        return Ok(AForm::zero(s, out_degree));
    }
    // c_h(Ω_τ + Λ∧dτ) has fiber part h c_h(Λ, Ω_τ, …) ∧ dτ, and the
    // integrand is polynomial in τ of degree at most 2h − 1
    let tau = chart.base_dim();
    let rule = simplex_rule(1, nodes.unwrap_or_else(|| nodes_for_degree(1, 2 * h - 1)));
    let mut parts = Vec::with_capacity(rule.len());
    for (t, w) in rule {
        let value = ScalarField::constant(t[0]);
        let o = omega_tau.substitute(tau, &value);
        let l = lam.substitute(tau, &value);
        let mut args: Vec<&FormMatrix> = vec![&l];
        args.extend(std::iter::repeat_n(&o, h - 1));
        parts.push(chern_polarized(&args)?.scale_const(w));
    }
    let integral = AForm::sum(s, out_degree, parts.iter());
    Ok(integral.scale_const(bott_sign(1) * h as f64))
}

/// `Δ(∇⁰, …, ∇^k) c_h` computed from the curvature of the barycentric
/// connection `Σ t_a ∇^a` on `A × TΔ^k` and integration over the simplex.
pub fn bott_delta_via_product(connections: &[AConnection], h: usize) -> Result<AForm> {
    shared_bundle(connections, h)?;
    product_delta(connections, h, None)
}

fn product_delta(connections: &[AConnection], h: usize, nodes: Option<usize>) -> Result<AForm> {
    let k = connections.len() - 1;
    if !(1..=2).contains(&k) {
        return Err(Error::Unsupported(format!("Bott forms for k = {k}")));
    }
    let chart = connections[0].chart();
    let (s, m) = (chart.rank(), chart.base_dim());
    if 2 * h < k {
        return Ok(AForm::zero(s, 0));
    }
    let product = chart.product_with_simplex(k).shared();
    let t: Vec<ScalarField> = (0..k).map(|a| ScalarField::var(m + a)).collect();
    let first = ScalarField::one() - ScalarField::sum(t.iter().cloned());
    let mut omega = connections[0].matrix().embed(s + k).scale(&first);
    for (a, c) in connections[1..].iter().enumerate() {
        omega = omega.try_add(&c.matrix().embed(s + k).scale(&t[a]))?;
    }
    let curvature = AConnection::new(product, "barycentric", omega)?.curvature()?;
    let fiber = fiber_mask(s, k);
    let rule = simplex_rule(k, nodes.unwrap_or_else(|| nodes_for_degree(k, 2 * h)));
    let mut parts = Vec::with_capacity(rule.len());
    for (point, w) in rule {
        let mut c = curvature.clone();
        for (a, &ta) in point.iter().enumerate() {
            c = c.substitute(m + a, &ScalarField::constant(ta));
        }
        let ch = chern_form(&c, h)?;
        let mut part = AForm::zero(s, 2 * h - k);
        for (key, coeff) in ch.terms() {
            if fiber.bits() & !key.bits() == 0 {
                part.add_term(key.without(fiber), coeff.clone() * w);
            }
        }
        parts.push(part);
    }
    let integral = AForm::sum(s, 2 * h - k, parts.iter());
    Ok(integral.scale_const(bott_sign(k)))
}

/// `Δ(∇¹) c_h − Δ(∇⁰) c_h − d_A Δ(∇⁰, ∇¹) c_h` at the probe points.
pub fn transgression_check(
    c0: &AConnection,
    c1: &AConnection,
    h: usize,
    probes: &Probes,
) -> Result<CheckReport> {
    let chart = c0.chart();
    let lhs = bott_delta(std::slice::from_ref(c1), h)?
        .try_sub(&bott_delta(std::slice::from_ref(c0), h)?)?;
    let link = bott_delta(&[c0.clone(), c1.clone()], h)?;
    let rhs = chart.d(&link)?;
    let r = form_distance(&lhs, &rhs, &probes.points)?;
    Ok(probes.report(format!("transgression_c{h}"), r))
}

/// `d_A Δ(∇⁰, ∇¹, ∇²) c_h − [Δ(∇¹, ∇²) − Δ(∇⁰, ∇²) + Δ(∇⁰, ∇¹)] c_h`.
pub fn cocycle_check(
    c0: &AConnection,
    c1: &AConnection,
    c2: &AConnection,
    h: usize,
    probes: &Probes,
) -> Result<CheckReport> {
    let chart = c0.chart();
    let triple = bott_delta(&[c0.clone(), c1.clone(), c2.clone()], h)?;
    let lhs = chart.d(&triple)?;
    let d12 = bott_delta(&[c1.clone(), c2.clone()], h)?;
    let d02 = bott_delta(&[c0.clone(), c2.clone()], h)?;
    let d01 = bott_delta(&[c0.clone(), c1.clone()], h)?;
    let rhs = d12.try_sub(&d02)?.try_add(&d01)?;
    let r = form_distance(&lhs, &rhs, &probes.points)?;
    Ok(probes.report(format!("cocycle_c{h}"), r))
}
