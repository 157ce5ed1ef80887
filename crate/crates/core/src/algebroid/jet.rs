//! First jet prolongation `J¹A`.
//!
//! Frame: `j¹b_i` for `i < s`, then `j¹(x^h b_i)` at index `s + h·s + i`.
//! A jet `j¹(ξ^i b_i)` decomposes as
//! `(ξ^i − x^h ∂_h ξ^i) j¹b_i + ∂_h ξ^i j¹(x^h b_i)`.

use std::sync::Arc;

use super::{AlgebroidChart, Morphism, Section};
use crate::error::{Error, Result};
use crate::expr::ScalarField;

/// Index of `j¹b_i` (`h = None`) or `j¹(x^h b_i)` in the jet frame.
pub fn jet_index(rank: usize, h: Option<usize>, i: usize) -> usize {
    match h {
        None => i,
        Some(h) => rank + h * rank + i,
    }
}

/// Section of `A` whose 1-jet is the jet frame element `p`.
pub fn jet_defining_section(chart: &AlgebroidChart, p: usize) -> Section {
    let s = chart.rank();
    let mut sec = Section::zero(s);
    if p < s {
        sec.0[p] = ScalarField::one();
    } else {
        let h = (p - s) / s;
        let i = (p - s) % s;
        sec.0[i] = ScalarField::var(h);
    }
    sec
}

/// Components of `j¹a` in the jet frame.
pub fn jet_lift(chart: &AlgebroidChart, a: &Section) -> Result<Section> {
    let (s, m) = (chart.rank(), chart.base_dim());
    if a.rank() != s {
        return Err(Error::Shape(
            "section does not live on the algebroid".into(),
        ));
    }
    let mut out = vec![ScalarField::zero(); s * (1 + m)];
    for (i, xi) in a.0.iter().enumerate() {
        if xi.is_zero() {
            continue;
        }
        let mut value = xi.clone();
        for h in 0..m {
            let d = xi.derivative(h);
            if d.is_zero() {
                continue;
            }
            value = value - ScalarField::var(h) * &d;
            out[jet_index(s, Some(h), i)] = d;
        }
        out[i] = value;
    }
    Ok(Section(out))
}

/// `J¹A` with `♯ j¹u = ♯u` and `[j¹u, j¹v] = j¹[u, v]`.
pub fn jet_prolong(chart: &AlgebroidChart) -> Result<AlgebroidChart> {
    let (s, m) = (chart.rank(), chart.base_dim());
    let n = s * (1 + m);
    let mut basis: Vec<String> = chart
        .basis_names()
        .iter()
        .map(|b| format!("j1({b})"))
        .collect();
    for h in 0..m {
        for b in chart.basis_names() {
            basis.push(format!("j1({}*{b})", chart.coords()[h]));
        }
    }
    let defining: Vec<Section> = (0..n).map(|p| jet_defining_section(chart, p)).collect();
    let anchor: Vec<Vec<ScalarField>> = defining
        .iter()
        .map(|u| {
            (0..m)
                .map(|j| {
                    ScalarField::sum(
                        u.0.iter()
                            .enumerate()
                            .filter(|(_, c)| !c.is_zero())
                            .map(|(i, c)| c * chart.anchor(i, j)),
                    )
                })
                .collect()
        })
        .collect();
    let mut brackets = Vec::new();
    for p in 0..n {
        for q in (p + 1)..n {
            let zeta = chart.bracket(&defining[p], &defining[q])?;
            let lifted = jet_lift(chart, &zeta)?;
            if lifted.0.iter().any(|c| !c.is_zero()) {
                brackets.push((p, q, lifted.0));
            }
        }
    }
    AlgebroidChart::new(chart.coords().to_vec(), basis, anchor, brackets)
}

/// The projection `π¹: J¹A → A`, `j¹u ↦ u`.
pub fn jet_projection(chart: Arc<AlgebroidChart>, jet: Arc<AlgebroidChart>) -> Result<Morphism> {
    if jet.rank() != chart.rank() * (1 + chart.base_dim()) {
        return Err(Error::Shape("jet chart rank does not match".into()));
    }
    let matrix = (0..jet.rank())
        .map(|p| jet_defining_section(&chart, p).0)
        .collect();
    Morphism::new(jet, chart, matrix)
}
