use std::sync::Arc;

use nalgebra::linalg::Cholesky;

use super::AConnection;
use crate::algebroid::{AlgebroidChart, Morphism};
use crate::check::{fields_residual, Probes};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::{AForm, MultiIndex};
use crate::matrix::{FieldMatrix, FormMatrix};

/// Connections `∇_{b_i} b_j = [b_i, b_j]` on `A` and
/// `∇'_{b_i} b'_u = [φ b_i, b'_u]` on `A'`, both along `A`.
pub fn distinguished_pair(phi: &Morphism, probes: &Probes) -> Result<(AConnection, AConnection)> {
    phi.require_valid(&probes.points, probes.tol)?;
    Ok(distinguished_pair_unchecked(phi))
}

pub(crate) fn distinguished_pair_unchecked(phi: &Morphism) -> (AConnection, AConnection) {
    let a = phi.source();
    let t = phi.target();
    let (s, s2) = (a.rank(), t.rank());
    let inner = FormMatrix::from_fn(s, 1, s, |j, k| {
        let mut f = AForm::zero(s, 1);
        for i in 0..s {
            f.add_term(MultiIndex::single(i), a.gamma(i, j, k).clone());
        }
        f
    });
    let outer = FormMatrix::from_fn(s, 1, s2, |u, w| {
        let mut f = AForm::zero(s, 1);
        for i in 0..s {
            let bracket = ScalarField::sum(
                (0..s2)
                    .filter(|&r| !phi.entry(i, r).is_zero() && !t.gamma(r, u, w).is_zero())
                    .map(|r| phi.entry(i, r) * t.gamma(r, u, w)),
            );
            let drift = t.anchor_derivative(u, phi.entry(i, w));
            f.add_term(MultiIndex::single(i), bracket - drift);
        }
        f
    });
    (
        AConnection {
            chart: a.clone(),
            frame: "b".into(),
            matrix: inner,
        },
        AConnection {
            chart: a.clone(),
            frame: "b'".into(),
            matrix: outer,
        },
    )
}

/// `∇ ⊕ (∇')*` on `S = A ⊕ A'*`.
pub fn s_connection(on_a: &AConnection, on_target: &AConnection) -> Result<AConnection> {
    on_a.direct_sum(&on_target.dual())
}

/// Connection whose matrix vanishes in the Cholesky-orthonormal frame of `g`,
/// written back in the working frame: `ω = d_A C · C⁻¹` with `g = C Cᵀ`.
pub fn orthogonal_connection(
    chart: Arc<AlgebroidChart>,
    g: &FieldMatrix,
    probes: &Probes,
) -> Result<AConnection> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::Shape("metric must be square".into()));
    }
    let asym = g.sub(&g.transpose())?;
    if fields_residual(asym.entries(), &probes.points)? > probes.tol {
        return Err(Error::Invalid("metric is not symmetric".into()));
    }
    for p in &probes.points {
        let m = g.eval(p)?;
        if Cholesky::new(m).is_none() {
            return Err(Error::NotPositiveDefinite { point: p.clone() });
        }
    }
    let c = g.cholesky()?;
    let c_inv = c.lower_inverse()?;
    let matrix = c.d(&chart)?.mul_fields(&c_inv)?;
    AConnection::new(chart, "orth", matrix)
}

/// `Σ_k θ_k ∇_k` for weights summing to one.
pub fn glue(
    connections: &[AConnection],
    weights: &[ScalarField],
    probes: &Probes,
) -> Result<AConnection> {
    if connections.is_empty() || connections.len() != weights.len() {
        return Err(Error::Shape("one weight per connection required".into()));
    }
    for c in &connections[1..] {
        connections[0].same_bundle(c)?;
    }
    let total = ScalarField::sum(weights.iter().cloned()) - 1.0;
    let defect = fields_residual([&total], &probes.points)?;
    if defect > probes.tol {
        return Err(Error::Invalid(format!(
            "weights do not sum to one (defect {defect:e})"
        )));
    }
    let first = &connections[0];
    let parts: Vec<FormMatrix> = connections
        .iter()
        .zip(weights)
        .map(|(c, w)| c.matrix().scale(w))
        .collect();
    let mut matrix = parts[0].clone();
    for p in &parts[1..] {
        matrix = matrix.try_add(p)?;
    }
    AConnection::new(first.chart().clone(), first.frame().to_string(), matrix)
}
