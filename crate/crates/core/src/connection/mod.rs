//! A-connections given by their matrices of 1-forms in a frame.
//!
//! `∇_{b_i} w_u = ω_u^t(b_i) w_t`; the matrix entry `(u, t)` is `ω_u^t`.

mod build;
mod family;
mod metric;

use std::sync::Arc;

use crate::algebroid::{AlgebroidChart, Section};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::MultiIndex;
use crate::matrix::{FieldMatrix, FormMatrix};

pub use build::{distinguished_pair, glue, orthogonal_connection, s_connection};
pub use family::ConnectionFamily;
pub use metric::{
    annihilator_check, k_flatness_check, metric_compat_check, quasi_metric_on_s, KernelFrames,
    QuasiMetric,
};

#[derive(Clone, Debug)]
pub struct AConnection {
    chart: Arc<AlgebroidChart>,
    frame: String,
    matrix: FormMatrix,
}

impl AConnection {
    pub fn new(
        chart: Arc<AlgebroidChart>,
        frame: impl Into<String>,
        matrix: FormMatrix,
    ) -> Result<Self> {
        if matrix.degree() != 1 {
            return Err(Error::Shape(format!(
                "connection matrix of degree {}",
                matrix.degree()
            )));
        }
        if matrix.rank() != chart.rank() {
            return Err(Error::Shape(format!(
                "connection forms of rank {} on a rank-{} algebroid",
                matrix.rank(),
                chart.rank()
            )));
        }
        Ok(AConnection {
            chart,
            frame: frame.into(),
            matrix,
        })
    }

    /// Connection with zero matrix in the given frame.
    pub fn trivial(
        chart: Arc<AlgebroidChart>,
        bundle_rank: usize,
        frame: impl Into<String>,
    ) -> Self {
        let matrix = FormMatrix::zero(chart.rank(), 1, bundle_rank);
        AConnection {
            chart,
            frame: frame.into(),
            matrix,
        }
    }

    pub fn chart(&self) -> &Arc<AlgebroidChart> {
        &self.chart
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    pub fn matrix(&self) -> &FormMatrix {
        &self.matrix
    }

    pub fn bundle_rank(&self) -> usize {
        self.matrix.dim()
    }

    /// `ω_u^t(b_i)`
    pub fn coefficient(&self, i: usize, u: usize, t: usize) -> ScalarField {
        self.matrix.get(u, t).coeff(MultiIndex::single(i))
    }

    /// `(∇_a v)^t = ♯a(ν^t) + ν^u ω_u^t(a)`
    pub fn covariant_derivative(&self, a: &Section, v: &[ScalarField]) -> Result<Vec<ScalarField>> {
        let r = self.bundle_rank();
        if v.len() != r {
            return Err(Error::Shape(format!(
                "bundle section of length {} for a rank-{r} bundle",
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(r);
        for t in 0..r {
            let mut terms = vec![self.chart.anchor_apply(a, &v[t])?];
            for (u, nu) in v.iter().enumerate() {
                if nu.is_zero() {
                    continue;
                }
                let w = self.chart.pair(self.matrix.get(u, t), a);
                if !w.is_zero() {
                    terms.push(nu * w);
                }
            }
            out.push(ScalarField::sum(terms));
        }
        Ok(out)
    }

    /// `Ω = d_A ω − ω ∧ ω`
    pub fn curvature(&self) -> Result<FormMatrix> {
        let d = self.matrix.d(&self.chart)?;
        let sq = self.matrix.wedge(&self.matrix)?;
        d.try_sub(&sq)
    }

    /// Connection on the dual bundle in the dual frame.
    pub fn dual(&self) -> AConnection {
        AConnection {
            chart: self.chart.clone(),
            frame: dual_label(&self.frame),
            matrix: self.matrix.transpose().neg(),
        }
    }

    pub fn direct_sum(&self, other: &AConnection) -> Result<AConnection> {
        self.same_chart(other)?;
        Ok(AConnection {
            chart: self.chart.clone(),
            frame: format!("{}+{}", self.frame, other.frame),
            matrix: self.matrix.block_diag(&other.matrix)?,
        })
    }

    /// Matrix in the frame `w' = P⁻¹ w`: `ω' = P⁻¹ ω P − P⁻¹ d_A P`.
    pub fn gauge_transform(&self, p: &FieldMatrix, p_inv: &FieldMatrix) -> Result<AConnection> {
        let conj = self.matrix.fields_mul(p_inv)?.mul_fields(p)?;
        let dp = p.d(&self.chart)?.fields_mul(p_inv)?;
        Ok(AConnection {
            chart: self.chart.clone(),
            frame: format!("{}'", self.frame),
            matrix: conj.try_sub(&dp)?,
        })
    }

    /// `other − self`, the difference matrix α of the pair `(self, other)`.
    pub fn difference(&self, other: &AConnection) -> Result<FormMatrix> {
        self.same_chart(other)?;
        other.matrix.try_sub(&self.matrix)
    }

    pub(crate) fn same_chart(&self, other: &AConnection) -> Result<()> {
        if !Arc::ptr_eq(&self.chart, &other.chart)
            && (self.chart.rank() != other.chart.rank()
                || self.chart.coords() != other.chart.coords())
        {
            return Err(Error::Shape(
                "connections live on different algebroids".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn same_bundle(&self, other: &AConnection) -> Result<()> {
        self.same_chart(other)?;
        if self.bundle_rank() != other.bundle_rank() {
            return Err(Error::Shape(format!(
                "connections on bundles of rank {} and {}",
                self.bundle_rank(),
                other.bundle_rank()
            )));
        }
        Ok(())
    }

    pub fn with_frame(mut self, frame: impl Into<String>) -> Self {
        self.frame = frame.into();
        self
    }
}

fn dual_label(frame: &str) -> String {
    match frame.strip_suffix('*') {
        Some(base) => base.to_string(),
        None => format!("{frame}*"),
    }
}
