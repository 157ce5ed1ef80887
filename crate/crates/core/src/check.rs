//! Seeded sample points and pointwise residual reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::expr::{ScalarField, Tape};
use crate::form::AForm;

/// Uniform points in `[-1, 1]^m` from a ChaCha stream.
pub fn sample_points(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// Seeded probe points with the tolerance used to judge residuals.
#[derive(Clone, Debug)]
pub struct Probes {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub tol: f64,
}

impl Probes {
    pub fn new(dim: usize, count: usize, seed: u64, tol: f64) -> Self {
        Probes {
            points: sample_points(dim, count, seed),
            seed,
            tol,
        }
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        Probes {
            points: self.points.clone(),
            seed: self.seed,
            tol,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Residual check named `name` for the given value.
    pub fn report(&self, name: impl Into<String>, residual: f64) -> CheckReport {
        CheckReport::new(name, residual, self.tol, self.points.len())
    }
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub probes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_residual: f64, tolerance: f64, probes: usize) -> Self {
        // NaN residuals must fail
        let pass = max_residual <= tolerance;
        CheckReport {
            name: name.into(),
            max_residual,
            tolerance,
            pass,
            probes,
            detail: None,
        }
    }

    /// A check that is expected to fail: passes when the residual is at least
    /// `threshold`.
    pub fn expect_failure(
        name: impl Into<String>,
        max_residual: f64,
        threshold: f64,
        probes: usize,
    ) -> Self {
        CheckReport {
            name: name.into(),
            max_residual,
            tolerance: threshold,
            pass: max_residual >= threshold,
            probes,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Largest absolute value of any coefficient of `form` over `points`.
pub fn form_residual(form: &AForm, points: &[Vec<f64>]) -> Result<f64> {
    if form.is_empty() {
        return Ok(0.0);
    }
    let compiled = form.compile();
    let mut worst = 0.0f64;
    for p in points {
        let v = compiled.max_abs(p)?;
        if v.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Largest absolute value of any of `fields` over `points`.
pub fn fields_residual<'a, I>(fields: I, points: &[Vec<f64>]) -> Result<f64>
where
    I: IntoIterator<Item = &'a ScalarField>,
{
    let nonzero: Vec<&ScalarField> = fields.into_iter().filter(|f| !f.is_zero()).collect();
    if nonzero.is_empty() {
        return Ok(0.0);
    }
    let tape = Tape::compile(nonzero);
    let mut vals = Vec::new();
    let mut worst = 0.0f64;
    for p in points {
        tape.eval(p, &mut vals)?;
        for v in &vals {
            if v.is_nan() {
                return Ok(f64::NAN);
            }
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// `max |a - b|` coefficient-wise.
pub fn form_distance(a: &AForm, b: &AForm, points: &[Vec<f64>]) -> Result<f64> {
    form_residual(&a.try_sub(b)?, points)
}
