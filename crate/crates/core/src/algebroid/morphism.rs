use std::sync::Arc;

use super::{worst_over, AlgebroidChart, Section};
use crate::check::CheckReport;
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::{permutation_sign, AForm, MultiIndex};

/// Base-preserving bundle map `φ b_i = φ_i^u b'_u`.
#[derive(Clone, Debug)]
pub struct Morphism {
    source: Arc<AlgebroidChart>,
    target: Arc<AlgebroidChart>,
    /// `matrix[i][u] = φ_i^u`
    matrix: Vec<Vec<ScalarField>>,
}

impl Morphism {
    pub fn new(
        source: Arc<AlgebroidChart>,
        target: Arc<AlgebroidChart>,
        matrix: Vec<Vec<ScalarField>>,
    ) -> Result<Self> {
        if source.coords() != target.coords() {
            return Err(Error::Shape(
                "source and target must share the base chart".into(),
            ));
        }
        let (s, t) = (source.rank(), target.rank());
        if matrix.len() != s || matrix.iter().any(|row| row.len() != t) {
            return Err(Error::Shape(format!(
                "morphism matrix must be {s}×{t} (source rank × target rank)"
            )));
        }
        Ok(Morphism {
            source,
            target,
            matrix,
        })
    }

    pub fn identity(chart: Arc<AlgebroidChart>) -> Self {
        let s = chart.rank();
        let matrix = (0..s)
            .map(|i| {
                (0..s)
                    .map(|u| {
                        if i == u {
                            ScalarField::one()
                        } else {
                            ScalarField::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Morphism {
            source: chart.clone(),
            target: chart,
            matrix,
        }
    }

    pub fn source(&self) -> &Arc<AlgebroidChart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<AlgebroidChart> {
        &self.target
    }

    pub fn matrix(&self) -> &[Vec<ScalarField>] {
        &self.matrix
    }

    /// `φ_i^u`
    pub fn entry(&self, i: usize, u: usize) -> &ScalarField {
        &self.matrix[i][u]
    }

    pub fn apply(&self, a: &Section) -> Result<Section> {
        if a.rank() != self.source.rank() {
            return Err(Error::Shape("section does not live on the source".into()));
        }
        Ok(Section(
            (0..self.target.rank())
                .map(|u| {
                    ScalarField::sum(
                        a.0.iter()
                            .zip(&self.matrix)
                            .filter(|(xi, row)| !xi.is_zero() && !row[u].is_zero())
                            .map(|(xi, row)| xi * &row[u]),
                    )
                })
                .collect(),
        ))
    }

    /// `(φ*ω')(b_{i_1}, ..) = ω'(φ b_{i_1}, ..)`, expanded by Cauchy–Binet.
    pub fn pullback(&self, omega: &AForm) -> Result<AForm> {
        if omega.rank() != self.target.rank() {
            return Err(Error::Shape("form does not live on the target".into()));
        }
        let k = omega.degree();
        let s = self.source.rank();
        let mut out = AForm::zero(s, k);
        if k == 0 {
            for (key, c) in omega.terms() {
                out.add_term(*key, c.clone());
            }
            return Ok(out);
        }
        for rows in MultiIndex::all(s, k) {
            let rows_v = rows.to_vec();
            let mut terms = Vec::new();
            for (cols, c) in omega.terms() {
                let cols_v = cols.to_vec();
                let det = minor(&self.matrix, &rows_v, &cols_v);
                if !det.is_zero() {
                    terms.push(c * det);
                }
            }
            out.add_term(rows, ScalarField::sum(terms));
        }
        Ok(out)
    }

    /// `ψ ∘ φ` for `ψ: A' → A''`.
    pub fn compose(&self, psi: &Morphism) -> Result<Morphism> {
        if self.target.rank() != psi.source.rank() {
            return Err(Error::Shape("composition: target and source differ".into()));
        }
        let t = psi.target.rank();
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                (0..t)
                    .map(|w| {
                        ScalarField::sum(
                            row.iter()
                                .zip(&psi.matrix)
                                .filter(|(a, r)| !a.is_zero() && !r[w].is_zero())
                                .map(|(a, r)| a * &r[w]),
                        )
                    })
                    .collect()
            })
            .collect();
        Morphism::new(self.source.clone(), psi.target.clone(), matrix)
    }

    /// Anchor and bracket preservation on basis sections.
    pub fn check(&self, points: &[Vec<f64>], tol: f64) -> Result<MorphismReport> {
        let (s, t, m) = (
            self.source.rank(),
            self.target.rank(),
            self.source.base_dim(),
        );
        let mut anchor_fields = Vec::new();
        for i in 0..s {
            for j in 0..m {
                let pushed = ScalarField::sum(
                    (0..t)
                        .filter(|&u| !self.matrix[i][u].is_zero())
                        .map(|u| &self.matrix[i][u] * self.target.anchor(u, j)),
                );
                anchor_fields.push(pushed - self.source.anchor(i, j));
            }
        }
        let images: Vec<Section> = (0..s).map(|i| Section(self.matrix[i].clone())).collect();
        let mut bracket_fields = Vec::new();
        let mut labels = Vec::new();
        for i in 0..s {
            for j in (i + 1)..s {
                let source_br = self
                    .source
                    .bracket(&Section::basis(s, i), &Section::basis(s, j))?;
                let lhs = self.apply(&source_br)?;
                let rhs = self.target.bracket(&images[i], &images[j])?;
                for u in 0..t {
                    bracket_fields.push(&lhs.0[u] - &rhs.0[u]);
                    labels.push((i, j));
                }
            }
        }
        let (anchor_residual, _) = worst_over(&anchor_fields, points)?;
        let (bracket_residual, at) = worst_over(&bracket_fields, points)?;
        Ok(MorphismReport {
            anchor_residual,
            bracket_residual,
            bracket_worst: at.map(|n| labels[n]),
            probes: points.len(),
            tol,
        })
    }

    /// Errors unless the morphism passes [`Morphism::check`].
    pub fn require_valid(&self, points: &[Vec<f64>], tol: f64) -> Result<()> {
        let r = self.check(points, tol)?;
        if r.pass() {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "not an algebroid morphism (anchor residual {:e}, bracket residual {:e})",
                r.anchor_residual, r.bracket_residual
            )))
        }
    }
}

/// Residuals of anchor and bracket preservation.
#[derive(Clone, Debug)]
pub struct MorphismReport {
    pub anchor_residual: f64,
    pub bracket_residual: f64,
    pub bracket_worst: Option<(usize, usize)>,
    pub probes: usize,
    pub tol: f64,
}

impl MorphismReport {
    pub fn pass(&self) -> bool {
        self.anchor_residual <= self.tol && self.bracket_residual <= self.tol
    }

    pub fn checks(&self, prefix: &str) -> Vec<CheckReport> {
        let mut bracket = CheckReport::new(
            format!("{prefix}bracket_preserved"),
            self.bracket_residual,
            self.tol,
            self.probes,
        );
        if let (false, Some((i, j))) = (bracket.pass, self.bracket_worst) {
            bracket = bracket.with_detail(format!("worst pair (b{}, b{})", i + 1, j + 1));
        }
        vec![
            CheckReport::new(
                format!("{prefix}anchor_preserved"),
                self.anchor_residual,
                self.tol,
                self.probes,
            ),
            bracket,
        ]
    }
}

/// Symbolic determinant of the submatrix `matrix[rows][cols]`.
pub(crate) fn minor(matrix: &[Vec<ScalarField>], rows: &[usize], cols: &[usize]) -> ScalarField {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    let mut perm: Vec<usize> = (0..k).collect();
    let mut terms = Vec::new();
    permute(&mut perm, 0, &mut |p| {
        let mut prod = ScalarField::one();
        for (a, &b) in p.iter().enumerate() {
            let e = &matrix[rows[a]][cols[b]];
            if e.is_zero() {
                return;
            }
            prod = prod * e;
        }
        terms.push(if permutation_sign(p) < 0 { -prod } else { prod });
    });
    ScalarField::sum(terms)
}

fn permute<F: FnMut(&[usize])>(perm: &mut Vec<usize>, start: usize, visit: &mut F) {
    if start == perm.len() {
        visit(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, visit);
        perm.swap(start, i);
    }
}
