//! Square matrices of forms and rectangular matrices of scalar fields.
//!
//! Matrix products of forms follow `(A ∧ B)_u^t = A_u^s ∧ B_s^t`: the row
//! index is the lower (frame) index, the column index the upper one.

use nalgebra::DMatrix;

use crate::algebroid::AlgebroidChart;
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::AForm;

#[derive(Clone, Debug)]
pub struct FormMatrix {
    rank: usize,
    degree: usize,
    n: usize,
    entries: Vec<AForm>,
}

impl FormMatrix {
    pub fn zero(rank: usize, degree: usize, n: usize) -> Self {
        FormMatrix {
            rank,
            degree,
            n,
            entries: vec![AForm::zero(rank, degree); n * n],
        }
    }

    /// Row-major entries.
    pub fn from_entries(rank: usize, degree: usize, n: usize, entries: Vec<AForm>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Shape(format!(
                "{} entries for a {n}×{n} matrix",
                entries.len()
            )));
        }
        for e in &entries {
            if e.rank() != rank || e.degree() != degree {
                return Err(Error::Shape(format!(
                    "entry of rank {} degree {} in a rank-{rank} degree-{degree} matrix",
                    e.rank(),
                    e.degree()
                )));
            }
        }
        Ok(FormMatrix {
            rank,
            degree,
            n,
            entries,
        })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> AForm>(
        rank: usize,
        degree: usize,
        n: usize,
        mut f: F,
    ) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for u in 0..n {
            for t in 0..n {
                let e = f(u, t);
                debug_assert_eq!((e.rank(), e.degree()), (rank, degree));
                entries.push(e);
            }
        }
        FormMatrix {
            rank,
            degree,
            n,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Rank of the algebroid the entries live on.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn get(&self, u: usize, t: usize) -> &AForm {
        &self.entries[u * self.n + t]
    }

    pub fn set(&mut self, u: usize, t: usize, value: AForm) {
        assert_eq!((value.rank(), value.degree()), (self.rank, self.degree));
        self.entries[u * self.n + t] = value;
    }

    pub fn entries(&self) -> &[AForm] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(AForm::is_empty)
    }

    fn check_same(&self, other: &FormMatrix) -> Result<()> {
        if (self.rank, self.degree, self.n) != (other.rank, other.degree, other.n) {
            return Err(Error::Shape(format!(
                "form matrices differ in shape: ({}, {}, {}) vs ({}, {}, {})",
                self.rank, self.degree, self.n, other.rank, other.degree, other.n
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FormMatrix) -> Result<FormMatrix> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a.add(b)))
    }

    pub fn try_sub(&self, other: &FormMatrix) -> Result<FormMatrix> {
        self.check_same(other)?;
        Ok(self.zip(other, |a, b| a.sub(b)))
    }

    pub fn add(&self, other: &FormMatrix) -> FormMatrix {
        self.try_add(other).expect("matrix shapes agree")
    }

    pub fn sub(&self, other: &FormMatrix) -> FormMatrix {
        self.try_sub(other).expect("matrix shapes agree")
    }

    fn zip<F: Fn(&AForm, &AForm) -> AForm>(&self, other: &FormMatrix, f: F) -> FormMatrix {
        FormMatrix {
            rank: self.rank,
            degree: self.degree,
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn map<F: FnMut(&AForm) -> AForm>(&self, f: F) -> FormMatrix {
        let entries: Vec<AForm> = self.entries.iter().map(f).collect();
        let (rank, degree) = entries
            .first()
            .map(|e| (e.rank(), e.degree()))
            .unwrap_or((self.rank, self.degree));
        FormMatrix {
            rank,
            degree,
            n: self.n,
            entries,
        }
    }

    pub fn neg(&self) -> FormMatrix {
        self.map(AForm::neg)
    }

    pub fn scale(&self, f: &ScalarField) -> FormMatrix {
        self.map(|e| e.scale(f))
    }

    pub fn transpose(&self) -> FormMatrix {
        FormMatrix::from_fn(self.rank, self.degree, self.n, |u, t| {
            self.get(t, u).clone()
        })
    }

    /// Matrix product with wedge of entries.
    pub fn wedge(&self, other: &FormMatrix) -> Result<FormMatrix> {
        if self.rank != other.rank || self.n != other.n {
            return Err(Error::Shape("wedge of incompatible form matrices".into()));
        }
        let n = self.n;
        let degree = self.degree + other.degree;
        let mut entries = Vec::with_capacity(n * n);
        for u in 0..n {
            for t in 0..n {
                let parts: Vec<AForm> = (0..n)
                    .filter(|&s| !self.get(u, s).is_empty() && !other.get(s, t).is_empty())
                    .map(|s| self.get(u, s).wedge(other.get(s, t)))
                    .collect::<Result<_>>()?;
                entries.push(AForm::sum(self.rank, degree, &parts));
            }
        }
        Ok(FormMatrix {
            rank: self.rank,
            degree,
            n,
            entries,
        })
    }

    /// Right multiplication by a field matrix: `(X P)_u^t = X_u^s P_s^t`.
    pub fn mul_fields(&self, p: &FieldMatrix) -> Result<FormMatrix> {
        if p.rows != self.n || p.cols != self.n {
            return Err(Error::Shape("field matrix does not match".into()));
        }
        Ok(FormMatrix::from_fn(
            self.rank,
            self.degree,
            self.n,
            |u, t| {
                let parts: Vec<AForm> = (0..self.n)
                    .filter(|&s| !p.get(s, t).is_zero())
                    .map(|s| self.get(u, s).scale(p.get(s, t)))
                    .collect();
                AForm::sum(self.rank, self.degree, &parts)
            },
        ))
    }

    /// Left multiplication by a field matrix: `(P X)_u^t = P_u^s X_s^t`.
    pub fn fields_mul(&self, p: &FieldMatrix) -> Result<FormMatrix> {
        if p.rows != self.n || p.cols != self.n {
            return Err(Error::Shape("field matrix does not match".into()));
        }
        Ok(FormMatrix::from_fn(
            self.rank,
            self.degree,
            self.n,
            |u, t| {
                let parts: Vec<AForm> = (0..self.n)
                    .filter(|&s| !p.get(u, s).is_zero())
                    .map(|s| self.get(s, t).scale(p.get(u, s)))
                    .collect();
                AForm::sum(self.rank, self.degree, &parts)
            },
        ))
    }

    /// Entrywise `d_A`.
    pub fn d(&self, chart: &AlgebroidChart) -> Result<FormMatrix> {
        let entries = self
            .entries
            .iter()
            .map(|e| chart.d(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(FormMatrix {
            rank: self.rank,
            degree: self.degree + 1,
            n: self.n,
            entries,
        })
    }

    pub fn trace(&self) -> AForm {
        let diag: Vec<&AForm> = (0..self.n).map(|u| self.get(u, u)).collect();
        AForm::sum(self.rank, self.degree, diag)
    }

    pub fn block_diag(&self, other: &FormMatrix) -> Result<FormMatrix> {
        if self.rank != other.rank || self.degree != other.degree {
            return Err(Error::Shape(
                "block sum of incompatible form matrices".into(),
            ));
        }
        let (a, b) = (self.n, other.n);
        Ok(FormMatrix::from_fn(
            self.rank,
            self.degree,
            a + b,
            |u, t| {
                if u < a && t < a {
                    self.get(u, t).clone()
                } else if u >= a && t >= a {
                    other.get(u - a, t - a).clone()
                } else {
                    AForm::zero(self.rank, self.degree)
                }
            },
        ))
    }

    /// Sub-block with the given row and column frame indices.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<AForm>> {
        rows.iter()
            .map(|&u| cols.iter().map(|&t| self.get(u, t).clone()).collect())
            .collect()
    }

    /// Moves the entries onto a larger algebroid, keeping indices.
    pub fn embed(&self, rank: usize) -> FormMatrix {
        self.map(|e| e.embed(rank, 0))
    }

    pub fn substitute(&self, var: usize, value: &ScalarField) -> FormMatrix {
        self.map(|e| e.substitute(var, value))
    }

    /// Coefficient on `key` of every entry, evaluated at `point`.
    pub fn eval_component(
        &self,
        key: crate::form::MultiIndex,
        point: &[f64],
    ) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for u in 0..self.n {
            for t in 0..self.n {
                out[(u, t)] = self.get(u, t).coeff(key).eval(point)?;
            }
        }
        Ok(out)
    }
}

/// Rectangular matrix of scalar fields, row-major.
#[derive(Clone, Debug)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ScalarField>,
}

impl FieldMatrix {
    pub fn from_rows(rows: Vec<Vec<ScalarField>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged field matrix".into()));
        }
        Ok(FieldMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> ScalarField>(
        rows: usize,
        cols: usize,
        mut f: F,
    ) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        FieldMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                ScalarField::one()
            } else {
                ScalarField::zero()
            }
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| ScalarField::zero())
    }

    pub fn from_constants(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| ScalarField::constant(v)).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[ScalarField] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<ScalarField>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    pub fn transpose(&self) -> FieldMatrix {
        FieldMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape("field matrix product shapes".into()));
        }
        Ok(FieldMatrix::from_fn(self.rows, other.cols, |i, j| {
            ScalarField::sum(
                (0..self.cols)
                    .filter(|&k| !self.get(i, k).is_zero() && !other.get(k, j).is_zero())
                    .map(|k| self.get(i, k) * other.get(k, j)),
            )
        }))
    }

    pub fn sub(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Shape("field matrix difference shapes".into()));
        }
        Ok(FieldMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j) - other.get(i, j)
        }))
    }

    pub fn block_diag(&self, other: &FieldMatrix) -> FieldMatrix {
        let (r, c) = (self.rows, self.cols);
        FieldMatrix::from_fn(r + other.rows, c + other.cols, |i, j| {
            if i < r && j < c {
                self.get(i, j).clone()
            } else if i >= r && j >= c {
                other.get(i - r, j - c).clone()
            } else {
                ScalarField::zero()
            }
        })
    }

    /// Lower-triangular `C` with `C Cᵀ = self`, built symbolically.
    pub fn cholesky(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::Shape("Cholesky of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut c = FieldMatrix::zeros(n, n);
        for j in 0..n {
            let diag = self.get(j, j) - ScalarField::sum((0..j).map(|k| c.get(j, k).powi(2)));
            let cjj = diag.sqrt();
            for i in (j + 1)..n {
                let num =
                    self.get(i, j) - ScalarField::sum((0..j).map(|k| c.get(i, k) * c.get(j, k)));
                c.entries[i * n + j] = num / &cjj;
            }
            c.entries[j * n + j] = cjj;
        }
        Ok(c)
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_inverse(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::Shape("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                if !self.get(i, j).is_zero() {
                    return Err(Error::Invalid("matrix is not lower triangular".into()));
                }
            }
        }
        let mut inv = FieldMatrix::zeros(n, n);
        for i in 0..n {
            let inv_ii = ScalarField::one() / self.get(i, i);
            for j in 0..i {
                let acc = ScalarField::sum(
                    (j..i)
                        .filter(|&k| !self.get(i, k).is_zero())
                        .map(|k| self.get(i, k) * inv.get(k, j)),
                );
                inv.entries[i * n + j] = -(acc * &inv_ii);
            }
            inv.entries[i * n + i] = inv_ii;
        }
        Ok(inv)
    }

    /// Entrywise `d_A`, a degree-1 form matrix.
    pub fn d(&self, chart: &AlgebroidChart) -> Result<FormMatrix> {
        if self.rows != self.cols {
            return Err(Error::Shape("d of a non-square field matrix".into()));
        }
        Ok(FormMatrix::from_fn(chart.rank(), 1, self.rows, |u, t| {
            chart.d_function(self.get(u, t))
        }))
    }

    /// Degree-0 form matrix with the same entries.
    pub fn as_forms(&self, rank: usize) -> FormMatrix {
        assert_eq!(self.rows, self.cols);
        FormMatrix::from_fn(rank, 0, self.rows, |u, t| {
            AForm::function(rank, self.get(u, t).clone())
        })
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.get(i, j).eval(point)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{fields_residual, sample_points};
    use crate::expr::parse_expression;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cholesky_reconstructs_metric() {
        let coords = names(&["x", "y"]);
        let p = |s: &str| parse_expression(s, &coords).unwrap();
        let g = FieldMatrix::from_rows(vec![
            vec![p("2 + x^2"), p("x*y"), p("0.1")],
            vec![p("x*y"), p("3 + y^2"), p("sin(x)")],
            vec![p("0.1"), p("sin(x)"), p("4")],
        ])
        .unwrap();
        let c = g.cholesky().unwrap();
        let back = c.mul(&c.transpose()).unwrap().sub(&g).unwrap();
        let pts = sample_points(2, 20, 9);
        assert!(fields_residual(back.entries(), &pts).unwrap() < 1e-14);
        let ci = c.lower_inverse().unwrap();
        let id = ci.mul(&c).unwrap().sub(&FieldMatrix::identity(3)).unwrap();
        assert!(fields_residual(id.entries(), &pts).unwrap() < 1e-14);
    }

    #[test]
    fn wedge_of_matrices_uses_row_lower_convention() {
        // A = b*1 E_12, B = b*2 E_21: (A∧B)_11 = b*1∧b*2, (B∧A)_22 = b*2∧b*1
        let mut a = FormMatrix::zero(2, 1, 2);
        a.set(0, 1, AForm::basis(2, 0));
        let mut b = FormMatrix::zero(2, 1, 2);
        b.set(1, 0, AForm::basis(2, 1));
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let key = crate::form::MultiIndex::from_sorted(&[0, 1]).unwrap();
        assert_eq!(ab.get(0, 0).coeff(key).as_const(), Some(1.0));
        assert_eq!(ba.get(1, 1).coeff(key).as_const(), Some(-1.0));
        assert!(ab.get(1, 1).is_empty());
    }

    #[test]
    fn non_lower_inverse_rejected() {
        let m = FieldMatrix::from_constants(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(m.lower_inverse().is_err());
    }
}
