//! Chern polynomials evaluated on matrices of A-forms, the Bott difference
//! forms built from them, and the transgression and cocycle identities.

mod bott;
mod quadrature;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::form::{generalized_delta, AForm};
use crate::matrix::FormMatrix;

pub use bott::{
    bott_delta, bott_delta_via_product, bott_delta_with_nodes, cocycle_check, fiber_integrate,
    transgression_check,
};
pub use quadrature::{gauss_legendre, nodes_for_degree, simplex_rule};

/// Sum of the principal `h × h` minors of `f`.
pub fn chern_scalar(f: &DMatrix<f64>, h: usize) -> Result<f64> {
    let r = f.nrows();
    if f.ncols() != r {
        return Err(Error::Shape("matrix must be square".into()));
    }
    if h == 0 || h > r {
        return Err(Error::Invalid(format!(
            "c_{h} is undefined on {r}×{r} matrices"
        )));
    }
    let mut total = 0.0;
    for set in combinations(r, h) {
        let m = DMatrix::from_fn(h, h, |a, b| f[(set[a], set[b])]);
        total += m.determinant();
    }
    Ok(total)
}

/// `(1/h!) δ^{σ₁…σ_h}_{κ₁…κ_h} (A₁)_{σ₁}^{κ₁} ∧ … ∧ (A_h)_{σ_h}^{κ_h}`, with
/// entry `(u, t)` of a [`FormMatrix`] read as `A_u^t`.
pub fn chern_polarized(args: &[&FormMatrix]) -> Result<AForm> {
    let h = args.len();
    let first = args
        .first()
        .ok_or_else(|| Error::Invalid("c_h needs at least one argument".into()))?;
    let (n, rank) = (first.dim(), first.rank());
    for a in args {
        if a.dim() != n || a.rank() != rank {
            return Err(Error::Shape("polarized arguments differ in size".into()));
        }
    }
    let degree: usize = args.iter().map(|a| a.degree()).sum();
    let mut acc = Vec::new();
    if h <= n {
        for set in combinations(n, h) {
            let mut search = Search {
                args,
                set: &set,
                sigma: Vec::with_capacity(h),
                kappa: Vec::with_capacity(h),
                out: &mut acc,
            };
            search.run(0, 0, AForm::function(rank, 1.0.into()));
        }
    }
    let total = AForm::sum(rank, degree, acc.iter());
    Ok(total.scale_const(1.0 / factorial(h)))
}

/// `c_h(A, A, …, A)`.
pub fn chern_form(f: &FormMatrix, h: usize) -> Result<AForm> {
    chern_polarized(&vec![f; h])
}

struct Search<'a> {
    args: &'a [&'a FormMatrix],
    set: &'a [usize],
    sigma: Vec<usize>,
    kappa: Vec<usize>,
    out: &'a mut Vec<AForm>,
}

impl Search<'_> {
    // Walks over pairs of bijections (σ, κ) onto `set`, pruning on empty
    // entries and reusing the wedge of the prefix.
    fn run(&mut self, sigma_used: u64, kappa_used: u64, prefix: AForm) {
        let i = self.sigma.len();
        if i == self.set.len() {
            let sign = generalized_delta(&self.sigma, &self.kappa);
            if sign != 0 {
                self.out.push(prefix.scale_const(f64::from(sign)));
            }
            return;
        }
        for (a, &u) in self.set.iter().enumerate() {
            if sigma_used & (1 << a) != 0 {
                continue;
            }
            for (b, &t) in self.set.iter().enumerate() {
                if kappa_used & (1 << b) != 0 {
                    continue;
                }
                let entry = self.args[i].get(u, t);
                if entry.is_empty() {
                    continue;
                }
                let next = prefix.wedge(entry).expect("ranks were checked");
                if next.is_empty() {
                    continue;
                }
                self.sigma.push(u);
                self.kappa.push(t);
                self.run(sigma_used | (1 << a), kappa_used | (1 << b), next);
                self.sigma.pop();
                self.kappa.pop();
            }
        }
    }
}

/// Lie algebra a numeric matrix is claimed to belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalAlgebra {
    /// `Fᵀ + F = 0`
    Orthogonal,
    /// `FᵀJ + JF = 0` with `J = [[0, I], [−I, 0]]`
    Symplectic,
}

/// `|c_{2l−1}(F)|` after confirming `F` lies in the claimed algebra.
pub fn odd_vanishing_check(f: &DMatrix<f64>, l: usize, algebra: ClassicalAlgebra) -> Result<f64> {
    let r = f.nrows();
    if f.ncols() != r {
        return Err(Error::Shape("matrix must be square".into()));
    }
    let scale = f.amax().max(1.0);
    let defect = match algebra {
        ClassicalAlgebra::Orthogonal => (f + f.transpose()).amax(),
        ClassicalAlgebra::Symplectic => {
            if !r.is_multiple_of(2) {
                return Err(Error::Invalid("symplectic matrices have even size".into()));
            }
            let q = r / 2;
            let j = DMatrix::from_fn(r, r, |a, b| {
                if b == a + q {
                    1.0
                } else if a == b + q {
                    -1.0
                } else {
                    0.0
                }
            });
            (f.transpose() * &j + &j * f).amax()
        }
    };
    if defect > 1e-12 * scale {
        return Err(Error::Invalid(format!(
            "matrix is not in the {algebra:?} algebra (defect {defect:e})"
        )));
    }
    if l == 0 {
        return Err(Error::Invalid("l must be at least 1".into()));
    }
    let h = 2 * l - 1;
    if h > r {
        return Ok(0.0);
    }
    Ok(chern_scalar(f, h)?.abs())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Increasing `h`-subsets of `0..n`.
pub(crate) fn combinations(n: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(h);
    fn go(start: usize, n: usize, h: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == h {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < h - cur.len() {
                break;
            }
            cur.push(v);
            go(v + 1, n, h, cur, out);
            cur.pop();
        }
    }
    go(0, n, h, &mut cur, &mut out);
    out
}
