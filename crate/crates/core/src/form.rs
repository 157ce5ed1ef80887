//! Multi-indices and sparse alternating forms.
//!
//! Indices are 0-based internally and printed 1-based. A [`MultiIndex`] is a
//! bit set, so the strictly increasing order is implicit. Coefficients follow
//! the determinant convention: the coefficient on `J = (j_1 < .. < j_k)` is
//! `ω(b_{j_1}, .., b_{j_k})`, with no factorial normalization.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Node, ScalarField, Tape};

/// Largest supported rank (bit-set width).
pub const MAX_RANK: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(u64);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    pub fn from_bits(bits: u64) -> Self {
        MultiIndex(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn single(i: usize) -> Self {
        assert!(i < MAX_RANK, "index {i} exceeds supported rank");
        MultiIndex(1u64 << i)
    }

    /// Builds from a strictly increasing 0-based index list.
    pub fn from_sorted(indices: &[usize]) -> Option<Self> {
        let mut bits = 0u64;
        let mut prev: Option<usize> = None;
        for &i in indices {
            if i >= MAX_RANK || prev.is_some_and(|p| p >= i) {
                return None;
            }
            bits |= 1u64 << i;
            prev = Some(i);
        }
        Some(MultiIndex(bits))
    }

    /// Sorts an arbitrary index list; returns the permutation sign, or `None`
    /// on a repeated index.
    pub fn from_unsorted(indices: &[usize]) -> Option<(Self, i32)> {
        let mut bits = 0u64;
        let mut sign = 1;
        for &i in indices {
            if i >= MAX_RANK || bits & (1u64 << i) != 0 {
                return None;
            }
            if (bits >> i).count_ones() % 2 == 1 {
                sign = -sign;
            }
            bits |= 1u64 << i;
        }
        Some((MultiIndex(bits), sign))
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_RANK && self.0 & (1u64 << i) != 0
    }

    pub fn is_disjoint(self, other: MultiIndex) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: MultiIndex) -> MultiIndex {
        MultiIndex(self.0 | other.0)
    }

    pub fn without(self, other: MultiIndex) -> MultiIndex {
        MultiIndex(self.0 & !other.0)
    }

    /// Highest index present.
    pub fn max_index(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(63 - self.0.leading_zeros() as usize)
        }
    }

    /// Number of elements of `self` strictly below `i`.
    pub fn count_below(self, i: usize) -> usize {
        (self.0 & ((1u64 << i) - 1)).count_ones() as usize
    }

    /// Sign of the shuffle taking the concatenation `(self, other)` to sorted
    /// order. Callers must ensure the sets are disjoint.
    pub fn shuffle_sign(self, other: MultiIndex) -> i32 {
        let mut inversions = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            inversions += (self.0 >> j).count_ones();
            rest &= rest - 1;
        }
        if inversions.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    pub fn indices(self) -> Indices {
        Indices(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.indices().collect()
    }

    /// Shifts every index up by `offset`.
    pub fn shifted(self, offset: usize) -> MultiIndex {
        if self.0 == 0 {
            return self;
        }
        assert!(
            self.max_index().unwrap() + offset < MAX_RANK,
            "shift exceeds supported rank"
        );
        MultiIndex(self.0 << offset)
    }

    /// All increasing multi-indices of the given degree over `0..rank`.
    pub fn all(rank: usize, degree: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(degree);
        fn rec(
            start: usize,
            rank: usize,
            left: usize,
            cur: &mut Vec<usize>,
            out: &mut Vec<MultiIndex>,
        ) {
            if left == 0 {
                out.push(MultiIndex::from_sorted(cur).unwrap());
                return;
            }
            for i in start..=rank.saturating_sub(left) {
                cur.push(i);
                rec(i + 1, rank, left - 1, cur, out);
                cur.pop();
            }
        }
        if degree <= rank {
            rec(0, rank, degree, &mut current, &mut out);
        }
        out
    }
}

pub struct Indices(u64);

impl Iterator for Indices {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, i) in self.indices().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, ")")
    }
}

/// Generalized Kronecker delta: the sign of the permutation taking `upper` to
/// `lower` when both list the same distinct indices, else 0.
pub fn generalized_delta(upper: &[usize], lower: &[usize]) -> i32 {
    if upper.len() != lower.len() {
        return 0;
    }
    let mut perm = Vec::with_capacity(upper.len());
    for l in lower {
        match upper.iter().position(|u| u == l) {
            Some(p) => perm.push(p),
            None => return 0,
        }
    }
    let mut seen = vec![false; perm.len()];
    for &p in &perm {
        if seen[p] {
            return 0;
        }
        seen[p] = true;
    }
    permutation_sign(&perm)
}

/// Sign of a permutation of `0..n` given in one-line notation.
pub fn permutation_sign(perm: &[usize]) -> i32 {
    let mut visited = vec![false; perm.len()];
    let mut sign = 1;
    for start in 0..perm.len() {
        if visited[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !visited[i] {
            visited[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Alternating form of fixed degree on a rank-`rank` bundle.
#[derive(Clone, Debug)]
pub struct AForm {
    rank: usize,
    degree: usize,
    terms: BTreeMap<MultiIndex, ScalarField>,
}

impl AForm {
    pub fn zero(rank: usize, degree: usize) -> Self {
        assert!(rank <= MAX_RANK, "rank {rank} exceeds {MAX_RANK}");
        AForm {
            rank,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Degree-0 form.
    pub fn function(rank: usize, f: ScalarField) -> Self {
        let mut out = AForm::zero(rank, 0);
        out.add_term(MultiIndex::EMPTY, f);
        out
    }

    /// The dual basis element `b*^i`.
    pub fn basis(rank: usize, i: usize) -> Self {
        assert!(i < rank, "basis index {i} out of range for rank {rank}");
        let mut out = AForm::zero(rank, 1);
        out.add_term(MultiIndex::single(i), ScalarField::one());
        out
    }

    /// Builds a form from `(indices, coefficient)` pairs in any order; sorting
    /// signs are applied and repeated indices are rejected.
    pub fn from_terms<I>(rank: usize, degree: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, ScalarField)>,
    {
        let mut out = AForm::zero(rank, degree);
        for (idx, c) in terms {
            if idx.len() != degree {
                return Err(Error::Shape(format!(
                    "multi-index of length {} in a degree-{degree} form",
                    idx.len()
                )));
            }
            if idx.iter().any(|&i| i >= rank) {
                return Err(Error::Shape(format!("index out of range for rank {rank}")));
            }
            let (mi, sign) = MultiIndex::from_unsorted(&idx)
                .ok_or_else(|| Error::Shape("repeated index in multi-index".into()))?;
            out.add_term(mi, if sign < 0 { -c } else { c });
        }
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &ScalarField)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when no coefficient is stored (structural zero).
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, index: MultiIndex) -> ScalarField {
        self.terms
            .get(&index)
            .cloned()
            .unwrap_or_else(ScalarField::zero)
    }

    /// Coefficient on the unsorted index list, sign-adjusted.
    pub fn coeff_of(&self, indices: &[usize]) -> ScalarField {
        match MultiIndex::from_unsorted(indices) {
            Some((mi, sign)) => {
                let c = self.coeff(mi);
                if sign < 0 {
                    -c
                } else {
                    c
                }
            }
            None => ScalarField::zero(),
        }
    }

    /// Accumulates `c` onto the coefficient of `index`.
    pub fn add_term(&mut self, index: MultiIndex, c: ScalarField) {
        debug_assert_eq!(index.degree(), self.degree);
        debug_assert!(index.max_index().is_none_or(|m| m < self.rank));
        if c.is_zero() {
            return;
        }
        let next = match self.terms.remove(&index) {
            Some(prev) => prev + c,
            None => c,
        };
        if !next.is_zero() {
            self.terms.insert(index, next);
        }
    }

    fn check_same(&self, other: &AForm, op: &str) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::Shape(format!(
                "{op}: rank mismatch ({} vs {})",
                self.rank, other.rank
            )));
        }
        if self.degree != other.degree {
            return Err(Error::Shape(format!(
                "{op}: degree mismatch ({} vs {})",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &AForm) -> Result<AForm> {
        self.check_same(other, "add")?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &AForm) -> Result<AForm> {
        self.check_same(other, "sub")?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(*k, -c);
        }
        Ok(out)
    }

    /// Panicking sum for internal use where shapes are known to agree.
    pub fn add(&self, other: &AForm) -> AForm {
        self.try_add(other).expect("form shapes agree")
    }

    pub fn sub(&self, other: &AForm) -> AForm {
        self.try_sub(other).expect("form shapes agree")
    }

    pub fn neg(&self) -> AForm {
        self.map(|c| -c)
    }

    pub fn scale(&self, f: &ScalarField) -> AForm {
        if f.is_zero() {
            return AForm::zero(self.rank, self.degree);
        }
        self.map(|c| f * c)
    }

    pub fn scale_const(&self, k: f64) -> AForm {
        self.scale(&ScalarField::constant(k))
    }

    /// Applies `f` to every coefficient, dropping structural zeros.
    pub fn map<F: FnMut(&ScalarField) -> ScalarField>(&self, mut f: F) -> AForm {
        let mut out = AForm::zero(self.rank, self.degree);
        for (k, c) in &self.terms {
            out.add_term(*k, f(c));
        }
        out
    }

    pub fn wedge(&self, other: &AForm) -> Result<AForm> {
        if self.rank != other.rank {
            return Err(Error::Shape(format!(
                "wedge: rank mismatch ({} vs {})",
                self.rank, other.rank
            )));
        }
        let mut out = AForm::zero(self.rank, self.degree + other.degree);
        if self.degree + other.degree > self.rank {
            return Ok(out);
        }
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                if !i.is_disjoint(*j) {
                    continue;
                }
                let prod = a * b;
                let term = if i.shuffle_sign(*j) < 0 { -prod } else { prod };
                out.add_term(i.union(*j), term);
            }
        }
        Ok(out)
    }

    /// Balanced sum of same-shaped forms.
    pub fn sum<'a, I>(rank: usize, degree: usize, forms: I) -> AForm
    where
        I: IntoIterator<Item = &'a AForm>,
    {
        let mut buckets: BTreeMap<MultiIndex, Vec<ScalarField>> = BTreeMap::new();
        for f in forms {
            debug_assert_eq!((f.rank, f.degree), (rank, degree));
            for (k, c) in &f.terms {
                buckets.entry(*k).or_default().push(c.clone());
            }
        }
        let mut out = AForm::zero(rank, degree);
        for (k, cs) in buckets {
            out.add_term(k, ScalarField::sum(cs));
        }
        out
    }

    /// Reinterprets the form on a larger bundle, moving index `i` to
    /// `i + offset`.
    pub fn embed(&self, rank: usize, offset: usize) -> AForm {
        assert!(self.rank + offset <= rank, "embedding does not fit");
        let mut out = AForm::zero(rank, self.degree);
        for (k, c) in &self.terms {
            out.terms.insert(k.shifted(offset), c.clone());
        }
        out
    }

    /// Contraction of the first slot with `b_l`: `(ι_l ω)(rest) = ω(b_l, rest)`.
    pub fn interior(&self, l: usize) -> AForm {
        assert!(self.degree > 0, "interior product of a function");
        let mut out = AForm::zero(self.rank, self.degree - 1);
        let single = MultiIndex::single(l);
        for (k, c) in &self.terms {
            if k.contains(l) {
                let c = c.clone();
                out.add_term(
                    k.without(single),
                    if k.count_below(l) % 2 == 1 { -c } else { c },
                );
            }
        }
        out
    }

    /// Substitutes a base coordinate in every coefficient.
    pub fn substitute(&self, var: usize, value: &ScalarField) -> AForm {
        self.map(|c| c.substitute(var, value))
    }

    /// Compiles all coefficients for repeated evaluation.
    pub fn compile(&self) -> CompiledForm {
        let keys: Vec<MultiIndex> = self.terms.keys().copied().collect();
        let tape = Tape::compile(self.terms.values());
        CompiledForm { keys, tape }
    }

    /// Evaluates every stored coefficient at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<(MultiIndex, f64)>> {
        self.compile().eval(point)
    }

    pub fn display<'a>(&'a self, coords: &'a [String]) -> FormDisplay<'a> {
        FormDisplay { form: self, coords }
    }
}

pub struct CompiledForm {
    keys: Vec<MultiIndex>,
    tape: Tape,
}

impl CompiledForm {
    pub fn keys(&self) -> &[MultiIndex] {
        &self.keys
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<(MultiIndex, f64)>> {
        let mut vals = Vec::with_capacity(self.keys.len());
        self.tape.eval(point, &mut vals)?;
        Ok(self.keys.iter().copied().zip(vals).collect())
    }

    /// Largest absolute coefficient at `point`.
    pub fn max_abs(&self, point: &[f64]) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.keys.len());
        self.tape.eval(point, &mut vals)?;
        Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

pub struct FormDisplay<'a> {
    form: &'a AForm,
    coords: &'a [String],
}

fn basis_label(index: MultiIndex) -> String {
    if index.degree() == 0 {
        return "1".into();
    }
    index
        .indices()
        .map(|i| format!("b*{}", i + 1))
        .collect::<Vec<_>>()
        .join("∧")
}

impl fmt::Display for FormDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.form.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (k, c)) in self.form.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            let label = basis_label(*k);
            let atomic = matches!(c.node(), Node::Var(_) | Node::Const(_) | Node::Pow(..))
                && c.as_const().is_none_or(|v| v >= 0.0);
            if k.degree() == 0 {
                write!(f, "{}", c.display(self.coords))?;
            } else if c.is_one() {
                write!(f, "{label}")?;
            } else if atomic {
                write!(f, "{}*{label}", c.display(self.coords))?;
            } else {
                write!(f, "({})*{label}", c.display(self.coords))?;
            }
        }
        Ok(())
    }
}

/// Label of a single multi-index in dumps, e.g. `b*1∧b*3`.
pub fn multi_index_label(index: MultiIndex) -> String {
    basis_label(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarField {
        ScalarField::var(0)
    }
    fn y() -> ScalarField {
        ScalarField::var(1)
    }

    #[test]
    fn basis_wedge() {
        let w = AForm::basis(3, 0).wedge(&AForm::basis(3, 1)).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w.coeff(MultiIndex::from_sorted(&[0, 1]).unwrap()).is_one());
        let rev = AForm::basis(3, 1).wedge(&AForm::basis(3, 0)).unwrap();
        assert_eq!(
            rev.coeff(MultiIndex::from_sorted(&[0, 1]).unwrap())
                .as_const(),
            Some(-1.0)
        );
    }

    #[test]
    fn repeated_factor_vanishes() {
        let w = AForm::basis(3, 0).wedge(&AForm::basis(3, 0)).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn shuffle_expansion() {
        let a = AForm::basis(3, 0).scale(&x());
        let b = AForm::basis(3, 1).scale(&y()).add(&AForm::basis(3, 2));
        let w = a.wedge(&b).unwrap();
        let p = [0.3, -0.7];
        let c12 = w
            .coeff(MultiIndex::from_sorted(&[0, 1]).unwrap())
            .eval(&p)
            .unwrap();
        let c13 = w
            .coeff(MultiIndex::from_sorted(&[0, 2]).unwrap())
            .eval(&p)
            .unwrap();
        assert_eq!(c12, 0.3 * -0.7);
        assert_eq!(c13, 0.3);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn wedge_rank_mismatch() {
        assert!(AForm::basis(2, 0).wedge(&AForm::basis(3, 0)).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(generalized_delta(&[1, 2], &[1, 2]), 1);
        assert_eq!(generalized_delta(&[1, 2], &[2, 1]), -1);
        assert_eq!(generalized_delta(&[1, 1], &[1, 2]), 0);
        assert_eq!(generalized_delta(&[1, 1], &[1, 1]), 0);
        assert_eq!(generalized_delta(&[3, 1, 2], &[1, 2, 3]), 1);
        assert_eq!(generalized_delta(&[1, 2, 3], &[2, 1, 4]), 0);
    }

    #[test]
    fn unsorted_sign() {
        let (mi, s) = MultiIndex::from_unsorted(&[2, 0, 1]).unwrap();
        assert_eq!(mi.to_vec(), vec![0, 1, 2]);
        assert_eq!(s, 1);
        let (_, s) = MultiIndex::from_unsorted(&[1, 0]).unwrap();
        assert_eq!(s, -1);
        assert!(MultiIndex::from_unsorted(&[1, 1]).is_none());
        assert!(MultiIndex::from_sorted(&[1, 0]).is_none());
    }

    #[test]
    fn enumerates_multi_indices() {
        assert_eq!(MultiIndex::all(4, 2).len(), 6);
        assert_eq!(MultiIndex::all(3, 0), vec![MultiIndex::EMPTY]);
        assert!(MultiIndex::all(2, 3).is_empty());
        let v = MultiIndex::all(5, 3);
        assert_eq!(v.len(), 10);
        assert!(v.iter().all(|m| m.degree() == 3));
    }

    #[test]
    fn interior_product_sign() {
        // b*1∧b*2 contracted with b_2 in the first slot gives -b*1
        let w = AForm::basis(2, 0).wedge(&AForm::basis(2, 1)).unwrap();
        let i = w.interior(1);
        assert_eq!(i.coeff(MultiIndex::single(0)).as_const(), Some(-1.0));
        assert_eq!(
            w.interior(0).coeff(MultiIndex::single(1)).as_const(),
            Some(1.0)
        );
    }

    #[test]
    fn display_uses_one_based_labels() {
        let coords = vec!["x".to_string()];
        assert_eq!(AForm::basis(2, 0).display(&coords).to_string(), "b*1");
        assert_eq!(
            MultiIndex::from_sorted(&[0, 2]).unwrap().to_string(),
            "(1,3)"
        );
        let f = AForm::basis(2, 1).scale(&(x() + 1.0));
        assert_eq!(f.display(&coords).to_string(), "(x + 1)*b*2");
        assert_eq!(AForm::zero(2, 1).display(&coords).to_string(), "0");
    }

    #[test]
    fn from_terms_sorts_and_validates() {
        let f = AForm::from_terms(3, 2, [(vec![2, 0], ScalarField::one())]).unwrap();
        assert_eq!(f.coeff_of(&[0, 2]).as_const(), Some(-1.0));
        assert_eq!(f.coeff_of(&[2, 0]).as_const(), Some(1.0));
        assert!(AForm::from_terms(3, 2, [(vec![1, 1], ScalarField::one())]).is_err());
        assert!(AForm::from_terms(3, 2, [(vec![1, 3], ScalarField::one())]).is_err());
        assert!(AForm::from_terms(3, 1, [(vec![1, 2], ScalarField::one())]).is_err());
    }
}
