//! Exact sparse linear algebra: fraction-free elimination for ranks and
//! determinants over the integers and over integer polynomials, a dense
//! rational oracle, Betti bookkeeping, and the dimension series of a free
//! graded-commutative algebra.

use std::collections::BTreeMap;
use std::ops::Neg;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::graph::permutation_sign;
use crate::poly::Poly;
use crate::{Int, Rat};

/// Column-major sparse matrix with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: Vec<BTreeMap<usize, T>>,
}

impl<T: Clone + Zero + PartialEq> SparseMatrix<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols: vec![BTreeMap::new(); cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(i < self.rows && j < self.cols.len(), "entry out of bounds");
        if v.is_zero() {
            self.cols[j].remove(&i);
        } else {
            self.cols[j].insert(i, v);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        self.cols.get(j).and_then(|c| c.get(&i))
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, &T)> {
        self.cols[j].iter().map(|(&i, v)| (i, v))
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.cols.iter().all(|c| c.is_empty())
    }

    pub fn iter_triplets(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |(&i, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = SparseMatrix::new(self.cols.len(), self.rows);
        for (i, j, v) in self.iter_triplets() {
            t.set(j, i, v.clone());
        }
        t
    }

    pub fn map<U: Clone + Zero + PartialEq>(&self, f: impl Fn(&T) -> U) -> SparseMatrix<U> {
        let mut m = SparseMatrix::new(self.rows, self.cols.len());
        for (i, j, v) in self.iter_triplets() {
            m.set(i, j, f(v));
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.cols.len()]; self.rows];
        for (i, j, v) in self.iter_triplets() {
            d[i][j] = v.clone();
        }
        d
    }
}

impl<T> SparseMatrix<T>
where
    T: Clone + Zero + PartialEq + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    /// Matrix product self * other.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols.len(), other.rows, "inner dimensions must agree");
        let mut out = SparseMatrix::new(self.rows, other.cols.len());
        for (j, bcol) in other.cols.iter().enumerate() {
            let mut acc: BTreeMap<usize, T> = BTreeMap::new();
            for (&k, bkj) in bcol {
                for (&i, aik) in &self.cols[k] {
                    let term = aik.clone() * bkj.clone();
                    match acc.get_mut(&i) {
                        Some(v) => {
                            let sum = std::mem::replace(v, T::zero()) + term;
                            *v = sum;
                        }
                        None => {
                            acc.insert(i, term);
                        }
                    }
                }
            }
            acc.retain(|_, v| !v.is_zero());
            out.cols[j] = acc;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols.len(), other.cols.len());
        let mut out = self.clone();
        for (i, j, v) in other.iter_triplets() {
            let sum = match out.cols[j].remove(&i) {
                Some(u) => u + v.clone(),
                None => v.clone(),
            };
            if !sum.is_zero() {
                out.cols[j].insert(i, sum);
            }
        }
        out
    }
}

/// Ring with exact division (returns None when the quotient does not
/// exist) and a pivot-complexity measure for elimination heuristics.
pub trait ExactRing:
    Clone
    + Zero
    + One
    + PartialEq
    + Neg<Output = Self>
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + Send
    + Sync
{
    fn exact_div(&self, d: &Self) -> Option<Self>;
    fn complexity(&self) -> u64;
}

impl ExactRing for Int {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        if d.is_zero() {
            return None;
        }
        let (q, r) = num_integer::Integer::div_rem(self, d);
        if r.is_zero() {
            Some(q)
        } else {
            None
        }
    }

    fn complexity(&self) -> u64 {
        self.bits()
    }
}

impl ExactRing for Poly<Int> {
    fn exact_div(&self, d: &Self) -> Option<Self> {
        self.exact_div_by(d, |a, b| ExactRing::exact_div(a, b))
    }

    fn complexity(&self) -> u64 {
        self.coeffs().iter().map(|c| c.bits() + 1).sum()
    }
}

/// Internal state of a fraction-free (division-exact) elimination.
struct Elimination<T> {
    /// Active rows, each a sparse map column -> value.
    rows: Vec<BTreeMap<usize, T>>,
    /// Original row index of each active row.
    row_ids: Vec<usize>,
    /// Number of active rows holding each column.
    col_count: Vec<usize>,
    pivot_rows: Vec<usize>,
    pivot_cols: Vec<usize>,
    prev_pivot: T,
}

impl<T: ExactRing> Elimination<T> {
    fn new(m: &SparseMatrix<T>) -> Self {
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); m.rows()];
        let mut col_count = vec![0usize; m.cols()];
        for (i, j, v) in m.iter_triplets() {
            rows[i].insert(j, v.clone());
        }
        let mut nonempty = Vec::new();
        let mut row_ids = Vec::new();
        for (i, r) in rows.into_iter().enumerate() {
            if !r.is_empty() {
                for &j in r.keys() {
                    col_count[j] += 1;
                }
                row_ids.push(i);
                nonempty.push(r);
            }
        }
        Elimination {
            rows: nonempty,
            row_ids,
            col_count,
            pivot_rows: Vec::new(),
            pivot_cols: Vec::new(),
            prev_pivot: T::one(),
        }
    }

    /// Picks the pivot minimizing (Markowitz fill score, complexity,
    /// original row id, column) — deterministic for a given matrix.
    fn choose_pivot(&self) -> Option<(usize, usize)> {
        let mut best: Option<((usize, u64, usize, usize), usize, usize)> = None;
        for (r, row) in self.rows.iter().enumerate() {
            let rn = row.len();
            if rn == 0 {
                continue;
            }
            for (&c, v) in row {
                let score = (
                    (rn - 1) * (self.col_count[c] - 1),
                    v.complexity(),
                    self.row_ids[r],
                    c,
                );
                if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
                    best = Some((score, r, c));
                }
            }
        }
        best.map(|(_, r, c)| (r, c))
    }

    /// One elimination step at the chosen pivot. All remaining rows are
    /// updated with the fraction-free rule
    /// new = (pivot * entry - row_pivotcol * pivotrow_entry) / prev_pivot,
    /// whose divisions are exact because every intermediate entry is a
    /// minor of the original matrix.
    fn step(&mut self, r: usize, c: usize) {
        let pivot_row = self.rows.swap_remove(r);
        let pivot_id = self.row_ids.swap_remove(r);
        for &j in pivot_row.keys() {
            self.col_count[j] -= 1;
        }
        let pivot = pivot_row[&c].clone();
        for row in self.rows.iter_mut() {
            let factor = row.remove(&c);
            if let Some(f) = &factor {
                self.col_count[c] -= 1;
                debug_assert!(!f.is_zero());
            }
            let mut updated: BTreeMap<usize, T> = BTreeMap::new();
            let keys: Vec<usize> = match &factor {
                Some(_) => {
                    let mut k: Vec<usize> =
                        row.keys().chain(pivot_row.keys()).copied().collect();
                    k.sort_unstable();
                    k.dedup();
                    k
                }
                None => row.keys().copied().collect(),
            };
            for j in keys {
                if j == c {
                    continue;
                }
                let a = row.get(&j);
                let b = pivot_row.get(&j);
                let num = match (a, b, &factor) {
                    (Some(a), Some(b), Some(f)) => pivot.clone() * a.clone() - f.clone() * b.clone(),
                    (Some(a), _, _) => pivot.clone() * a.clone(),
                    (None, Some(b), Some(f)) => -(f.clone() * b.clone()),
                    (None, _, None) => unreachable!("key came from somewhere"),
                    (None, None, Some(_)) => unreachable!("key came from somewhere"),
                };
                let v = num
                    .exact_div(&self.prev_pivot)
                    .expect("fraction-free elimination: inexact division");
                let had = row.contains_key(&j);
                let has = !v.is_zero();
                match (had, has) {
                    (false, true) => self.col_count[j] += 1,
                    (true, false) => self.col_count[j] -= 1,
                    _ => {}
                }
                if has {
                    updated.insert(j, v);
                }
            }
            *row = updated;
        }
        // Drop rows eliminated to zero, keeping row_ids aligned.
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].is_empty() {
                self.rows.swap_remove(i);
                self.row_ids.swap_remove(i);
            } else {
                i += 1;
            }
        }
        self.prev_pivot = pivot;
        self.pivot_rows.push(pivot_id);
        self.pivot_cols.push(c);
    }

    fn run(mut self) -> Self {
        while let Some((r, c)) = self.choose_pivot() {
            self.step(r, c);
        }
        self
    }
}

/// Rank by fraction-free elimination with Markowitz-style pivoting.
pub fn rank<T: ExactRing>(m: &SparseMatrix<T>) -> usize {
    let e = Elimination::new(m).run();
    e.pivot_rows.len()
}

/// Determinant of a square matrix by fraction-free elimination: the last
/// pivot, corrected by the parity of the pivot row and column orders.
pub fn determinant<T: ExactRing>(m: &SparseMatrix<T>) -> T {
    assert_eq!(m.rows(), m.cols(), "determinant requires a square matrix");
    let n = m.rows();
    if n == 0 {
        return T::one();
    }
    let e = Elimination::new(m).run();
    if e.pivot_rows.len() < n {
        return T::zero();
    }
    let sign = sequence_parity(&e.pivot_rows) * sequence_parity(&e.pivot_cols);
    if sign < 0 {
        -e.prev_pivot
    } else {
        e.prev_pivot
    }
}

/// Parity of a sequence of distinct indices relative to sorted order.
fn sequence_parity(seq: &[usize]) -> i8 {
    let mut sorted: Vec<usize> = seq.to_vec();
    sorted.sort_unstable();
    let rank_of: BTreeMap<usize, usize> =
        sorted.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let perm: Vec<usize> = seq.iter().map(|v| rank_of[v]).collect();
    permutation_sign(&perm)
}

/// Dense rational Gaussian elimination; the oracle for `rank`.
pub fn rank_dense_rational(m: &SparseMatrix<Int>) -> usize {
    dense_eliminate(m.map(|v| Rat::from(v.clone())).to_dense()).0
}

/// Dense rational determinant; the oracle for `determinant`.
pub fn determinant_dense_rational(m: &SparseMatrix<Int>) -> Rat {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    if n == 0 {
        return Rat::one();
    }
    let (r, det) = dense_eliminate(m.map(|v| Rat::from(v.clone())).to_dense());
    if r < n {
        Rat::zero()
    } else {
        det
    }
}

/// Returns (rank, product of pivots with row-swap signs).
fn dense_eliminate(mut a: Vec<Vec<Rat>>) -> (usize, Rat) {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut det = Rat::one();
    let mut rank = 0usize;
    let mut row = 0usize;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let Some(p) = (row..rows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        if p != row {
            a.swap(p, row);
            det = -det;
        }
        let pv = a[row][col].clone();
        det *= pv.clone();
        for i in 0..rows {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone() / pv.clone();
                for j in col..cols {
                    let delta = f.clone() * a[row][j].clone();
                    a[i][j] -= delta;
                }
            }
        }
        rank += 1;
        row += 1;
    }
    (rank, det)
}

/// One homological degree of a Betti table.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct BettiRow {
    pub k: usize,
    pub dim: usize,
    pub rank_out: usize,
    pub rank_in: usize,
    pub betti: usize,
    /// False when the window truncates the incoming boundary, making
    /// `betti` only an upper bound.
    pub exact: bool,
}

/// Betti numbers over a window of degrees.
#[derive(Clone, Debug, Serialize, PartialEq, Eq, Default)]
pub struct BettiTable {
    pub rows: Vec<BettiRow>,
}

impl BettiTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,dim,rank_out,rank_in,betti,exact\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k, r.dim, r.rank_out, r.rank_in, r.betti, r.exact
            ));
        }
        s
    }

    pub fn betti(&self, k: usize) -> Option<&BettiRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

/// Dimension series of the free graded-commutative algebra on generators
/// with `gen_dims[d]` generators in degree d (odd degrees anticommute,
/// even degrees are polynomial). Entry 0 of the result is the unit.
pub fn free_closure(gen_dims: &[usize], k_max: usize) -> Vec<usize> {
    let mut series = vec![0usize; k_max + 1];
    series[0] = 1;
    for (d, &g) in gen_dims.iter().enumerate().skip(1) {
        if d > k_max || g == 0 {
            continue;
        }
        for _ in 0..g {
            if d % 2 == 1 {
                // multiply by (1 + x^d): descending update
                for i in (d..=k_max).rev() {
                    series[i] += series[i - d];
                }
            } else {
                // multiply by 1/(1 - x^d): ascending update
                for i in d..=k_max {
                    series[i] += series[i - d];
                }
            }
        }
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_dense(rows: &[&[i64]]) -> SparseMatrix<Int> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = SparseMatrix::new(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, Int::from(v));
            }
        }
        m
    }

    #[test]
    fn small_ranks() {
        assert_eq!(rank(&from_dense(&[&[1, 2], &[2, 4]])), 1);
        assert_eq!(rank(&from_dense(&[&[1, 0], &[0, 1]])), 2);
        assert_eq!(rank(&from_dense(&[&[0, 0], &[0, 0]])), 0);
        assert_eq!(rank(&from_dense(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]])), 2);
    }

    #[test]
    fn determinant_matches_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..60 {
            let n = rng.gen_range(1..=6);
            let mut m = SparseMatrix::new(n, n);
            for i in 0..n {
                for j in 0..n {
                    if rng.gen_bool(0.7) {
                        m.set(i, j, Int::from(rng.gen_range(-5i64..=5)));
                    }
                }
            }
            let d = determinant(&m);
            let oracle = determinant_dense_rational(&m);
            assert_eq!(Rat::from(d), oracle, "trial {trial}");
        }
    }

    #[test]
    fn rank_matches_oracle_and_transpose_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let r = rng.gen_range(1..=7);
            let c = rng.gen_range(1..=7);
            let mut m = SparseMatrix::new(r, c);
            for i in 0..r {
                for j in 0..c {
                    if rng.gen_bool(0.5) {
                        m.set(i, j, Int::from(rng.gen_range(-4i64..=4)));
                    }
                }
            }
            let rk = rank(&m);
            assert_eq!(rk, rank_dense_rational(&m), "trial {trial}");
            assert_eq!(rk, rank(&m.transpose()), "transpose, trial {trial}");
        }
    }

    #[test]
    fn polynomial_rank_and_determinant() {
        use crate::IntPoly;
        // [[s, 1], [s^2, s]] has determinant 0; [[s, 1], [1, s]] has s^2 - 1.
        let s = IntPoly::var();
        let one = IntPoly::one();
        let mut m = SparseMatrix::new(2, 2);
        m.set(0, 0, s.clone());
        m.set(0, 1, one.clone());
        m.set(1, 0, s.clone() * s.clone());
        m.set(1, 1, s.clone());
        assert_eq!(rank(&m), 1);
        assert!(determinant(&m).is_zero());

        let mut m2 = SparseMatrix::new(2, 2);
        m2.set(0, 0, s.clone());
        m2.set(0, 1, one.clone());
        m2.set(1, 0, one.clone());
        m2.set(1, 1, s.clone());
        assert_eq!(rank(&m2), 2);
        let det = determinant(&m2);
        let expected = s.clone() * s.clone() - one.clone();
        assert_eq!(det, expected);

        // Polynomial determinant agrees with pointwise evaluation.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let mut m = SparseMatrix::new(n, n);
            for i in 0..n {
                for j in 0..n {
                    if rng.gen_bool(0.8) {
                        let c0 = rng.gen_range(-3i64..=3);
                        let c1 = rng.gen_range(-2i64..=2);
                        let p = IntPoly::from_coeffs(vec![Int::from(c0), Int::from(c1)]);
                        m.set(i, j, p);
                    }
                }
            }
            let d = determinant(&m);
            for t in [-2i64, 0, 1, 3, 5] {
                let mt = m.map(|p| p.eval(&Int::from(t)));
                assert_eq!(d.eval(&Int::from(t)), determinant_dense_rational(&mt).to_integer());
            }
        }
    }

    #[test]
    fn product_and_addition() {
        let a = from_dense(&[&[1, 2], &[3, 4]]);
        let b = from_dense(&[&[0, 1], &[1, 0]]);
        let ab = a.mul(&b);
        assert_eq!(ab, from_dense(&[&[2, 1], &[4, 3]]));
        let sum = a.add(&b);
        assert_eq!(sum, from_dense(&[&[1, 3], &[4, 4]]));
        let neg = a.map(|v| -v.clone());
        assert!(a.add(&neg).is_zero_matrix());
    }

    #[test]
    fn betti_csv_shape() {
        let t = BettiTable {
            rows: vec![BettiRow { k: 3, dim: 1, rank_out: 0, rank_in: 0, betti: 1, exact: true }],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("k,dim,rank_out,rank_in,betti,exact\n"));
        assert!(csv.contains("3,1,0,0,1,true"));
    }

    #[test]
    fn free_closure_series() {
        // One odd generator in degree 3 and one in degree 7: products give
        // dimension 1 exactly at 0, 3, 7, 10.
        let mut gens = vec![0usize; 11];
        gens[3] = 1;
        gens[7] = 1;
        let dims = free_closure(&gens, 10);
        let expect: Vec<usize> =
            (0..=10).map(|k| usize::from(k == 0 || k == 3 || k == 7 || k == 10)).collect();
        assert_eq!(dims, expect);
        // An even generator is polynomial: one generator in degree 2 gives
        // dimension 1 in every even degree.
        let mut gens = vec![0usize; 3];
        gens[2] = 1;
        assert_eq!(free_closure(&gens, 8), vec![1, 0, 1, 0, 1, 0, 1, 0, 1]);
        // Two odd generators in the same degree.
        let mut gens = vec![0usize; 4];
        gens[3] = 2;
        assert_eq!(free_closure(&gens, 6), vec![1, 0, 0, 2, 0, 0, 1]);
    }
}
