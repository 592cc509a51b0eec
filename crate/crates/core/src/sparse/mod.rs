//! Compressed sparse row matrices and the solvers built on them.

mod cg;
mod dense;
mod eigen;

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use cg::{cg_solve, cg_solve_with_guess, CgOptions, SolveReport};
pub use dense::DenseMatrix;
pub use eigen::{largest_generalized_eigenvalue, smallest_nonzero_generalized_eigenvalue, EigenEstimate};

/// Rows per parallel task in `matvec`; below this size the product runs inline.
const PAR_ROWS: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Square `n × n` matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in input order after a stable sort, so the result depends only
    /// on the triplet sequence. Exact zeros are dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::DimensionMismatch { expected: n, got: r.max(c) + 1 });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            i += 1;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                v += triplets[i].2;
                i += 1;
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("matrix entry ({r}, {c})")));
            }
            if v != 0.0 {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        let n = a.n();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, a.get(i, j)));
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.values[k] * x[self.col_idx[k]];
        }
        s
    }

    /// `y = A x`. Rows are reduced sequentially, so the result is identical
    /// for any number of worker threads.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: y.len() });
        }
        if self.n >= 2 * PAR_ROWS {
            y.par_chunks_mut(PAR_ROWS).enumerate().for_each(|(c, chunk)| {
                let base = c * PAR_ROWS;
                for (k, yi) in chunk.iter_mut().enumerate() {
                    *yi = self.row_dot(base + k, x);
                }
            });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.matvec(y)?;
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(dot(x, &ay))
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
            return Ok(Self { n: self.n, row_ptr: self.row_ptr.clone(), col_idx: self.col_idx.clone(), values });
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Self::from_triplets(self.n, t)
    }

    /// Largest `|a_ij - a_ji| / max|a|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d / scale
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a.set(i, j, v);
            }
        }
        a
    }

    /// MatrixMarket coordinate format (general, real).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(n: usize, seed: u64) -> (SparseMatrix, DenseMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.gen::<f64>()));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen_range(-0.5..0.5);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, t).unwrap();
        let d = a.to_dense();
        (a, d)
    }

    #[test]
    fn small_products() {
        let i = SparseMatrix::identity(3);
        assert_eq!(i.matvec(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(a.matvec(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matches_dense_oracle() {
        let (a, d) = random_spd(50, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = a.matvec(&x).unwrap();
        let yd = d.matvec(&x);
        for (p, q) in y.iter().zip(&yd) {
            assert!((p - q).abs() <= 1e-13);
        }
        assert!(a.symmetry_defect() <= 1e-13);
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let a = SparseMatrix::from_triplets(2, vec![(1, 1, 1.0), (0, 0, 1.0), (1, 1, 2.0), (0, 1, 1.0), (0, 1, -1.0)])
            .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 1), 3.0);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn parallel_matvec_is_bitwise_stable() {
        let (a, _) = random_spd(10_000, 5);
        let x: Vec<f64> = (0..10_000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let y1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| a.matvec(&x).unwrap());
        let y4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| a.matvec(&x).unwrap());
        assert_eq!(y1, y4);
    }

    #[test]
    fn matrix_market_dump() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 2.0), (1, 0, 1.0)]).unwrap();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }

    proptest! {
        #[test]
        fn triplet_order_does_not_change_values(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<(usize, usize, f64)> = (0..40).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6), rng.gen_range(-1.0..1.0))).collect();
            let a = SparseMatrix::from_triplets(6, t.clone()).unwrap();
            let mut dense = [[0.0f64; 6]; 6];
            for &(i, j, v) in &t { dense[i][j] += v; }
            for i in 0..6 { for j in 0..6 { prop_assert!((a.get(i, j) - dense[i][j]).abs() < 1e-14); } }
        }
    }
}
