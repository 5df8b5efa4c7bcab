//! Householder QR with column pivoting, used for rank-revealing least
//! squares and collinearity reports.

use nalgebra::{DMatrix, DVector};

/// Relative pivot tolerance: a column is declared dependent when its
/// remaining norm falls below this multiple of the largest diagonal of R.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Column-pivoted Householder factorization `X P = Q R`.
///
/// Storage is column-major: R on and above the diagonal, Householder
/// vectors (with implicit unit leading entry) below it.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    n_rows: usize,
    n_cols: usize,
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(x: &DMatrix<f64>) -> Self {
        Self::with_tolerance(x, PIVOT_TOLERANCE)
    }

    pub fn with_tolerance(x: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (n, k) = x.shape();
        let mut qr = x.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut tau = Vec::with_capacity(k.min(n));
        let mut rank = 0;
        let mut r00 = 0.0;
        let steps = k.min(n);
        for j in 0..steps {
            // pick the remaining column with the largest trailing norm
            let (mut best, mut best_norm) = (j, -1.0);
            for c in j..k {
                let col = &qr[c * n + j..(c + 1) * n];
                let s: f64 = col.iter().map(|v| v * v).sum();
                if s > best_norm {
                    best = c;
                    best_norm = s;
                }
            }
            let norm = best_norm.sqrt();
            if j == 0 {
                r00 = norm;
            }
            if norm == 0.0 || norm <= rel_tol * r00 {
                break;
            }
            if best != j {
                for i in 0..n {
                    qr.swap(j * n + i, best * n + i);
                }
                perm.swap(j, best);
            }
            let x0 = qr[j * n + j];
            let beta = if x0 >= 0.0 { -norm } else { norm };
            let t = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for v in &mut qr[j * n + j + 1..(j + 1) * n] {
                *v *= scale;
            }
            qr[j * n + j] = beta;
            tau.push(t);
            rank = j + 1;
            // apply H_j to the trailing columns
            let (head, tail) = qr.split_at_mut((j + 1) * n);
            let v = &head[j * n + j + 1..(j + 1) * n];
            for c in 0..k - j - 1 {
                let col = &mut tail[c * n + j..(c + 1) * n];
                let w = col[0] + v.iter().zip(&col[1..]).map(|(a, b)| a * b).sum::<f64>();
                let tw = t * w;
                col[0] -= tw;
                for (ci, vi) in col[1..].iter_mut().zip(v) {
                    *ci -= tw * vi;
                }
            }
        }
        PivotedQr { n_rows: n, n_cols: k, qr, tau, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n_cols
    }

    /// Column order chosen by pivoting; entries past `rank()` are the
    /// dependent columns.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Original indices of columns found linearly dependent on the others.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let mut d = self.perm[self.rank..].to_vec();
        d.sort_unstable();
        d
    }

    fn reflect(&self, j: usize, y: &mut [f64]) {
        let n = self.n_rows;
        let v = &self.qr[j * n + j + 1..(j + 1) * n];
        let w = y[j] + v.iter().zip(&y[j + 1..]).map(|(a, b)| a * b).sum::<f64>();
        let tw = self.tau[j] * w;
        y[j] -= tw;
        for (yi, vi) in y[j + 1..].iter_mut().zip(v) {
            *yi -= tw * vi;
        }
    }

    fn r_at(&self, i: usize, j: usize) -> f64 {
        self.qr[j * self.n_rows + i]
    }

    /// Least-squares coefficients in original column order. Dependent
    /// columns receive a zero coefficient.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut qty = y.as_slice().to_vec();
        for j in 0..self.rank {
            self.reflect(j, &mut qty);
        }
        let r = self.rank;
        let mut z = vec![0.0; r];
        for i in (0..r).rev() {
            let mut s = qty[i];
            for (jj, zj) in z.iter().enumerate().take(r).skip(i + 1) {
                s -= self.r_at(i, jj) * zj;
            }
            z[i] = s / self.r_at(i, i);
        }
        let mut b = DVector::zeros(self.n_cols);
        for (pos, &col) in self.perm.iter().enumerate().take(r) {
            b[col] = z[pos];
        }
        b
    }

    /// Residuals `y - X b`, computed by projecting onto the orthogonal
    /// complement of the column space.
    pub fn residuals(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut v = y.as_slice().to_vec();
        for j in 0..self.rank {
            self.reflect(j, &mut v);
        }
        for x in v.iter_mut().take(self.rank) {
            *x = 0.0;
        }
        for j in (0..self.rank).rev() {
            self.reflect(j, &mut v);
        }
        DVector::from_vec(v)
    }

    /// Leading `rank × rank` block of R (pivoted order).
    pub fn r(&self) -> DMatrix<f64> {
        let r = self.rank;
        DMatrix::from_fn(r, r, |i, j| if i <= j { self.r_at(i, j) } else { 0.0 })
    }

    /// `(X'X)^{-1}` in original column order; `None` when rank-deficient.
    pub fn unscaled_covariance(&self) -> Option<DMatrix<f64>> {
        if !self.is_full_rank() {
            return None;
        }
        let k = self.n_cols;
        // R^{-1} by back substitution, column by column
        let mut rinv = DMatrix::<f64>::zeros(k, k);
        for c in 0..k {
            for i in (0..=c).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in i + 1..=c {
                    s -= self.r_at(i, j) * rinv[(j, c)];
                }
                rinv[(i, c)] = s / self.r_at(i, i);
            }
        }
        let m = &rinv * rinv.transpose();
        let mut cov = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                cov[(self.perm[a], self.perm[b])] = m[(a, b)];
            }
        }
        Some(cov)
    }
}

/// 2-norm condition number of `x` after scaling every column to unit
/// length. Infinite for rank-deficient matrices.
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    let mut scaled = x.clone();
    for mut col in scaled.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 {
            return f64::INFINITY;
        }
        col /= n;
    }
    let qr = PivotedQr::with_tolerance(&scaled, 0.0);
    if !qr.is_full_rank() {
        return f64::INFINITY;
    }
    let sv = qr.r().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
