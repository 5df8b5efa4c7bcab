//! Reference least squares by normal equations and Gaussian elimination.
//! Deliberately elementary: plain `Vec` arithmetic, no shared code with the
//! estimators it checks.

/// `oracle_condition` value above which the oracle flags ill-conditioning;
/// the square of the estimator's threshold on the design itself.
pub const ORACLE_CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("design has no rows or no columns")]
    Empty,
    #[error("row {0} has the wrong number of columns")]
    Ragged(usize),
    #[error("normal equations are singular")]
    Singular,
}

/// `X'X` and `X'y` from row-major `design`.
fn normal_equations(design: &[Vec<f64>], response: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>), OracleError> {
    let k = design.first().map(Vec::len).unwrap_or(0);
    if design.is_empty() || k == 0 || design.len() != response.len() {
        return Err(OracleError::Empty);
    }
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (r, row) in design.iter().enumerate() {
        if row.len() != k {
            return Err(OracleError::Ragged(r));
        }
        for i in 0..k {
            xty[i] += row[i] * response[r];
            for j in 0..k {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    Ok((xtx, xty))
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return Err(OracleError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Least-squares coefficients of `response` on the columns of `design`
/// (given as rows), by solving the normal equations.
pub fn oracle_ols(design: &[Vec<f64>], response: &[f64]) -> Result<Vec<f64>, OracleError> {
    let (xtx, xty) = normal_equations(design, response)?;
    gauss_solve(xtx, xty)
}

/// 1-norm condition number of `X'X` after scaling every column of `X` to
/// unit length.
pub fn oracle_condition(design: &[Vec<f64>]) -> Result<f64, OracleError> {
    let k = design.first().map(Vec::len).unwrap_or(0);
    let mut norms = vec![0.0; k];
    for row in design {
        for (n, v) in norms.iter_mut().zip(row) {
            *n += v * v;
        }
    }
    let scaled: Vec<Vec<f64>> = design
        .iter()
        .map(|row| row.iter().zip(&norms).map(|(v, n)| v / n.sqrt()).collect())
        .collect();
    let (a, _) = normal_equations(&scaled, &vec![0.0; design.len()])?;
    let norm1 = |m: &Vec<Vec<f64>>| (0..k).map(|j| (0..k).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut inv_cols = Vec::with_capacity(k);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        inv_cols.push(gauss_solve(a.clone(), e)?);
    }
    // inv_cols[j] is column j of the inverse; the 1-norm is its max column sum
    let inv_norm = inv_cols.iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(norm1(&a) * inv_norm)
}
