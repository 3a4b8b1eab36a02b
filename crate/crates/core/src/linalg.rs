//! Small direct solvers: a symmetric band Cholesky for the condensed `u`
//! system and tiny dense SPD helpers for element blocks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Relative size of the diagonal shift applied before factorizing.
pub const REGULARIZATION: f64 = 1e-15;

/// Symmetric matrix stored by its lower band, row-major: entry `(i, j)`
/// with `i - bw ≤ j ≤ i` lives at `i * (bw + 1) + (j + bw - i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k] += v;
        }
    }

    /// `Σ_j |a_ij|` for every row of the symmetric matrix.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                let a = self.data[self.idx(i, j)].abs();
                out[i] += a;
                if j != i {
                    out[j] += a;
                }
            }
        }
        out
    }

    /// In-place Cholesky `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<(), LinalgError> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut sum = self.data[ri + j];
                for k in lo..j {
                    sum -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite(i));
                    }
                    self.data[ri + i] = sum.sqrt();
                } else {
                    self.data[ri + j] = sum / self.data[rj + j];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` after [`SymBand::factor`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if !self.factored {
            return Err(LinalgError::Dimension("matrix not factored".into()));
        }
        if b.len() != self.n {
            return Err(LinalgError::Dimension(format!("rhs {} vs {}", b.len(), self.n)));
        }
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut sum = x[i];
            for k in i.saturating_sub(bw)..i {
                sum -= self.data[ri + k] * x[k];
            }
            x[i] = sum / self.data[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            x[i] /= self.data[ri + i];
            let xi = x[i];
            for k in i.saturating_sub(bw)..i {
                x[k] -= self.data[ri + k] * xi;
            }
        }
        Ok(x)
    }
}

/// In-place dense Cholesky of a row-major `n × n` SPD matrix; the lower
/// triangle receives `L`.
pub fn dense_cholesky(a: &mut [f64], n: usize) -> Result<(), LinalgError> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite(i));
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
    Ok(())
}

/// Solves with a factor from [`dense_cholesky`], overwriting `b`.
pub fn dense_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * b[k];
        }
        b[i] = sum / l[i * n + i];
    }
}

/// Maximum absolute row sum `|||H|||_∞` of a dense row-major matrix.
pub fn max_row_abs_sum(h: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| h[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `H + 1e-15 |||H|||_∞ I` for a dense row-major matrix.
pub fn regularize_dense(h: &mut [f64], n: usize) {
    let shift = REGULARIZATION * max_row_abs_sum(h, n);
    for i in 0..n {
        h[i * n + i] += shift;
    }
}
