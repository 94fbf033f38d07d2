//! Small dense linear algebra: Cholesky factors with append-only updates and
//! Householder least squares.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` of an SPD matrix `A = L Lᵀ`, stored
/// packed by rows (row `i` holds `i + 1` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    n: usize,
    packed: Vec<T>,
    log_diag_sum: T,
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl<T: Scalar> Cholesky<T> {
    pub fn empty() -> Self {
        Cholesky {
            n: 0,
            packed: Vec::new(),
            log_diag_sum: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factors a dense row-major `n × n` matrix. Returns `None` if a pivot is
    /// not strictly positive.
    pub fn factor(a: &[T], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut chol = Cholesky::empty();
        let mut cross = Vec::with_capacity(n);
        for i in 0..n {
            cross.clear();
            cross.extend_from_slice(&a[i * n..i * n + i]);
            chol = chol.extend(&cross, a[i * n + i])?;
        }
        Some(chol)
    }

    /// Factors `A + jitter·I`, growing the jitter geometrically from
    /// `1e-10·mean(diag)` until the factorization succeeds.
    pub fn factor_with_jitter(a: &[T], n: usize) -> Result<Self> {
        if let Some(c) = Self::factor(a, n) {
            return Ok(c);
        }
        let mean_diag = (0..n).map(|i| a[i * n + i]).sum::<T>() / T::of(n.max(1) as f64);
        let mut jitter = T::of(1e-10) * mean_diag.max(T::one());
        let mut work = a.to_vec();
        for _ in 0..12 {
            for i in 0..n {
                work[i * n + i] = a[i * n + i] + jitter;
            }
            if let Some(c) = Self::factor(&work, n) {
                return Ok(c);
            }
            jitter = jitter * T::of(10.0);
        }
        Err(Error::SingularCovariance)
    }

    /// `L⁻¹ b` by forward substitution.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut y = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = &self.packed[row_start(i)..row_start(i) + i + 1];
            let mut s = b[i];
            for (l, yj) in row[..i].iter().zip(&y) {
                s = s - *l * *yj;
            }
            y.push(s / row[i]);
        }
        y
    }

    /// Schur complement `diag − kᵀ A⁻¹ k` of appending a row/column with
    /// cross terms `cross` and diagonal `diag`.
    pub fn conditional_variance(&self, cross: &[T], diag: T) -> T {
        let l = self.solve_lower(cross);
        diag - l.iter().map(|v| *v * *v).sum::<T>()
    }

    /// Factor of the bordered matrix `[[A, k], [kᵀ, diag]]`. `None` when the
    /// new pivot is not strictly positive.
    pub fn extend(&self, cross: &[T], diag: T) -> Option<Self> {
        assert_eq!(cross.len(), self.n);
        let l = self.solve_lower(cross);
        let schur = diag - l.iter().map(|v| *v * *v).sum::<T>();
        if !(schur > T::zero()) || !schur.is_finite() {
            return None;
        }
        let pivot = schur.sqrt();
        let mut packed = Vec::with_capacity(self.packed.len() + self.n + 1);
        packed.extend_from_slice(&self.packed);
        packed.extend(l);
        packed.push(pivot);
        Some(Cholesky {
            n: self.n + 1,
            packed,
            log_diag_sum: self.log_diag_sum + pivot.ln(),
        })
    }

    /// `ln det A = 2 Σ ln Lᵢᵢ`.
    pub fn ln_det(&self) -> T {
        T::of(2.0) * self.log_diag_sum
    }

    pub fn diag(&self, i: usize) -> T {
        self.packed[row_start(i) + i]
    }
}

/// Determinant by Gaussian elimination with partial pivoting. Used as an
/// independent check on the Cholesky route.
pub fn determinant<T: Scalar>(a: &[T], n: usize) -> T {
    let mut m = a.to_vec();
    let mut det = T::one();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| {
                m[i * n + c]
                    .abs()
                    .partial_cmp(&m[j * n + c].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[p * n + c] == T::zero() {
            return T::zero();
        }
        if p != c {
            for k in 0..n {
                m.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        let pivot = m[c * n + c];
        det = det * pivot;
        for r in c + 1..n {
            let f = m[r * n + c] / pivot;
            for k in c..n {
                m[r * n + k] = m[r * n + k] - f * m[c * n + k];
            }
        }
    }
    det
}

/// Minimizes `‖A z − b‖₂` for the matrix whose columns are `cols`, via
/// Householder QR. Returns `None` if the columns are numerically rank
/// deficient.
pub fn least_squares<T: Scalar>(cols: &[&[T]], b: &[T]) -> Option<Vec<T>> {
    let n = cols.len();
    let m = b.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if n > m {
        return None;
    }
    // Column-major working copy.
    let mut a: Vec<T> = Vec::with_capacity(m * n);
    for c in cols {
        debug_assert_eq!(c.len(), m);
        a.extend_from_slice(c);
    }
    let mut rhs = b.to_vec();
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|v| *v * *v).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    if scale == T::zero() {
        return None;
    }
    let mut diag = vec![T::zero(); n];
    for k in 0..n {
        let col = &mut a[k * m..(k + 1) * m];
        let norm = col[k..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm <= T::rank_epsilon() * scale {
            return None;
        }
        let alpha = if col[k] > T::zero() { -norm } else { norm };
        // v = x − alpha e₁, stored in place of the column.
        col[k] = col[k] - alpha;
        let vnorm2 = col[k..].iter().map(|v| *v * *v).sum::<T>();
        diag[k] = alpha;
        if vnorm2 == T::zero() {
            continue;
        }
        let v: Vec<T> = col[k..].to_vec();
        for j in k + 1..n {
            let cj = &mut a[j * m..(j + 1) * m];
            let dot = v.iter().zip(&cj[k..]).map(|(x, y)| *x * *y).sum::<T>();
            let f = T::of(2.0) * dot / vnorm2;
            for (x, vi) in cj[k..].iter_mut().zip(&v) {
                *x = *x - f * *vi;
            }
        }
        let dot = v.iter().zip(&rhs[k..]).map(|(x, y)| *x * *y).sum::<T>();
        let f = T::of(2.0) * dot / vnorm2;
        for (x, vi) in rhs[k..].iter_mut().zip(&v) {
            *x = *x - f * *vi;
        }
    }
    // Back substitution with R (diag holds R_kk, upper part lives in a).
    let mut z = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s = s - a[j * m + k] * z[j];
        }
        z[k] = s / diag[k];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            a[i * n + i] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_ln_det_matches_elimination() {
        for n in 1..=6 {
            let a = spd(n);
            let c = Cholesky::factor(&a, n).unwrap();
            let det = determinant(&a, n);
            assert!((c.ln_det() - det.ln()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn extend_equals_refactor() {
        let a = spd(5);
        let full = Cholesky::factor(&a, 5).unwrap();
        let sub: Vec<f64> = (0..4)
            .flat_map(|i| a[i * 5..i * 5 + 4].to_vec())
            .collect();
        let part = Cholesky::factor(&sub, 4).unwrap();
        let ext = part.extend(&a[20..24], a[24]).unwrap();
        assert!((ext.ln_det() - full.ln_det()).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        let a = vec![1.0, 1.0, 1.0, 1.0];
        assert!(Cholesky::<f64>::factor(&a, 2).is_none());
        let c = Cholesky::factor_with_jitter(&a, 2).unwrap();
        assert!(c.ln_det().is_finite());
    }

    #[test]
    fn least_squares_solves_overdetermined() {
        let c0 = [1.0, 0.0, 1.0];
        let c1 = [0.0, 1.0, 1.0];
        let b = [1.0, 2.0, 3.0];
        let z = least_squares::<f64>(&[&c0, &c1], &b).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12 && (z[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_detects_dependence() {
        let c0 = [1.0, 2.0, 3.0];
        let c1 = [2.0, 4.0, 6.0];
        assert!(least_squares::<f64>(&[&c0, &c1], &[1.0, 1.0, 1.0]).is_none());
    }
}
