//! Small dense helpers on top of nalgebra for symmetric definite systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry count as zero.
const PIVOT_RTOL: f64 = 1e-13;

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
    min_pivot: f64,
}

impl Cholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        assert_eq!(d, a.ncols(), "cholesky needs a square matrix");
        let scale = (0..d).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut l = DMatrix::<f64>::zeros(d, d);
        let mut min_pivot = f64::INFINITY;
        for j in 0..d {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            min_pivot = min_pivot.min(diag);
            if !(diag > PIVOT_RTOL * scale) {
                return Err(Error::Singular { pivot: diag });
            }
            let root = diag.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..d {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / root;
            }
        }
        Ok(Cholesky { l, min_pivot })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut DVector<f64>) {
        let d = self.l.nrows();
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward(&self, b: &mut DVector<f64>) {
        let d = self.l.nrows();
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let d = self.l.nrows();
        let mut inv = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            let mut e = DVector::<f64>::zeros(d);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        symmetrize(&mut inv);
        inv
    }
}

/// Solves `(-m) x = rhs` for negative definite `m`.
///
/// The system is equilibrated by its diagonal first, so a few huge penalty
/// weights do not trip the pivot test. If the factorization still fails,
/// retries once with `delta I` added to the scaled matrix,
/// `delta = 1e-10 * trace / d`; the returned flag reports the shift.
pub fn solve_negative_definite(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let d = m.nrows();
    let scale = DVector::from_fn(d, |i, _| {
        let v = -m[(i, i)];
        if v > 0.0 && v.is_finite() {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let neg = DMatrix::from_fn(d, d, |i, j| -m[(i, j)] * scale[i] * scale[j]);
    let b = rhs.component_mul(&scale);
    let unscale = |y: DVector<f64>| y.component_mul(&scale);
    match Cholesky::new(&neg) {
        Ok(chol) => Ok((unscale(chol.solve(&b)), false)),
        Err(first) => {
            let delta = 1e-10 * neg.trace().abs().max(f64::MIN_POSITIVE) / d.max(1) as f64;
            let mut shifted = neg;
            for i in 0..d {
                shifted[(i, i)] += delta;
            }
            match Cholesky::new(&shifted) {
                Ok(chol) => Ok((unscale(chol.solve(&b)), true)),
                Err(_) => Err(first),
            }
        }
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Eigenvalues of a symmetric matrix, sorted in decreasing order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let mut values: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = Cholesky::new(&a).unwrap().solve(&b);
        assert!((&a * &x - &b).amax() < 1e-14);
        let inv = Cholesky::new(&a).unwrap().inverse();
        assert!((&a * inv - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn rank_deficiency_names_the_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match Cholesky::new(&a) {
            Err(Error::Singular { pivot }) => assert!(pivot.abs() < 1e-12),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn shift_fallback_is_flagged() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]);
        let (x, shifted) = solve_negative_definite(&m, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!(shifted);
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
