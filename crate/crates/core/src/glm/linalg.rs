//! Householder QR for tall dense matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Householder QR factorisation `A = QR` of an `m x n` matrix with `m >= n`,
/// without column pivoting so that a small diagonal entry of `R` points at
/// the column that is (nearly) spanned by the columns before it.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Upper triangle holds `R`; reflectors are kept separately.
    r: Array2<f64>,
    reflectors: Vec<(Array1<f64>, f64)>,
}

impl Qr {
    pub fn new(a: ArrayView2<'_, f64>) -> Self {
        let (m, n) = a.dim();
        assert!(m >= n, "QR needs at least as many rows as columns");
        let mut r = a.to_owned();
        let mut reflectors = Vec::with_capacity(n);
        for k in 0..n {
            let col = r.slice(ndarray::s![k.., k]);
            let norm = col.dot(&col).sqrt();
            let mut v = col.to_owned();
            if norm == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vv = v.dot(&v);
            let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            for j in k..n {
                let mut cj = r.slice_mut(ndarray::s![k.., j]);
                let s = beta * v.dot(&cj);
                cj.scaled_add(-s, &v);
            }
            // Exact zeros below the diagonal.
            r[[k, k]] = alpha;
            for i in k + 1..m {
                r[[i, k]] = 0.0;
            }
            reflectors.push((v, beta));
        }
        Self { r, reflectors }
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    /// Diagonal of `R`.
    pub fn r_diagonal(&self) -> Array1<f64> {
        (0..self.ncols()).map(|k| self.r[[k, k]]).collect()
    }

    /// First column whose `|R_kk|` falls below `rel_tol` times the largest
    /// `|R_kk|`.
    pub fn deficient_column(&self, rel_tol: f64) -> Option<usize> {
        let diag = self.r_diagonal();
        let largest = diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
        if largest == 0.0 {
            return if diag.is_empty() { None } else { Some(0) };
        }
        diag.iter().position(|d| d.abs() <= rel_tol * largest)
    }

    /// `Q^T b`
    pub fn qt_mul(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = b.to_owned();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            if *beta == 0.0 {
                continue;
            }
            let mut tail = out.slice_mut(ndarray::s![k..]);
            let s = beta * v.dot(&tail);
            tail.scaled_add(-s, v);
        }
        out
    }

    /// Least-squares solution of `A x = b`.
    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let qtb = self.qt_mul(b);
        let n = self.ncols();
        let mut x = Array1::zeros(n);
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for j in i + 1..n {
                s -= self.r[[i, j]] * x[j];
            }
            x[i] = s / self.r[[i, i]];
        }
        x
    }

    /// `(A^T A)^{-1} = R^{-1} R^{-T}`
    pub fn gram_inverse(&self) -> Array2<f64> {
        let n = self.ncols();
        let mut rinv = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            rinv[[j, j]] = 1.0 / self.r[[j, j]];
            for i in (0..j).rev() {
                let mut s = 0.0;
                for k in i + 1..=j {
                    s += self.r[[i, k]] * rinv[[k, j]];
                }
                rinv[[i, j]] = -s / self.r[[i, i]];
            }
        }
        rinv.dot(&rinv.t())
    }
}

/// Weighted least squares: minimises `sum_i w_i (z_i - x_i b)^2` by QR of
/// the row-scaled system. Returns the solution and the factorisation.
pub fn weighted_least_squares(
    x: ArrayView2<'_, f64>,
    z: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
) -> (Array1<f64>, Qr) {
    let sw = w.mapv(f64::sqrt);
    let xw = &x * &sw.view().insert_axis(ndarray::Axis(1));
    let zw = &z * &sw;
    let qr = Qr::new(xw.view());
    (qr.solve(zw.view()), qr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_square_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![3.0, 5.0];
        let x = Qr::new(a.view()).solve(b.view());
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn least_squares_line() {
        let a = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let b = array![1.0, 3.0, 5.0, 7.0];
        let x = Qr::new(a.view()).solve(b.view());
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gram_inverse_matches_direct() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]];
        let g = a.t().dot(&a);
        let inv = Qr::new(a.view()).gram_inverse();
        let eye = g.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((eye[[i, j]] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flags_collinear_column() {
        let a = array![[1.0, 1.0, 2.0], [1.0, 2.0, 3.0], [1.0, 3.0, 4.0], [1.0, 5.0, 6.0]];
        assert_eq!(Qr::new(a.view()).deficient_column(1e-10), Some(2));
        let full = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]];
        assert_eq!(Qr::new(full.view()).deficient_column(1e-10), None);
    }
}
