//! Small dense linear-algebra kernels: Cholesky with pivot reporting,
//! orthogonal least squares, cyclic Jacobi eigenvalues and one-sided Jacobi SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor together with its pivot range.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub lower: DMatrix<f64>,
    /// Smallest and largest pivots `L_kk^2`.
    pub min_pivot: f64,
    pub max_pivot: f64,
}

impl Cholesky {
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot > 0.0 {
            self.min_pivot / self.max_pivot
        } else {
            0.0
        }
    }

    /// `A^{-1}` from `A = L L^T`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.lower.nrows();
        let linv = self
            .lower
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("factor has a positive diagonal");
        let inv = linv.transpose() * linv;
        symmetrize(&inv)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("factor has a positive diagonal");
        self.lower
            .transpose()
            .solve_upper_triangular(&y)
            .expect("factor has a positive diagonal")
    }
}

/// Cholesky–Banachiewicz factorization. Returns `None` when a pivot is not
/// strictly positive.
pub fn cholesky(a: &DMatrix<f64>) -> Option<Cholesky> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                min_pivot = min_pivot.min(sum);
                max_pivot = max_pivot.max(sum);
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    if n == 0 {
        min_pivot = 0.0;
    }
    Some(Cholesky {
        lower: l,
        min_pivot,
        max_pivot,
    })
}

/// `(Q + Q^T) / 2`.
pub fn symmetrize(q: &DMatrix<f64>) -> DMatrix<f64> {
    (q + q.transpose()) * 0.5
}

/// Largest absolute difference between `q` and its transpose.
pub fn asymmetry(q: &DMatrix<f64>) -> f64 {
    let n = q.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((q[(i, j)] - q[(j, i)]).abs());
        }
    }
    worst
}

/// Least-squares solution of `phi * x ≈ y` through a Householder QR of `phi`.
///
/// The caller is responsible for checking that `phi` has full column rank.
pub fn least_squares_qr(phi: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = phi.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    r.solve_upper_triangular(&qty)
        .unwrap_or_else(|| DVector::from_element(phi.ncols(), f64::NAN))
}

/// Precomputed QR of a tall design, so repeated right-hand sides are cheap.
#[derive(Debug, Clone)]
pub struct QrLeastSquares {
    q_t: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl QrLeastSquares {
    pub fn new(phi: &DMatrix<f64>) -> Self {
        let qr = phi.clone().qr();
        Self {
            q_t: qr.q().transpose(),
            r: qr.r(),
        }
    }

    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = &self.q_t * y;
        self.r
            .solve_upper_triangular(&qty)
            .unwrap_or_else(|| DVector::from_element(self.r.ncols(), f64::NAN))
    }

    /// Solution using only the first `m` columns of the design.
    pub fn solve_leading(&self, y: &DVector<f64>, m: usize) -> DVector<f64> {
        let qty = self.q_t.rows(0, m) * y;
        self.r
            .view((0, 0), (m, m))
            .solve_upper_triangular(&qty)
            .unwrap_or_else(|| DVector::from_element(m, f64::NAN))
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Sweeps stop once the off-diagonal Frobenius norm falls below
/// `1e-12` relative to the matrix norm.
pub fn jacobi_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let n = sym.nrows();
    let mut a = sym.clone();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-12 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// Thin SVD `A = U diag(s) V^T` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD. Deterministic: fixed sweep order, no
/// randomization.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let (rows, cols) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let eps = 1e-15;
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for k in 0..rows {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let up = u[(k, p)];
                    let uq = u[(k, q)];
                    u[(k, p)] = c * up - s * uq;
                    u[(k, q)] = s * up + c * uq;
                }
                for k in 0..cols {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, u.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut uu = DMatrix::<f64>::zeros(rows, cols);
    let mut vv = DMatrix::<f64>::zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    for (dst, &(src, norm)) in order.iter().enumerate() {
        s.push(norm);
        if norm > 0.0 {
            uu.set_column(dst, &(u.column(src) / norm));
        }
        vv.set_column(dst, &v.column(src));
    }
    Svd {
        u: uu,
        singular_values: s,
        v: vv,
    }
}

/// Fails with [`Error::NotSymmetric`] when `q` is asymmetric beyond `tol`.
pub fn check_symmetric(q: &DMatrix<f64>, tol: f64) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            got: q.ncols(),
        });
    }
    let asym = asymmetry(q);
    let scale = q.amax().max(1.0);
    if asym > tol * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}
