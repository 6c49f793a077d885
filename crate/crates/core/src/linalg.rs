//! Dense linear-algebra helpers shared by the modules: norms, Kronecker
//! products, the matrix exponential and a unitary eigendecomposition for
//! normal matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_real(a: &RMat, b: &RMat) -> RMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    RMat::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Logarithmic norm `λ_max((M + M†)/2)`.
pub fn log_norm(m: &CMat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // Gram matrix on the short side keeps d×d^k flattenings cheap; its largest
    // eigenvalue is still computed to full relative precision.
    let gram = if m.nrows() <= m.ncols() { m * m.adjoint() } else { m.adjoint() * m };
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max).sqrt()
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

/// One-norm (max column sum), used for scaling in [`expm`].
fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor core.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m.scale(0.5_f64.powi(squarings));
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Unitary eigendecomposition `K = V diag(λ) V†` of a normal matrix.
///
/// The Hermitian part is diagonalized first; inside each of its degenerate
/// eigenspaces the anti-Hermitian part is diagonalized. This yields an
/// orthonormal eigenbasis even for degenerate spectra.
pub fn normal_eigen(k: &CMat, normality_tol: f64) -> Result<(Vec<C64>, CMat)> {
    if !k.is_square() {
        return Err(Error::DimensionMismatch { expected: k.nrows(), got: k.ncols() });
    }
    let n = k.nrows();
    let kd = k.adjoint();
    let comm = max_abs(&(k * &kd - &kd * k));
    if comm > normality_tol {
        return Err(Error::NonNormal(comm));
    }
    let herm = (k + &kd).scale(0.5);
    let anti = (k - &kd) * C64::new(0.0, -0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let scale = max_abs(k).max(1.0);
    let cluster_tol = 1e-9 * scale;
    let mut v = CMat::zeros(n, n);
    let mut col = 0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= cluster_tol
        {
            end += 1;
        }
        let basis = CMat::from_fn(n, end - start, |r, c| eig.eigenvectors[(r, order[start + c])]);
        if end - start == 1 {
            v.set_column(col, &basis.column(0));
            col += 1;
        } else {
            let restricted = basis.adjoint() * &anti * &basis;
            let restricted = (&restricted + restricted.adjoint()).scale(0.5);
            let sub = restricted.symmetric_eigen();
            let rotated = &basis * &sub.eigenvectors;
            for c in 0..rotated.ncols() {
                v.set_column(col, &rotated.column(c));
                col += 1;
            }
        }
        start = end;
    }
    let lambdas = (0..n)
        .map(|c| {
            let phi = v.column(c);
            (phi.adjoint() * k * phi)[(0, 0)]
        })
        .collect();
    Ok((lambdas, v))
}
