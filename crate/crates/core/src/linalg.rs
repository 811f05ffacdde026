//! Small dense complex linear algebra on top of `faer`.

use faer::{c64, Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn scale(m: &CMat, c: c64) -> CMat {
    let mut out = zeros_like(m);
    axpy(&mut out, c, m);
    out
}

fn zeros_like(m: &CMat) -> CMat {
    Mat::zeros(m.nrows(), m.ncols())
}

/// `acc += c x`.
pub fn axpy(acc: &mut CMat, c: c64, x: &CMat) {
    let unit = c == c64::new(1.0, 0.0);
    for j in 0..x.ncols() {
        let src = x.col_as_slice(j);
        let dst = acc.col_as_slice_mut(j);
        if unit {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        } else {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += c * s);
        }
    }
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(values[i], 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    })
}

pub fn check_square(m: &CMat, n: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            got: m.nrows(),
        });
    }
    if m.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: m.ncols(),
        });
    }
    Ok(())
}

/// Normalized trace `tr(m) / N`.
pub fn ntrace(m: &CMat) -> c64 {
    let n = m.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..n {
        acc += m[(i, i)];
    }
    acc / n as f64
}

/// `tr(ab) / N` without forming the product.
pub fn ntrace_mul(a: &CMat, b: &CMat) -> c64 {
    ntrace_weighted(a, b, None, None)
}

/// `phi[diag(l) a diag(m) b]`, a missing weight meaning the identity.
pub fn ntrace_weighted(a: &CMat, b: &CMat, l: Option<&[f64]>, m: Option<&[f64]>) -> c64 {
    match (l, m) {
        (None, None) => weighted_kernel(a, b, |_| 1.0, |_| 1.0),
        (Some(l), None) => weighted_kernel(a, b, |i| l[i], |_| 1.0),
        (None, Some(m)) => weighted_kernel(a, b, |_| 1.0, |j| m[j]),
        (Some(l), Some(m)) => weighted_kernel(a, b, |i| l[i], |j| m[j]),
    }
}

#[inline(always)]
fn weighted_kernel(a: &CMat, b: &CMat, l: impl Fn(usize) -> f64, m: impl Fn(usize) -> f64) -> c64 {
    const TILE: usize = 64;
    let n = a.nrows();
    let mut acc = c64::new(0.0, 0.0);
    for i0 in (0..n).step_by(TILE) {
        let i1 = (i0 + TILE).min(n);
        for j0 in (0..n).step_by(TILE) {
            let j1 = (j0 + TILE).min(n);
            for i in i0..i1 {
                let b_col = &b.col_as_slice(i)[j0..j1];
                let mut row = c64::new(0.0, 0.0);
                for (j, bv) in (j0..j1).zip(b_col) {
                    row += a.col_as_slice(j)[i] * bv * m(j);
                }
                acc += row * l(i);
            }
        }
    }
    acc / n as f64
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    let gram = m.adjoint() * m;
    hermitian_eigenvalues(&gram)
        .map(|ev| ev.into_iter().fold(0.0f64, f64::max).max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    let mut ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical {
            message: format!("eigen solver failed: {e:?}"),
            residual: f64::NAN,
        })?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Entries i.i.d. standard complex Gaussian (`E|z|^2 = 1`).
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re * s, im * s)
    })
}

/// Haar unitary: QR of a Ginibre matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    haar_columns(n, n, rng)
}

/// `true` if `m == m*` bit for bit.
pub fn is_exactly_hermitian(m: &CMat) -> bool {
    let n = m.nrows();
    n == m.ncols() && (0..n).all(|j| (0..=j).all(|i| m[(i, j)] == m[(j, i)].conj()))
}

/// `a * b` when the product is known to be Hermitian (e.g. commuting
/// Hermitian factors): only the upper triangle is multiplied, the rest is
/// mirrored, so the result is exactly Hermitian.
pub fn hermitian_product(a: &CMat, b: &CMat) -> CMat {
    use faer::linalg::matmul::triangular::{matmul, BlockStructure};
    let n = a.nrows();
    let mut out = zeros(n);
    matmul(
        out.as_mut(),
        BlockStructure::TriangularUpper,
        faer::Accum::Replace,
        a.as_ref(),
        BlockStructure::Rectangular,
        b.as_ref(),
        BlockStructure::Rectangular,
        c64::new(1.0, 0.0),
        faer::Par::Seq,
    );
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in 0..j {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

/// First `k` columns of a Haar unitary.
pub fn haar_columns<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = Mat::from_fn(n, k, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64::new(re * s, im * s)
    });
    let qr = g.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    Mat::from_fn(n, k, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c64::new(1.0, 0.0)
        };
        q[(i, j)] * phase
    })
}

/// Matrix of `a -> left * a * right` acting on column-major `vec(a)`.
pub fn sandwich_operator(left: &CMat, right: &CMat) -> CMat {
    // vec(L a R) = (R^T kron L) vec(a)
    let n = left.nrows();
    Mat::from_fn(n * n, n * n, |row, col| {
        let (i, j) = (row % n, row / n);
        let (k, l) = (col % n, col / n);
        right[(l, j)] * left[(i, k)]
    })
}

pub fn power(m: &CMat, k: usize) -> CMat {
    let mut acc = identity(m.nrows());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}
