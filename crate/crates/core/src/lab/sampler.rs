//! Increment samplers for the two matrix models.

use faer::{c64, Mat};
use num_traits::Zero;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cumulants::{moments_from_cumulants, semigroup_cumulants, CumulantSequence};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rational::{self, Rational};
use crate::transforms::{SpectralCdf, QUANTILE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixModel {
    /// `sqrt(r_2 dt) (G + G*)/sqrt(2N) + r_1 dt I`; semicircular bases only.
    GaussianHermitian,
    /// `U diag(q) U*` with Haar `U` and `q` the quantiles of `mu_dt`.
    HaarQuantile,
}

impl std::str::FromStr for MatrixModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_hermitian" | "gaussian" => Ok(MatrixModel::GaussianHermitian),
            "haar_quantile" | "haar" => Ok(MatrixModel::HaarQuantile),
            other => Err(Error::parse(format!("unknown matrix model {other:?}"))),
        }
    }
}

/// `true` if only `r_1` and `r_2` can be nonzero.
pub fn is_semicircular_type(r: &CumulantSequence) -> bool {
    r.values().iter().skip(2).all(Zero::is_zero)
}

/// Draws increments distributed (asymptotically) as `mu_dt`.
#[derive(Debug, Clone)]
pub enum IncrementSampler {
    Zero { n: usize },
    Gaussian { n: usize, sigma: f64, drift: f64 },
    Quantile { n: usize, nonzero: Vec<f64> },
}

impl IncrementSampler {
    pub fn new(
        base: &CumulantSequence,
        dt: &Rational,
        n: usize,
        model: MatrixModel,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("matrix dimension must be positive"));
        }
        let law = semigroup_cumulants(base, dt)?;
        if law.values().iter().all(Zero::is_zero) {
            return Ok(IncrementSampler::Zero { n });
        }
        match model {
            MatrixModel::GaussianHermitian => {
                if !is_semicircular_type(base) {
                    return Err(Error::domain(
                        "gaussian_hermitian needs a semicircular base (r_k = 0 for k >= 3)",
                    ));
                }
                let r1 = rational::to_f64(&law.get(1)?);
                let r2 = rational::to_f64(&law.get(2).unwrap_or_else(|_| Rational::zero()));
                if r2 < 0.0 {
                    return Err(Error::domain("variance r_2 must be nonnegative"));
                }
                Ok(IncrementSampler::Gaussian {
                    n,
                    sigma: r2.sqrt(),
                    drift: r1,
                })
            }
            MatrixModel::HaarQuantile => {
                let q = matched_quantiles(&law, n)?;
                Ok(IncrementSampler::Quantile {
                    n,
                    nonzero: q.into_iter().filter(|&x| x != 0.0).collect(),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            IncrementSampler::Zero { n }
            | IncrementSampler::Gaussian { n, .. }
            | IncrementSampler::Quantile { n, .. } => *n,
        }
    }

    /// Nonzero eigenvalues shared by every increment, when the model fixes them.
    pub fn fixed_spectrum(&self) -> Option<&[f64]> {
        match self {
            IncrementSampler::Zero { .. } => Some(&[]),
            IncrementSampler::Gaussian { .. } => None,
            IncrementSampler::Quantile { nonzero, .. } => Some(nonzero),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        match self {
            IncrementSampler::Zero { n } => linalg::zeros(*n),
            IncrementSampler::Gaussian { n, sigma, drift } => {
                gaussian_hermitian(*n, *sigma, *drift, rng)
            }
            IncrementSampler::Quantile { n, nonzero } => {
                let k = nonzero.len();
                if k == 0 {
                    return linalg::zeros(*n);
                }
                let u = linalg::haar_columns(*n, k, rng);
                let scaled = Mat::from_fn(*n, k, |i, j| u[(i, j)] * nonzero[j]);
                let x = &scaled * u.adjoint();
                Mat::from_fn(*n, *n, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5)
            }
        }
    }
}

/// GUE-type matrix: the upper triangle of `(G + G*)/sqrt(2)` is drawn directly
/// (unit-variance complex off-diagonal, unit-variance real diagonal).
fn gaussian_hermitian<R: Rng + ?Sized>(n: usize, sigma: f64, drift: f64, rng: &mut R) -> CMat {
    let s = sigma / (n as f64).sqrt();
    let off = s * std::f64::consts::FRAC_1_SQRT_2;
    let mut m = linalg::zeros(n);
    for j in 0..n {
        for i in 0..j {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = c64::new(re * off, im * off);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        let d: f64 = rng.sample(StandardNormal);
        m[(j, j)] = c64::new(d * s + drift, 0.0);
    }
    m
}

/// Quantiles of `law`, with the continuous part adjusted by an affine map so
/// that the empirical first two moments equal `m_1`, `m_2` of `law` exactly.
pub fn matched_quantiles(law: &CumulantSequence, n: usize) -> Result<Vec<f64>> {
    let cdf = SpectralCdf::new(law, QUANTILE_EPS)?;
    let mut q = cdf.quantiles(n)?;
    let moments = moments_from_cumulants(law, 2.min(law.available_order().unwrap_or(2)).max(1))?;
    let m1 = rational::to_f64(&moments.get(1)?);
    let m2 = if moments.truncation_order() >= 2 {
        rational::to_f64(&moments.get(2)?)
    } else {
        m1 * m1
    };
    let atoms: Vec<f64> = cdf.atoms().iter().map(|&(a, _)| a).collect();
    let is_atom = |x: f64| atoms.iter().any(|&a| (x - a).abs() <= 1e-12);
    let cont: Vec<usize> = (0..n).filter(|&i| !is_atom(q[i])).collect();
    let (fixed1, fixed2) = (0..n)
        .filter(|&i| is_atom(q[i]))
        .fold((0.0, 0.0), |(s1, s2), i| (s1 + q[i], s2 + q[i] * q[i]));
    let target1 = n as f64 * m1 - fixed1;
    let target2 = n as f64 * m2 - fixed2;
    let nc = cont.len();
    if nc == 0 {
        if (target1.abs() + target2.abs()) > 1e-9 {
            return Err(Error::Calibration(format!(
                "all {n} quantiles sit on atoms; increase N so the continuous part gets a quantile"
            )));
        }
        return Ok(q);
    }
    let mean_c = cont.iter().map(|&i| q[i]).sum::<f64>() / nc as f64;
    let var_c = cont.iter().map(|&i| (q[i] - mean_c).powi(2)).sum::<f64>() / nc as f64;
    let alpha = target1 / nc as f64;
    let want_var = target2 / nc as f64 - alpha * alpha;
    if nc == 1 || var_c <= 0.0 {
        cont.iter().for_each(|&i| q[i] = alpha);
    } else {
        if want_var < 0.0 {
            return Err(Error::Calibration(format!(
                "cannot match the second moment with {nc} continuous quantiles"
            )));
        }
        let beta = (want_var / var_c).sqrt();
        cont.iter()
            .for_each(|&i| q[i] = alpha + beta * (q[i] - mean_c));
    }
    q.sort_by(f64::total_cmp);
    Ok(q)
}
