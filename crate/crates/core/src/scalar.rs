//! Laws of scalar integrals `int f dX`, diagonal measures, mu-norms, the
//! moment ODE and the norm inequalities built on them.
//!
//! For a step function `f` the law of `int f dX` has free cumulants
//! `r_k int f^k`; everything here reduces to noncrossing sums over those.

use num_traits::{Signed, Zero};

use crate::cumulants::{moments_from_cumulants, nc_sum_f64, CumulantSequence, MomentSequence};
use crate::error::{Error, Result};
use crate::partitions::for_each_noncrossing;
use crate::rational::{self, Rational};
use crate::step::StepFunction;

/// Highest order accepted by the mu-norm routines.
pub const MAX_NORM_ORDER: usize = crate::cumulants::MAX_MOMENT_ORDER;

/// `||f||_p^p`.
pub fn lp_power(f: &StepFunction, p: usize) -> Rational {
    f.lp_power(p)
}

/// Cumulants of `int f dX`: `r_k int f^k`, same length and kind as `r`.
pub fn integral_cumulants(f: &StepFunction, r: &CumulantSequence) -> CumulantSequence {
    r.map(|k, v| v * f.power_integral(k))
}

/// Law of `int f dX` up to moment order `n`.
pub fn integral_moments(
    f: &StepFunction,
    r: &CumulantSequence,
    n: usize,
) -> Result<MomentSequence> {
    moments_from_cumulants(&integral_cumulants(f, r), n)
}

/// `r_n(Delta_k(t)) = t r_(nk)` for `n = 1..=count`.
pub fn diagonal_cumulants(
    r: &CumulantSequence,
    k: usize,
    t: &Rational,
    count: usize,
) -> Result<CumulantSequence> {
    if k == 0 || count == 0 {
        return Err(Error::domain("diagonal order and length must be positive"));
    }
    if t.is_negative() {
        return Err(Error::domain("diagonal measure time must be nonnegative"));
    }
    let values = (1..=count)
        .map(|n| r.get(n * k).map(|v| v * t))
        .collect::<Result<Vec<_>>>()?;
    CumulantSequence::new(r.kind(), values)
}

/// `phi[Delta_k(t)] = t r_k`.
pub fn diagonal_mean(r: &CumulantSequence, k: usize, t: &Rational) -> Result<Rational> {
    Ok(r.get(k)? * t)
}

/// `r_(ik)` for `i = 1..=count`: cumulants of the "k-th power" law `mu^k`.
pub fn power_cumulants(r: &CumulantSequence, k: usize, count: usize) -> Result<CumulantSequence> {
    diagonal_cumulants(r, k, &rational::one(), count)
}

fn check_norm_order(n: usize) -> Result<()> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "mu-norm order must be even and positive, got {n}"
        )));
    }
    if n > MAX_NORM_ORDER {
        return Err(Error::Size(format!(
            "mu-norm order must be at most {MAX_NORM_ORDER}, got {n}"
        )));
    }
    Ok(())
}

fn check_regime(r: &CumulantSequence, n: usize) -> Result<()> {
    for (i, v) in r.prefix(n)?.iter().enumerate() {
        if v.is_negative() {
            return Err(Error::Regime {
                index: i + 1,
                value: rational::format(v),
            });
        }
    }
    Ok(())
}

/// `||f||_{n,mu}^n = sum over NC(n) of prod_B r_|B| ||f||_|B|^|B|`, exactly.
pub fn mu_norm_power(f: &StepFunction, r: &CumulantSequence, n: usize) -> Result<Rational> {
    check_norm_order(n)?;
    check_regime(r, n)?;
    let weighted = r
        .prefix(n)?
        .iter()
        .enumerate()
        .map(|(i, v)| v * f.lp_power(i + 1))
        .collect();
    let seq = CumulantSequence::truncated(weighted)?;
    moments_from_cumulants(&seq, n)?.get(n)
}

/// `||f||_{n,mu}`.
pub fn mu_norm(f: &StepFunction, r: &CumulantSequence, n: usize) -> Result<f64> {
    Ok(rational::to_f64(&mu_norm_power(f, r, n)?).powf(1.0 / n as f64))
}

/// The sequence `||f||_{n,mu}` for `n = 2, 4, ..., n_max` and an
/// extrapolated guess for its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct MuNormTail {
    pub values: Vec<(usize, f64)>,
    /// Richardson estimate assuming `a_n = L + c/n + o(1/n)`; not certified.
    pub extrapolated: f64,
}

pub fn mu_norm_tail(f: &StepFunction, r: &CumulantSequence, n_max: usize) -> Result<MuNormTail> {
    check_norm_order(n_max)?;
    let values = (1..=n_max / 2)
        .map(|j| mu_norm(f, r, 2 * j).map(|v| (2 * j, v)))
        .collect::<Result<Vec<_>>>()?;
    let extrapolated = match values.as_slice() {
        [.., (n1, a1), (n2, a2)] => (*n2 as f64 * a2 - *n1 as f64 * a1) / (*n2 - *n1) as f64,
        [(_, a)] => *a,
        [] => 0.0,
    };
    Ok(MuNormTail {
        values,
        extrapolated,
    })
}

/// Result of the moment ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFlow {
    /// `(t, [phi[M(t)^1], ..., phi[M(t)^n_max]])` at every grid node.
    pub trajectory: Vec<(f64, Vec<f64>)>,
    pub warning: Option<String>,
}

impl MomentFlow {
    pub fn final_moments(&self) -> &[f64] {
        &self
            .trajectory
            .last()
            .expect("trajectory has the initial node")
            .1
    }
}

/// Minimum step count without an accuracy warning.
pub const MIN_FLOW_STEPS: usize = 100;

/// `d/dt y_n = sum_k f^k r_k sum_{i_1+..+i_k = n-k} (i_1 + 1) y_(i_1) ... y_(i_k)`.
fn flow_rhs(y: &[f64], fk_rk: &[f64], out: &mut [f64]) {
    let n_max = out.len();
    // y_0 = 1 implicitly
    let full: Vec<f64> = std::iter::once(1.0).chain(y.iter().copied()).collect();
    let weighted: Vec<f64> = full
        .iter()
        .enumerate()
        .map(|(i, v)| (i + 1) as f64 * v)
        .collect();
    // conv = weighted * full^(k-1), truncated at degree n_max - 1
    let mut conv = weighted.clone();
    conv.truncate(n_max);
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 1..=n_max {
        if k > 1 {
            let mut next = vec![0.0; n_max - k + 1];
            for (d, slot) in next.iter_mut().enumerate() {
                *slot = (0..=d).map(|i| conv[i] * full[d - i]).sum();
            }
            conv = next;
        }
        let c = fk_rk[k - 1];
        if c == 0.0 {
            continue;
        }
        for n in k..=n_max {
            out[n - 1] += c * conv[n - k];
        }
    }
}

/// RK4 solution of the moment ODE for `M(t) = int_0^t f dX`, with grid
/// nodes at every breakpoint of `f`.
pub fn moment_flow(
    f: &StepFunction,
    r: &CumulantSequence,
    n_max: usize,
    t_end: f64,
    steps: usize,
) -> Result<MomentFlow> {
    if n_max == 0 {
        return Err(Error::domain("moment order must be positive"));
    }
    let rk: Vec<f64> = r.prefix(n_max)?.iter().map(rational::to_f64).collect();
    let warning = (steps < MIN_FLOW_STEPS).then(|| {
        format!("only {steps} RK4 steps requested; at least {MIN_FLOW_STEPS} are needed for the stated accuracy")
    });
    let steps = steps.max(1);
    let pieces = f.to_f64_pieces();
    let start = pieces[0].0.min(0.0);
    let mut nodes: Vec<f64> = vec![start];
    nodes.extend(
        f.breakpoints()
            .iter()
            .map(rational::to_f64)
            .filter(|&b| b > start && b < t_end),
    );
    if t_end > start {
        nodes.push(t_end);
    }
    let span = (t_end - start).max(0.0);

    let mut y = vec![0.0; n_max];
    let mut trajectory = vec![(start, y.clone())];
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; n_max],
        vec![0.0; n_max],
        vec![0.0; n_max],
        vec![0.0; n_max],
    );
    let mut tmp = vec![0.0; n_max];
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let value = f.value_at_f64(0.5 * (a + b));
        let coeffs: Vec<f64> = rk
            .iter()
            .enumerate()
            .map(|(i, r)| r * value.powi(i as i32 + 1))
            .collect();
        let sub = (((b - a) / span) * steps as f64).ceil().max(1.0) as usize;
        let h = (b - a) / sub as f64;
        for j in 0..sub {
            flow_rhs(&y, &coeffs, &mut k1);
            tmp.iter_mut()
                .zip(&y)
                .zip(&k1)
                .for_each(|((t, y), k)| *t = y + 0.5 * h * k);
            flow_rhs(&tmp, &coeffs, &mut k2);
            tmp.iter_mut()
                .zip(&y)
                .zip(&k2)
                .for_each(|((t, y), k)| *t = y + 0.5 * h * k);
            flow_rhs(&tmp, &coeffs, &mut k3);
            tmp.iter_mut()
                .zip(&y)
                .zip(&k3)
                .for_each(|((t, y), k)| *t = y + h * k);
            flow_rhs(&tmp, &coeffs, &mut k4);
            for i in 0..n_max {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let t = if j + 1 == sub {
                b
            } else {
                a + (j + 1) as f64 * h
            };
            trajectory.push((t, y.clone()));
        }
    }
    Ok(MomentFlow {
        trajectory,
        warning,
    })
}

/// Both sides of `||f||_{n,mu^k} <= || |f|^(1/k) ||_{nk,mu}^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdgReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs - lhs`.
    pub slack: f64,
}

pub fn bdg_check(f: &StepFunction, r: &CumulantSequence, k: usize, n: usize) -> Result<BdgReport> {
    check_norm_order(n)?;
    if k == 0 {
        return Err(Error::domain("power k must be positive"));
    }
    let nk = n * k;
    if nk > MAX_NORM_ORDER {
        return Err(Error::Size(format!("n*k = {nk} exceeds {MAX_NORM_ORDER}")));
    }
    check_regime(r, nk)?;
    let lhs = mu_norm(f, &power_cumulants(r, k, n)?, n)?;

    let pieces: Vec<(f64, f64)> = f
        .pieces()
        .map(|(len, v)| {
            (
                rational::to_f64(&len),
                rational::to_f64(v).abs().powf(1.0 / k as f64),
            )
        })
        .collect();
    let weighted: Vec<f64> = r
        .prefix(nk)?
        .iter()
        .enumerate()
        .map(|(i, rv)| {
            let norm: f64 = pieces
                .iter()
                .map(|(len, g)| len * g.powi(i as i32 + 1))
                .sum();
            rational::to_f64(rv) * norm
        })
        .collect();
    // (S^(1/nk))^k = S^(1/n)
    let rhs = nc_sum_f64(nk, &weighted)?.max(0.0).powf(1.0 / n as f64);
    Ok(BdgReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
        slack: rhs - lhs,
    })
}

/// `phi[M_f M_g] = r_2 int fg + r_1^2 int f int g` for scalar integrals.
pub fn scalar_isometry(
    f: &StepFunction,
    g: &StepFunction,
    r: &CumulantSequence,
) -> Result<Rational> {
    let r1 = r.get(1)?;
    let r2 = r.get(2)?;
    Ok(r2 * f.mul(g).integral() + &r1 * &r1 * f.integral() * g.integral())
}

/// `phi[M_1 ... M_n]` for `M_i = int f_i dX`:
/// `sum over NC(n) of prod_B r_|B| int prod_{i in B} f_i`.
pub fn mixed_moment(fs: &[StepFunction], r: &CumulantSequence) -> Result<Rational> {
    let n = fs.len();
    if n == 0 {
        return Ok(rational::one());
    }
    let cumulants = r.prefix(n)?;
    let mut total = Rational::zero();
    let mut failure = None;
    for_each_noncrossing(n, |labels, sizes| {
        if failure.is_some() {
            return;
        }
        let mut term = rational::one();
        for (b, &size) in sizes.iter().enumerate() {
            if cumulants[size - 1].is_zero() {
                term = Rational::zero();
                break;
            }
            let mut product: Option<StepFunction> = None;
            for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == b) {
                product = Some(match product {
                    None => fs[i].clone(),
                    Some(p) => p.mul(&fs[i]),
                });
            }
            match product {
                Some(p) => term *= &cumulants[size - 1] * p.integral(),
                None => failure = Some(Error::validation("empty block in partition walk")),
            }
        }
        total += term;
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}
