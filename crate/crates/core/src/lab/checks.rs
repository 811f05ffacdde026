//! Monte-Carlo checks of the operator-level formulas on sampled paths.
//!
//! Trace-level quantities are accumulated with `tr(ab)/N` evaluated without
//! forming `ab`, so diagonal or identity factors keep every step at `O(N^2)`.
//! Operator-norm diagnostics need dense products and are only produced for
//! `N <= DENSE_LIMIT`.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use faer::c64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::biprocess::{self, AdaptedBiprocess, BoundBiprocess, BoundFactor, Op};
use super::path::walk;
use super::sampler::IncrementSampler;
use super::MatrixModelConfig;
use crate::cumulants::{moments_from_cumulants, semigroup_cumulants};
use crate::error::{Error, Result};
use crate::ito::{partial_k, Polynomial};
use crate::linalg::{self, CMat};
use crate::rational::{self, Rational};
use crate::scalar::{mixed_moment, mu_norm};
use crate::step::StepFunction;
use crate::transforms::{SpectralCdf, QUANTILE_EPS};

/// Default trace tolerance for checks that rely on asymptotic freeness.
pub const TRACE_TOLERANCE: f64 = 0.05;

/// Largest dimension for which operator-norm diagnostics are computed.
pub const DENSE_LIMIT: usize = 48;

/// Relative tolerance of identities that are exact at finite `N`.
const EXACT_TOL: f64 = 1e-10;

/// Relative slack allowed in the contraction check on top of `3 stderr`.
const CONTRACTION_REL_TOL: f64 = 0.02;

const MAX_POWER: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub config: MatrixModelConfig,
    pub predicted: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub pass: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Report {
    fn new(
        check: &str,
        config: &MatrixModelConfig,
        predicted: f64,
        estimate: f64,
        stderr: f64,
        pass: bool,
    ) -> Self {
        Report {
            check: check.to_string(),
            config: config.clone(),
            predicted,
            estimate,
            stderr,
            pass,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        if value.is_finite() {
            self.diagnostics.insert(key.to_string(), value);
        }
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

fn within_3se(estimate: c64, predicted: c64, stderr: f64) -> bool {
    (estimate - predicted).norm() <= 3.0 * stderr + 1e-12 * predicted.norm().max(1.0)
}

/// Runs `trial` for every trial index, in parallel, keeping trial order.
fn run_trials<T: Send>(
    config: &MatrixModelConfig,
    trial: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..config.trials)
        .into_par_iter()
        .map(&trial)
        .collect()
}

fn prepare(config: &MatrixModelConfig) -> Result<IncrementSampler> {
    config.validate()?;
    config.sampler()
}

fn bind(config: &MatrixModelConfig, u: &AdaptedBiprocess) -> Result<BoundBiprocess> {
    u.bind(config.n, config.steps, &config.dt())
}

fn snapshots(bound: &[&BoundBiprocess]) -> Vec<usize> {
    let mut keep: Vec<usize> = bound.iter().flat_map(|b| b.snapshots()).collect();
    keep.sort_unstable();
    keep.dedup();
    keep
}

fn to_dense(op: Op, n: usize) -> CMat {
    match op {
        Op::Identity => linalg::identity(n),
        Op::Diagonal(d) => linalg::diag(d),
        Op::Dense(m) => m.clone(),
    }
}

fn c_re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// Lazily computed powers `x^1, x^2, ...`.
struct Powers<'a> {
    base: &'a CMat,
    cache: Vec<CMat>,
    // decided on the first multiplication
    hermitian: Option<bool>,
}

impl<'a> Powers<'a> {
    fn new(base: &'a CMat) -> Self {
        Powers {
            base,
            cache: Vec::new(),
            hermitian: None,
        }
    }

    fn ensure(&mut self, k: usize) {
        while self.cache.len() + 1 < k {
            let hermitian = *self
                .hermitian
                .get_or_insert_with(|| linalg::is_exactly_hermitian(self.base));
            let prev = self.cache.last().unwrap_or(self.base);
            let next = if hermitian {
                linalg::hermitian_product(prev, self.base)
            } else {
                prev * self.base
            };
            self.cache.push(next);
        }
    }

    /// `x^k` for `k >= 1`, already computed.
    fn at(&self, k: usize) -> &CMat {
        if k == 1 {
            self.base
        } else {
            &self.cache[k - 2]
        }
    }

    fn get(&mut self, k: usize) -> &CMat {
        debug_assert!(k >= 1);
        self.ensure(k);
        self.at(k)
    }

    /// `phi[x^k]` using at most the `ceil(k/2)` power.
    fn trace(&mut self, k: usize) -> c64 {
        match k {
            0 => c_re(1.0),
            1 => linalg::ntrace(self.base),
            _ => {
                let (a, b) = (k.div_ceil(2), k / 2);
                self.ensure(a);
                linalg::ntrace_mul(self.at(a), self.at(b))
            }
        }
    }

    /// `phi[d x^k]` for a diagonal `d`.
    fn trace_diag(&mut self, d: &[f64], k: usize) -> c64 {
        if k == 0 {
            return c_re(mean(d));
        }
        let (a, b) = (k.div_ceil(2), k / 2);
        self.ensure(a);
        if b == 0 {
            let x = self.at(a);
            return d
                .iter()
                .enumerate()
                .map(|(i, w)| x[(i, i)] * *w)
                .sum::<c64>()
                / d.len() as f64;
        }
        linalg::ntrace_weighted(self.at(a), self.at(b), Some(d), None)
    }

    fn dense(&mut self, k: usize) -> CMat {
        if k == 0 {
            linalg::identity(self.base.nrows())
        } else {
            self.get(k).clone()
        }
    }
}

/// A left multiplier for `phi[L x^k]`.
enum Left {
    Identity,
    Diagonal(Vec<f64>),
    Dense(CMat),
}

impl Left {
    /// `b * a` for two factor values.
    fn product(b: Op, a: Op, n: usize) -> Left {
        match (b, a) {
            (Op::Identity, Op::Identity) => Left::Identity,
            (Op::Identity, Op::Diagonal(d)) | (Op::Diagonal(d), Op::Identity) => {
                Left::Diagonal(d.to_vec())
            }
            (Op::Diagonal(x), Op::Diagonal(y)) => {
                Left::Diagonal(x.iter().zip(y).map(|(p, q)| p * q).collect())
            }
            _ => Left::Dense(biprocess::rmul(&to_dense(b, n), a).into_owned()),
        }
    }

    fn trace_with(&self, xp: &mut Powers, k: usize) -> c64 {
        match self {
            Left::Identity => xp.trace(k),
            Left::Diagonal(d) => xp.trace_diag(d, k),
            Left::Dense(l) => {
                if k == 0 {
                    linalg::ntrace(l)
                } else {
                    linalg::ntrace_mul(l, xp.get(k))
                }
            }
        }
    }
}

type Weighted<'a> = (c64, Option<&'a [f64]>, Option<&'a [f64]>);

/// Terms with identity or diagonal factors only.
fn weights<'a>(terms: &[(c64, Op<'a>, Op<'a>)]) -> Option<Vec<Weighted<'a>>> {
    terms
        .iter()
        .map(|&(c, a, b)| Some((c, a.weight()?, b.weight()?)))
        .collect()
}

fn weight_product(x: Option<&[f64]>, y: Option<&[f64]>) -> Option<Vec<f64>> {
    match (x, y) {
        (None, None) => None,
        (Some(v), None) | (None, Some(v)) => Some(v.to_vec()),
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| p * q).collect()),
    }
}

fn mean_weight(w: Option<&[f64]>) -> f64 {
    w.map_or(1.0, mean)
}

/// `u(j) # x^k` as a matrix, or `None` when `u` is inactive at `j`.
fn apply_power<'a>(terms: &[(c64, Op, Op)], xk: &'a CMat) -> Option<Cow<'a, CMat>> {
    match terms {
        [] => None,
        [(c, a, b)] if *c == c_re(1.0) => Some(biprocess::sandwich(*a, xk, *b)),
        _ => {
            let mut acc = linalg::zeros(xk.nrows());
            for &(c, a, b) in terms {
                linalg::axpy(&mut acc, c, &biprocess::sandwich(a, xk, b));
            }
            Some(Cow::Owned(acc))
        }
    }
}

/// `phi[N M*]` against `r_2 int <V, U> ds + r_1^2 phi[m(int V) m(int U)*]`,
/// with `<A (x) B, C (x) D> = phi[C* A] phi[B D*]`.
pub fn verify_ito_isometry(
    config: &MatrixModelConfig,
    v: &AdaptedBiprocess,
    u: &AdaptedBiprocess,
) -> Result<Report> {
    let sampler = prepare(config)?;
    if !v.is_constant() || !u.is_constant() {
        return Err(Error::validation(
            "the isometry check needs constant (non-random) biprocesses",
        ));
    }
    let (bv, bu) = (bind(config, v)?, bind(config, u)?);
    let n = config.n;
    let r1 = rational::to_f64(&config.base.get(1)?);
    let r2 = rational::to_f64(&config.base.get(2)?);
    let dt = config.dt_f64();

    // closed form
    let dense_terms = |b: &BoundBiprocess| -> Vec<(c64, CMat, CMat, usize, usize)> {
        b.terms
            .iter()
            .map(|t| {
                let op = |f: &BoundFactor| match f {
                    BoundFactor::Identity => linalg::identity(n),
                    BoundFactor::Diagonal(d) => linalg::diag(d),
                    BoundFactor::Dense(m) => m.clone(),
                    BoundFactor::Path | BoundFactor::PathAt(_) => {
                        unreachable!("constant biprocess")
                    }
                };
                (t.coeff, op(&t.left), op(&t.right), t.lo, t.hi)
            })
            .collect()
    };
    let (tv, tu) = (dense_terms(&bv), dense_terms(&bu));
    let mut inner = c64::new(0.0, 0.0);
    let mut int_v = linalg::zeros(n);
    let mut int_u = linalg::zeros(n);
    for (c, a, b, lo, hi) in &tv {
        linalg::axpy(&mut int_v, *c * dt * (hi - lo) as f64, &(a * b));
        for (d, cc, dd, lo2, hi2) in &tu {
            let overlap = hi.min(hi2).saturating_sub(*lo.max(lo2));
            if overlap == 0 {
                continue;
            }
            let w = linalg::ntrace_mul(&linalg::adjoint(cc), a)
                * linalg::ntrace_mul(b, &linalg::adjoint(dd));
            inner += *c * d.conj() * w * dt * overlap as f64;
        }
    }
    for (c, a, b, lo, hi) in &tu {
        linalg::axpy(&mut int_u, *c * dt * (hi - lo) as f64, &(a * b));
    }
    let predicted = inner * r2 + linalg::ntrace_mul(&int_v, &linalg::adjoint(&int_u)) * (r1 * r1);

    let values = run_trials(config, |trial| {
        let mut big_n = linalg::zeros(n);
        let mut big_m = linalg::zeros(n);
        walk(config, &sampler, trial, &[], |j, x, hist| {
            if let Some(t) = bv.apply(j, hist, x)? {
                big_n += t;
            }
            if let Some(t) = bu.apply(j, hist, x)? {
                big_m += t;
            }
            Ok(())
        })?;
        Ok(linalg::ntrace_mul(&big_n, &linalg::adjoint(&big_m)))
    })?;
    let (re, se_re) = mean_stderr(&values.iter().map(|z| z.re).collect::<Vec<_>>());
    let (im, se_im) = mean_stderr(&values.iter().map(|z| z.im).collect::<Vec<_>>());
    let stderr = se_re.hypot(se_im);
    let estimate = c64::new(re, im);
    Ok(Report::new(
        "ito_isometry",
        config,
        predicted.re,
        re,
        stderr,
        within_3se(estimate, predicted, stderr),
    )
    .with("predicted_imag", predicted.im)
    .with("estimate_imag", im))
}

/// `phi[int u # dX]` against `r_1 sum_j dt phi[m(u(t_j))]` on the same path.
pub fn verify_trace_formula(config: &MatrixModelConfig, u: &AdaptedBiprocess) -> Result<Report> {
    let sampler = prepare(config)?;
    let bu = bind(config, u)?;
    let keep = snapshots(&[&bu]);
    let n = config.n;
    let r1 = rational::to_f64(&config.base.get(1)?);
    let dt = config.dt_f64();
    let values = run_trials(config, |trial| {
        let mut lhs = linalg::zeros(n);
        let mut rhs = c64::new(0.0, 0.0);
        walk(config, &sampler, trial, &keep, |j, x, hist| {
            for (c, a, b) in bu.at(j, hist)? {
                linalg::axpy(&mut lhs, c, &biprocess::sandwich(a, x, b));
                rhs += c * biprocess::ntrace_pair(a, b, n) * (r1 * dt);
            }
            Ok(())
        })?;
        Ok((linalg::ntrace(&lhs), rhs))
    })?;
    let diffs: Vec<c64> = values.iter().map(|(l, r)| l - r).collect();
    let (_, se_re) = mean_stderr(&diffs.iter().map(|z| z.re).collect::<Vec<_>>());
    let (_, se_im) = mean_stderr(&diffs.iter().map(|z| z.im).collect::<Vec<_>>());
    let stderr = se_re.hypot(se_im);
    let est = values.iter().map(|v| v.0).sum::<c64>() / values.len() as f64;
    let pred = values.iter().map(|v| v.1).sum::<c64>() / values.len() as f64;
    Ok(Report::new(
        "trace_formula",
        config,
        pred.re,
        est.re,
        stderr,
        within_3se(est, pred, stderr),
    )
    .with("predicted_imag", pred.im)
    .with("estimate_imag", est.im))
}

struct ProductTrial {
    lhs: f64,
    contracted_rhs: f64,
    raw_trace: f64,
    contracted_trace: f64,
    raw_norm: Option<f64>,
    contracted_norm: Option<f64>,
    scale: f64,
}

/// Product formula for `N = int V # dDelta_i`, `M = int U # dDelta_j` on one
/// realization. The diagonal block `k = l` is compared raw and contracted
/// (`A phi[BC] Delta_(i+j) D`).
pub fn verify_product_formula(
    config: &MatrixModelConfig,
    i: usize,
    j: usize,
    v: &AdaptedBiprocess,
    u: &AdaptedBiprocess,
    tolerance: f64,
) -> Result<Report> {
    if i == 0 || j == 0 || i > MAX_POWER || j > MAX_POWER {
        return Err(Error::domain(format!(
            "diagonal orders must lie in 1..={MAX_POWER}"
        )));
    }
    let sampler = prepare(config)?;
    let (bv, bu) = (bind(config, v)?, bind(config, u)?);
    let keep = snapshots(&[&bv, &bu]);
    let n = config.n;
    let dense = n <= DENSE_LIMIT;
    let trials = run_trials(config, |trial| {
        let mut big_n = linalg::zeros(n);
        let mut big_m = linalg::zeros(n);
        let (mut raw_tr, mut con_tr) = (c64::new(0.0, 0.0), c64::new(0.0, 0.0));
        let mut raw_dense = dense.then(|| linalg::zeros(n));
        let mut con_dense = dense.then(|| linalg::zeros(n));
        walk(config, &sampler, trial, &keep, |step, x, hist| {
            let tv = bv.at(step, hist)?;
            let tu = bu.at(step, hist)?;
            if tv.is_empty() && tu.is_empty() {
                return Ok(());
            }
            let mut xp = Powers::new(x);
            xp.ensure(i.max(j));
            let (xi, xj) = (xp.at(i), xp.at(j));
            if !dense {
                if let (Some(wv), Some(wu)) = (weights(&tv), weights(&tu)) {
                    for &(cu, c, d) in &wu {
                        let off = cu * linalg::ntrace_weighted(&big_n, xj, d, c);
                        raw_tr += off;
                        con_tr += off;
                    }
                    for &(cv, a, b) in &wv {
                        let off = cv * linalg::ntrace_weighted(&big_m, xi, b, a);
                        raw_tr += off;
                        con_tr += off;
                        for &(cu, c, d) in &wu {
                            let da = weight_product(d, a);
                            let bc = weight_product(b, c);
                            let w = cv * cu;
                            raw_tr +=
                                w * linalg::ntrace_weighted(xi, xj, da.as_deref(), bc.as_deref());
                            con_tr += w
                                * mean_weight(bc.as_deref())
                                * linalg::ntrace_weighted(xi, xj, da.as_deref(), None);
                        }
                    }
                    for &(cv, a, b) in &tv {
                        biprocess::sandwich_add(&mut big_n, cv, a, xi, b);
                    }
                    for &(cu, c, d) in &tu {
                        biprocess::sandwich_add(&mut big_m, cu, c, xj, d);
                    }
                    return Ok(());
                }
            }
            let p = apply_power(&tv, xi);
            let q = apply_power(&tu, xj);
            // k < l and l < k blocks
            if let Some(q) = &q {
                let off = linalg::ntrace_mul(&big_n, q);
                raw_tr += off;
                con_tr += off;
                if let (Some(r), Some(c)) = (raw_dense.as_mut(), con_dense.as_mut()) {
                    let t = &big_n * &**q;
                    *r += &t;
                    *c += &t;
                }
            }
            if let Some(p) = &p {
                let off = linalg::ntrace_mul(p, &big_m);
                raw_tr += off;
                con_tr += off;
                if let (Some(r), Some(c)) = (raw_dense.as_mut(), con_dense.as_mut()) {
                    let t = &**p * &big_m;
                    *r += &t;
                    *c += &t;
                }
            }
            // k = l block
            if let (Some(p), Some(q)) = (&p, &q) {
                raw_tr += linalg::ntrace_mul(p, q);
                if let Some(r) = raw_dense.as_mut() {
                    *r += &**p * &**q;
                }
                for &(cv, a, b) in &tv {
                    for &(cu, c, d) in &tu {
                        let w = cv * cu * biprocess::ntrace_pair(b, c, n);
                        let left = biprocess::lmul(a, xi);
                        let right = biprocess::rmul(xj, d);
                        con_tr += w * linalg::ntrace_mul(&left, &right);
                        if let Some(cd) = con_dense.as_mut() {
                            linalg::axpy(cd, w, &(&*left * &*right));
                        }
                    }
                }
            }
            if let Some(p) = p {
                big_n += &*p;
            }
            if let Some(q) = q {
                big_m += &*q;
            }
            Ok(())
        })?;
        let lhs = linalg::ntrace_mul(&big_n, &big_m);
        let (raw_norm, contracted_norm, scale) = match (raw_dense, con_dense) {
            (Some(r), Some(c)) => {
                let prod = &big_n * &big_m;
                let s = linalg::op_norm(&prod).max(1.0);
                (
                    Some(linalg::op_norm(&(&prod - &r)) / s),
                    Some(linalg::op_norm(&(&prod - &c))),
                    s,
                )
            }
            _ => (None, None, lhs.norm().max(1.0)),
        };
        Ok(ProductTrial {
            lhs: lhs.re,
            contracted_rhs: con_tr.re,
            raw_trace: (lhs - raw_tr).norm() / lhs.norm().max(1.0),
            contracted_trace: (lhs - con_tr).norm(),
            raw_norm,
            contracted_norm,
            scale,
        })
    })?;
    let raw_trace: Vec<f64> = trials.iter().map(|t| t.raw_trace).collect();
    let con: Vec<f64> = trials.iter().map(|t| t.contracted_trace).collect();
    let raw_norm: Vec<f64> = trials.iter().filter_map(|t| t.raw_norm).collect();
    let con_norm: Vec<f64> = trials.iter().filter_map(|t| t.contracted_norm).collect();
    let (_, stderr) = mean_stderr(
        &trials
            .iter()
            .map(|t| t.lhs - t.contracted_rhs)
            .collect::<Vec<_>>(),
    );
    let exact_ok = max(&raw_trace) <= EXACT_TOL && max(&raw_norm) <= EXACT_TOL;
    let pass = exact_ok && max(&con) <= tolerance;
    let mut report = Report::new(
        "product_formula",
        config,
        mean(&trials.iter().map(|t| t.contracted_rhs).collect::<Vec<_>>()),
        mean(&trials.iter().map(|t| t.lhs).collect::<Vec<_>>()),
        stderr,
        pass,
    )
    .with("raw_trace_error_max", max(&raw_trace))
    .with("trace_error_median", median(&con))
    .with("trace_error_max", max(&con))
    .with("tolerance", tolerance)
    .with(
        "lhs_scale_max",
        trials.iter().map(|t| t.scale).fold(0.0, f64::max),
    );
    if !raw_norm.is_empty() {
        report = report
            .with("raw_norm_error_max", max(&raw_norm))
            .with("norm_error_median", median(&con_norm));
    }
    Ok(report)
}

struct FunctionalTrial {
    lhs: f64,
    rhs: f64,
    trace_error: f64,
    norm_error: Option<f64>,
}

/// Terms `(1/k!) phi_(k+1)[d^k p(M) # m_k(u, ..., u)] # X^k` of the free Itô
/// formula for `p(M(T))`, `M = int u # dX`, summed over the partition.
pub fn verify_functional_ito(
    config: &MatrixModelConfig,
    p: &Polynomial,
    u: &AdaptedBiprocess,
    tolerance: f64,
) -> Result<Report> {
    let deg = p.degree().unwrap_or(0);
    if deg > MAX_POWER {
        return Err(Error::domain(format!(
            "polynomial degree {deg} exceeds {MAX_POWER}"
        )));
    }
    let sampler = prepare(config)?;
    let bu = bind(config, u)?;
    let keep = snapshots(&[&bu]);
    let n = config.n;
    let dense = n <= DENSE_LIMIT;
    // words of d^k p / k!
    let mut derivatives: Vec<(usize, Vec<(Vec<usize>, f64)>)> = Vec::new();
    let mut kfact = 1.0;
    for k in 1..=deg {
        kfact *= k as f64;
        let words = partial_k(p, k)
            .terms()
            .map(|(w, c)| (w.to_vec(), rational::to_f64(c) / kfact))
            .collect();
        derivatives.push((k, words));
    }
    let coeffs: Vec<f64> = p.coeffs().iter().map(rational::to_f64).collect();

    let trials = run_trials(config, |trial| {
        let mut big_m = linalg::zeros(n);
        let mut rhs_tr = c_re(coeffs.first().copied().unwrap_or(0.0));
        let mut rhs_dense = dense.then(|| linalg::scale(&linalg::identity(n), rhs_tr));
        walk(config, &sampler, trial, &keep, |step, x, hist| {
            let terms = bu.at(step, hist)?;
            if terms.is_empty() {
                return Ok(());
            }
            let mut xp = Powers::new(x);
            let mut mp = Powers::new(&big_m);
            // keyed by term indices and powers of M
            let mut outer_tr: HashMap<(usize, usize, usize, usize), c64> = HashMap::new();
            let mut middle: HashMap<(usize, usize, usize), c64> = HashMap::new();
            for (k, words) in &derivatives {
                let k = *k;
                let mut idx = vec![0usize; k];
                loop {
                    let coeff: c64 = idx.iter().map(|&s| terms[s].0).product();
                    let (first, last) = (idx[0], idx[k - 1]);
                    let (a1, bk) = (terms[first].1, terms[last].2);
                    for (word, c) in words {
                        let mut weight = coeff * *c;
                        for s in 1..k {
                            let key = (idx[s - 1], idx[s], word[s]);
                            let w = match middle.get(&key) {
                                Some(w) => *w,
                                None => {
                                    let (b, a) = (terms[key.0].2, terms[key.1].1);
                                    let w = if word[s] == 0 {
                                        biprocess::ntrace_pair(b, a, n)
                                    } else {
                                        linalg::ntrace(&biprocess::sandwich(b, mp.get(word[s]), a))
                                    };
                                    middle.insert(key, w);
                                    w
                                }
                            };
                            weight *= w;
                        }
                        if weight == c64::new(0.0, 0.0) {
                            continue;
                        }
                        let outer = word[0] + word[k];
                        let key = (first, last, outer, k);
                        let tr = match outer_tr.get(&key) {
                            Some(t) => *t,
                            None => {
                                let t = match (outer, bk.weight(), a1.weight()) {
                                    (0, _, _) => Left::product(bk, a1, n).trace_with(&mut xp, k),
                                    (_, Some(l), Some(m)) => {
                                        xp.ensure(k);
                                        linalg::ntrace_weighted(mp.get(outer), xp.at(k), l, m)
                                    }
                                    _ => {
                                        let left =
                                            biprocess::sandwich(bk, mp.get(outer), a1).into_owned();
                                        Left::Dense(left).trace_with(&mut xp, k)
                                    }
                                };
                                outer_tr.insert(key, t);
                                t
                            }
                        };
                        rhs_tr += weight * tr;
                        if let Some(acc) = rhs_dense.as_mut() {
                            let l = biprocess::rmul(&mp.dense(word[0]), a1).into_owned();
                            let r = biprocess::lmul(bk, &mp.dense(word[k])).into_owned();
                            let xk = xp.dense(k);
                            linalg::axpy(acc, weight, &(&(&l * &xk) * &r));
                        }
                    }
                    let mut s = 0;
                    loop {
                        if s == k {
                            break;
                        }
                        idx[s] += 1;
                        if idx[s] < terms.len() {
                            break;
                        }
                        idx[s] = 0;
                        s += 1;
                    }
                    if s == k {
                        break;
                    }
                }
            }
            drop(mp);
            if let Some(t) = apply_power(&terms, x) {
                big_m += &*t;
            }
            Ok(())
        })?;
        let mut mp = Powers::new(&big_m);
        let lhs_tr: c64 = coeffs
            .iter()
            .enumerate()
            .map(|(e, c)| mp.trace(e) * *c)
            .sum();
        let norm_error = match rhs_dense {
            Some(rhs) => {
                let mut lhs = linalg::zeros(n);
                for (e, c) in coeffs.iter().enumerate() {
                    linalg::axpy(&mut lhs, c_re(*c), &mp.dense(e));
                }
                Some(linalg::op_norm(&(&lhs - &rhs)))
            }
            None => None,
        };
        Ok(FunctionalTrial {
            lhs: lhs_tr.re,
            rhs: rhs_tr.re,
            trace_error: (lhs_tr - rhs_tr).norm(),
            norm_error,
        })
    })?;
    let errs: Vec<f64> = trials.iter().map(|t| t.trace_error).collect();
    let norms: Vec<f64> = trials.iter().filter_map(|t| t.norm_error).collect();
    let (_, stderr) = mean_stderr(&trials.iter().map(|t| t.lhs - t.rhs).collect::<Vec<_>>());
    let mut report = Report::new(
        "functional_ito",
        config,
        mean(&trials.iter().map(|t| t.rhs).collect::<Vec<_>>()),
        mean(&trials.iter().map(|t| t.lhs).collect::<Vec<_>>()),
        stderr,
        max(&errs) <= tolerance,
    )
    .with("trace_error_median", median(&errs))
    .with("trace_error_max", max(&errs))
    .with("tolerance", tolerance);
    if !norms.is_empty() {
        report = report
            .with("norm_error_median", median(&norms))
            .with("norm_error_max", max(&norms));
    }
    if let Some(v) = law_value(config, p, &bu)? {
        report = report.with("law_value", v);
    }
    Ok(report)
}

/// `phi[p(X(T))]` from the exact moments of `mu_T` when `u = 1 (x) 1` on the whole grid.
fn law_value(
    config: &MatrixModelConfig,
    p: &Polynomial,
    bu: &BoundBiprocess,
) -> Result<Option<f64>> {
    let unit = matches!(
        bu.terms.as_slice(),
        [t] if matches!(t.left, BoundFactor::Identity)
            && matches!(t.right, BoundFactor::Identity)
            && t.coeff == c_re(1.0)
            && t.lo == 0
            && t.hi == config.steps
    );
    let deg = p.degree().unwrap_or(0);
    if !unit || config.base.available_order().is_some_and(|k| k < deg) {
        return Ok(None);
    }
    let law = semigroup_cumulants(&config.base, &config.horizon)?;
    let m = moments_from_cumulants(&law, deg.max(1))?;
    let mut total = 0.0;
    for (e, c) in p.coeffs().iter().enumerate() {
        total += rational::to_f64(c) * rational::to_f64(&m.get(e)?);
    }
    Ok(Some(total))
}

/// `phi[Delta_k(T)]` against `T r_k`.
pub fn verify_diagonal(config: &MatrixModelConfig, k: usize, tolerance: f64) -> Result<Report> {
    if k == 0 || k > MAX_POWER {
        return Err(Error::domain(format!(
            "diagonal order must lie in 1..={MAX_POWER}"
        )));
    }
    let sampler = prepare(config)?;
    let predicted = rational::to_f64(&(&config.horizon * config.base.get(k)?));
    let n = config.n as f64;
    let values = match sampler.fixed_spectrum() {
        // every increment has the same eigenvalues
        Some(spec) => {
            let per_step = spec.iter().map(|q| q.powi(k as i32)).sum::<f64>() / n;
            vec![per_step * config.steps as f64; config.trials]
        }
        None => run_trials(config, |trial| {
            let mut acc = 0.0;
            walk(config, &sampler, trial, &[], |_, x, _| {
                acc += Powers::new(x).trace(k).re;
                Ok(())
            })?;
            Ok(acc)
        })?,
    };
    let (estimate, stderr) = mean_stderr(&values);
    Ok(Report::new(
        "diagonal_measure",
        config,
        predicted,
        estimate,
        stderr,
        (estimate - predicted).abs() <= tolerance,
    )
    .with("k", k as f64)
    .with("tolerance", tolerance))
}

/// `|phi[M_1 ... M_n]|` against the scalar majorant `phi[N_1 ... N_n]`,
/// `N_i = int ||V_i(s)|| dX` computed exactly.
pub fn verify_moment_inequality(
    config: &MatrixModelConfig,
    vs: &[AdaptedBiprocess],
) -> Result<Report> {
    if vs.is_empty() || vs.len() > 4 {
        return Err(Error::domain(
            "the moment inequality check takes 1 to 4 biprocesses",
        ));
    }
    let sampler = prepare(config)?;
    config.base.check_nonnegative()?;
    let n = config.n;
    let mut bound = Vec::with_capacity(vs.len());
    let mut majorants = Vec::with_capacity(vs.len());
    for v in vs {
        if !v.is_constant() {
            return Err(Error::validation(
                "the moment inequality check needs constant biprocesses",
            ));
        }
        let b = bind(config, v)?;
        let mut f: Option<StepFunction> = None;
        for t in &b.terms {
            let norm_of = |x: &BoundFactor| match x {
                BoundFactor::Identity => 1.0,
                BoundFactor::Diagonal(d) => biprocess::op_norm(Op::Diagonal(d)),
                BoundFactor::Dense(m) => biprocess::op_norm(Op::Dense(m)),
                BoundFactor::Path | BoundFactor::PathAt(_) => unreachable!("constant biprocess"),
            };
            if t.lo >= t.hi {
                continue;
            }
            let norm = t.coeff.norm() * norm_of(&t.left) * norm_of(&t.right);
            let piece = StepFunction::indicator(
                config.time(t.lo),
                config.time(t.hi),
                rational::from_f64(norm)?,
            )?;
            f = Some(match f {
                None => piece,
                Some(g) => g.add(&piece),
            });
        }
        majorants.push(f.unwrap_or(StepFunction::indicator(
            Rational::zero(),
            rational::one(),
            Rational::zero(),
        )?));
        bound.push(b);
    }
    let rhs = rational::to_f64(&mixed_moment(&majorants, &config.base)?);
    let refs: Vec<&BoundBiprocess> = bound.iter().collect();
    let keep = snapshots(&refs);
    let values = run_trials(config, |trial| {
        let mut ms = vec![linalg::zeros(n); bound.len()];
        walk(config, &sampler, trial, &keep, |j, x, hist| {
            for (b, m) in bound.iter().zip(ms.iter_mut()) {
                if let Some(t) = b.apply(j, hist, x)? {
                    *m += t;
                }
            }
            Ok(())
        })?;
        let value = match ms.len() {
            1 => linalg::ntrace(&ms[0]),
            2 => linalg::ntrace_mul(&ms[0], &ms[1]),
            3 => linalg::ntrace_mul(&(&ms[0] * &ms[1]), &ms[2]),
            _ => linalg::ntrace_mul(&(&ms[0] * &ms[1]), &(&ms[2] * &ms[3])),
        };
        Ok(value.norm())
    })?;
    let (estimate, stderr) = mean_stderr(&values);
    Ok(Report::new(
        "moment_inequality",
        config,
        rhs,
        estimate,
        stderr,
        estimate <= rhs + 3.0 * stderr + 1e-12,
    )
    .with("slack", rhs - estimate))
}

/// `phi[|int f dX|^n]^(1/n)` against `||f||_(n, mu)`.
pub fn verify_contraction(
    config: &MatrixModelConfig,
    f: &StepFunction,
    order: usize,
) -> Result<Report> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "the contraction check needs an even order, got {order}"
        )));
    }
    config.base.check_nonnegative()?;
    let sampler = prepare(config)?;
    let predicted = mu_norm(f, &config.base, order)?;
    let weights: Vec<f64> = (0..config.steps)
        .map(|j| rational::to_f64(&f.value_at(&config.time(j))))
        .collect();
    let n = config.n;
    let values = run_trials(config, |trial| {
        let mut m = linalg::zeros(n);
        walk(config, &sampler, trial, &[], |j, x, _| {
            if weights[j] != 0.0 {
                linalg::axpy(&mut m, c_re(weights[j]), x);
            }
            Ok(())
        })?;
        // M is Hermitian, so phi[|M|^n] = phi[M^n] for even n
        Ok(Powers::new(&m).trace(order).re)
    })?;
    let (mean_power, se_power) = mean_stderr(&values);
    let estimate = mean_power.max(0.0).powf(1.0 / order as f64);
    let stderr = if mean_power > 0.0 {
        se_power * estimate / (order as f64 * mean_power)
    } else {
        0.0
    };
    let pass =
        (estimate - predicted).abs() <= 3.0 * stderr + CONTRACTION_REL_TOL * predicted + 1e-12;
    Ok(
        Report::new("contraction", config, predicted, estimate, stderr, pass)
            .with("order", order as f64)
            .with("abs_error", (estimate - predicted).abs()),
    )
}

/// Kolmogorov-Smirnov distance between the eigenvalues of `X(T)` and `mu_T`.
pub fn verify_spectrum(config: &MatrixModelConfig, tolerance: f64) -> Result<Report> {
    let sampler = prepare(config)?;
    let law = semigroup_cumulants(&config.base, &config.horizon)?;
    let cdf = SpectralCdf::new(&law, QUANTILE_EPS)?;
    let total = cdf.total_mass();
    let values = run_trials(config, |trial| {
        let end = walk(config, &sampler, trial, &[], |_, _, _| Ok(()))?;
        let ev = linalg::hermitian_eigenvalues(&end)?;
        let n = ev.len() as f64;
        Ok(ev
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf.cdf(x) / total;
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max))
    })?;
    let (estimate, stderr) = mean_stderr(&values);
    Ok(Report::new(
        "spectrum",
        config,
        0.0,
        estimate,
        stderr,
        max(&values) < tolerance,
    )
    .with("ks_max", max(&values))
    .with("tolerance", tolerance))
}

/// Eigenvalues of `X(T)` for one trial as a one-column CSV.
pub fn spectrum_csv(config: &MatrixModelConfig, trial: usize) -> Result<String> {
    let sampler = prepare(config)?;
    let end = walk(config, &sampler, trial, &[], |_, _, _| Ok(()))?;
    let mut out = String::from("eigenvalue\n");
    for x in linalg::hermitian_eigenvalues(&end)? {
        out.push_str(&format!("{x:.12e}\n"));
    }
    Ok(out)
}

/// Runs `check` at each dimension in `dims`, in order.
pub fn dimension_sweep(
    config: &MatrixModelConfig,
    dims: &[usize],
    check: impl Fn(&MatrixModelConfig) -> Result<Report>,
) -> Result<Vec<Report>> {
    dims.iter()
        .map(|&n| check(&config.clone().with_dimension(n)))
        .collect()
}

/// `(N, trace_error_median)` of each sweep report.
pub fn sweep_medians(reports: &[Report]) -> Result<Vec<(usize, f64)>> {
    reports
        .iter()
        .map(|r| {
            let err = r
                .diagnostic("trace_error_median")
                .ok_or_else(|| Error::validation(format!("{} reports no trace error", r.check)))?;
            Ok((r.config.n, err))
        })
        .collect()
}

/// `true` if the median trace error strictly decreases along the sweep.
pub fn is_decreasing(medians: &[(usize, f64)]) -> bool {
    medians.windows(2).all(|w| w[1].1 < w[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::catalog;
    use crate::lab::{Factor, MatrixModel};
    use crate::rational::{int, ratio};

    fn semi(n: usize, steps: usize) -> MatrixModelConfig {
        MatrixModelConfig::new(
            n,
            steps,
            catalog("semicircular", 0).unwrap(),
            MatrixModel::GaussianHermitian,
        )
        .with_trials(4)
        .with_seed(11)
    }

    fn poisson(n: usize, steps: usize) -> MatrixModelConfig {
        MatrixModelConfig::new(
            n,
            steps,
            catalog("free_poisson:1", 16).unwrap(),
            MatrixModel::HaarQuantile,
        )
        .with_trials(4)
        .with_seed(5)
    }

    #[test]
    fn powers_and_traces() {
        let mut rng = rand::SeedableRng::seed_from_u64(1);
        let _: &mut rand_chacha::ChaCha8Rng = &mut rng;
        let g = linalg::ginibre(5, &mut rng);
        let mut p = Powers::new(&g);
        let want = linalg::ntrace(&linalg::power(&g, 5));
        assert!((p.trace(5) - want).norm() < 1e-10);
        let d = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let want = linalg::ntrace(&(&linalg::diag(&d) * &linalg::power(&g, 3)));
        assert!((p.trace_diag(&d, 3) - want).norm() < 1e-10);
    }

    #[test]
    fn raw_product_identity_is_exact_with_path_factors() {
        let cfg = semi(8, 12);
        let v = AdaptedBiprocess::elementary(
            Factor::Path,
            Factor::DiagonalRange { lo: 1.0, hi: 2.0 },
            int(0),
            int(1),
        )
        .unwrap();
        let u = AdaptedBiprocess::elementary(
            Factor::Identity,
            Factor::PathAt(ratio(1, 4)),
            ratio(1, 4),
            int(1),
        )
        .unwrap();
        for (i, j) in [(1, 1), (2, 1), (1, 3)] {
            let r = verify_product_formula(&cfg, i, j, &v, &u, f64::INFINITY).unwrap();
            assert!(
                r.diagnostic("raw_trace_error_max").unwrap() < 1e-12,
                "{i},{j}"
            );
            assert!(
                r.diagnostic("raw_norm_error_max").unwrap() < 1e-12,
                "{i},{j}"
            );
        }
    }

    #[test]
    fn disjoint_supports_have_no_diagonal_block() {
        let cfg = poisson(16, 8);
        let v = AdaptedBiprocess::elementary(
            Factor::DiagonalRange { lo: 0.0, hi: 1.0 },
            Factor::Identity,
            int(0),
            ratio(1, 2),
        )
        .unwrap();
        let u = AdaptedBiprocess::elementary(
            Factor::Identity,
            Factor::DiagonalRange { lo: 2.0, hi: 1.0 },
            ratio(1, 2),
            int(1),
        )
        .unwrap();
        let r = verify_product_formula(&cfg, 2, 1, &v, &u, 1e-10).unwrap();
        assert!(r.pass);
        assert!(r.diagnostic("trace_error_max").unwrap() < 1e-10);
        assert!(r.diagnostic("norm_error_median").unwrap() < 1e-10);
    }

    #[test]
    fn quadratic_functional_formula_is_exact() {
        let cfg = poisson(12, 16);
        let u = AdaptedBiprocess::unit(int(0), int(1)).unwrap();
        let p = Polynomial::parse("0,0,1").unwrap();
        let r = verify_functional_ito(&cfg, &p, &u, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.diagnostic("norm_error_max").unwrap() < 1e-10);
        assert_eq!(r.diagnostic("law_value"), Some(2.0));
    }

    #[test]
    fn cubic_functional_formula_matches_dense_sum() {
        // trace path and operator path must agree with each other exactly
        let cfg = semi(10, 8);
        let u = AdaptedBiprocess::elementary(
            Factor::DiagonalRange { lo: 0.5, hi: 1.5 },
            Factor::Identity,
            int(0),
            int(1),
        )
        .unwrap();
        let p = Polynomial::parse("1,0,0,1").unwrap();
        let r = verify_functional_ito(&cfg, &p, &u, 1.0).unwrap();
        assert!(r.diagnostic("trace_error_max").unwrap() < 0.5);
    }

    #[test]
    fn isometry_closed_forms() {
        let u = AdaptedBiprocess::unit(int(0), int(1)).unwrap();
        let r = verify_ito_isometry(&poisson(32, 16), &u, &u).unwrap();
        assert_eq!(r.predicted, 2.0);
        assert!(r.pass, "{r:?}");
        let later = AdaptedBiprocess::unit(int(1), int(2)).unwrap();
        let cfg = semi(32, 16).with_horizon(int(2));
        let r = verify_ito_isometry(&cfg, &u, &later).unwrap();
        assert_eq!(r.predicted, 0.0);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn trace_formula_with_constants() {
        let a = Factor::DiagonalRange { lo: 0.0, hi: 2.0 };
        let b = Factor::DiagonalRange { lo: 1.0, hi: 3.0 };
        let u = AdaptedBiprocess::elementary(a, b, int(0), int(1)).unwrap();
        let r = verify_trace_formula(&poisson(32, 8), &u).unwrap();
        // phi[BA] for the two ramps
        let want: f64 = (0..32)
            .map(|i| (2.0 * i as f64 / 31.0) * (1.0 + 2.0 * i as f64 / 31.0))
            .sum::<f64>()
            / 32.0;
        assert!((r.predicted - want).abs() < 1e-12);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn contraction_examples() {
        let f = StepFunction::new(vec![int(0), int(1), int(2)], vec![int(1), int(3)]).unwrap();
        let cfg = poisson(64, 16).with_horizon(int(2));
        let r = verify_contraction(&cfg, &f, 2).unwrap();
        assert!((r.predicted - 26f64.sqrt()).abs() < 1e-12);
        assert!(r.pass, "{r:?}");
        let zero = StepFunction::indicator(int(0), int(1), int(0)).unwrap();
        let r = verify_contraction(&semi(8, 4), &zero, 4).unwrap();
        assert_eq!((r.predicted, r.estimate), (0.0, 0.0));
        assert!(r.pass);
        let neg = MatrixModelConfig::new(
            8,
            4,
            crate::cumulants::CumulantSequence::finitely_supported(vec![int(0), int(-1)]).unwrap(),
            MatrixModel::HaarQuantile,
        );
        assert!(matches!(
            verify_contraction(&neg, &zero, 2),
            Err(Error::Regime { .. })
        ));
    }

    #[test]
    fn moment_inequality_examples() {
        let v = AdaptedBiprocess::elementary(
            Factor::DiagonalRange { lo: 1.0, hi: 2.0 },
            Factor::DiagonalRange { lo: 0.5, hi: 1.0 },
            int(0),
            int(1),
        )
        .unwrap();
        let r = verify_moment_inequality(&poisson(32, 8), &[v.clone(), v.clone()]).unwrap();
        assert!(r.pass, "{r:?}");
        // ||A|| ||B|| = 2 on [0,1): rhs = r_2 4 + r_1^2 4
        assert!((r.predicted - 8.0).abs() < 1e-9);
        let r = verify_moment_inequality(&semi(16, 8), &[v]).unwrap();
        assert!(r.estimate < 0.1 && r.pass);
    }

    #[test]
    fn diagonal_traces() {
        let r = verify_diagonal(&poisson(256, 128), 3, TRACE_TOLERANCE).unwrap();
        assert!(r.pass, "{r:?}");
        let r = verify_diagonal(&semi(64, 16), 2, TRACE_TOLERANCE).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn reports_are_deterministic() {
        let u = AdaptedBiprocess::unit(int(0), int(1)).unwrap();
        let a = verify_ito_isometry(&semi(16, 8), &u, &u).unwrap().to_json();
        let b = verify_ito_isometry(&semi(16, 8), &u, &u).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_is_close_to_semicircle() {
        let cfg = semi(256, 4).with_trials(2);
        let r = verify_spectrum(&cfg, 0.1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(spectrum_csv(&cfg, 0).unwrap().lines().count() == 257);
    }
}
