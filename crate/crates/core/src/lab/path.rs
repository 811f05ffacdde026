//! Sampled paths, stored or streamed.

use std::collections::BTreeMap;

use super::biprocess::{AdaptedBiprocess, PathHistory};
use super::sampler::IncrementSampler;
use super::MatrixModelConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rational::Rational;

/// Increments `X_0..X_(steps-1)` with cached partial sums `X(t_0) = 0, ..., X(t_steps)`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    dt: Rational,
    increments: Vec<CMat>,
    values: Vec<CMat>,
}

impl SamplePath {
    /// Path of trial `trial` of `config`, held in memory.
    pub fn generate(config: &MatrixModelConfig, trial: usize) -> Result<Self> {
        config.validate()?;
        let sampler = config.sampler()?;
        let mut rng = config.trial_rng(trial);
        let increments = (0..config.steps)
            .map(|_| sampler.sample(&mut rng))
            .collect();
        Self::from_increments(config.dt(), increments)
    }

    pub fn from_increments(dt: Rational, increments: Vec<CMat>) -> Result<Self> {
        let n = increments
            .first()
            .map(|x| x.nrows())
            .ok_or_else(|| Error::validation("a path needs increments"))?;
        let mut values = Vec::with_capacity(increments.len() + 1);
        values.push(linalg::zeros(n));
        for (j, x) in increments.iter().enumerate() {
            linalg::check_square(x, n)?;
            if linalg::hermiticity_defect(x) > 1e-12 * linalg::frobenius(x).max(1.0) {
                return Err(Error::validation(format!("increment {j} is not Hermitian")));
            }
            let next = &values[j] + x;
            values.push(next);
        }
        Ok(SamplePath {
            dt,
            increments,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn dt(&self) -> &Rational {
        &self.dt
    }

    pub fn increments(&self) -> &[CMat] {
        &self.increments
    }

    /// `X(t_j)`.
    pub fn value(&self, j: usize) -> &CMat {
        &self.values[j]
    }

    pub fn end_value(&self) -> &CMat {
        &self.values[self.steps()]
    }
}

impl PathHistory for SamplePath {
    fn value_at(&self, i: usize) -> Option<&CMat> {
        self.values.get(i)
    }
}

/// `sum_j u(t_j) # X_j` with left endpoints.
pub fn integrate_biprocess(path: &SamplePath, u: &AdaptedBiprocess) -> Result<CMat> {
    let bound = u.bind(path.dim(), path.steps(), path.dt())?;
    let mut acc = linalg::zeros(path.dim());
    for (j, x) in path.increments.iter().enumerate() {
        if let Some(term) = bound.apply(j, path, x)? {
            acc += term;
        }
    }
    Ok(acc)
}

/// `Delta_k = sum_j X_j^k` over the whole path.
pub fn diagonal_measure(path: &SamplePath, k: usize) -> Result<CMat> {
    if k == 0 {
        return Err(Error::domain("diagonal measures are indexed from k = 1"));
    }
    let mut acc = linalg::zeros(path.dim());
    for x in &path.increments {
        acc += linalg::power(x, k);
    }
    Ok(acc)
}

/// Streaming view used by the checks: only the current value and requested
/// snapshots are kept.
pub(crate) struct Walk {
    step: usize,
    current: CMat,
    snapshots: BTreeMap<usize, CMat>,
}

impl PathHistory for Walk {
    fn value_at(&self, i: usize) -> Option<&CMat> {
        if i == self.step {
            Some(&self.current)
        } else {
            self.snapshots.get(&i)
        }
    }
}

/// Runs trial `trial`, calling `visit(j, X_j, history)` before `X_j` is added.
/// Returns `X(T)`.
pub(crate) fn walk(
    config: &MatrixModelConfig,
    sampler: &IncrementSampler,
    trial: usize,
    keep: &[usize],
    mut visit: impl FnMut(usize, &CMat, &Walk) -> Result<()>,
) -> Result<CMat> {
    let mut rng = config.trial_rng(trial);
    let mut state = Walk {
        step: 0,
        current: linalg::zeros(config.n),
        snapshots: BTreeMap::new(),
    };
    for j in 0..config.steps {
        state.step = j;
        if keep.binary_search(&j).is_ok() {
            state.snapshots.insert(j, state.current.clone());
        }
        let x = sampler.sample(&mut rng);
        visit(j, &x, &state)?;
        state.current += &x;
    }
    Ok(state.current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::catalog;
    use crate::lab::{Factor, MatrixModel};
    use crate::rational::{int, ratio};

    fn small_path() -> SamplePath {
        let cfg = MatrixModelConfig::new(
            6,
            8,
            catalog("semicircular", 0).unwrap(),
            MatrixModel::GaussianHermitian,
        )
        .with_seed(3);
        SamplePath::generate(&cfg, 0).unwrap()
    }

    #[test]
    fn unit_integrand_telescopes() {
        let p = small_path();
        let u = AdaptedBiprocess::unit(int(0), int(1)).unwrap();
        let got = integrate_biprocess(&p, &u).unwrap();
        assert!(linalg::frobenius(&(&got - p.end_value())) < 1e-12);
        let d1 = diagonal_measure(&p, 1).unwrap();
        assert!(linalg::frobenius(&(&d1 - p.end_value())) < 1e-12);
        assert!(linalg::frobenius(p.value(0)) == 0.0);
    }

    #[test]
    fn constant_integrand_on_interval() {
        let p = small_path();
        let a: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let b: Vec<f64> = (0..6).map(|i| 2.0 - 0.25 * i as f64).collect();
        let u = AdaptedBiprocess::elementary(
            Factor::Diagonal(a.clone()),
            Factor::Diagonal(b.clone()),
            ratio(1, 4),
            ratio(3, 4),
        )
        .unwrap();
        let got = integrate_biprocess(&p, &u).unwrap();
        let diff = p.value(6) - p.value(2);
        let want = &(&linalg::diag(&a) * &diff) * &linalg::diag(&b);
        assert!(linalg::frobenius(&(&got - &want)) < 1e-12);
    }

    #[test]
    fn path_valued_integrand_matches_loop() {
        let p = small_path();
        let u =
            AdaptedBiprocess::elementary(Factor::Path, Factor::Identity, int(0), int(1)).unwrap();
        let got = integrate_biprocess(&p, &u).unwrap();
        let mut want = linalg::zeros(6);
        for j in 0..8 {
            want += p.value(j) * &p.increments()[j];
        }
        assert!(linalg::frobenius(&(&got - &want)) < 1e-12);
    }

    #[test]
    fn future_reads_fail() {
        let p = small_path();
        let u = AdaptedBiprocess::elementary(
            Factor::PathAt(ratio(1, 2)),
            Factor::Identity,
            int(0),
            int(1),
        )
        .unwrap();
        assert!(matches!(
            integrate_biprocess(&p, &u),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn increments_are_hermitian() {
        let cfg = MatrixModelConfig::new(
            16,
            4,
            catalog("free_poisson:1", 16).unwrap(),
            MatrixModel::HaarQuantile,
        );
        let p = SamplePath::generate(&cfg, 1).unwrap();
        for x in p.increments() {
            assert!(linalg::hermiticity_defect(x) < 1e-12);
        }
    }
}
