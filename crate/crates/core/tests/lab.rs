use freeito::cumulants::catalog;
use freeito::ito::Polynomial;
use freeito::lab::{
    diagonal_measure, integrate_biprocess, verify_functional_ito, verify_product_formula,
    AdaptedBiprocess, BiprocessTerm, Factor, MatrixModel, MatrixModelConfig, Report, SamplePath,
};
use freeito::linalg::{self, CMat};
use freeito::rational::{int, ratio};

fn config(n: usize, steps: usize) -> MatrixModelConfig {
    MatrixModelConfig::new(
        n,
        steps,
        catalog("free_poisson:1", 16).unwrap(),
        MatrixModel::HaarQuantile,
    )
    .with_trials(3)
    .with_seed(5)
}

fn ramp(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn as_dense(f: &Factor) -> Factor {
    match f {
        Factor::Diagonal(d) => Factor::dense(&linalg::diag(d)),
        other => other.clone(),
    }
}

fn densified(u: &AdaptedBiprocess) -> AdaptedBiprocess {
    let terms = u
        .terms()
        .iter()
        .map(|t| BiprocessTerm {
            left: as_dense(&t.left),
            right: as_dense(&t.right),
            ..t.clone()
        })
        .collect();
    AdaptedBiprocess::new(terms).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn assert_same(fast: &Report, dense: &Report) {
    assert!(
        close(fast.estimate, dense.estimate),
        "{} vs {}",
        fast.estimate,
        dense.estimate
    );
    assert!(
        close(fast.predicted, dense.predicted),
        "{} vs {}",
        fast.predicted,
        dense.predicted
    );
    for key in ["trace_error_median", "trace_error_max"] {
        let (a, b) = (
            fast.diagnostic(key).unwrap(),
            dense.diagnostic(key).unwrap(),
        );
        assert!((a - b).abs() <= 1e-9, "{key}: {a} vs {b}");
    }
}

#[test]
fn integral_matches_hand_sum() {
    let cfg = config(24, 12);
    let path = SamplePath::generate(&cfg, 1).unwrap();
    let b = ramp(24, -1.0, 2.0);
    let u = AdaptedBiprocess::elementary(
        Factor::Path,
        Factor::Diagonal(b.clone()),
        ratio(1, 4),
        ratio(3, 4),
    )
    .unwrap();
    let got = integrate_biprocess(&path, &u).unwrap();
    let mut want = linalg::zeros(24);
    for j in 3..9 {
        want += path.value(j) * &path.increments()[j] * linalg::diag(&b);
    }
    assert!(linalg::frobenius(&(&got - &want)) < 1e-10 * linalg::frobenius(&want));
}

#[test]
fn first_diagonal_measure_is_the_endpoint() {
    let path = SamplePath::generate(&config(16, 8), 0).unwrap();
    let d1: CMat = diagonal_measure(&path, 1).unwrap();
    assert!(linalg::frobenius(&(&d1 - path.end_value())) < 1e-12);
}

#[test]
fn product_fast_path_matches_dense_path() {
    let cfg = config(72, 16);
    let v = AdaptedBiprocess::elementary(
        Factor::Diagonal(ramp(72, 0.5, 1.5)),
        Factor::Identity,
        int(0),
        int(1),
    )
    .unwrap();
    let u = AdaptedBiprocess::elementary(
        Factor::Identity,
        Factor::Diagonal(ramp(72, 2.0, 0.0)),
        ratio(1, 8),
        int(1),
    )
    .unwrap();
    for (i, j) in [(1, 1), (2, 1), (1, 3)] {
        let fast = verify_product_formula(&cfg, i, j, &v, &u, 0.05).unwrap();
        let dense =
            verify_product_formula(&cfg, i, j, &densified(&v), &densified(&u), 0.05).unwrap();
        assert_same(&fast, &dense);
        assert!(fast.diagnostic("raw_trace_error_max").unwrap() < 1e-10);
    }
}

#[test]
fn functional_fast_path_matches_dense_path() {
    let cfg = config(72, 16);
    let p = Polynomial::parse("1,-1,0,2").unwrap();
    let u = AdaptedBiprocess::elementary(
        Factor::Diagonal(ramp(72, 0.0, 2.0)),
        Factor::Diagonal(ramp(72, 1.0, 3.0)),
        int(0),
        int(1),
    )
    .unwrap();
    let fast = verify_functional_ito(&cfg, &p, &u, 0.05).unwrap();
    let dense = verify_functional_ito(&cfg, &p, &densified(&u), 0.05).unwrap();
    assert_same(&fast, &dense);
}
