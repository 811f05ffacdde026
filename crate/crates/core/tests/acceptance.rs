//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the lines always reach the output.

use std::time::{Duration, Instant};

use freeito::cumulants::{
    catalog, cumulants_from_moments, moments_from_cumulants, CumulantSequence,
};
use freeito::ito::{
    ito_coeff_closed, ito_coeff_recursive, table_entry, OperatorTensor, Polynomial,
};
use freeito::lab::{
    dimension_sweep, is_decreasing, sweep_medians, verify_diagonal, verify_functional_ito,
    verify_ito_isometry, verify_product_formula, verify_trace_formula, AdaptedBiprocess, Factor,
    MatrixModel, MatrixModelConfig, Report,
};
use freeito::linalg::ginibre;
use freeito::rational::{self, int, ratio, Rational};
use freeito::scalar::{bdg_check, integral_moments, moment_flow, mu_norm, mu_norm_power};
use freeito::step::StepFunction;
use freeito::transforms::{pde_residual, verify_functional_relation, ComplexPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn point(re: f64, im: f64) -> ComplexPoint {
    ComplexPoint::new(re, im)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    ratio(rng.random_range(lo..=hi), rng.random_range(1..=9))
}

fn random_step(rng: &mut ChaCha8Rng, nonnegative: bool) -> StepFunction {
    let pieces = rng.random_range(1..=3);
    let mut breakpoints = vec![int(0)];
    for _ in 0..pieces {
        let last = breakpoints.last().unwrap().clone();
        breakpoints.push(last + ratio(rng.random_range(1..=4), 4));
    }
    let lo = if nonnegative { 0 } else { -6 };
    let values = (0..pieces).map(|_| random_rational(rng, lo, 6)).collect();
    StepFunction::new(breakpoints, values).unwrap()
}

fn catalan(n: u64) -> u64 {
    (0..n).fold(1u64, |c, k| c * 2 * (2 * k + 1) / (k + 2))
}

fn c1_combinatorics() -> Outcome {
    for n in 1..=14 {
        let count = freeito::partitions::count_noncrossing(n).map_err(err)?;
        ensure(count == catalan(n as u64), || {
            format!("|NC({n})| = {count}")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..100 {
        let n = rng.random_range(1..=12);
        let values: Vec<Rational> = (0..n).map(|_| random_rational(&mut rng, -9, 9)).collect();
        let r = CumulantSequence::truncated(values).unwrap();
        let m = moments_from_cumulants(&r, n).map_err(err)?;
        let back = cumulants_from_moments(&m, n).map_err(err)?;
        ensure(back.values() == r.values(), || {
            format!("cumulant roundtrip {trial} (n={n})")
        })?;
        let again = moments_from_cumulants(&back, n).map_err(err)?;
        ensure(again == m, || format!("moment roundtrip {trial} (n={n})"))?;
    }
    Ok("C_n for n <= 14; 100 exact roundtrips".into())
}

fn c2_functional_relation() -> Outcome {
    let mut bases = vec![catalog("semicircular", 0).unwrap()];
    for rate in ["1/2", "1", "2"] {
        bases.push(catalog(&format!("free_poisson:{rate}"), 12).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..20 {
        let values = (0..12).map(|_| random_rational(&mut rng, 0, 5)).collect();
        bases.push(CumulantSequence::truncated(values).unwrap());
    }
    for (i, r) in bases.iter().enumerate() {
        ensure(verify_functional_relation(r, 12).map_err(err)?, || {
            format!("relation fails for base {i}")
        })?;
    }
    Ok(format!("{} laws through order 12", bases.len()))
}

fn c3_scalar_integrals() -> Outcome {
    let bases = [
        catalog("semicircular", 0).unwrap(),
        catalog("free_poisson:1", 8).unwrap(),
        catalog("free_compound_poisson:1/2:2,4,8,16,32,64,128,256", 8).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = random_step(&mut rng, false);
        for r in &bases {
            let exact = integral_moments(&f, r, 8).map_err(err)?.to_f64();
            let flow = moment_flow(&f, r, 8, rational::to_f64(f.end()), 2000).map_err(err)?;
            for (n, (a, b)) in exact.iter().zip(flow.final_moments()).enumerate() {
                let rel = (a - b).abs() / a.abs().max(1.0);
                worst = worst.max(rel);
                ensure(rel <= 1e-8, || format!("m_{} differs: {a} vs {b}", n + 1))?;
            }
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn c4_mu_norms() -> Outcome {
    let semi = catalog("semicircular", 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..10 {
        let f = random_step(&mut rng, false);
        let l2 = f.lp_power(2);
        for n in 1..=6 {
            let lhs = mu_norm_power(&f, &semi, 2 * n).map_err(err)?;
            let want = int(catalan(n as u64) as i64) * rational::pow(&l2, n);
            ensure(lhs == want, || {
                format!("semicircular n={n}: {lhs} vs {want}")
            })?;
        }
    }
    let fp = catalog("free_poisson:1", 12).unwrap();
    let indicator = StepFunction::indicator(int(0), int(1), int(1)).unwrap();
    for n in (2..=12).step_by(2) {
        let lhs = mu_norm_power(&indicator, &fp, n).map_err(err)?;
        let m = moments_from_cumulants(&fp, n)
            .map_err(err)?
            .get(n)
            .map_err(err)?;
        ensure(lhs == m, || format!("indicator n={n}: {lhs} vs {m}"))?;
    }
    let mut min_slack = f64::INFINITY;
    for i in 0..200 {
        let r = if i % 2 == 0 { &semi } else { &fp };
        let (f, g) = (random_step(&mut rng, true), random_step(&mut rng, true));
        let sum = f.add(&g);
        for n in (2..=10).step_by(2) {
            let slack = mu_norm(&f, r, n).map_err(err)? + mu_norm(&g, r, n).map_err(err)?
                - mu_norm(&sum, r, n).map_err(err)?;
            min_slack = min_slack.min(slack);
            ensure(slack >= -1e-12, || {
                format!("triangle inequality fails at pair {i}, n={n}")
            })?;
        }
    }
    Ok(format!(
        "exact identities hold; min triangle slack {min_slack:.3e}"
    ))
}

fn c5_bdg() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut min_slack = f64::INFINITY;
    for i in 0..100 {
        let k = rng.random_range(1..=3);
        let n = 2 * rng.random_range(1..=3);
        let values = (0..18).map(|_| random_rational(&mut rng, 0, 4)).collect();
        let r = CumulantSequence::truncated(values).unwrap();
        let f = random_step(&mut rng, true);
        let report = bdg_check(&f, &r, k, n).map_err(err)?;
        min_slack = min_slack.min(report.slack);
        ensure(report.holds, || {
            format!(
                "instance {i} (k={k}, n={n}): lhs {} > rhs {}",
                report.lhs, report.rhs
            )
        })?;
    }
    Ok(format!("100 instances; min slack {min_slack:.3e}"))
}

fn grid() -> Vec<(f64, (f64, f64))> {
    let ts = [0.25, 0.5, 1.0, 1.5, 2.0];
    let zs = [
        (-1.5, 1.0),
        (-0.5, 0.75),
        (0.0, 1.0),
        (0.5, 2.0),
        (1.5, 0.6),
    ];
    ts.iter()
        .flat_map(|&t| zs.iter().map(move |&z| (t, z)))
        .collect()
}

fn c6_pde() -> Outcome {
    let semi = catalog("semicircular", 0).unwrap();
    let mut worst = 0.0f64;
    for (t, (re, im)) in grid() {
        worst = worst.max(pde_residual(&semi, point(re, im), t, 1e-4).map_err(err)?);
    }
    ensure(worst < 1e-6, || {
        format!("semicircular residual {worst:.2e}")
    })?;
    // h large enough that truncation error dominates roundoff
    let fp = catalog("free_poisson:1", 16).unwrap();
    let (z, t) = (point(0.5, 1.0), 1.0);
    let hs = [8e-3, 4e-3, 2e-3];
    let res: Vec<f64> = hs
        .iter()
        .map(|&h| pde_residual(&fp, z, t, h))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let ratios = [res[0] / res[1], res[1] / res[2]];
    ensure(ratios.iter().all(|q| (3.0..=5.0).contains(q)), || {
        format!("halving ratios {ratios:?}")
    })?;
    Ok(format!(
        "semicircular max {worst:.2e}; free Poisson halving ratios {:.2}, {:.2}",
        ratios[0], ratios[1]
    ))
}

fn c7_ito_coefficients() -> Outcome {
    let mut worst = 0.0f64;
    for dim in [2, 3, 4] {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
            let us: Vec<OperatorTensor> = (0..2)
                .map(|_| {
                    OperatorTensor::pair(ginibre(dim, &mut rng), ginibre(dim, &mut rng)).unwrap()
                })
                .collect();
            let m = ginibre(dim, &mut rng);
            let table = ito_coeff_recursive(5, &us, &m).map_err(err)?;
            for n in 1..=5 {
                for mm in 1..=5 {
                    let closed = ito_coeff_closed(n, mm, &us, &m).map_err(err)?;
                    let rec = table_entry(&table, n, mm, dim);
                    let rel = closed.distance(&rec).map_err(err)?
                        / closed.dense_norm().map_err(err)?.max(1.0);
                    worst = worst.max(rel);
                    ensure(rel <= 1e-10, || {
                        format!("N={dim} seed={seed} n={n} m={mm}: {rel:.2e}")
                    })?;
                }
            }
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn semicircular(n: usize, steps: usize, trials: usize) -> MatrixModelConfig {
    MatrixModelConfig::new(
        n,
        steps,
        catalog("semicircular", 0).unwrap(),
        MatrixModel::GaussianHermitian,
    )
    .with_trials(trials)
    .with_seed(8)
}

fn free_poisson(n: usize, steps: usize, trials: usize) -> MatrixModelConfig {
    MatrixModelConfig::new(
        n,
        steps,
        catalog("free_poisson:1", 16).unwrap(),
        MatrixModel::HaarQuantile,
    )
    .with_trials(trials)
    .with_seed(9)
}

fn unit(a: i64, b: i64) -> AdaptedBiprocess {
    AdaptedBiprocess::unit(int(a), int(b)).unwrap()
}

fn describe_sweep(reports: &[Report]) -> Result<(String, bool), String> {
    let medians = sweep_medians(reports).map_err(err)?;
    let text: Vec<String> = medians
        .iter()
        .map(|(n, e)| format!("N={n}: {e:.2e}"))
        .collect();
    Ok((text.join(", "), is_decreasing(&medians)))
}

fn c8_product_and_functional() -> Outcome {
    // raw decomposition with path-valued, dense and diagonal factors
    let a: Vec<f64> = (0..48).map(|i| 1.0 + (i % 5) as f64 / 4.0).collect();
    let dense = freeito::linalg::diag(&a);
    let v = AdaptedBiprocess::elementary(
        Factor::Path,
        Factor::Diagonal(a.clone()),
        int(0),
        ratio(3, 4),
    )
    .unwrap();
    let u = AdaptedBiprocess::elementary(
        Factor::dense(&dense),
        Factor::PathAt(ratio(1, 4)),
        ratio(1, 4),
        int(1),
    )
    .unwrap();
    let raw = verify_product_formula(&semicircular(48, 16, 3), 2, 1, &v, &u, 0.05).map_err(err)?;
    for key in ["raw_trace_error_max", "raw_norm_error_max"] {
        let e = raw.diagnostic(key).unwrap_or(f64::NAN);
        ensure(e <= 1e-10, || format!("{key} = {e:.2e}"))?;
    }

    let dims = [64, 128, 256, 512];
    let base = semicircular(64, 256, 20);
    // the error roughly halves per doubling of N while a median over t trials
    // has ~1.2/sqrt(t) relative noise, so trials go where they are cheap
    // enough to keep every comparison several noise widths apart
    let schedule = |cfg: &MatrixModelConfig, per_n: [usize; 4]| {
        let i = dims.iter().position(|&n| n == cfg.n).unwrap_or(3);
        cfg.clone().with_trials(per_n[i])
    };
    let d = AdaptedBiprocess::elementary(
        Factor::DiagonalRange { lo: 0.5, hi: 1.5 },
        Factor::Identity,
        int(0),
        int(1),
    )
    .unwrap();
    let product = dimension_sweep(&base, &dims, |cfg| {
        verify_product_formula(&schedule(cfg, [80, 80, 80, 40]), 1, 1, &d, &d, 0.05)
    })
    .map_err(err)?;
    let cube = Polynomial::parse("0,0,0,1").map_err(err)?;
    let one = unit(0, 1);
    let functional = dimension_sweep(&base, &dims, |cfg| {
        verify_functional_ito(&schedule(cfg, [80, 80, 40, 20]), &cube, &one, 0.05)
    })
    .map_err(err)?;
    let mut lines = Vec::new();
    for (name, reports) in [("product", &product), ("functional x^3", &functional)] {
        for r in reports.iter() {
            let raw = r.diagnostic("raw_trace_error_max").unwrap_or(0.0);
            ensure(raw <= 1e-10, || {
                format!("{name} N={}: raw error {raw:.2e}", r.config.n)
            })?;
        }
        let last = reports.last().unwrap();
        ensure(last.pass, || {
            format!("{name} fails at N=512: {:?}", last.diagnostics)
        })?;
        let (text, decreasing) = describe_sweep(reports)?;
        ensure(decreasing, || {
            format!("{name} medians not decreasing: {text}")
        })?;
        lines.push(format!("{name} [{text}]"));
    }
    Ok(format!("raw exact; {}", lines.join("; ")))
}

fn c9_diagonal() -> Outcome {
    let mut out = Vec::new();
    for (name, cfg) in [
        ("semicircular", semicircular(512, 128, 4)),
        ("free_poisson(1)", free_poisson(512, 128, 4)),
    ] {
        for k in 1..=3 {
            let r = verify_diagonal(&cfg, k, 0.05).map_err(err)?;
            ensure(r.pass, || {
                format!("{name} k={k}: {} vs {}", r.estimate, r.predicted)
            })?;
            out.push(format!("{name} k={k} {:.4}", r.estimate));
        }
    }
    Ok(out.join(", "))
}

fn c10_isometry_and_trace() -> Outcome {
    let mut out = Vec::new();
    let semi = semicircular(128, 64, 20);
    let fp = free_poisson(128, 64, 20);
    let checks: Vec<(&str, f64, Report)> = vec![
        (
            "isometry semicircular",
            1.0,
            verify_ito_isometry(&semi, &unit(0, 1), &unit(0, 1)).map_err(err)?,
        ),
        (
            "isometry disjoint",
            0.0,
            verify_ito_isometry(&semi.clone().with_horizon(int(2)), &unit(0, 1), &unit(1, 2))
                .map_err(err)?,
        ),
        (
            "isometry free Poisson",
            2.0,
            verify_ito_isometry(&fp, &unit(0, 1), &unit(0, 1)).map_err(err)?,
        ),
        (
            "trace semicircular",
            0.0,
            verify_trace_formula(&semi, &unit(0, 1)).map_err(err)?,
        ),
        (
            "trace free Poisson",
            1.0,
            verify_trace_formula(&fp, &unit(0, 1)).map_err(err)?,
        ),
        {
            let a: Vec<f64> = (0..128).map(|i| 0.5 + (i % 4) as f64).collect();
            let b: Vec<f64> = (0..128).map(|i| 2.0 - (i % 3) as f64 / 2.0).collect();
            let want = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / 128.0;
            let u = AdaptedBiprocess::elementary(
                Factor::Diagonal(a),
                Factor::Diagonal(b),
                int(0),
                int(1),
            )
            .unwrap();
            (
                "trace A(x)B",
                want,
                verify_trace_formula(&fp, &u).map_err(err)?,
            )
        },
    ];
    for (name, closed_form, r) in checks {
        ensure((r.predicted - closed_form).abs() < 1e-9, || {
            format!("{name}: predicted {} != {closed_form}", r.predicted)
        })?;
        let within = (r.estimate - r.predicted).abs() <= 3.0 * r.stderr + 1e-12;
        ensure(r.pass && within, || {
            format!(
                "{name}: {} vs {} (se {})",
                r.estimate, r.predicted, r.stderr
            )
        })?;
        out.push(format!("{name} {:.4}±{:.4}", r.estimate, r.stderr));
    }
    Ok(out.join(", "))
}

fn c11_determinism() -> Outcome {
    let cfg = free_poisson(32, 16, 6);
    let d = AdaptedBiprocess::elementary(
        Factor::Identity,
        Factor::DiagonalRange { lo: 0.0, hi: 2.0 },
        int(0),
        int(1),
    )
    .unwrap();
    let run = || -> Result<String, String> {
        let a = verify_product_formula(&cfg, 1, 2, &d, &unit(0, 1), 0.05).map_err(err)?;
        let b = verify_functional_ito(&cfg, &Polynomial::parse("1,0,2,1").map_err(err)?, &d, 0.05)
            .map_err(err)?;
        Ok(a.to_json() + &b.to_json())
    };
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(err)?
        .install(run)?;
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .map_err(err)?
        .install(run)?;
    let again = run()?;
    ensure(serial == parallel && serial == again, || {
        "reports differ between runs".into()
    })?;

    let dir = std::env::temp_dir().join(format!("freeito-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ito_isometry.json");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.join(format!("report{i}.json"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_freeito"))
            .args(["verify", "ito_isometry", "--config", config, "--out"])
            .arg(&out)
            .status()
            .map_err(err)?;
        ensure(status.success(), || format!("cli exit {status}"))?;
        outputs.push(std::fs::read(&out).map_err(err)?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(outputs[0] == outputs[1], || "cli reports differ".into())?;
    Ok(format!(
        "{} report bytes identical across 1/4 threads and repeated runs",
        serial.len()
    ))
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            title: "combinatorial exactness",
            budget: secs(60),
            run: c1_combinatorics,
        },
        Criterion {
            id: 2,
            title: "functional relation",
            budget: secs(30),
            run: c2_functional_relation,
        },
        Criterion {
            id: 3,
            title: "scalar-integral equivalence",
            budget: secs(120),
            run: c3_scalar_integrals,
        },
        Criterion {
            id: 4,
            title: "mu-norm identities",
            budget: None,
            run: c4_mu_norms,
        },
        Criterion {
            id: 5,
            title: "BDG-type inequality",
            budget: None,
            run: c5_bdg,
        },
        Criterion {
            id: 6,
            title: "PDE residual",
            budget: None,
            run: c6_pde,
        },
        Criterion {
            id: 7,
            title: "Ito coefficient identity",
            budget: secs(60),
            run: c7_ito_coefficients,
        },
        Criterion {
            id: 8,
            title: "discrete product identity",
            budget: secs(600),
            run: c8_product_and_functional,
        },
        Criterion {
            id: 9,
            title: "diagonal measures",
            budget: None,
            run: c9_diagonal,
        },
        Criterion {
            id: 10,
            title: "Ito isometry and trace formula",
            budget: None,
            run: c10_isometry_and_trace,
        },
        Criterion {
            id: 11,
            title: "determinism",
            budget: None,
            run: c11_determinism,
        },
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| filter.is_empty() || filter.contains(&c.id))
    {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        let budget = c
            .budget
            .map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {:>2} {} [{:.1}s{budget}]: {detail}",
                c.id,
                c.title,
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {:>2} {} [{:.1}s{budget}]: {detail}",
                    c.id,
                    c.title,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
