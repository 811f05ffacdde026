//! The `freeito` command line.
//!
//! Exit codes: 0 when a command succeeds or a check passes, 1 when a check
//! fails, 2 for usage, parse and input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cumulants::{
    catalog, cumulants_from_moments, moments_from_cumulants, semigroup_cumulants, CumulantSequence,
    MomentSequence,
};
use crate::error::{Error, Result};
use crate::ito::Polynomial;
use crate::lab::{
    self, AdaptedBiprocess, MatrixModel, MatrixModelConfig, Report, CATALOG_ORDER, TRACE_TOLERANCE,
};
use crate::rational::{self, Rational};
use crate::scalar;
use crate::step::StepFunction;
use crate::transforms;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Checks understood by `verify`.
pub const CHECKS: &[&str] = &[
    "ito_isometry",
    "trace_formula",
    "product_formula",
    "functional_ito",
    "diagonal",
    "moment_inequality",
    "contraction",
    "spectrum",
    "pde_residual",
    "functional_relation",
];

#[derive(Debug, Parser)]
#[command(name = "freeito", version, about = "Free stochastic calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the result here (plus `<out>.manifest.json`) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moments m_1..m_n of a base law.
    Moments {
        /// Catalog name (`semicircular`, `free_poisson:1`, ...) or cumulant JSON file.
        #[arg(long)]
        base: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Free cumulants from a moment file, or of the semigroup law mu_t of a base.
    Cumulants {
        #[arg(long, conflicts_with = "base", required_unless_present = "base")]
        moments: Option<PathBuf>,
        #[arg(long)]
        base: Option<String>,
        #[arg(long, default_value = "1")]
        time: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Cumulants and moments of the law of int f dX.
    IntegralDist {
        #[arg(long)]
        base: String,
        /// Step function JSON file.
        #[arg(long)]
        step: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Cumulants and moments of the diagonal measure Delta_k(t).
    Diagonal {
        #[arg(long)]
        base: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "1")]
        time: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Table of mu-norms ||f||_{n,mu} for even n up to n_max.
    Norm {
        #[arg(long)]
        base: String,
        #[arg(long)]
        step: PathBuf,
        #[arg(long = "n-max")]
        n_max: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Moment ODE for M(t) = int_0^t f dX as CSV (t, n, value).
    MomentFlow {
        #[arg(long)]
        base: String,
        #[arg(long)]
        step: PathBuf,
        #[arg(long = "n-max")]
        n_max: usize,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Residual of the complex Burgers equation on a grid, as CSV (t, z, residual).
    PdeCheck {
        #[arg(long)]
        base: String,
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Density of mu_t by Stieltjes inversion, as CSV (x, density).
    Density {
        #[arg(long)]
        base: String,
        #[arg(long, default_value = "1")]
        time: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Eigenvalues of X(T) for one trial, as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Runs a named check and writes its JSON report.
    Verify {
        check: String,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args, Default)]
struct Overrides {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    fn new(command: &str, params: Value, seed: Option<u64>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command: command.to_string(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }
}

/// What a command produced.
struct Outcome {
    text: String,
    /// `Some(false)` for a failed check.
    pass: Option<bool>,
    seed: Option<u64>,
    params: Value,
}

impl Outcome {
    fn table(text: String, params: Value) -> Self {
        Outcome {
            text,
            pass: None,
            seed: None,
            params,
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let name = command_name(&cli.command);
    let out = output_path(&cli.command).cloned();
    match execute(cli.command, stderr) {
        Ok(outcome) => {
            let written = match &out {
                Some(path) => write_with_manifest(path, name, &outcome),
                None => stdout
                    .write_all(outcome.text.as_bytes())
                    .map_err(|e| Error::validation(e.to_string())),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
            match outcome.pass {
                Some(false) => EXIT_FAIL,
                _ => EXIT_PASS,
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Moments { .. } => "moments",
        Command::Cumulants { .. } => "cumulants",
        Command::IntegralDist { .. } => "integral-dist",
        Command::Diagonal { .. } => "diagonal",
        Command::Norm { .. } => "norm",
        Command::MomentFlow { .. } => "moment-flow",
        Command::PdeCheck { .. } => "pde-check",
        Command::Density { .. } => "density",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
    }
}

fn output_path(c: &Command) -> Option<&PathBuf> {
    match c {
        Command::Moments { output, .. }
        | Command::Cumulants { output, .. }
        | Command::IntegralDist { output, .. }
        | Command::Diagonal { output, .. }
        | Command::Norm { output, .. }
        | Command::MomentFlow { output, .. }
        | Command::PdeCheck { output, .. }
        | Command::Density { output, .. }
        | Command::Simulate { output, .. }
        | Command::Verify { output, .. } => output.out.as_ref(),
    }
}

fn execute(command: Command, stderr: &mut dyn Write) -> Result<Outcome> {
    match command {
        Command::Moments { base, n, .. } => {
            let r = load_base(&base, n.max(1), stderr)?;
            let m = moments_from_cumulants(&r, n)?;
            Ok(Outcome::table(
                rational_table("m", m.values()),
                serde_json::json!({"base": base, "n": n}),
            ))
        }
        Command::Cumulants {
            moments,
            base,
            time,
            n,
            ..
        } => {
            let (r, params) = match (moments, base) {
                (Some(path), _) => {
                    let m = MomentSequence::from_json(&read(&path)?)?;
                    (
                        cumulants_from_moments(&m, n)?,
                        serde_json::json!({"moments": path, "n": n}),
                    )
                }
                (None, Some(base)) => {
                    let t = parse_time(&time)?;
                    let r = load_base(&base, n.max(1), stderr)?;
                    let values = semigroup_cumulants(&r, &t)?.prefix(n)?;
                    (
                        CumulantSequence::truncated(values)?,
                        serde_json::json!({"base": base, "time": time, "n": n}),
                    )
                }
                (None, None) => return Err(Error::validation("give --moments or --base")),
            };
            Ok(Outcome::table(rational_table("r", &r.prefix(n)?), params))
        }
        Command::IntegralDist { base, step, n, .. } => {
            let r = load_base(&base, n.max(1), stderr)?;
            let f = StepFunction::from_json(&read(&step)?)?;
            let cumulants = scalar::integral_cumulants(&f, &r);
            let m = moments_from_cumulants(&cumulants, n)?;
            let text = format!(
                "{}{}",
                rational_table("r", &cumulants.prefix(n)?),
                rational_table("m", m.values())
            );
            Ok(Outcome::table(
                text,
                serde_json::json!({"base": base, "step": step, "n": n}),
            ))
        }
        Command::Diagonal {
            base, k, time, n, ..
        } => {
            let t = parse_time(&time)?;
            let r = load_base(&base, (n * k).max(1), stderr)?;
            let cumulants = scalar::diagonal_cumulants(&r, k, &t, n)?;
            let m = moments_from_cumulants(&cumulants, n)?;
            let text = format!(
                "{}{}",
                rational_table("r", cumulants.values()),
                rational_table("m", m.values())
            );
            Ok(Outcome::table(
                text,
                serde_json::json!({"base": base, "k": k, "time": time, "n": n}),
            ))
        }
        Command::Norm {
            base, step, n_max, ..
        } => {
            let r = load_base(&base, n_max.max(1), stderr)?;
            let f = StepFunction::from_json(&read(&step)?)?;
            let mut text = String::from("n,norm_power,norm_power_decimal,norm\n");
            for n in (2..=n_max).step_by(2) {
                let p = scalar::mu_norm_power(&f, &r, n)?;
                let v = rational::to_f64(&p);
                text.push_str(&format!(
                    "{n},{},{},{}\n",
                    rational::format(&p),
                    rational::decimal(v),
                    rational::decimal(v.abs().powf(1.0 / n as f64))
                ));
            }
            Ok(Outcome::table(
                text,
                serde_json::json!({"base": base, "step": step, "n_max": n_max}),
            ))
        }
        Command::MomentFlow {
            base,
            step,
            n_max,
            t_end,
            steps,
            ..
        } => {
            let r = load_base(&base, n_max.max(1), stderr)?;
            let f = StepFunction::from_json(&read(&step)?)?;
            let flow = scalar::moment_flow(&f, &r, n_max, t_end, steps)?;
            if let Some(w) = &flow.warning {
                let _ = writeln!(stderr, "warning: {w}");
            }
            let mut text = String::from("t,n,moment\n");
            for (t, ys) in &flow.trajectory {
                for (i, y) in ys.iter().enumerate() {
                    text.push_str(&format!(
                        "{},{},{}\n",
                        rational::decimal(*t),
                        i + 1,
                        rational::decimal(*y)
                    ));
                }
            }
            let params = serde_json::json!({"base": base, "step": step, "n_max": n_max, "t_end": t_end, "steps": steps});
            Ok(Outcome::table(text, params))
        }
        Command::PdeCheck {
            base, h, tolerance, ..
        } => {
            let r = load_base(&base, CATALOG_ORDER, stderr)?;
            let (text, worst) = pde_table(&r, h)?;
            let params = serde_json::json!({"base": base, "h": h, "tolerance": tolerance});
            Ok(Outcome {
                text,
                pass: Some(worst < tolerance),
                seed: None,
                params,
            })
        }
        Command::Density {
            base,
            time,
            from,
            to,
            points,
            eps,
            ..
        } => {
            if points < 2 || !(to > from) {
                return Err(Error::validation(
                    "density needs --to > --from and at least 2 points",
                ));
            }
            let t = parse_time(&time)?;
            let r = semigroup_cumulants(&load_base(&base, CATALOG_ORDER, stderr)?, &t)?;
            let mut text = String::from("x,density\n");
            for i in 0..points {
                let x = from + (to - from) * i as f64 / (points - 1) as f64;
                let d = transforms::density(&r, x, eps)?;
                text.push_str(&format!(
                    "{},{}\n",
                    rational::decimal(x),
                    rational::decimal(d)
                ));
            }
            let params = serde_json::json!({"base": base, "time": time, "from": from, "to": to, "points": points, "eps": eps});
            Ok(Outcome::table(text, params))
        }
        Command::Simulate {
            config,
            trial,
            overrides,
            ..
        } => {
            let file = VerifyFile::load(&config)?;
            let cfg = file.lab_config(&overrides, stderr)?;
            let text = lab::spectrum_csv(&cfg, trial)?;
            let params = serde_json::json!({"config": cfg, "trial": trial});
            Ok(Outcome {
                text,
                pass: None,
                seed: Some(cfg.master_seed),
                params,
            })
        }
        Command::Verify {
            check,
            config,
            overrides,
            ..
        } => {
            if !CHECKS.contains(&check.as_str()) {
                return Err(Error::validation(format!(
                    "unknown check {check:?}; known checks: {}",
                    CHECKS.join(", ")
                )));
            }
            let file = VerifyFile::load(&config)?;
            verify(&check, &file, &overrides, stderr)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))
}

fn parse_time(s: &str) -> Result<Rational> {
    let t = rational::parse(s)?;
    if t < Rational::from_integer(0.into()) {
        return Err(Error::domain(format!("time must be nonnegative, got {s}")));
    }
    Ok(t)
}

/// A catalog name or a path to a cumulant JSON file.
fn load_base(spec: &str, order: usize, stderr: &mut dyn Write) -> Result<CumulantSequence> {
    let path = Path::new(spec);
    let r = if path.is_file() {
        CumulantSequence::from_json(&read(path)?)?
    } else {
        catalog(spec, order)?
    };
    warn_normalization(&r, stderr);
    Ok(r)
}

fn warn_normalization(r: &CumulantSequence, stderr: &mut dyn Write) {
    if let Ok(r2) = r.get(2) {
        if !r2.is_one() {
            let _ = writeln!(
                stderr,
                "warning: base has r_2 = {} (the usual normalization is r_2 = 1)",
                rational::format(&r2)
            );
        }
    }
}

fn rational_table(label: &str, values: &[Rational]) -> String {
    let mut out = format!("k,{label}_k,decimal\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            i + 1,
            rational::format(v),
            rational::decimal(rational::to_f64(v))
        ));
    }
    out
}

/// 5 x 5 grid of `(t, z)`; returns the CSV and the largest residual.
fn pde_table(r: &CumulantSequence, h: f64) -> Result<(String, f64)> {
    let mut text = String::from("t,z_re,z_im,residual\n");
    let mut worst = 0.0f64;
    for t in [0.25, 0.5, 1.0, 1.5, 2.0] {
        for (re, im) in [
            (-1.5, 1.0),
            (-0.5, 0.75),
            (0.0, 1.0),
            (0.5, 2.0),
            (1.5, 0.6),
        ] {
            let res = transforms::pde_residual(r, Complex64::new(re, im), t, h)?;
            worst = worst.max(res);
            text.push_str(&format!("{t},{re},{im},{}\n", rational::decimal(res)));
        }
    }
    Ok((text, worst))
}

/// `verify` input: `{"lab": MatrixModelConfig, "params": {...}}`; `lab` is
/// only needed by the Monte-Carlo checks.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyFile {
    #[serde(default)]
    lab: Option<Value>,
    #[serde(default)]
    params: Value,
}

impl VerifyFile {
    fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read(path)?)
            .map_err(|e| Error::parse(format!("{}: {e}", path.display())))
    }

    fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("check config: {e}")))
    }

    fn lab_config(&self, o: &Overrides, stderr: &mut dyn Write) -> Result<MatrixModelConfig> {
        let raw = self
            .lab
            .as_ref()
            .ok_or_else(|| Error::validation("config has no \"lab\" section"))?;
        let mut cfg: MatrixModelConfig = serde_json::from_value(raw.clone())
            .map_err(|e| Error::parse(format!("lab section: {e}")))?;
        if let Some(n) = o.n {
            cfg.n = n;
        }
        if let Some(steps) = o.steps {
            cfg.steps = steps;
        }
        if let Some(trials) = o.trials {
            cfg.trials = trials;
        }
        if let Some(seed) = o.seed {
            cfg.master_seed = seed;
        }
        if let Some(base) = &o.base {
            cfg.base = load_base(base, CATALOG_ORDER, stderr)?;
        } else {
            warn_normalization(&cfg.base, stderr);
        }
        if let Some(model) = &o.model {
            cfg.model = model.parse::<MatrixModel>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        let v = if self.params.is_null() {
            Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_json::from_value(v).map_err(|e| Error::parse(format!("params section: {e}")))
    }
}

fn default_tolerance() -> f64 {
    TRACE_TOLERANCE
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairParams {
    v: AdaptedBiprocess,
    u: AdaptedBiprocess,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SingleParams {
    u: AdaptedBiprocess,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductParams {
    i: usize,
    j: usize,
    v: AdaptedBiprocess,
    u: AdaptedBiprocess,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalParams {
    /// Coefficients `c_0,c_1,...` as a comma-separated string.
    p: String,
    u: AdaptedBiprocess,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalParams {
    k: usize,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InequalityParams {
    vs: Vec<AdaptedBiprocess>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContractionParams {
    f: StepFunction,
    order: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    #[serde(default = "default_tolerance")]
    tolerance: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeParams {
    base: String,
    #[serde(default = "default_h")]
    h: f64,
    #[serde(default = "default_pde_tolerance")]
    tolerance: f64,
}

fn default_h() -> f64 {
    1e-4
}

fn default_pde_tolerance() -> f64 {
    1e-6
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationParams {
    base: String,
    #[serde(default = "default_relation_order")]
    order: usize,
}

fn default_relation_order() -> usize {
    transforms::MAX_RELATION_ORDER
}

/// Report for the checks that do not sample matrices.
#[derive(Debug, Serialize)]
struct ScalarReport {
    check: String,
    params: Value,
    predicted: f64,
    estimate: f64,
    stderr: f64,
    pass: bool,
    diagnostics: BTreeMap<String, f64>,
}

/// Runs `check` on a config in the `verify` file format; returns the report
/// JSON and whether the check passed. Warnings are discarded.
pub fn verify_text(check: &str, config: &str) -> Result<(String, bool)> {
    if !CHECKS.contains(&check) {
        return Err(Error::validation(format!("unknown check {check:?}")));
    }
    let file = VerifyFile::parse(config)?;
    let outcome = verify(check, &file, &Overrides::default(), &mut std::io::sink())?;
    Ok((outcome.text, outcome.pass.unwrap_or(false)))
}

fn verify(
    check: &str,
    file: &VerifyFile,
    o: &Overrides,
    stderr: &mut dyn Write,
) -> Result<Outcome> {
    let scalar_base = |base: &str, stderr: &mut dyn Write| {
        load_base(o.base.as_deref().unwrap_or(base), CATALOG_ORDER, stderr)
    };
    let scalar = |report: ScalarReport| {
        let pass = report.pass;
        let params = report.params.clone();
        let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
        Outcome {
            text,
            pass: Some(pass),
            seed: None,
            params,
        }
    };
    match check {
        "pde_residual" => {
            let p: PdeParams = file.params()?;
            let r = scalar_base(&p.base, stderr)?;
            let (_, worst) = pde_table(&r, p.h)?;
            let params = serde_json::json!({"base": o.base.as_deref().unwrap_or(&p.base), "h": p.h, "tolerance": p.tolerance});
            return Ok(scalar(ScalarReport {
                check: check.into(),
                params,
                predicted: 0.0,
                estimate: worst,
                stderr: 0.0,
                pass: worst < p.tolerance,
                diagnostics: BTreeMap::from([("tolerance".to_string(), p.tolerance)]),
            }));
        }
        "functional_relation" => {
            let p: RelationParams = file.params()?;
            let r = scalar_base(&p.base, stderr)?;
            let ok = transforms::verify_functional_relation(&r, p.order)?;
            let params =
                serde_json::json!({"base": o.base.as_deref().unwrap_or(&p.base), "order": p.order});
            return Ok(scalar(ScalarReport {
                check: check.into(),
                params,
                predicted: 0.0,
                estimate: if ok { 0.0 } else { 1.0 },
                stderr: 0.0,
                pass: ok,
                diagnostics: BTreeMap::new(),
            }));
        }
        _ => {}
    }
    let cfg = file.lab_config(o, stderr)?;
    let report: Report = match check {
        "ito_isometry" => {
            let p: PairParams = file.params()?;
            lab::verify_ito_isometry(&cfg, &p.v, &p.u)?
        }
        "trace_formula" => {
            let p: SingleParams = file.params()?;
            lab::verify_trace_formula(&cfg, &p.u)?
        }
        "product_formula" => {
            let p: ProductParams = file.params()?;
            lab::verify_product_formula(&cfg, p.i, p.j, &p.v, &p.u, p.tolerance)?
        }
        "functional_ito" => {
            let p: FunctionalParams = file.params()?;
            lab::verify_functional_ito(&cfg, &Polynomial::parse(&p.p)?, &p.u, p.tolerance)?
        }
        "diagonal" => {
            let p: DiagonalParams = file.params()?;
            lab::verify_diagonal(&cfg, p.k, p.tolerance)?
        }
        "moment_inequality" => {
            let p: InequalityParams = file.params()?;
            lab::verify_moment_inequality(&cfg, &p.vs)?
        }
        "contraction" => {
            let p: ContractionParams = file.params()?;
            lab::verify_contraction(&cfg, &p.f, p.order)?
        }
        "spectrum" => {
            let p: SpectrumParams = file.params()?;
            lab::verify_spectrum(&cfg, p.tolerance)?
        }
        other => return Err(Error::validation(format!("unknown check {other:?}"))),
    };
    let params = serde_json::json!({"check": check, "config": cfg, "params": file.params});
    Ok(Outcome {
        text: report.to_json() + "\n",
        pass: Some(report.pass),
        seed: Some(cfg.master_seed),
        params,
    })
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_with_manifest(path: &Path, command: &str, outcome: &Outcome) -> Result<()> {
    let manifest = RunManifest::new(command, outcome.params.clone(), outcome.seed);
    let io = |e: std::io::Error| Error::validation(format!("cannot write {}: {e}", path.display()));
    write_atomic(path, outcome.text.as_bytes()).map_err(io)?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize") + "\n";
    write_atomic(&manifest_path(path), text.as_bytes()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("freeito").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn semicircle_moments_table() {
        let (code, out, _) = run_args(&["moments", "--base", "semicircular", "--n", "6"]);
        assert_eq!(code, 0);
        let col: Vec<&str> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(col, ["0", "1", "0", "2", "0", "5"]);
    }

    #[test]
    fn free_poisson_moments_table() {
        let (code, out, _) = run_args(&["moments", "--base", "free_poisson:1", "--n", "4"]);
        assert_eq!(code, 0);
        let col: Vec<&str> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(col, ["1", "2", "5", "14"]);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["moments"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(
            run_args(&["moments", "--base", "nope", "--n", "3"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn normalization_warning() {
        let (code, _, err) = run_args(&["moments", "--base", "free_poisson:2", "--n", "2"]);
        assert_eq!(code, 0);
        assert!(err.contains("r_2 = 2"), "{err}");
        let (_, _, err) = run_args(&["moments", "--base", "semicircular", "--n", "2"]);
        assert!(err.is_empty());
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("a/b.json")),
            PathBuf::from("a/b.json.manifest.json")
        );
    }
}
