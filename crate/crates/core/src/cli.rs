//! Command line front end: argument definitions and the five subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::covariance::{covariance_report, QuadratureConfig};
use crate::document::{rows_of, ModelDocument, FIXTURES};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_diff};
use crate::model::{spectral_from_brownian, OfbmModel, Parameterization};
use crate::simulate::{normalize_times, simulate_cholesky, simulate_spectral, FrequencyGridSpec, PathEnsemble, SimMethod};
use crate::spectrum::{default_frequencies, default_probes, dichotomy_diagnostic, spectrum_grid, DensityMode};
use crate::verify::{format_rows, gram_from_time, run_suite, SUITES};

pub const THREADS_ENV: &str = "OFBM_THREADS";
/// Largest acceptable relative residual when rebuilding `AA*` from a derived
/// parameterization.
pub const RECONSTRUCTION_LIMIT: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "ofbm", version, about = "Operator fractional Brownian motion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model document and report its derived quantities as JSON.
    Validate(ModelArgs),
    /// Covariance matrices on all ordered pairs of a time grid.
    Cov {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Spectral density tables or the dichotomy labels.
    Specdens {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Ct)]
        mode: Mode,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Sample paths to CSV with a JSON manifest next to it.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "0:1:11", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Spectral)]
        method: Method,
    },
    /// Run a verification suite, or `all` of them.
    Verify {
        suite: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model document (JSON).
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    pub model: Option<PathBuf>,
    /// Built-in model by name.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ct,
    Dt,
    Dichotomy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Spectral,
    Cholesky,
}

impl From<Method> for SimMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Spectral => SimMethod::Spectral,
            Method::Cholesky => SimMethod::Cholesky,
        }
    }
}

/// Applies `OFBM_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Parses `a,b,c` lists and `start:stop:count` ranges (inclusive, evenly
/// spaced), possibly mixed: `0:1:5,2,3`. An empty string is an empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |s: &str| Error::Parse(format!("grid item {s:?}: expected a number or start:stop:count"));
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(x.parse::<f64>().map_err(|_| bad(item))?),
            [a, b, n] => {
                let a: f64 = a.parse().map_err(|_| bad(item))?;
                let b: f64 = b.parse().map_err(|_| bad(item))?;
                let n: usize = n.parse().map_err(|_| bad(item))?;
                match n {
                    0 => {}
                    1 => out.push(a),
                    _ => out.extend((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64)),
                }
            }
            _ => return Err(bad(item)),
        }
    }
    if let Some(x) = out.iter().find(|x| !x.is_finite()) {
        return Err(Error::Parse(format!("grid value {x} is not finite")));
    }
    Ok(out)
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate(m) => cmd_validate(&m),
        Command::Cov { model, grid, tol } => cmd_cov(&model, &grid, tol),
        Command::Specdens { model, grid, mode, tol } => cmd_specdens(&model, grid.as_deref(), mode, tol),
        Command::Simulate { model, grid, paths, seed, method } => cmd_simulate(&model, &grid, paths, seed, method.into()),
        Command::Verify { suite, tol, out } => cmd_verify(&suite, tol, out.as_deref()),
    }
}

fn load_document(args: &ModelArgs) -> Result<ModelDocument> {
    match (&args.model, &args.fixture) {
        (Some(p), _) => ModelDocument::load(p),
        (None, Some(name)) => {
            let text = FIXTURES
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| *t)
                .ok_or_else(|| Error::InvalidInput(format!("unknown fixture {name:?}")))?;
            ModelDocument::parse(text)
        }
        (None, None) => Err(Error::InvalidInput("either --model or --fixture is required".into())),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn complex_json(z: num_complex::Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn param_json(p: &Parameterization) -> Value {
    match p {
        Parameterization::Spectral(a) => json!({ "A1": rows_of(&a.a1), "A2": rows_of(&a.a2) }),
        Parameterization::Time(m) => json!({ "M_plus": rows_of(&m.m_plus), "M_minus": rows_of(&m.m_minus) }),
        Parameterization::Brownian(b) => json!({ "M": rows_of(&b.m), "N": rows_of(&b.n) }),
    }
}

/// Relative gap between `AA*` and its reconstruction from the derived
/// time-domain (or Brownian-case) parameters.
pub fn reconstruction_residual(model: &OfbmModel) -> Result<f64> {
    let (re, im) = if let Some(m) = model.time_param() {
        gram_from_time(m, model.exponent())?
    } else if let Some(b) = model.brownian_param() {
        let a = spectral_from_brownian(b);
        (a.gram_re(), a.gram_im())
    } else {
        return Ok(0.0);
    };
    let (gre, gim) = (model.gram_re(), model.gram_im());
    let scale = max_abs(&gre).max(max_abs(&gim)).max(f64::MIN_POSITIVE);
    Ok(max_abs_diff(&re, &gre).max(max_abs_diff(&im, &gim)) / scale)
}

pub fn validation_report(model: &OfbmModel) -> Result<Value> {
    let e = model.exponent();
    let flags = model.flags();
    let residual = reconstruction_residual(model)?;
    let derived = json!({
        "spectral": param_json(&Parameterization::Spectral(model.spectral_param().clone())),
        "time": model.time_param().map(|m| param_json(&Parameterization::Time(m.clone()))),
        "bm": model.brownian_param().map(|b| param_json(&Parameterization::Brownian(b.clone()))),
    });
    let (lo, hi) = e.d_re_range();
    Ok(json!({
        "dimension": model.dim(),
        "parameterization": model.original().tag(),
        "roots": e.roots().into_iter().map(complex_json).collect::<Vec<_>>(),
        "root_re_range": [lo + 0.5, hi + 0.5],
        "half_root": e.half_root(),
        "proper_certified": flags.proper.certified,
        "proper_witness": flags.proper.witness,
        "time_reversible": flags.time_reversible,
        "is_obm": flags.is_obm,
        "derived": derived,
        "reconstruction_residual": residual,
        "valid": residual <= RECONSTRUCTION_LIMIT,
    }))
}

fn cmd_validate(args: &ModelArgs) -> Result<i32> {
    let model = load_document(args)?.model()?;
    let report = validation_report(&model)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    if report["valid"] == json!(false) {
        eprintln!(
            "error: reconstruction residual {} exceeds {RECONSTRUCTION_LIMIT:e}",
            report["reconstruction_residual"]
        );
        return Ok(1);
    }
    Ok(0)
}

fn cmd_cov(args: &ModelArgs, grid: &str, tol: Option<f64>) -> Result<i32> {
    let doc = load_document(args)?;
    let model = doc.model()?;
    let mut cfg: QuadratureConfig = doc.quadrature_config()?;
    if let Some(t) = tol {
        cfg.abs_tol = t;
        cfg.rel_tol = t * 0.1;
        cfg.validate()?;
    }
    let times = parse_grid(grid)?;
    let pairs: Vec<(f64, f64)> = times.iter().flat_map(|&s| times.iter().map(move |&t| (s, t))).collect();
    let report = covariance_report(&model, &pairs, &cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = String::from("s,t,i,j,value,err\n");
    let mut missed = false;
    for (&(s, t), est) in report.pairs.iter().zip(&report.values) {
        for i in 0..model.dim() {
            for j in 0..model.dim() {
                let (v, e) = (est.value[(i, j)], est.error[(i, j)]);
                if let Some(t) = tol {
                    missed |= e > t * v.abs().max(1.0);
                }
                text.push_str(&format!("{s},{t},{i},{j},{v},{e}\n"));
            }
        }
    }
    emit(args.out.as_deref(), &text)?;
    if missed {
        eprintln!("error: some error estimates exceed the requested tolerance");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_specdens(args: &ModelArgs, grid: Option<&str>, mode: Mode, tol: f64) -> Result<i32> {
    let model = load_document(args)?.model()?;
    let n = model.dim();
    let mut text = String::new();
    match mode {
        Mode::Ct | Mode::Dt => {
            let freqs = match grid {
                Some(g) => parse_grid(g)?,
                None => default_frequencies(8, 17),
            };
            let dm = if mode == Mode::Ct { DensityMode::ContinuousTime } else { DensityMode::DiscreteTime };
            let g = spectrum_grid(&model, &freqs, dm, tol)?;
            text.push_str(if mode == Mode::Ct { "x,i,j,re,im\n" } else { "x,i,j,re,im,K,tail_bound\n" });
            for (k, &x) in g.frequencies.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        let z = g.values[k][(i, j)];
                        text.push_str(&format!("{x},{i},{j},{},{}", z.re, z.im));
                        if mode == Mode::Dt {
                            text.push_str(&format!(",{},{}", g.k[k], g.tail_bound[k]));
                        }
                        text.push('\n');
                    }
                }
            }
        }
        Mode::Dichotomy => {
            let probes = match grid {
                Some(g) => parse_grid(g)?,
                None => default_probes(),
            };
            let d = dichotomy_diagnostic(&model, &probes, tol)?;
            if let Some(b) = d.banner {
                eprintln!("warning: {b}");
            }
            text.push_str("i,j,label\n");
            for (i, row) in d.labels.iter().enumerate() {
                for (j, l) in row.iter().enumerate() {
                    text.push_str(&format!("{i},{j},{}\n", l.as_str()));
                }
            }
        }
    }
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

/// `paths.csv` → `paths.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn manifest(
    model_dim: usize,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    method: SimMethod,
    freq: Option<&FrequencyGridSpec>,
    jitter: f64,
) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "method": method.tag(),
        "n_paths": n_paths,
        "dimension": model_dim,
        "times": times,
        "frequency": freq.map(|f| json!({
            "x_min": f.x_min,
            "x_max": f.x_max,
            "nodes_per_decade": f.nodes_per_decade,
            "linear_step": f.linear_step,
            "corrections": f.corrections,
            "node_count": f.node_count(),
        })),
        "jitter": jitter,
    })
}

pub fn paths_csv(ens: &PathEnsemble) -> String {
    let mut text = String::from("path,t");
    for i in 0..ens.dim {
        text.push_str(&format!(",x{i}"));
    }
    text.push('\n');
    for p in 0..ens.n_paths {
        for (k, t) in ens.times.iter().enumerate() {
            text.push_str(&format!("{p},{t}"));
            for v in ens.value(p, k) {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
        }
    }
    text
}

fn cmd_simulate(args: &ModelArgs, grid: &str, n_paths: usize, seed: u64, method: SimMethod) -> Result<i32> {
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("simulate needs --out for the path CSV".into()))?;
    let doc = load_document(args)?;
    let model = doc.model()?;
    let times = normalize_times(&parse_grid(grid)?)?;
    let freq = doc.frequency.unwrap_or_else(|| FrequencyGridSpec::for_times(&times));
    let (freq_used, jitter) = match method {
        SimMethod::Spectral => {
            freq.validate()?;
            if n_paths > 0 {
                let ens = simulate_spectral(&model, &times, n_paths, seed, &freq)?;
                std::fs::write(out, paths_csv(&ens))?;
            }
            (Some(freq), 0.0)
        }
        SimMethod::Cholesky => {
            let cfg = doc.quadrature_config()?;
            // The factorization is needed for the jitter entry even without paths.
            let ens = simulate_cholesky(&model, &times, n_paths, seed, &cfg)?;
            if n_paths > 0 {
                std::fs::write(out, paths_csv(&ens))?;
            }
            (None, ens.jitter)
        }
    };
    let m = manifest(model.dim(), &times, n_paths, seed, method, freq_used.as_ref(), jitter);
    let mut text = serde_json::to_string_pretty(&m).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(manifest_path(out), text)?;
    Ok(0)
}

fn cmd_verify(suite: &str, tol: Option<f64>, out: Option<&Path>) -> Result<i32> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut rows = Vec::new();
    for name in names {
        rows.extend(run_suite(name, tol)?);
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    let mut text = format_rows(&rows);
    text.push_str(&format!("{} rows, {} failed\n", rows.len(), failed));
    emit(out, &text)?;
    Ok(if failed == 0 { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::fixture;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_grid("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_grid("0:1:3,4").unwrap(), vec![0.0, 0.5, 1.0, 4.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert!(matches!(parse_grid("1:2"), Err(Error::Parse(_))));
        assert!(matches!(parse_grid("x"), Err(Error::Parse(_))));
        assert!(parse_grid("inf").is_err());
    }

    #[test]
    fn manifest_path_swaps_extension() {
        assert_eq!(manifest_path(Path::new("/tmp/a/paths.csv")), PathBuf::from("/tmp/a/paths.manifest.json"));
    }

    #[test]
    fn reconstruction_is_tight_on_fixtures() {
        for (name, m) in crate::document::all_fixtures().unwrap() {
            let r = reconstruction_residual(&m).unwrap();
            assert!(r < 1e-10, "{name}: {r}");
        }
    }

    #[test]
    fn report_fields() {
        let r = validation_report(&fixture("example_7_3").unwrap()).unwrap();
        assert_eq!(r["is_obm"], json!(false));
        assert_eq!(r["time_reversible"], json!(false));
        assert_eq!(r["half_root"], json!(true));
        assert!(r["derived"]["time"].is_null());
        assert!(r["derived"]["bm"].is_object());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
