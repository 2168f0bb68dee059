//! Command-line orchestration: `sample`, `verify` and `report`.
//!
//! Exit codes are `0` when everything passes, `1` for a failed test or a
//! runtime error and `2` for configuration errors.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::ensemble::Ensemble;
use crate::fgn::{FbmSampler, HurstParameter};
use crate::rng::StreamLabel;
use crate::spectral::eigen::symmetric_eigenvalues;
use crate::stats::{self, TestReport};

use config::{Format, RunConfig, SampleKind, Suite};
use output::{RunManifest, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ncfbm", version, about = "Matrix fractional Brownian motion: sampling and limit-law checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample eigenvalue, matrix or scalar fBm paths.
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        kind: Option<SampleKind>,
    },
    /// Run verification suites.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, value_delimiter = ',')]
        suite: Vec<Suite>,
    },
    /// Summarize the manifests found in a run directory.
    Report { dir: PathBuf },
}

/// Flags shared by `sample` and `verify`; each overrides the config file.
#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
}

impl CommonArgs {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.n.is_empty() {
            cfg.n = self.n.clone();
        }
        if let Some(h) = self.hurst {
            cfg.hurst = h;
        }
        if self.t_max.is_some() || self.steps.is_some() {
            let (t0, s0) = match cfg.grid {
                config::GridSpec::Uniform { t_max, steps } => (t_max, steps),
                config::GridSpec::Points(_) => (1.0, 64),
            };
            cfg.grid = config::GridSpec::Uniform { t_max: self.t_max.unwrap_or(t0), steps: self.steps.unwrap_or(s0) };
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(CliError::Config("workers must be >= 1".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Sample { common, kind } => {
            let mut cfg = common.resolve()?;
            if let Some(k) = kind {
                cfg.sample = k;
            }
            cfg.validate(true)?;
            common.pool()?.install(|| cmd_sample(&cfg))
        }
        Command::Verify { common, suite } => {
            let mut cfg = common.resolve()?;
            if !suite.is_empty() {
                cfg.verify.suites = suite;
            }
            let suites = Suite::expand(&cfg.verify.suites);
            if suites.is_empty() {
                return Err(CliError::Config("no suite selected".into()));
            }
            cfg.validate(suites.iter().any(|s| s.samples()))?;
            common.pool()?.install(|| cmd_verify(&cfg, &suites))
        }
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn start_run(cfg: &RunConfig, command: &str) -> Result<(PathBuf, RunManifest), CliError> {
    let dir = output::prepare_dir(&cfg.out)?;
    output::write_json(&dir.join("config.json"), cfg)?;
    Ok((dir, RunManifest::new(command, cfg.digest())))
}

fn finish_run(dir: &Path, mut manifest: RunManifest, started: Instant) -> Result<RunManifest, CliError> {
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    output::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Writes one table per dimension (or one fBm table) plus `config.json` and
/// `manifest.json`.
pub fn cmd_sample(cfg: &RunConfig) -> Result<i32, CliError> {
    let started = Instant::now();
    let (dir, mut manifest) = start_run(cfg, "sample")?;
    let h = cfg.hurst()?;
    match cfg.sample {
        SampleKind::Fbm => {
            let grid = cfg.time_grid()?;
            let sampler = FbmSampler::new(&grid, h, cfg.sampler)?;
            let seed = cfg.seed_spec();
            let paths: Vec<Vec<f64>> = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| sampler.sample(&mut seed.stream(StreamLabel::scalar(r as u32))).values)
                .collect();
            let mut table = Table::new(vec!["replica".into(), "t".into(), "value".into()]);
            for (r, path) in paths.iter().enumerate() {
                for (t, v) in grid.points().iter().zip(path) {
                    table.rows.push(vec![r as f64, *t, *v]);
                }
            }
            manifest.files.push(table.write(&dir, "fbm", cfg.format)?);
        }
        SampleKind::Eigenvalues | SampleKind::Matrix => {
            for &n in &cfg.n {
                let ens = Ensemble::new(cfg.ensemble(n)?)?;
                let eig = cfg.sample == SampleKind::Eigenvalues;
                let per: Vec<Vec<Vec<f64>>> = (0..cfg.replicas)
                    .into_par_iter()
                    .map(|r| {
                        let path = ens.replica(r)?;
                        path.matrices
                            .iter()
                            .map(|m| if eig { symmetric_eigenvalues(&m.to_dense(), n) } else { Ok(m.packed().to_vec()) })
                            .collect::<crate::Result<Vec<_>>>()
                    })
                    .collect::<crate::Result<_>>()?;
                let mut columns = vec!["replica".to_string(), "t".to_string()];
                if eig {
                    columns.extend((1..=n).map(|i| format!("lambda_{i}")));
                } else {
                    for i in 1..=n {
                        columns.extend((1..=i).map(|j| format!("b_{i}_{j}")));
                    }
                }
                let mut table = Table::new(columns);
                let times = ens.config().grid.points();
                for (r, rows) in per.into_iter().enumerate() {
                    for (t, vals) in times.iter().zip(rows) {
                        let mut row = vec![r as f64, *t];
                        row.extend(vals);
                        table.rows.push(row);
                    }
                }
                let stem = if eig { format!("eigenvalues_n{n}") } else { format!("matrix_n{n}") };
                manifest.files.push(table.write(&dir, &stem, cfg.format)?);
            }
        }
    }
    finish_run(&dir, manifest, started)?;
    Ok(0)
}

/// Runs the selected suites and writes `reports.{csv,json}`.
pub fn cmd_verify(cfg: &RunConfig, suites: &[Suite]) -> Result<i32, CliError> {
    let started = Instant::now();
    let (dir, mut manifest) = start_run(cfg, "verify")?;
    let mut reports = Vec::new();
    for &suite in suites {
        log::info!("running suite {suite:?}");
        reports.extend(run_suite(cfg, suite)?);
    }
    manifest.files.push(output::write_reports(&dir, &reports, cfg.format)?);
    manifest.tests = reports.iter().map(Into::into).collect();
    for r in &reports {
        println!("{:<20} {}  statistic={:.6e} threshold={:.4e}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.statistic, r.threshold);
    }
    let manifest = finish_run(&dir, manifest, started)?;
    Ok(if manifest.failed() == 0 { 0 } else { 1 })
}

fn hursts(cfg: &RunConfig) -> Result<Vec<HurstParameter>, CliError> {
    if cfg.verify.moment_hursts.is_empty() {
        Ok(vec![cfg.hurst()?])
    } else {
        cfg.verify.moment_hursts.iter().map(|&h| HurstParameter::new(h).map_err(|e| CliError::Config(e.to_string()))).collect()
    }
}

/// Reports of one suite for every configured dimension.
pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<Vec<TestReport>, CliError> {
    let v = &cfg.verify;
    let th = &v.thresholds;
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let per_n = |k: usize| -> Result<crate::ensemble::EnsembleConfig, CliError> {
        let mut e = cfg.ensemble(ns[k])?;
        e.seed = cfg.seed_spec().derive(ns[k] as u64);
        Ok(e)
    };
    let mut out = Vec::new();
    match suite {
        Suite::All => unreachable!("expanded before dispatch"),
        Suite::Semicircle => {
            let medians: Vec<Vec<f64>> = (0..ns.len()).map(|k| Ok(stats::semicircle_ks_medians(&per_n(k)?, &v.times)?)).collect::<Result<_, CliError>>()?;
            for (j, &t) in v.times.iter().enumerate() {
                let series: Vec<f64> = medians.iter().map(|m| m[j]).collect();
                let last = *series.last().expect("n is non-empty");
                let decreasing = series.windows(2).all(|w| w[1] < w[0]);
                let mut r = TestReport::new("semicircle", last, th.ks_semicircle, stats::Comparison::Below)
                    .param("t", t)
                    .param("n", &ns)
                    .param("h", cfg.hurst)
                    .param("replicas", cfg.replicas)
                    .param("seed", cfg.seed);
                for (n, m) in ns.iter().zip(&series) {
                    r = r.stat(&format!("median_ks:n={n}"), *m);
                }
                if !decreasing {
                    r = r.note("median KS distance is not strictly decreasing in n");
                }
                r.pass = r.pass && decreasing;
                out.push(r);
            }
        }
        Suite::Covariance => {
            for k in 0..ns.len() {
                out.push(stats::trace_covariance_test(&per_n(k)?, &v.pairs, th)?);
            }
        }
        Suite::Moments => out.push(stats::moments_test(v.moment_order, &hursts(cfg)?, &v.times, v.rk_step, th)?),
        Suite::Transform => {
            for h in hursts(cfg)? {
                out.push(stats::transform_test(h, &v.times, th)?);
            }
        }
        Suite::Identity => out.push(stats::gradient_identity_test(&v.identity_sizes, v.identity_count, cfg.seed_spec(), th)?),
        Suite::Repulsion => {
            let base = cfg.ensemble(ns[0])?;
            let n_time = *ns.last().expect("n is non-empty");
            out.push(stats::repulsion_test(&base, v.p, &ns, n_time, &v.times, v.bulk_fraction, th)?);
        }
        Suite::Selfsim => {
            for k in 0..ns.len() {
                let e = per_n(k)?;
                for &t in &v.selfsim_times {
                    out.push(stats::self_similarity_test(&e, t, th)?);
                }
            }
        }
        Suite::Holder => {
            for k in 0..ns.len() {
                let e = per_n(k)?;
                for &f in &v.test_functions {
                    out.push(stats::holder_moment_test(&e, f, th)?);
                }
            }
        }
        Suite::Residual => {
            let base = cfg.ensemble(ns[0])?;
            for &f in &v.test_functions {
                out.push(stats::residual_test(&base, f, &v.residual_n, cfg.replicas)?);
            }
        }
        Suite::Lincomb => {
            for k in 0..ns.len() {
                out.push(stats::linear_combination_test(&per_n(k)?, &v.lincomb_times, &v.lincomb_coeffs, th)?);
            }
        }
    }
    Ok(out)
}

/// Prints the summary table; nonzero when any run failed or is unreadable.
pub fn cmd_report(dir: &Path) -> Result<i32, CliError> {
    let runs = output::discover_runs(dir)?;
    let (text, _, failed, unknown) = output::summarize(dir, &runs);
    print!("{text}");
    Ok(if failed + unknown == 0 { 0 } else { 1 })
}
