//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on domain errors (invalid parameters, wrong
//! regime, build failures), 2 on usage errors. Experiment commands accept a
//! JSON configuration file plus flag overrides; flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fisher;
use crate::harness::{self, ExperimentConfig};
use crate::likelihood::{LanContext, ScorePipeline};
use crate::model::{LocalAlternative, ModelParams, SamplingScheme};
use crate::simulate::{self, SimConfig, SimMethod};
use crate::toeplitz::{AutocovSequence, BuildConfig, CholeskyFactor};

#[derive(Parser)]
#[command(
    name = "mfou",
    version,
    about = "Spectral likelihood toolkit for the mixed fractional Ornstein-Uhlenbeck process"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Worker threads for the data-parallel kernels (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone, Copy)]
struct ThetaArgs {
    /// Noise scale sigma > 0.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Hurst index in (0,1) \ {1/2, 3/4}.
    #[arg(long, default_value_t = 0.8)]
    hurst: f64,
    /// Mean-reversion rate alpha > 0.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl ThetaArgs {
    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.sigma, self.hurst, self.alpha)
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct SchemeArgs {
    /// Sample size.
    #[arg(long)]
    n: usize,
    /// Polynomial mesh exponent: delta = n^-kappa.
    #[arg(long, conflicts_with = "delta")]
    kappa: Option<f64>,
    /// Explicit mesh width.
    #[arg(long)]
    delta: Option<f64>,
}

impl SchemeArgs {
    fn scheme(&self) -> Result<SamplingScheme> {
        match (self.kappa, self.delta) {
            (Some(k), None) => SamplingScheme::from_kappa(self.n, k),
            (None, Some(d)) => SamplingScheme::from_delta(self.n, d),
            (None, None) => SamplingScheme::from_kappa(self.n, 0.5),
            (Some(_), Some(_)) => unreachable!("clap conflict"),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Comma-separated n grid, ascending.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Local alternatives as comma triples; repeatable.
    #[arg(long = "h")]
    h: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<ExperimentConfig>(&text)?
            }
            None => ExperimentConfig::default_blueprint("mfou_out"),
        };
        let theta = ModelParams::new(
            self.sigma.unwrap_or(cfg.theta.sigma()),
            self.hurst.unwrap_or(cfg.theta.hurst()),
            self.alpha.unwrap_or(cfg.theta.alpha()),
        )?;
        cfg.theta = theta;
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if !self.n.is_empty() {
            cfg.n_grid = self.n.clone();
        }
        if let Some(r) = self.reps {
            cfg.replications = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.h.is_empty() {
            cfg.h_list = self
                .h
                .iter()
                .map(|s| parse_h(s))
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_h(s: &str) -> Result<LocalAlternative> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidInput(format!(
            "expected a comma triple for --h, got `{s}`"
        )));
    }
    let mut h = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        h[i] = p
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidInput(format!("--h component {i}: {e}")))?;
    }
    Ok(LocalAlternative(h))
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the supercritical asymptotic constants as JSON.
    Fisher(ThetaArgs),
    /// Dump the autocovariance sequence (CSV and/or binary cache).
    Gamma {
        #[command(flatten)]
        theta: ThetaArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Number of lags (defaults to n).
        #[arg(long)]
        lags: Option<usize>,
        /// CSV output path (stdout when omitted and no binary path given).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Binary dump path (length-prefixed little-endian f64).
        #[arg(long)]
        bin: Option<PathBuf>,
    },
    /// Simulate one exact stationary path to CSV.
    Simulate {
        #[command(flatten)]
        theta: ThetaArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Binary autocovariance cache reused across runs.
        #[arg(long)]
        gamma_cache: Option<PathBuf>,
    },
    /// Central sequence and raw scores for a dumped path.
    Score {
        #[command(flatten)]
        theta: ThetaArgs,
        /// Path CSV produced by `simulate`.
        #[arg(long)]
        path: PathBuf,
        #[arg(long, conflicts_with = "delta")]
        kappa: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Single-path local-expansion report.
    LanCheck {
        #[command(flatten)]
        theta: ThetaArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Local alternative as a comma triple.
        #[arg(long, default_value = "1,0,0")]
        h: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate on this path instead of simulating one.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Full Monte Carlo blueprint: central-sequence covariance, pairwise
    /// clouds and the raw-versus-projected export.
    Mc(ExperimentArgs),
    /// Lower-regime trace convergence sweep.
    Regimes(ExperimentArgs),
    /// Low-frequency weight profile w(u) as CSV.
    Profile {
        #[command(flatten)]
        theta: ThetaArgs,
        #[arg(long, default_value_t = 8.0)]
        umax: f64,
        #[arg(long, default_value_t = 801)]
        points: usize,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Auto,
    Cholesky,
    Circulant,
}

impl From<MethodArg> for SimMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SimMethod::Auto,
            MethodArg::Cholesky => SimMethod::Cholesky,
            MethodArg::Circulant => SimMethod::Circulant,
        }
    }
}

/// Parses and executes; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion =>
        {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 2;
        }
    };
    configure_threads(cli.threads);
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) {
    if threads.is_some() {
        eprintln!("note: built without the `parallel` feature; --threads is ignored");
    }
}


/// Writes a line to stdout, treating a closed pipe (e.g. `mfou ... | head`)
/// as success rather than a panic.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn emit_raw(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Fisher(theta) => {
            let params = theta.params()?;
            let constants = fisher::constants_supercritical(&params)?;
            emit(&serde_json::to_string_pretty(&constants)?)?;
            Ok(())
        }
        Cmd::Gamma {
            theta,
            scheme,
            lags,
            out,
            bin,
        } => {
            let params = theta.params()?;
            let scheme = scheme.scheme()?;
            let lags = lags.unwrap_or(scheme.n());
            let seq = compute_gamma(&params, &scheme, lags)?;
            if let Some(bin_path) = &bin {
                let file = std::fs::File::create(bin_path)?;
                seq.write_binary(std::io::BufWriter::new(file))?;
            }
            let csv = gamma_csv(&seq);
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None if bin.is_none() => emit_raw(&csv)?,
                None => {}
            }
            Ok(())
        }
        Cmd::Simulate {
            theta,
            scheme,
            seed,
            method,
            out,
            gamma_cache,
        } => {
            let params = theta.params()?;
            let scheme = scheme.scheme()?;
            let x = simulate_path(&params, &scheme, seed, method.into(), gamma_cache.as_deref())?;
            harness::write_path_csv(&out, &x)?;
            emit(&format!("wrote {} samples to {}", x.len(), out.display()))?;
            Ok(())
        }
        Cmd::Score {
            theta,
            path,
            kappa,
            delta,
        } => {
            let params = theta.params()?;
            let x = harness::read_path_csv(&path)?;
            let scheme = match (kappa, delta) {
                (Some(k), None) => SamplingScheme::from_kappa(x.len(), k)?,
                (None, Some(d)) => SamplingScheme::from_delta(x.len(), d)?,
                (None, None) => SamplingScheme::from_kappa(x.len(), 0.5)?,
                (Some(_), Some(_)) => unreachable!("clap conflict"),
            };
            let pipeline = ScorePipeline::build(&params, &scheme, &BuildConfig::default())?;
            let seq = pipeline.central_sequence(&x)?;
            emit(&serde_json::to_string_pretty(&seq)?)?;
            Ok(())
        }
        Cmd::LanCheck {
            theta,
            scheme,
            h,
            seed,
            path,
        } => {
            let params = theta.params()?;
            let scheme = scheme.scheme()?;
            let h = parse_h(&h)?;
            let pipeline = ScorePipeline::build(&params, &scheme, &BuildConfig::default())?;
            let x = match path {
                Some(p) => harness::read_path_csv(&p)?,
                None => simulate::sample_cholesky(&pipeline.chol, seed),
            };
            let report = LanContext::new(&pipeline, &h)?.check(&x)?;
            emit(&serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
        Cmd::Mc(args) => {
            let cfg = args.resolve()?;
            let (reports, rvps) = harness::run_blueprint(&cfg)?;
            for (rep, rvp) in reports.iter().zip(&rvps) {
                emit(&format!(
                    "n={}: max|corr| {:.4}, z = [{:+.2}, {:+.2}, {:+.2}], corr(S_sigma,R_H) {:.4} vs corr(S_sigma,R_H_perp) {:.4}",
                    rep.n,
                    rep.max_abs_corr_offdiag,
                    rep.per_component_z[0],
                    rep.per_component_z[1],
                    rep.per_component_z[2],
                    rvp.corr_s_sigma_r_h,
                    rvp.corr_s_sigma_r_h_perp,
                ))?;
            }
            emit(&format!("exports written to {}", cfg.out_dir.display()))?;
            Ok(())
        }
        Cmd::Regimes(args) => {
            let cfg = args.resolve()?;
            let report = harness::regime_sweep(&cfg)?;
            emit(&serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
        Cmd::Profile {
            theta,
            umax,
            points,
            out,
        } => {
            let params = theta.params()?;
            let (_, _, _, m) = fisher::j_integrals(&params)?;
            let profile = crate::spectral::limit_profiles(&params, m)?;
            let mut csv = String::from("u,w_u\n");
            for i in 0..points {
                let u = -umax + 2.0 * umax * i as f64 / (points.max(2) - 1) as f64;
                csv.push_str(&format!("{u},{:.17}\n", profile.w(u)));
            }
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => emit_raw(&csv)?,
            }
            Ok(())
        }
    }
}

fn compute_gamma(
    params: &ModelParams,
    scheme: &SamplingScheme,
    lags: usize,
) -> Result<AutocovSequence> {
    crate::toeplitz::mfou_autocov(params, scheme.delta(), &BuildConfig::default(), lags)
}

fn gamma_csv(seq: &AutocovSequence) -> String {
    let mut out = String::from("lag,gamma\n");
    for (j, g) in seq.gamma.iter().enumerate() {
        out.push_str(&format!("{j},{g:.16e}\n"));
    }
    out
}

fn simulate_path(
    params: &ModelParams,
    scheme: &SamplingScheme,
    seed: u64,
    method: SimMethod,
    gamma_cache: Option<&std::path::Path>,
) -> Result<Vec<f64>> {
    let n = scheme.n();
    let sim_cfg = SimConfig {
        method,
        seed,
        embedding_pad: 2,
    };
    let use_cholesky = match method {
        SimMethod::Cholesky => true,
        SimMethod::Circulant => false,
        SimMethod::Auto => n <= 1024,
    };
    if use_cholesky {
        let gamma = cached_gamma(params, scheme, n, gamma_cache)?;
        let chol = CholeskyFactor::factor(crate::linalg::DenseMatrix::from_toeplitz(
            &gamma.gamma[..n],
        ))?;
        Ok(simulate::sample_cholesky(&chol, seed))
    } else {
        let m = (sim_cfg.embedding_pad * n).next_power_of_two();
        let gamma = cached_gamma(params, scheme, m / 2 + 1, gamma_cache)?;
        simulate::sample_circulant(&gamma, n, &sim_cfg, seed)
    }
}

fn cached_gamma(
    params: &ModelParams,
    scheme: &SamplingScheme,
    lags: usize,
    cache: Option<&std::path::Path>,
) -> Result<AutocovSequence> {
    if let Some(path) = cache {
        if path.exists() {
            let file = std::fs::File::open(path)?;
            let seq = AutocovSequence::read_binary(std::io::BufReader::new(file))?;
            if seq.gamma.len() >= lags {
                return Ok(seq);
            }
        }
    }
    let seq = compute_gamma(params, scheme, lags)?;
    if let Some(path) = cache {
        let file = std::fs::File::create(path)?;
        seq.write_binary(std::io::BufWriter::new(file))?;
    }
    Ok(seq)
}

/// Keeps `--help` reachable programmatically for the CLI tests.
pub fn command_names() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_command() {
        let names = command_names();
        for want in [
            "fisher", "gamma", "simulate", "score", "lan-check", "mc", "regimes", "profile",
        ] {
            assert!(names.iter().any(|n| n == want), "missing {want}");
        }
    }

    #[test]
    fn parse_h_triples() {
        assert!(parse_h("1,0,0").is_ok());
        assert!(parse_h("1.5, -2, 3e-1").is_ok());
        assert!(parse_h("1,2").is_err());
        assert!(parse_h("a,b,c").is_err());
    }

    #[test]
    fn run_help_is_success() {
        assert_eq!(run(["mfou", "--help"]), 0);
        assert_eq!(run(["mfou", "definitely-not-a-command"]), 2);
    }

    #[test]
    fn fisher_rejects_wrong_regime() {
        // supercritical constants requested outside the regime
        assert_eq!(run(["mfou", "fisher", "--hurst", "0.6"]), 1);
        assert_eq!(run(["mfou", "fisher", "--hurst", "0.8"]), 0);
    }
}
