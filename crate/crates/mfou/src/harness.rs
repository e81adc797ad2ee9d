//! Monte Carlo verification harness: central-sequence covariance sweeps,
//! raw-versus-projected score clouds, pairwise ellipse exports, local
//! expansion remainder studies and lower-regime trace sweeps.
//!
//! Every run is driven by one master seed; replication `r` draws from stream
//! `r` of a counter-based generator, bootstrap resampling uses a disjoint
//! stream range, and all reductions run in fixed chunk order, so identical
//! configurations produce bit-identical CSV exports (the JSON reports are
//! bit-identical apart from the embedded `runtime_seconds` field).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher;
use crate::likelihood::{
    LanContext, OpfDiagnostics, RegimePipeline, RegimeTraceTable, ScorePipeline,
};
use crate::model::{HurstRegime, LocalAlternative, ModelParams, SamplingScheme};
use crate::par;
use crate::simulate::replication_rng;
use crate::toeplitz::BuildConfig;

/// Blueprint configuration; the defaults match the verification experiment
/// set (`theta = (1, 0.8, 1)`, `kappa = 0.5`, `n` in 512..4096, 2000
/// replications).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theta: ModelParams,
    pub kappa: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub h_list: Vec<LocalAlternative>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn default_blueprint(out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            theta: ModelParams::new(1.0, 0.8, 1.0).expect("valid default"),
            kappa: 0.5,
            n_grid: vec![512, 1024, 2048, 4096],
            replications: 2000,
            seed: 20260808,
            h_list: vec![
                LocalAlternative([1.0, 0.0, 0.0]),
                LocalAlternative([0.0, 1.0, 0.0]),
                LocalAlternative([0.0, 0.0, 1.0]),
            ],
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::InvalidParameter {
                name: "replications",
                value: self.replications as f64,
                constraint: "replications >= 100 for covariance experiments",
            });
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "n_grid must be non-empty and strictly ascending".into(),
            ));
        }
        Ok(())
    }

    pub fn scheme_for(&self, n: usize) -> Result<SamplingScheme> {
        SamplingScheme::from_kappa(n, self.kappa)
    }
}

/// Bootstrap resample count used for every standard-error band.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Stream offsets keeping the replication, bootstrap and study draws on
/// disjoint substreams of the master seed.
const STREAM_BOOTSTRAP: u64 = 1 << 40;
const STREAM_LAN: u64 = 1 << 41;

/// Per-n Monte Carlo report of the central-sequence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub n: usize,
    pub empirical_cov: [[f64; 3]; 3],
    /// Exact finite-n covariance `diag(tr C^2, tr Dp^2, tr Ap^2)/(2 n delta)`.
    pub finite_n_cov: [[f64; 3]; 3],
    /// Asymptotic limit `diag(I_ss, I_HH_perp, I_aa_perp)`.
    pub asymptotic_cov: [[f64; 3]; 3],
    pub max_abs_corr_offdiag: f64,
    /// Standardized gaps `(empirical - finite-n) / bootstrap SE`, diagonal.
    pub per_component_z: [f64; 3],
    pub opf_ratios: OpfDiagnostics,
    pub runtime_seconds: f64,
}

/// Raw-versus-projected correlation summary for one n.
#[derive(Debug, Clone, Serialize)]
pub struct RawProjSummary {
    pub n: usize,
    pub corr_s_sigma_r_h: f64,
    pub corr_s_sigma_r_h_perp: f64,
}

/// One replication row of the score table.
#[derive(Debug, Clone, Copy)]
struct SampleRow {
    s_sigma: f64,
    s_h: f64,
    r_h: f64,
    r_h_perp: f64,
    s_alpha: f64,
    s_alpha_perp: f64,
    xi: [f64; 3],
}

/// Replications per block; blocks run independently in parallel while the
/// dense matrices stream through cache once per block.
const REP_BLOCK: usize = 32;

fn draw_samples(pipeline: &ScorePipeline, reps: usize, seed: u64) -> Vec<SampleRow> {
    let n = pipeline.scheme.n();
    let n_blocks = reps.div_ceil(REP_BLOCK);
    let blocks = par::map_collect(n_blocks, |b| {
        let lo = b * REP_BLOCK;
        let hi = (lo + REP_BLOCK).min(reps);
        let k = hi - lo;
        // simulate X = L Z, then whiten back through the factor: the full
        // observation pipeline, batched
        let mut buf = vec![0.0; k * n];
        for (r, chunk) in buf.chunks_mut(n).enumerate() {
            let mut rng = replication_rng(seed, (lo + r) as u64);
            for v in chunk.iter_mut() {
                *v = rng.sample(rand_distr::StandardNormal);
            }
        }
        crate::linalg::multiply_lower_block(&pipeline.chol.lower, &mut buf);
        crate::linalg::solve_lower_block(&pipeline.chol.lower, &mut buf);
        pipeline
            .central_sequences_whitened_block(&buf)
            .into_iter()
            .map(|seq| SampleRow {
                s_sigma: seq.s_sigma,
                s_h: seq.raw_scores[1],
                r_h: seq.r_h,
                r_h_perp: seq.r_h_perp,
                s_alpha: seq.raw_scores[2],
                s_alpha_perp: seq.s_alpha_perp,
                xi: seq.xi,
            })
            .collect::<Vec<_>>()
    });
    blocks.into_iter().flatten().collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_scores_csv(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str("rep,S_sigma,S_H,R_H,R_H_perp,S_alpha,S_alpha_perp,xi1,xi2,xi3\n");
    for (r, row) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r,
            fmt(row.s_sigma),
            fmt(row.s_h),
            fmt(row.r_h),
            fmt(row.r_h_perp),
            fmt(row.s_alpha),
            fmt(row.s_alpha_perp),
            fmt(row.xi[0]),
            fmt(row.xi[1]),
            fmt(row.xi[2]),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn mean_and_cov(rows: &[SampleRow]) -> ([f64; 3], [[f64; 3]; 3]) {
    let r = rows.len() as f64;
    let mut mean = [0.0; 3];
    for row in rows {
        for i in 0..3 {
            mean[i] += row.xi[i];
        }
    }
    for m in mean.iter_mut() {
        *m /= r;
    }
    let mut cov = [[0.0; 3]; 3];
    for row in rows {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (row.xi[i] - mean[i]) * (row.xi[j] - mean[j]);
            }
        }
    }
    for ci in cov.iter_mut() {
        for v in ci.iter_mut() {
            *v /= r - 1.0;
        }
    }
    (mean, cov)
}

fn correlation(xs: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for (x, y) in xs.clone() {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn bootstrap_se_of_variance(vals: &[f64], seed: u64, stream: u64) -> f64 {
    let n = vals.len();
    let mut rng = replication_rng(seed, STREAM_BOOTSTRAP + stream);
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let v = vals[rng.random_range(0..n)];
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        boots.push((s2 - n as f64 * mean * mean) / (n as f64 - 1.0));
    }
    let m = boots.iter().sum::<f64>() / boots.len() as f64;
    (boots.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (boots.len() - 1) as f64).sqrt()
}

/// Shared per-n evaluation of the blueprint: build once, replicate, report.
struct BlueprintStep {
    report: McReport,
    rvp: RawProjSummary,
    rows: Vec<SampleRow>,
    fisher_diag: [f64; 3],
}

fn blueprint_step(cfg: &ExperimentConfig, n: usize) -> Result<BlueprintStep> {
    let start = Instant::now();
    let scheme = cfg.scheme_for(n)?;
    let build = BuildConfig::default();
    let pipeline = ScorePipeline::build(&cfg.theta, &scheme, &build)?;
    let rows = draw_samples(&pipeline, cfg.replications, cfg.seed);

    let (_, cov) = mean_and_cov(&rows);
    let mut max_corr = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            if i < j {
                max_corr = max_corr.max((cov[i][j] / (cov[i][i] * cov[j][j]).sqrt()).abs());
            }
        }
    }
    let fisher_full = pipeline.finite_fisher();
    let finite_diag = [fisher_full[0][0], fisher_full[1][1], fisher_full[2][2]];
    let mut finite_n_cov = [[0.0; 3]; 3];
    let mut per_component_z = [0.0; 3];
    for c in 0..3 {
        finite_n_cov[c][c] = finite_diag[c];
        let vals: Vec<f64> = rows.iter().map(|r| r.xi[c]).collect();
        let se = bootstrap_se_of_variance(&vals, cfg.seed, (n as u64) * 8 + c as u64);
        per_component_z[c] = (cov[c][c] - finite_diag[c]) / se;
    }
    let constants = fisher::constants_supercritical(&cfg.theta)?;
    let mut asymptotic_cov = [[0.0; 3]; 3];
    for (c, v) in constants.diagonal().into_iter().enumerate() {
        asymptotic_cov[c][c] = v;
    }

    let rvp = RawProjSummary {
        n,
        corr_s_sigma_r_h: correlation(rows.iter().map(|r| (r.s_sigma, r.r_h))),
        corr_s_sigma_r_h_perp: correlation(rows.iter().map(|r| (r.s_sigma, r.r_h_perp))),
    };
    let report = McReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        n,
        empirical_cov: cov,
        finite_n_cov,
        asymptotic_cov,
        max_abs_corr_offdiag: max_corr,
        per_component_z,
        opf_ratios: pipeline.opf_diagnostics(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(BlueprintStep {
        report,
        rvp,
        rows,
        fisher_diag: finite_diag,
    })
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(())
}

/// Central-sequence Monte Carlo: one report per n, raw score samples
/// persisted to `scores_n{n}.csv`, reports to `report_n{n}.json`.
pub fn mc_central_sequence(cfg: &ExperimentConfig) -> Result<Vec<McReport>> {
    cfg.validate()?;
    cfg.theta.require_regime(HurstRegime::Supercritical)?;
    ensure_out_dir(cfg)?;
    let mut reports = Vec::new();
    for &n in &cfg.n_grid {
        let step = blueprint_step(cfg, n)?;
        write_scores_csv(&cfg.out_dir.join(format!("scores_n{n}.csv")), &step.rows)?;
        fs::write(
            cfg.out_dir.join(format!("report_n{n}.json")),
            serde_json::to_string_pretty(&step.report)?,
        )?;
        reports.push(step.report);
    }
    Ok(reports)
}

/// Raw-versus-projected export: the per-replication score columns live in
/// the scores CSV; the summary JSON holds the two correlations per n.
pub fn raw_vs_projected(cfg: &ExperimentConfig) -> Result<Vec<RawProjSummary>> {
    cfg.validate()?;
    cfg.theta.require_regime(HurstRegime::Supercritical)?;
    ensure_out_dir(cfg)?;
    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let step = blueprint_step(cfg, n)?;
        write_scores_csv(&cfg.out_dir.join(format!("scores_n{n}.csv")), &step.rows)?;
        out.push(step.rvp);
    }
    fs::write(
        cfg.out_dir.join("raw_vs_projected.json"),
        serde_json::to_string_pretty(&out)?,
    )?;
    Ok(out)
}

/// Ellipse levels drawn in the pairwise contour export.
pub const ELLIPSE_LEVELS: [f64; 4] = [1.0, 1.5, 2.0, 2.5];

#[derive(Debug, Clone, Serialize)]
pub struct EllipseLevel {
    pub z: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEllipses {
    /// 1-based component indices of the pair.
    pub pair: [usize; 2],
    pub levels: Vec<EllipseLevel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudExport {
    pub n: usize,
    pub sample_count: usize,
    pub ellipses: Vec<PairEllipses>,
}

fn write_cloud_exports(cfg: &ExperimentConfig, n: usize, step: &BlueprintStep) -> Result<CloudExport> {
    let mut csv = String::from("rep,xi1,xi2,xi3\n");
    for (r, row) in step.rows.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r,
            fmt(row.xi[0]),
            fmt(row.xi[1]),
            fmt(row.xi[2])
        ));
    }
    fs::write(cfg.out_dir.join(format!("clouds_n{n}.csv")), csv)?;

    let ellipses = [(1usize, 2usize), (1, 3), (2, 3)]
        .into_iter()
        .map(|(i, j)| PairEllipses {
            pair: [i, j],
            levels: ELLIPSE_LEVELS
                .iter()
                .map(|&z| EllipseLevel {
                    z,
                    semi_axis_a: z * step.fisher_diag[i - 1].sqrt(),
                    semi_axis_b: z * step.fisher_diag[j - 1].sqrt(),
                })
                .collect(),
        })
        .collect();
    let export = CloudExport {
        n,
        sample_count: step.rows.len(),
        ellipses,
    };
    fs::write(
        cfg.out_dir.join(format!("ellipses_n{n}.json")),
        serde_json::to_string_pretty(&export)?,
    )?;
    Ok(export)
}

/// Pairwise cloud export: per-replication central-sequence samples
/// (`clouds_n{n}.csv`) plus axis-aligned ellipse parameters at the four
/// standard levels, semi-axes `z * sqrt(variance)` from the exact finite-n
/// diagonal.
pub fn pairwise_clouds(cfg: &ExperimentConfig) -> Result<Vec<CloudExport>> {
    cfg.validate()?;
    cfg.theta.require_regime(HurstRegime::Supercritical)?;
    ensure_out_dir(cfg)?;
    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let step = blueprint_step(cfg, n)?;
        out.push(write_cloud_exports(cfg, n, &step)?);
    }
    Ok(out)
}

/// Runs the whole blueprint in one pass per n (scores CSV, report JSON,
/// clouds and ellipse exports, raw-versus-projected summary).
pub fn run_blueprint(cfg: &ExperimentConfig) -> Result<(Vec<McReport>, Vec<RawProjSummary>)> {
    cfg.validate()?;
    cfg.theta.require_regime(HurstRegime::Supercritical)?;
    ensure_out_dir(cfg)?;
    let mut reports = Vec::new();
    let mut rvps = Vec::new();
    for &n in &cfg.n_grid {
        let step = blueprint_step(cfg, n)?;
        write_scores_csv(&cfg.out_dir.join(format!("scores_n{n}.csv")), &step.rows)?;
        fs::write(
            cfg.out_dir.join(format!("report_n{n}.json")),
            serde_json::to_string_pretty(&step.report)?,
        )?;
        write_cloud_exports(cfg, n, &step)?;
        reports.push(step.report);
        rvps.push(step.rvp);
    }
    fs::write(
        cfg.out_dir.join("raw_vs_projected.json"),
        serde_json::to_string_pretty(&rvps)?,
    )?;
    Ok((reports, rvps))
}

/// Remainder distribution of the local quadratic expansion at one `(n, h)`.
#[derive(Debug, Clone, Serialize)]
pub struct LanStudyRow {
    pub n: usize,
    pub h: LocalAlternative,
    pub median_abs_remainder: f64,
    pub p90_abs_remainder: f64,
    /// Mean of `llr(h) + llr(-h) + h' I_n h` over draws; the odd terms
    /// cancel, leaving second-order remainders.
    pub sym_defect_mean: f64,
    pub sym_defect_se: f64,
    pub decomposition_gap_op: f64,
    pub decomposition_gap_frob: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LanStudyReport<'a> {
    config: &'a ExperimentConfig,
    version: &'static str,
    rows: &'a [LanStudyRow],
}

/// Per-(n, h) remainder quantiles of `llr_exact - (h' Xi - h' I h / 2)`,
/// plus the plus/minus symmetry diagnostic. Inadmissible shifts are
/// reported and skipped.
pub fn lan_remainder_study(cfg: &ExperimentConfig) -> Result<Vec<LanStudyRow>> {
    cfg.validate()?;
    cfg.theta.require_regime(HurstRegime::Supercritical)?;
    ensure_out_dir(cfg)?;
    let build = BuildConfig::default();
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let scheme = cfg.scheme_for(n)?;
        let pipeline = ScorePipeline::build(&cfg.theta, &scheme, &build)?;
        for h in &cfg.h_list {
            let neg = LocalAlternative([-h.0[0], -h.0[1], -h.0[2]]);
            let ctx = match LanContext::new(&pipeline, h) {
                Ok(c) => c,
                Err(Error::ShiftOutOfDomain { .. }) => continue,
                Err(e) => return Err(e),
            };
            let ctx_neg = match LanContext::new(&pipeline, &neg) {
                Ok(c) => c,
                Err(Error::ShiftOutOfDomain { .. }) => continue,
                Err(e) => return Err(e),
            };
            let per_rep: Vec<(f64, f64)> = par::map_collect(cfg.replications, |r| {
                let mut rng = replication_rng(cfg.seed, STREAM_LAN + r as u64);
                let x = crate::simulate::sample_cholesky_with(&pipeline.chol, &mut rng);
                let rep_h = ctx.check(&x).expect("dimensions match");
                let rep_n = ctx_neg.check(&x).expect("dimensions match");
                (
                    rep_h.remainder,
                    rep_h.llr_exact + rep_n.llr_exact + ctx.i_quad,
                )
            });
            let mut abs_rem: Vec<f64> = per_rep.iter().map(|(r, _)| r.abs()).collect();
            abs_rem.sort_by(f64::total_cmp);
            let median = abs_rem[abs_rem.len() / 2];
            let p90 = abs_rem[(abs_rem.len() * 9) / 10];
            let syms: Vec<f64> = per_rep.iter().map(|(_, s)| *s).collect();
            let mean = syms.iter().sum::<f64>() / syms.len() as f64;
            let var = syms.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
                / (syms.len() - 1) as f64;
            rows.push(LanStudyRow {
                n,
                h: *h,
                median_abs_remainder: median,
                p90_abs_remainder: p90,
                sym_defect_mean: mean,
                sym_defect_se: (var / syms.len() as f64).sqrt(),
                decomposition_gap_op: ctx.decomposition_gap_op,
                decomposition_gap_frob: ctx.decomposition_gap_frob,
            });
        }
    }
    fs::write(
        cfg.out_dir.join("lan_study.json"),
        serde_json::to_string_pretty(&LanStudyReport {
            config: cfg,
            version: env!("CARGO_PKG_VERSION"),
            rows: &rows,
        })?,
    )?;
    Ok(rows)
}

/// Lower-regime convergence tables with end-to-end trend flags.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeSweepReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub regime: String,
    pub rows: Vec<RegimeTraceTable>,
    /// |cross traces| at the largest n below the smallest n.
    pub cross_traces_shrink: bool,
    /// Positive 2x2 block determinant at every n.
    pub block_det_positive: bool,
    /// Relative gap of the alpha entry to 1/(2 alpha), largest vs smallest n.
    pub alpha_gap_shrinks: bool,
}

pub fn regime_sweep(cfg: &ExperimentConfig) -> Result<RegimeSweepReport> {
    cfg.validate()?;
    let regime = cfg.theta.regime();
    if regime == HurstRegime::Supercritical {
        return Err(Error::WrongRegime {
            expected: "subcritical or short-memory",
            got: regime.name(),
        });
    }
    ensure_out_dir(cfg)?;
    let build = BuildConfig::default();
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let scheme = cfg.scheme_for(n)?;
        let pipeline = RegimePipeline::build(&cfg.theta, &scheme, &build)?;
        rows.push(pipeline.trace_table());
    }
    let first = rows.first().expect("validated non-empty grid");
    let last = rows.last().expect("validated non-empty grid");
    let alpha_limit = 0.5 / cfg.theta.alpha();
    let report = RegimeSweepReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        regime: regime.name().to_string(),
        cross_traces_shrink: last.cross_sigma_alpha.abs() < first.cross_sigma_alpha.abs()
            && last.cross_h_alpha.abs() < first.cross_h_alpha.abs(),
        block_det_positive: rows.iter().all(|r| r.block_det > 0.0),
        alpha_gap_shrinks: (last.alpha_entry - alpha_limit).abs()
            < (first.alpha_entry - alpha_limit).abs(),
        rows,
    };
    fs::write(
        cfg.out_dir.join("regime_sweep.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

/// Writes a simulated path as `t_index,x_value` CSV.
pub fn write_path_csv(path: &Path, x: &[f64]) -> Result<()> {
    let mut out = String::from("t_index,x_value\n");
    for (i, v) in x.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt(*v)));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a path written by [`write_path_csv`].
pub fn read_path_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "t_index,x_value" {
                return Err(Error::InvalidInput(format!(
                    "unexpected path CSV header: {line}"
                )));
            }
            continue;
        }
        let mut parts = line.split(',');
        let _idx = parts.next();
        let val = parts
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("malformed CSV line {i}")))?;
        out.push(
            val.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("line {i}: {e}")))?,
        );
    }
    Ok(out)
}
