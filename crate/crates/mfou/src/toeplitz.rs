//! Toeplitz covariance machinery: Fourier coefficients of symbols on the
//! graded grid, dense Toeplitz builders, Cholesky whitening, traces, norms
//! and centered Gaussian quadratic forms.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::{lanczos_extreme, DenseMatrix};
use crate::model::{ModelParams, SamplingScheme};
use crate::par;
use crate::quadrature::{FourierGrid, SymbolHead};
use crate::spectral::{FractionalSumConfig, SymbolTable};

/// Dense-storage ceiling; one matrix at this size is ~128 MiB.
pub const DENSE_MAX: usize = 4096;

/// Build-time knobs shared by every covariance/score-matrix constructor.
#[derive(Debug, Clone, Copy)]
pub struct BuildConfig {
    pub sum: FractionalSumConfig,
    /// Absolute autocovariance error target, relative to `gamma[0]`.
    pub autocov_tol: f64,
    pub op_norm_tol: f64,
    pub op_norm_max_iter: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            sum: FractionalSumConfig::default(),
            autocov_tol: 1e-9,
            op_norm_tol: 1e-6,
            op_norm_max_iter: 500,
        }
    }
}

/// Autocovariance lags 0..n-1 of a sampled symbol.
///
/// When the source symbol is a genuine spectral density the sequence
/// satisfies `gamma[0] > 0` and `|gamma[j]| <= gamma[0]`; [`Self::validate`]
/// checks exactly that and is invoked on every covariance path. The generic
/// Fourier-coefficient entry point leaves validation to the caller since it
/// accepts sign-changing symbols as well.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSequence {
    pub gamma: Vec<f64>,
    pub source_tol: f64,
}

impl AutocovSequence {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_empty() || !(self.gamma[0] > 0.0) {
            return Err(Error::InvalidInput(
                "autocovariance must start with gamma[0] > 0".into(),
            ));
        }
        let g0 = self.gamma[0];
        for (j, g) in self.gamma.iter().enumerate() {
            if !g.is_finite() || g.abs() > g0 * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "invalid autocovariance at lag {j}: {g} exceeds gamma[0] = {g0}"
                )));
            }
        }
        Ok(())
    }

    /// Binary dump: `u64` length, `len` autocovariances, then the source
    /// tolerance, all little-endian 64-bit.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.gamma.len() as u64).to_le_bytes())?;
        for g in &self.gamma {
            w.write_all(&g.to_le_bytes())?;
        }
        w.write_all(&self.source_tol.to_le_bytes())?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let len = u64::from_le_bytes(buf8) as usize;
        if len > 1 << 28 {
            return Err(Error::InvalidInput(format!("implausible length {len}")));
        }
        let mut gamma = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf8)?;
            gamma.push(f64::from_le_bytes(buf8));
        }
        r.read_exact(&mut buf8)?;
        let source_tol = f64::from_le_bytes(buf8);
        Ok(AutocovSequence { gamma, source_tol })
    }
}

/// Symmetric Toeplitz matrix, stored by its first row.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzMatrix {
    pub first_row: Vec<f64>,
}

impl ToeplitzMatrix {
    pub fn n(&self) -> usize {
        self.first_row.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_toeplitz(&self.first_row)
    }
}

/// Lower Cholesky factor of a covariance with its log-determinant.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub lower: DenseMatrix,
    pub log_det: f64,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.lower.n()
    }

    /// Factors a dense SPD matrix, retrying once with diagonal jitter
    /// `1e-12 * a[0][0]` when quadrature noise breaks positivity.
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        let jitter = 1e-12 * a.get(0, 0).abs();
        let backup = a.clone();
        match a.cholesky_in_place() {
            Ok(log_det) => Ok(CholeskyFactor { lower: a, log_det }),
            Err(_) => {
                let mut retry = backup;
                for i in 0..retry.n() {
                    let v = retry.get(i, i) + jitter;
                    retry.set(i, i, v);
                }
                let log_det = retry.cholesky_in_place()?;
                Ok(CholeskyFactor { lower: retry, log_det })
            }
        }
    }

    /// `z = L^-1 x`.
    pub fn whiten_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut z = x.to_vec();
        crate::linalg::forward_substitute(&self.lower, &mut z);
        z
    }

    /// `x' Sigma^-1 x = |L^-1 x|^2`.
    pub fn inv_quad(&self, x: &[f64]) -> f64 {
        self.whiten_vec(x).iter().map(|z| z * z).sum()
    }

    /// `x = L z` (sampling direction).
    pub fn multiply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(z.len(), n);
        let l = &self.lower;
        par::map_collect(n, |i| {
            let row = l.row(i);
            let mut acc = 0.0;
            for k in 0..=i {
                acc += row[k] * z[k];
            }
            acc
        })
    }
}

/// Whitened symmetric matrix `L^-1 T L^-T` with cached scalars.
#[derive(Debug, Clone)]
pub struct WhitenedMatrix {
    pub dense: DenseMatrix,
    pub trace: f64,
    pub frob_sq: f64,
    pub op_norm_est: f64,
    pub op_converged: bool,
}

impl WhitenedMatrix {
    pub fn n(&self) -> usize {
        self.dense.n()
    }

    pub fn frob(&self) -> f64 {
        self.frob_sq.sqrt()
    }

    pub(crate) fn from_dense(dense: DenseMatrix, op_tol: f64, op_max_iter: usize) -> Self {
        let trace = dense.trace();
        let frob_sq = dense.frob_sq();
        let (op_norm_est, op_converged) =
            lanczos_extreme(|x, y| dense.matvec(x, y), dense.n(), op_tol, op_max_iter);
        WhitenedMatrix {
            dense,
            trace,
            frob_sq,
            op_norm_est,
            op_converged,
        }
    }
}

/// Fourier coefficients `gamma[j] = (1/2pi) int g(l) cos(jl) dl` of an even
/// symbol over `[-pi, pi]`, graded toward the origin, no node at zero.
///
/// `head` describes the symbol's local model on `[0, lambda_min]`; the model
/// is integrated in closed form and the smooth remainder numerically.
pub fn autocov_from_symbol<F>(
    symbol: F,
    head: SymbolHead,
    n: usize,
    tol: f64,
) -> Result<AutocovSequence>
where
    F: Fn(f64) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            constraint: "n >= 1",
        });
    }
    let grid = FourierGrid::for_max_lag(n - 1);
    let err = grid.probe_symbol(&symbol);
    let values = par::map_collect(grid.len(), |i| symbol(grid.nodes[i]));
    let gamma = assemble_coefficients(&grid, &[values], &[head], &[&symbol], n - 1);
    let gamma = gamma.into_iter().next().expect("one channel");
    // error scale: gamma[0] for genuine spectral densities, the largest
    // coefficient for sign-changing test symbols
    let scale = gamma.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if err / std::f64::consts::PI > tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureBudget {
            worst: err / std::f64::consts::PI,
        });
    }
    Ok(AutocovSequence {
        gamma,
        source_tol: tol,
    })
}

/// Shared assembly: cosine moments of tabulated channel values plus the
/// analytic head (closed model integral + numerically integrated remainder
/// on `[0, lambda_min]`) plus optional closed-form per-lag offsets.
fn assemble_coefficients(
    grid: &FourierGrid,
    channel_values: &[Vec<f64>],
    heads: &[SymbolHead],
    evals: &[&dyn Fn(f64) -> f64],
    j_max: usize,
) -> Vec<Vec<f64>> {
    let n_channels = channel_values.len();
    let mut out = Vec::with_capacity(n_channels);
    // 16-point Gauss panel on the head interval [0, lambda_min]
    let eps = grid.lambda_min;
    let head_nodes = crate::quadrature::gl_nodes(0.0, eps);
    for c in 0..n_channels {
        let head = heads[c];
        let mut nodes: Vec<f64> = grid.nodes.clone();
        let mut weighted: Vec<f64> = channel_values[c]
            .iter()
            .zip(&grid.weights)
            .map(|(v, w)| v * w)
            .collect();
        for &(x, w) in &head_nodes {
            nodes.push(x);
            weighted.push(w * (evals[c](x) - head.model_value(x)));
        }
        let m_head = head.closed_integral(eps);
        let moments = par::map_collect(j_max + 1, |j| {
            let jf = j as f64;
            let mut acc = 0.0;
            let mut i = 0;
            const CHUNK: usize = 64;
            while i < nodes.len() {
                let hi = (i + CHUNK).min(nodes.len());
                let mut part = 0.0;
                for k in i..hi {
                    part += weighted[k] * (jf * nodes[k]).cos();
                }
                acc += part;
                i = hi;
            }
            (acc + m_head) / std::f64::consts::PI
        });
        out.push(moments);
    }
    out
}

/// Coefficient sequences of the four mfOU channels: the spectral density
/// itself plus the three derivative symbols, all on one shared grid so the
/// derivative coefficients are exact parameter derivatives of the first.
pub(crate) struct ChannelCoefficients {
    pub f: AutocovSequence,
    pub d_sigma: Vec<f64>,
    pub r: Vec<f64>,
    pub d_alpha: Vec<f64>,
}

pub(crate) fn mfou_autocov_channels(
    table: &SymbolTable,
    n_lags: usize,
    tol: f64,
    want_derivatives: bool,
) -> Result<ChannelCoefficients> {
    let j_max = n_lags - 1;
    let grid = FourierGrid::for_max_lag(j_max);

    // one pass over the grid evaluates all four fractional channels
    let values: Vec<[f64; 4]> = par::map_collect(grid.len(), |i| table.channel_array(grid.nodes[i]));
    let heads = table.heads();

    // backbone resolution probe on all channels at once
    let probe = probe_channels(table, &grid);
    let per_channel: Vec<Vec<f64>> = (0..4)
        .map(|c| values.iter().map(|v| v[c]).collect())
        .collect();

    let f_fn = |l: f64| table.channel_array(l)[0];
    let h_fn = |l: f64| table.channel_array(l)[1];
    let r_fn = |l: f64| table.channel_array(l)[2];
    let a_fn = |l: f64| table.channel_array(l)[3];
    let evals: Vec<&dyn Fn(f64) -> f64> = vec![&f_fn, &h_fn, &r_fn, &a_fn];

    let n_channels = if want_derivatives { 4 } else { 1 };
    let mut seqs = assemble_coefficients(
        &grid,
        &per_channel[..n_channels],
        &heads[..n_channels],
        &evals[..n_channels],
        j_max,
    );

    // Brownian parts in closed form (exact, including the alpha derivative)
    let f_gamma = &mut seqs[0];
    for (j, g) in f_gamma.iter_mut().enumerate() {
        *g += table.ou_gamma(j);
    }
    let g0 = f_gamma[0];
    if probe / std::f64::consts::PI > tol * g0.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureBudget {
            worst: probe / std::f64::consts::PI,
        });
    }

    let mut it = seqs.into_iter();
    let f = AutocovSequence {
        gamma: it.next().expect("f channel"),
        source_tol: tol,
    };
    f.validate()?;
    let (d_sigma, r, mut d_alpha) = if want_derivatives {
        (
            it.next().expect("d_sigma"),
            it.next().expect("r"),
            it.next().expect("d_alpha"),
        )
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    if want_derivatives {
        for (j, g) in d_alpha.iter_mut().enumerate() {
            *g += table.ou_gamma_dalpha(j);
        }
    }
    Ok(ChannelCoefficients {
        f,
        d_sigma,
        r,
        d_alpha,
    })
}

/// Worst-case backbone integration error summed over panels and channels.
fn probe_channels(table: &SymbolTable, grid: &FourierGrid) -> f64 {
    let panels = grid.backbone();
    let errs = par::map_collect(panels.len(), |i| {
        let (a, b) = panels[i];
        let fine = crate::quadrature::gl16_array(&|l| table.channel_array(l), a, b);
        let coarse = crate::quadrature::gl8_array(&|l| table.channel_array(l), a, b);
        let mut worst = 0.0f64;
        for c in 0..4 {
            worst += (fine[c] - coarse[c]).abs();
        }
        worst
    });
    errs.into_iter().sum()
}

/// Autocovariance of the sampled mfOU process out to `lags - 1`.
pub fn mfou_autocov(
    params: &ModelParams,
    delta: f64,
    cfg: &BuildConfig,
    lags: usize,
) -> Result<AutocovSequence> {
    let table = SymbolTable::new(params, delta, cfg.sum)?;
    Ok(mfou_autocov_channels(&table, lags, cfg.autocov_tol, false)?.f)
}

/// Builds the model covariance `Sigma_n` and its Cholesky factor.
pub fn build_sigma(
    params: &ModelParams,
    scheme: &SamplingScheme,
    cfg: &BuildConfig,
) -> Result<(ToeplitzMatrix, CholeskyFactor)> {
    let n = scheme.n();
    if n > DENSE_MAX {
        return Err(Error::SizeBudget { n, max: DENSE_MAX });
    }
    let table = SymbolTable::new(params, scheme.delta(), cfg.sum)?;
    let channels = mfou_autocov_channels(&table, n, cfg.autocov_tol, false)?;
    let toeplitz = ToeplitzMatrix {
        first_row: channels.f.gamma.clone(),
    };
    let chol = CholeskyFactor::factor(toeplitz.to_dense())?;
    Ok((toeplitz, chol))
}

/// Congruence whitening `L^-1 T L^-T`; shares the spectrum (hence traces,
/// Frobenius and operator norms, and the law of the quadratic form on
/// whitened data) with `Sigma^-1/2 T Sigma^-1/2`.
pub fn whiten(t: &ToeplitzMatrix, chol: &CholeskyFactor) -> Result<WhitenedMatrix> {
    whiten_dense(t.to_dense(), chol)
}

pub(crate) fn whiten_dense(mut dense: DenseMatrix, chol: &CholeskyFactor) -> Result<WhitenedMatrix> {
    if dense.n() != chol.n() {
        return Err(Error::DimensionMismatch {
            expected: chol.n(),
            got: dense.n(),
        });
    }
    dense.whiten_in_place(&chol.lower);
    let cfg = BuildConfig::default();
    Ok(WhitenedMatrix::from_dense(
        dense,
        cfg.op_norm_tol,
        cfg.op_norm_max_iter,
    ))
}

/// `tr(A B)` using symmetry.
pub fn trace_product(a: &WhitenedMatrix, b: &WhitenedMatrix) -> f64 {
    a.dense.trace_product(&b.dense)
}

/// Largest |eigenvalue| via Lanczos; returns the estimate and a convergence flag.
pub fn op_norm(a: &WhitenedMatrix, tol: f64, max_iter: usize) -> (f64, bool) {
    lanczos_extreme(|x, y| a.dense.matvec(x, y), a.n(), tol, max_iter)
}

/// Centered Gaussian quadratic form `Q(A) = z' A z - tr(A)`.
pub fn quad_form(a: &WhitenedMatrix, z: &[f64]) -> f64 {
    a.dense.quad(z) - a.trace
}
