//! Exact Gaussian log-likelihood, score quadratic forms, the two-stage score
//! orthogonalization, the triangular rate transform, finite-n information
//! matrices, and the local-expansion checker.
//!
//! The score of the sampled model in direction `i` is the centered quadratic
//! form `S_i = (z' M_i z - tr M_i) / 2` with `z` the whitened data and `M_i`
//! the whitened Toeplitz matrix of the corresponding derivative symbol. The
//! H-score carries an explicit `sigma ln(delta)` multiple of the sigma-score;
//! removing it leaves the remainder `R_H`, which is then projected against
//! the sigma direction, and the alpha-score is projected against both:
//!
//! ```text
//! S_H     = sigma ln(delta) S_sigma + R_H
//! R_H     = a_n S_sigma + R_H_perp,            a_n = tr(C D) / tr(C^2)
//! S_alpha = b_sigma S_sigma + b_H R_H_perp + S_alpha_perp
//! ```
//!
//! The pipeline stores the three orthogonalized matrices `C`, `D_perp`,
//! `A_perp` densely; the raw `D` and `A` are exact linear combinations of
//! them (`D = D_perp + a_n C`, `A = A_perp + b_sigma C + b_H D_perp`), so raw
//! scores, traces and operator norms are recovered without storing two more
//! dense matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lanczos_extreme, mat3, DenseMatrix};
use crate::model::{HurstRegime, LocalAlternative, ModelParams, SamplingScheme};
use crate::spectral::SymbolTable;
use crate::toeplitz::{
    mfou_autocov_channels, whiten_dense, BuildConfig, CholeskyFactor, WhitenedMatrix, DENSE_MAX,
};

/// Projection coefficients of the triangular score transform.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectionCoeffs {
    pub a_n: f64,
    pub b_sigma_n: f64,
    pub b_h_n: f64,
    /// `beta_n = sigma ln(delta) + a_n`.
    pub beta_n: f64,
}

/// Traces of the raw whitened matrices, cached at build time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RawTraces {
    pub tr_c: f64,
    pub tr_d: f64,
    pub tr_a: f64,
    pub tr_c2: f64,
    pub tr_d2: f64,
    pub tr_a2: f64,
    pub tr_cd: f64,
    pub tr_ca: f64,
    pub tr_da: f64,
    /// `tr(A D_perp)`, needed for the second projection.
    pub tr_a_dperp: f64,
}

/// Floating-point residuals of the exact orthogonality relations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossResiduals {
    pub tr_c_dperp: f64,
    pub tr_c_aperp: f64,
    pub tr_dperp_aperp: f64,
}

/// The whitened score matrices after orthogonalization.
pub struct ScoreMatrices {
    pub c_sigma: WhitenedMatrix,
    pub d_h_perp: WhitenedMatrix,
    pub a_alpha_perp: WhitenedMatrix,
    pub raw: RawTraces,
    pub cross: CrossResiduals,
    raw_op_d: (f64, bool),
    raw_op_a: (f64, bool),
}

impl ScoreMatrices {
    /// Dense raw `D_H = D_perp + a_n C`; small-n test reconstruction.
    pub fn d_h_dense(&self, coeffs: &ProjectionCoeffs) -> DenseMatrix {
        let mut d = self.d_h_perp.dense.clone();
        d.add_scaled(&self.c_sigma.dense, coeffs.a_n);
        d
    }

    /// Dense raw `A_alpha = A_perp + b_sigma C + b_H D_perp`.
    pub fn a_alpha_dense(&self, coeffs: &ProjectionCoeffs) -> DenseMatrix {
        let mut a = self.a_alpha_perp.dense.clone();
        a.add_scaled(&self.c_sigma.dense, coeffs.b_sigma_n);
        a.add_scaled(&self.d_h_perp.dense, coeffs.b_h_n);
        a
    }
}

/// Operator/Frobenius ratio of one score matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpfRatio {
    pub ratio: f64,
    pub converged: bool,
}

/// The five op/F ratios feeding the quadratic-form CLT condition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OpfDiagnostics {
    pub c_sigma: OpfRatio,
    pub d_h: OpfRatio,
    pub d_h_perp: OpfRatio,
    pub a_alpha: OpfRatio,
    pub a_alpha_perp: OpfRatio,
}

/// Raw scores, orthogonalized components and the normalized central
/// sequence for one data vector.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CentralSequence {
    /// `(S_sigma, R_H_perp, S_alpha_perp) / sqrt(n delta)`.
    pub xi: [f64; 3],
    /// `(S_sigma, S_H, S_alpha)`.
    pub raw_scores: [f64; 3],
    pub s_sigma: f64,
    pub r_h: f64,
    pub r_h_perp: f64,
    pub s_alpha_perp: f64,
}

/// Triangular score transform `M_n`, the rate matrix
/// `r_n = sqrt(n delta) (M_n')^-1` and its inverse.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TriangularTransform {
    pub m_matrix: [[f64; 3]; 3],
    pub rate: [[f64; 3]; 3],
    pub rate_inv: [[f64; 3]; 3],
}

/// Everything needed to evaluate scores at one `(theta, scheme)`.
pub struct ScorePipeline {
    pub params: ModelParams,
    pub scheme: SamplingScheme,
    pub cfg: BuildConfig,
    /// First row of the model covariance (kept for covariance rebuilds).
    pub sigma_row: Vec<f64>,
    pub chol: CholeskyFactor,
    pub mats: ScoreMatrices,
    pub coeffs: ProjectionCoeffs,
}

/// Shared raw build: covariance factorization plus the three whitened
/// derivative matrices.
struct RawBuild {
    sigma_row: Vec<f64>,
    chol: CholeskyFactor,
    c: WhitenedMatrix,
    d: WhitenedMatrix,
    a: WhitenedMatrix,
}

fn build_raw(params: &ModelParams, scheme: &SamplingScheme, cfg: &BuildConfig) -> Result<RawBuild> {
    let n = scheme.n();
    if n > DENSE_MAX {
        return Err(Error::SizeBudget { n, max: DENSE_MAX });
    }
    if scheme.delta() >= 1.0 {
        return Err(Error::MeshTooCoarse {
            delta: scheme.delta(),
        });
    }
    let table = SymbolTable::new(params, scheme.delta(), cfg.sum)?;
    let ch = mfou_autocov_channels(&table, n, cfg.autocov_tol, true)?;
    let chol = CholeskyFactor::factor(DenseMatrix::from_toeplitz(&ch.f.gamma))?;
    let c = whiten_dense(DenseMatrix::from_toeplitz(&ch.d_sigma), &chol)?;
    let d = whiten_dense(DenseMatrix::from_toeplitz(&ch.r), &chol)?;
    let a = whiten_dense(DenseMatrix::from_toeplitz(&ch.d_alpha), &chol)?;
    Ok(RawBuild {
        sigma_row: ch.f.gamma,
        chol,
        c,
        d,
        a,
    })
}

impl ScorePipeline {
    /// Builds the full projected pipeline; supercritical regime only.
    pub fn build(params: &ModelParams, scheme: &SamplingScheme, cfg: &BuildConfig) -> Result<Self> {
        params.require_regime(HurstRegime::Supercritical)?;
        let RawBuild {
            sigma_row,
            chol,
            c,
            mut d,
            mut a,
        } = build_raw(params, scheme, cfg)?;

        let tr_c2 = c.frob_sq;
        if !(tr_c2 > 0.0) {
            return Err(Error::InvalidInput(
                "tr(C_sigma^2) vanished; the sigma-score direction is degenerate".into(),
            ));
        }
        // generalized Rayleigh bound; Ritz values approach from below, so
        // the estimate can never spuriously exceed the true norm
        assert!(
            c.op_norm_est <= 2.0 / params.sigma() + 1e-8,
            "operator norm bound |C_sigma| <= 2/sigma violated: {} > {}",
            c.op_norm_est,
            2.0 / params.sigma()
        );
        let mut raw = RawTraces {
            tr_c: c.trace,
            tr_d: d.trace,
            tr_a: a.trace,
            tr_c2,
            tr_d2: d.frob_sq,
            tr_a2: a.frob_sq,
            tr_cd: c.dense.trace_product(&d.dense),
            tr_ca: c.dense.trace_product(&a.dense),
            tr_da: d.dense.trace_product(&a.dense),
            tr_a_dperp: f64::NAN, // filled after the first projection
        };

        // first projection: D_perp = D - a_n C
        let a_n = raw.tr_cd / tr_c2;
        d.dense.add_scaled(&c.dense, -a_n);
        let d_perp = WhitenedMatrix::from_dense(d.dense, cfg.op_norm_tol, cfg.op_norm_max_iter);
        let tr_c_dperp = c.dense.trace_product(&d_perp.dense);

        // second projection: A_perp = A - b_sigma C - b_H D_perp
        let b_sigma_n = raw.tr_ca / tr_c2;
        let tr_a_dperp = a.dense.trace_product(&d_perp.dense);
        raw.tr_a_dperp = tr_a_dperp;
        let b_h_n = tr_a_dperp / d_perp.frob_sq;
        a.dense.add_scaled(&c.dense, -b_sigma_n);
        a.dense.add_scaled(&d_perp.dense, -b_h_n);
        let a_perp = WhitenedMatrix::from_dense(a.dense, cfg.op_norm_tol, cfg.op_norm_max_iter);
        let tr_c_aperp = c.dense.trace_product(&a_perp.dense);
        let tr_dperp_aperp = d_perp.dense.trace_product(&a_perp.dense);

        // operator norms of the implicit raw matrices
        let n = scheme.n();
        let raw_op_d = lanczos_extreme(
            |x, y| {
                d_perp.dense.matvec(x, y);
                let mut t = vec![0.0; n];
                c.dense.matvec(x, &mut t);
                for (yi, ti) in y.iter_mut().zip(&t) {
                    *yi += a_n * ti;
                }
            },
            n,
            cfg.op_norm_tol,
            cfg.op_norm_max_iter,
        );
        let raw_op_a = lanczos_extreme(
            |x, y| {
                a_perp.dense.matvec(x, y);
                let mut t = vec![0.0; n];
                c.dense.matvec(x, &mut t);
                for (yi, ti) in y.iter_mut().zip(&t) {
                    *yi += b_sigma_n * ti;
                }
                d_perp.dense.matvec(x, &mut t);
                for (yi, ti) in y.iter_mut().zip(&t) {
                    *yi += b_h_n * ti;
                }
            },
            n,
            cfg.op_norm_tol,
            cfg.op_norm_max_iter,
        );

        let coeffs = ProjectionCoeffs {
            a_n,
            b_sigma_n,
            b_h_n,
            beta_n: params.sigma() * scheme.delta().ln() + a_n,
        };
        Ok(ScorePipeline {
            params: *params,
            scheme: *scheme,
            cfg: *cfg,
            sigma_row,
            chol,
            mats: ScoreMatrices {
                c_sigma: c,
                d_h_perp: d_perp,
                a_alpha_perp: a_perp,
                raw,
                cross: CrossResiduals {
                    tr_c_dperp,
                    tr_c_aperp,
                    tr_dperp_aperp,
                },
                raw_op_d,
                raw_op_a,
            },
            coeffs,
        })
    }

    /// Exact Gaussian log-likelihood of the observed vector.
    pub fn loglik(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.scheme.n() {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.n(),
                got: x.len(),
            });
        }
        Ok(gaussian_loglik(&self.chol, x))
    }

    /// Raw scores `(S_sigma, S_H, S_alpha)`.
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3]> {
        Ok(self.central_sequence(x)?.raw_scores)
    }

    /// All score components and the normalized central sequence.
    pub fn central_sequence(&self, x: &[f64]) -> Result<CentralSequence> {
        if x.len() != self.scheme.n() {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.n(),
                got: x.len(),
            });
        }
        let z = self.chol.whiten_vec(x);
        Ok(self.central_sequence_whitened(&z))
    }

    /// Scores from an already whitened vector `z = L^-1 x`.
    pub fn central_sequence_whitened(&self, z: &[f64]) -> CentralSequence {
        let m = &self.mats;
        let s_sigma = 0.5 * (m.c_sigma.dense.quad(z) - m.c_sigma.trace);
        let r_h_perp = 0.5 * (m.d_h_perp.dense.quad(z) - m.d_h_perp.trace);
        let s_alpha_perp = 0.5 * (m.a_alpha_perp.dense.quad(z) - m.a_alpha_perp.trace);
        self.assemble_sequence(s_sigma, r_h_perp, s_alpha_perp)
    }

    /// Batched scores for whitened vectors stored as consecutive rows; the
    /// score matrices stream through memory once per block.
    pub fn central_sequences_whitened_block(&self, zs: &[f64]) -> Vec<CentralSequence> {
        let m = &self.mats;
        let qc = m.c_sigma.dense.quad_block(zs);
        let qd = m.d_h_perp.dense.quad_block(zs);
        let qa = m.a_alpha_perp.dense.quad_block(zs);
        qc.into_iter()
            .zip(qd)
            .zip(qa)
            .map(|((c, d), a)| {
                self.assemble_sequence(
                    0.5 * (c - m.c_sigma.trace),
                    0.5 * (d - m.d_h_perp.trace),
                    0.5 * (a - m.a_alpha_perp.trace),
                )
            })
            .collect()
    }

    fn assemble_sequence(&self, s_sigma: f64, r_h_perp: f64, s_alpha_perp: f64) -> CentralSequence {
        let r_h = self.coeffs.a_n * s_sigma + r_h_perp;
        let s_h = self.params.sigma() * self.scheme.delta().ln() * s_sigma + r_h;
        let s_alpha =
            self.coeffs.b_sigma_n * s_sigma + self.coeffs.b_h_n * r_h_perp + s_alpha_perp;

        let inv_sqrt_t = 1.0 / self.scheme.sqrt_t();
        let raw_scores = [s_sigma, s_h, s_alpha];
        let seq = CentralSequence {
            xi: [
                s_sigma * inv_sqrt_t,
                r_h_perp * inv_sqrt_t,
                s_alpha_perp * inv_sqrt_t,
            ],
            raw_scores,
            s_sigma,
            r_h,
            r_h_perp,
            s_alpha_perp,
        };
        // the triangular transform must reproduce the components exactly
        let tt = self.triangular_transform();
        let back = mat3::apply(&tt.m_matrix, &raw_scores);
        let target = [s_sigma, r_h_perp, s_alpha_perp];
        for i in 0..3 {
            let scale = target[i]
                .abs()
                .max(raw_scores.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .max(1e-300);
            assert!(
                (back[i] - target[i]).abs() <= 1e-10 * scale,
                "triangular identity violated in component {i}: {} vs {}",
                back[i],
                target[i]
            );
        }
        seq
    }

    /// The transform `M_n = M3 M2 M1` with the rate matrix and its inverse.
    pub fn triangular_transform(&self) -> TriangularTransform {
        triangular_from_coeffs(&self.coeffs, &self.params, &self.scheme)
    }

    /// Exact finite-n covariance of the central sequence:
    /// `diag(tr C^2, tr D_perp^2, tr A_perp^2) / (2 n delta)` with the
    /// floating-point orthogonality residuals on the off-diagonals.
    pub fn finite_fisher(&self) -> [[f64; 3]; 3] {
        let m = &self.mats;
        let s = 0.5 / self.scheme.t_horizon();
        [
            [
                m.c_sigma.frob_sq * s,
                m.cross.tr_c_dperp * s,
                m.cross.tr_c_aperp * s,
            ],
            [
                m.cross.tr_c_dperp * s,
                m.d_h_perp.frob_sq * s,
                m.cross.tr_dperp_aperp * s,
            ],
            [
                m.cross.tr_c_aperp * s,
                m.cross.tr_dperp_aperp * s,
                m.a_alpha_perp.frob_sq * s,
            ],
        ]
    }

    /// op/F ratios for the raw and projected matrices.
    pub fn opf_diagnostics(&self) -> OpfDiagnostics {
        let m = &self.mats;
        let ratio = |op: f64, frob_sq: f64| op / frob_sq.sqrt();
        OpfDiagnostics {
            c_sigma: OpfRatio {
                ratio: ratio(m.c_sigma.op_norm_est, m.c_sigma.frob_sq),
                converged: m.c_sigma.op_converged,
            },
            d_h: OpfRatio {
                ratio: ratio(m.raw_op_d.0, m.raw.tr_d2),
                converged: m.raw_op_d.1,
            },
            d_h_perp: OpfRatio {
                ratio: ratio(m.d_h_perp.op_norm_est, m.d_h_perp.frob_sq),
                converged: m.d_h_perp.op_converged,
            },
            a_alpha: OpfRatio {
                ratio: ratio(m.raw_op_a.0, m.raw.tr_a2),
                converged: m.raw_op_a.1,
            },
            a_alpha_perp: OpfRatio {
                ratio: ratio(m.a_alpha_perp.op_norm_est, m.a_alpha_perp.frob_sq),
                converged: m.a_alpha_perp.op_converged,
            },
        }
    }
}

/// `-(log det Sigma + x' Sigma^-1 x)/2 - (n/2) log(2 pi)`.
pub fn gaussian_loglik(chol: &CholeskyFactor, x: &[f64]) -> f64 {
    let n = chol.n() as f64;
    -0.5 * (chol.log_det + chol.inv_quad(x)) - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// One-shot exact log-likelihood (builds the covariance internally).
pub fn loglik(
    x: &[f64],
    params: &ModelParams,
    scheme: &SamplingScheme,
    cfg: &BuildConfig,
) -> Result<f64> {
    if x.len() != scheme.n() {
        return Err(Error::DimensionMismatch {
            expected: scheme.n(),
            got: x.len(),
        });
    }
    let (_, chol) = crate::toeplitz::build_sigma(params, scheme, cfg)?;
    Ok(gaussian_loglik(&chol, x))
}

/// Assembles `M_n` from the projection coefficients as the product of the
/// three elementary factors, together with the rate matrix and its inverse.
pub fn triangular_from_coeffs(
    coeffs: &ProjectionCoeffs,
    params: &ModelParams,
    scheme: &SamplingScheme,
) -> TriangularTransform {
    let s_log_d = params.sigma() * scheme.delta().ln();
    let m1 = [[1.0, 0.0, 0.0], [-s_log_d, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let m2 = [[1.0, 0.0, 0.0], [-coeffs.a_n, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let m3 = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-coeffs.b_sigma_n, -coeffs.b_h_n, 1.0],
    ];
    let m = mat3::mul(&m3, &mat3::mul(&m2, &m1));
    // closed form: rows (1,0,0), (-beta, 1, 0), (-(b_sigma - beta b_H), -b_H, 1)
    let beta = s_log_d + coeffs.a_n;
    let b_tilde = coeffs.b_sigma_n - beta * coeffs.b_h_n;
    debug_assert!((m[1][0] + beta).abs() <= 1e-12 * beta.abs().max(1.0));
    debug_assert!((m[2][0] + b_tilde).abs() <= 1e-12 * b_tilde.abs().max(1.0));

    let sqrt_t = scheme.sqrt_t();
    let m_t = mat3::transpose(&m);
    let mut rate_inv = m_t;
    for row in rate_inv.iter_mut() {
        for v in row.iter_mut() {
            *v /= sqrt_t;
        }
    }
    // rate = sqrt(n delta) (M')^-1 = sqrt(n delta) (M^-1)'
    let m_inv = mat3::inv_unit_lower(&m);
    let mut rate = mat3::transpose(&m_inv);
    for row in rate.iter_mut() {
        for v in row.iter_mut() {
            *v *= sqrt_t;
        }
    }
    TriangularTransform {
        m_matrix: m,
        rate,
        rate_inv,
    }
}

/// Local-expansion report for one data vector.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LanCheckReport {
    pub llr_exact: f64,
    pub llr_lan: f64,
    /// `llr_exact - llr_lan`, exactly.
    pub remainder: f64,
    pub s1_op: f64,
    pub s1_frob: f64,
    pub decomposition_gap_op: f64,
    pub decomposition_gap_frob: f64,
    /// `|S|_op tr(S^2)`, the log-determinant Taylor remainder bound.
    pub logdet_remainder_bound: f64,
}

/// Prepared state for repeated local-expansion checks at one `(theta, h)`:
/// the shifted covariance factor plus the perturbation-matrix diagnostics.
pub struct LanContext<'a> {
    pipeline: &'a ScorePipeline,
    pub theta_h: ModelParams,
    pub h: LocalAlternative,
    chol_h: Option<CholeskyFactor>,
    /// `h' I_n h` with the finite-n trace information matrix.
    pub i_quad: f64,
    /// `tr(S1^2) / 2` from the dense first-order matrix.
    pub half_tr_s1_sq: f64,
    pub s1_op: f64,
    pub s1_frob: f64,
    pub decomposition_gap_op: f64,
    pub decomposition_gap_frob: f64,
    pub logdet_remainder_bound: f64,
}

impl<'a> LanContext<'a> {
    pub fn new(pipeline: &'a ScorePipeline, h: &LocalAlternative) -> Result<Self> {
        let tt = pipeline.triangular_transform();
        let theta_h = crate::model::local_shift(&pipeline.params, h, &tt.rate_inv)?;
        let fisher = pipeline.finite_fisher();
        let ih = mat3::apply(&fisher, &h.0);
        let i_quad = h.0[0] * ih[0] + h.0[1] * ih[1] + h.0[2] * ih[2];

        if theta_h == pipeline.params {
            // zero shift: the likelihood ratio vanishes identically
            return Ok(LanContext {
                pipeline,
                theta_h,
                h: *h,
                chol_h: None,
                i_quad,
                half_tr_s1_sq: i_quad,
                s1_op: 0.0,
                s1_frob: 0.0,
                decomposition_gap_op: 0.0,
                decomposition_gap_frob: 0.0,
                logdet_remainder_bound: 0.0,
            });
        }

        // shifted covariance and its factor
        let scheme = &pipeline.scheme;
        let table = SymbolTable::new(&theta_h, scheme.delta(), pipeline.cfg.sum)?;
        let ch = mfou_autocov_channels(&table, scheme.n(), pipeline.cfg.autocov_tol, false)?;
        let chol_h = CholeskyFactor::factor(DenseMatrix::from_toeplitz(&ch.f.gamma))?;

        // perturbation S = L^-1 (Sigma_h - Sigma) L^-T from the row difference
        let diff_row: Vec<f64> = ch
            .f
            .gamma
            .iter()
            .zip(&pipeline.sigma_row)
            .map(|(a, b)| a - b)
            .collect();
        let s = whiten_dense(DenseMatrix::from_toeplitz(&diff_row), &pipeline.chol)?;

        // first-order matrix S1 = (h1 C + h2 D_perp + h3 A_perp)/sqrt(n delta)
        let inv_sqrt_t = 1.0 / scheme.sqrt_t();
        let mut s1 = pipeline.mats.c_sigma.dense.clone();
        s1.scale(h.0[0] * inv_sqrt_t);
        s1.add_scaled(&pipeline.mats.d_h_perp.dense, h.0[1] * inv_sqrt_t);
        s1.add_scaled(&pipeline.mats.a_alpha_perp.dense, h.0[2] * inv_sqrt_t);
        let half_tr_s1_sq = 0.5 * s1.frob_sq();
        let (s1_op, _) = lanczos_extreme(
            |x, y| s1.matvec(x, y),
            s1.n(),
            pipeline.cfg.op_norm_tol,
            pipeline.cfg.op_norm_max_iter,
        );
        let s1_frob = (2.0 * half_tr_s1_sq).sqrt();

        // gap |S - S1| in both norms
        let mut gap = s.dense.clone();
        gap.add_scaled(&s1, -1.0);
        let gap_frob = gap.frob_sq().sqrt();
        let (gap_op, _) = lanczos_extreme(
            |x, y| gap.matvec(x, y),
            gap.n(),
            pipeline.cfg.op_norm_tol,
            pipeline.cfg.op_norm_max_iter,
        );

        Ok(LanContext {
            pipeline,
            theta_h,
            h: *h,
            chol_h: Some(chol_h),
            i_quad,
            half_tr_s1_sq,
            s1_op,
            s1_frob,
            decomposition_gap_op: gap_op,
            decomposition_gap_frob: gap_frob,
            logdet_remainder_bound: s.op_norm_est * s.frob_sq,
        })
    }

    /// Exact and quadratic-expansion log-likelihood ratios for one path.
    pub fn check(&self, x: &[f64]) -> Result<LanCheckReport> {
        let llr_exact = match &self.chol_h {
            None => 0.0,
            Some(chol_h) => gaussian_loglik(chol_h, x) - gaussian_loglik(&self.pipeline.chol, x),
        };
        let seq = self.pipeline.central_sequence(x)?;
        let h_xi = self.h.0[0] * seq.xi[0] + self.h.0[1] * seq.xi[1] + self.h.0[2] * seq.xi[2];
        let llr_lan = h_xi - 0.5 * self.i_quad;
        Ok(LanCheckReport {
            llr_exact,
            llr_lan,
            remainder: llr_exact - llr_lan,
            s1_op: self.s1_op,
            s1_frob: self.s1_frob,
            decomposition_gap_op: self.decomposition_gap_op,
            decomposition_gap_frob: self.decomposition_gap_frob,
            logdet_remainder_bound: self.logdet_remainder_bound,
        })
    }
}

/// One-shot local-expansion check.
pub fn lan_check(
    x: &[f64],
    params: &ModelParams,
    scheme: &SamplingScheme,
    h: &LocalAlternative,
    cfg: &BuildConfig,
) -> Result<LanCheckReport> {
    let pipeline = ScorePipeline::build(params, scheme, cfg)?;
    LanContext::new(&pipeline, h)?.check(x)
}

/// Raw whitened score matrices without projections, available in every
/// regime; carries the normalized trace tables of the two lower regimes.
pub struct RegimePipeline {
    pub params: ModelParams,
    pub scheme: SamplingScheme,
    pub chol: CholeskyFactor,
    pub m_sigma: WhitenedMatrix,
    pub d_h: WhitenedMatrix,
    pub a_alpha: WhitenedMatrix,
}

/// Normalized scores and cross-trace diagnostics for the lower regimes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeScores {
    /// `(S_sigma/v, R_H/v, S_alpha/sqrt(n delta))` with the regime's `v`.
    pub normalized: [f64; 3],
    /// `(S_sigma, S_H, S_alpha)`.
    pub raw_scores: [f64; 3],
    pub r_h: f64,
    /// `tr(M_sigma A_alpha) / (v sqrt(n delta))`.
    pub cross_sigma_alpha: f64,
    /// `tr(D_H A_alpha) / (v sqrt(n delta))`.
    pub cross_h_alpha: f64,
}

/// Normalized trace table of one `(theta, n)` in the lower regimes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeTraceTable {
    pub n: usize,
    /// Block normalization `v` (`sqrt(n) delta^p` or `sqrt(n)`).
    pub v_n: f64,
    /// `[[tr M^2, tr MD], [tr MD, tr D^2]] / (2 v^2)`.
    pub block: [[f64; 2]; 2],
    pub block_det: f64,
    /// `tr(A^2) / (2 n delta)`, trending to `1/(2 alpha)`.
    pub alpha_entry: f64,
    pub cross_sigma_alpha: f64,
    pub cross_h_alpha: f64,
    /// `tr(C~^2)/n = tr(M_sigma^2)/(4 sigma^2 n)`, short-memory regime only.
    pub ctilde_sq_over_n: Option<f64>,
}

impl RegimePipeline {
    pub fn build(params: &ModelParams, scheme: &SamplingScheme, cfg: &BuildConfig) -> Result<Self> {
        let RawBuild { chol, c, d, a, .. } = build_raw(params, scheme, cfg)?;
        Ok(RegimePipeline {
            params: *params,
            scheme: *scheme,
            chol,
            m_sigma: c,
            d_h: d,
            a_alpha: a,
        })
    }

    fn block_norm(&self) -> f64 {
        let n = self.scheme.n() as f64;
        match self.params.regime() {
            HurstRegime::SubcriticalLongMemory => {
                n.sqrt() * self.scheme.delta().powf(self.params.rho())
            }
            HurstRegime::ShortMemory => n.sqrt(),
            HurstRegime::Supercritical => self.scheme.sqrt_t(),
        }
    }

    /// Normalized score vector per the regime's diagonal scaling; rejects
    /// the supercritical regime (that one goes through the projected
    /// pipeline).
    pub fn regime_scores(&self, x: &[f64]) -> Result<RegimeScores> {
        match self.params.regime() {
            HurstRegime::Supercritical => Err(Error::WrongRegime {
                expected: "subcritical or short-memory",
                got: HurstRegime::Supercritical.name(),
            }),
            _ => {
                if x.len() != self.scheme.n() {
                    return Err(Error::DimensionMismatch {
                        expected: self.scheme.n(),
                        got: x.len(),
                    });
                }
                let z = self.chol.whiten_vec(x);
                let s_sigma = 0.5 * (self.m_sigma.dense.quad(&z) - self.m_sigma.trace);
                let r_h = 0.5 * (self.d_h.dense.quad(&z) - self.d_h.trace);
                let s_alpha = 0.5 * (self.a_alpha.dense.quad(&z) - self.a_alpha.trace);
                let s_h = self.params.sigma() * self.scheme.delta().ln() * s_sigma + r_h;
                let v = self.block_norm();
                let sqrt_t = self.scheme.sqrt_t();
                Ok(RegimeScores {
                    normalized: [s_sigma / v, r_h / v, s_alpha / sqrt_t],
                    raw_scores: [s_sigma, s_h, s_alpha],
                    r_h,
                    cross_sigma_alpha: self.m_sigma.dense.trace_product(&self.a_alpha.dense)
                        / (v * sqrt_t),
                    cross_h_alpha: self.d_h.dense.trace_product(&self.a_alpha.dense)
                        / (v * sqrt_t),
                })
            }
        }
    }

    /// Normalized trace table (any regime; `v` follows the regime).
    pub fn trace_table(&self) -> RegimeTraceTable {
        let v = self.block_norm();
        let sqrt_t = self.scheme.sqrt_t();
        let half_inv_v2 = 0.5 / (v * v);
        let tr_m2 = self.m_sigma.frob_sq;
        let tr_md = self.m_sigma.dense.trace_product(&self.d_h.dense);
        let tr_d2 = self.d_h.frob_sq;
        let block = [
            [tr_m2 * half_inv_v2, tr_md * half_inv_v2],
            [tr_md * half_inv_v2, tr_d2 * half_inv_v2],
        ];
        let sigma = self.params.sigma();
        RegimeTraceTable {
            n: self.scheme.n(),
            v_n: v,
            block,
            block_det: block[0][0] * block[1][1] - block[0][1] * block[1][0],
            alpha_entry: self.a_alpha.frob_sq / (2.0 * self.scheme.t_horizon()),
            cross_sigma_alpha: self.m_sigma.dense.trace_product(&self.a_alpha.dense)
                / (v * sqrt_t),
            cross_h_alpha: self.d_h.dense.trace_product(&self.a_alpha.dense) / (v * sqrt_t),
            ctilde_sq_over_n: match self.params.regime() {
                HurstRegime::ShortMemory => {
                    Some(tr_m2 / (4.0 * sigma * sigma * self.scheme.n() as f64))
                }
                _ => None,
            },
        }
    }
}

/// One-shot regime score evaluation.
pub fn regime_scores(
    x: &[f64],
    params: &ModelParams,
    scheme: &SamplingScheme,
    cfg: &BuildConfig,
) -> Result<RegimeScores> {
    RegimePipeline::build(params, scheme, cfg)?.regime_scores(x)
}
