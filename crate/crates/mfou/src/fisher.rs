//! Asymptotic information constants: the J-integrals and their closed forms,
//! the centering constants b and m, the diagonal and cross Fisher entries
//! with the Schur complement, and the numerically-defined limit constants of
//! the two lower Hurst regimes.

use serde::Serialize;

use crate::error::Result;
use crate::model::{HurstRegime, ModelParams};
use crate::quadrature::adaptive_gk;
use crate::special;
use crate::spectral::{self, FractionalSumConfig, LimitProfiles};

/// Gamma, digamma and trigamma at one point.
pub fn special_functions(x: f64) -> Result<(f64, f64, f64)> {
    Ok((
        special::gamma(x)?,
        special::digamma(x)?,
        special::trigamma(x)?,
    ))
}

/// Every asymptotic constant of the supercritical regime.
///
/// Serialized field names follow the notation used throughout the library:
/// `I_ss` is the sigma-sigma information, `I_HH_perp` the projected H
/// information, `I_aa_perp` the Schur-complement alpha information.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticConstants {
    pub rho: f64,
    #[serde(rename = "amp_A")]
    pub amp_a: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub b: f64,
    pub m: f64,
    #[serde(rename = "I_ss")]
    pub i_ss: f64,
    #[serde(rename = "I_HH_rem")]
    pub i_hh_rem: f64,
    #[serde(rename = "I_HH_perp")]
    pub i_hh_perp: f64,
    #[serde(rename = "I_aa")]
    pub i_aa: f64,
    #[serde(rename = "I_as")]
    pub i_as: f64,
    #[serde(rename = "I_aH_perp")]
    pub i_ah_perp: f64,
    #[serde(rename = "I_aa_perp")]
    pub i_aa_perp: f64,
}

impl AsymptoticConstants {
    /// Projected H information through the trigamma closed form,
    /// `J0 / (pi rho^2) * (psi1(1/rho) + psi1(2 - 1/rho))`; an independent
    /// algebraic route to `i_hh_perp`.
    pub fn i_hh_perp_trigamma(&self) -> Result<f64> {
        let inv_rho = 1.0 / self.rho;
        Ok(self.j0 / (std::f64::consts::PI * self.rho * self.rho)
            * (special::trigamma(inv_rho)? + special::trigamma(2.0 - inv_rho)?))
    }

    /// Diagonal of the limiting covariance of the central sequence.
    pub fn diagonal(&self) -> [f64; 3] {
        [self.i_ss, self.i_hh_perp, self.i_aa_perp]
    }
}

/// Closed forms of the J-integrals and the centering constant m:
///
/// ```text
/// J0 = (2/rho) A^(1/rho) Gamma(1/rho) Gamma(2 - 1/rho)
/// m  = (ln A + psi(1/rho) - psi(2 - 1/rho)) / rho,     J1 = m J0
/// J2 = J0 (m^2 + (psi1(1/rho) + psi1(2 - 1/rho)) / rho^2)
/// ```
///
/// Convergence needs `rho > 1/2`, i.e. the supercritical regime.
pub fn j_integrals(params: &ModelParams) -> Result<(f64, f64, f64, f64)> {
    params.require_regime(HurstRegime::Supercritical)?;
    let rho = params.rho();
    let amp_a = profile_amplitude(params)?;
    let inv_rho = 1.0 / rho;
    let j0 = 2.0 * inv_rho
        * amp_a.powf(inv_rho)
        * special::gamma(inv_rho)?
        * special::gamma(2.0 - inv_rho)?;
    let m = inv_rho * (amp_a.ln() + special::digamma(inv_rho)? - special::digamma(2.0 - inv_rho)?);
    let j1 = m * j0;
    let j2 = j0
        * (m * m
            + inv_rho * inv_rho * (special::trigamma(inv_rho)? + special::trigamma(2.0 - inv_rho)?));
    Ok((j0, j1, j2, m))
}

/// `A = sigma^2 Gamma(2H + 1) sin(pi H)`.
pub fn profile_amplitude(params: &ModelParams) -> Result<f64> {
    Ok(params.sigma()
        * params.sigma()
        * special::gamma(2.0 * params.hurst() + 1.0)?
        * (std::f64::consts::PI * params.hurst()).sin())
}

/// `b = d/dH log C(H) = 2 psi(2H + 1) + pi cot(pi H)`.
pub fn b_constant(params: &ModelParams) -> Result<f64> {
    Ok(2.0 * special::digamma(2.0 * params.hurst() + 1.0)?
        + std::f64::consts::PI / (std::f64::consts::PI * params.hurst()).tan())
}

/// Upper cutoff of the profile quadratures; the remainder is summed as an
/// analytic power series.
const PROFILE_CUT: f64 = 1e6;

/// All supercritical constants.
///
/// The diagonal entries come from closed forms; the cross entries `I_as` and
/// `I_aH_perp` are trace limits without closed forms and are computed by
/// quadrature of the limiting low-frequency profiles:
///
/// ```text
/// I_as      = (1/4pi) int q_alpha(u) (2/sigma) w(u) du
/// I_aH_perp = (1/4pi) int q_alpha(u) (-2) w(u) (ln|u| - m) du
/// ```
pub fn constants_supercritical(params: &ModelParams) -> Result<AsymptoticConstants> {
    params.require_regime(HurstRegime::Supercritical)?;
    let rho = params.rho();
    let sigma = params.sigma();
    let alpha = params.alpha();
    let amp_a = profile_amplitude(params)?;
    let (j0, j1, j2, m) = j_integrals(params)?;
    let b = b_constant(params)?;

    let i_ss = j0 / (std::f64::consts::PI * sigma * sigma);
    let i_hh_rem = j0 / std::f64::consts::PI;
    let i_hh_perp = (j2 - j1 * j1 / j0) / std::f64::consts::PI;
    let i_aa = 0.5 / alpha;

    let profiles = spectral::limit_profiles(params, m)?;
    let i_as = cross_information_sigma(&profiles, sigma)?;
    let i_ah_perp = cross_information_h(&profiles)?;
    let i_aa_perp = i_aa - i_as * i_as / i_ss - i_ah_perp * i_ah_perp / i_hh_perp;

    Ok(AsymptoticConstants {
        rho,
        amp_a,
        j0,
        j1,
        j2,
        b,
        m,
        i_ss,
        i_hh_rem,
        i_hh_perp,
        i_aa,
        i_as,
        i_ah_perp,
        i_aa_perp,
    })
}

fn cross_information_sigma(p: &LimitProfiles, sigma: f64) -> Result<f64> {
    // even integrand: (1/4pi) int_R = (1/2pi) int_0^inf
    let f = |u: f64| p.q_alpha(u) * (2.0 / sigma) * p.w(u);
    let body = adaptive_gk(&f, 0.0, PROFILE_CUT, 1e-13, 1e-11, 4000)?;
    // tail: q_alpha ~ -2 alpha / u^2, w ~ A u^-rho with geometric corrections
    let tail = cross_tail(p, 0, None) * (2.0 / sigma);
    Ok((body + tail) / (2.0 * std::f64::consts::PI))
}

fn cross_information_h(p: &LimitProfiles) -> Result<f64> {
    let f = |u: f64| p.q_alpha(u) * p.centered_log(u);
    let body = adaptive_gk(&f, 0.0, PROFILE_CUT, 1e-13, 1e-11, 4000)?;
    let tail = -2.0 * (cross_tail(p, 1, None) - p.m * cross_tail(p, 0, None));
    Ok((body + tail) / (2.0 * std::f64::consts::PI))
}

/// `int_U^inf q_alpha(u) w(u) (ln u)^pow du` expanded in inverse powers:
/// `q_alpha = -2 alpha u^-2 sum_k (-alpha^2/u^2)^k`,
/// `w = sum_j (-1)^j A^(j+1) u^-(j+1) rho`.
fn cross_tail(p: &LimitProfiles, pow: u32, terms: Option<usize>) -> f64 {
    let u = PROFILE_CUT;
    let lu = u.ln();
    let n_terms = terms.unwrap_or(6);
    let mut total = 0.0;
    for k in 0..n_terms {
        for j in 0..n_terms {
            // exponent of u^-s
            let s = 2.0 + 2.0 * k as f64 + (j as f64 + 1.0) * p.rho;
            let coeff = -2.0
                * p.alpha.powi(2 * k as i32 + 1)
                * (-1.0f64).powi(k as i32)
                * (-1.0f64).powi(j as i32)
                * p.amp_a.powi(-(j as i32 + 1));
            // int_U^inf u^-s (ln u)^pow du
            let base = u.powf(1.0 - s);
            let integral = match pow {
                0 => base / (s - 1.0),
                1 => base * (lu / (s - 1.0) + 1.0 / ((s - 1.0) * (s - 1.0))),
                _ => unreachable!("only pow 0 and 1 are used"),
            };
            total += coeff * integral;
        }
    }
    total
}

/// Asymptotic projection coefficient `a_n ~ sigma (L_n + b/2 - m)`.
pub fn a_n_asymptotic(params: &ModelParams, scheme: &crate::model::SamplingScheme) -> Result<f64> {
    params.require_regime(HurstRegime::Supercritical)?;
    let (_, _, _, m) = j_integrals(params)?;
    let b = b_constant(params)?;
    Ok(params.sigma() * (scheme.log_inv_delta() + 0.5 * b - m))
}

/// Configuration of the limit-constant quadratures for the two lower
/// regimes.
#[derive(Debug, Clone, Copy)]
pub struct LimitQuadConfig {
    /// Relative accuracy target of the reported constants.
    pub tol: f64,
    /// Aliasing-sum truncation inside the limit symbols.
    pub sum: FractionalSumConfig,
}

impl Default for LimitQuadConfig {
    fn default() -> Self {
        LimitQuadConfig {
            tol: 1e-6,
            sum: FractionalSumConfig {
                k_max: 512,
                ..Default::default()
            },
        }
    }
}

/// Limit constants of the subcritical long-memory regime.
///
/// The `delta^-p`-rescaled ratio symbols converge to the explicit limits
///
/// ```text
/// gbar(l) = 4 sigma C(H) (1 - cos l) S0(l)
/// hbar(l) = (sigma/2) gbar(l) (b + d/dH log S0(l))
/// S0(l)   = sum_k |l + 2 pi k|^(1-2H) / (l + 2 pi k)^2
/// ```
///
/// (the sampled OU symbol contributes the discrete Laplacian `2(1 - cos l)`
/// in the mesh limit), and the constants are their quadratic moments
/// `K = (1/2pi) int_-pi^pi` of `gbar^2`, `gbar hbar`, `hbar^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubcriticalConstants {
    pub p: f64,
    #[serde(rename = "K_ss")]
    pub k_ss: f64,
    #[serde(rename = "K_sH")]
    pub k_sh: f64,
    #[serde(rename = "K_HH")]
    pub k_hh: f64,
    pub block_det: f64,
}

/// Limit symbols shared by the two lower regimes.
struct BareRatioProfile {
    sigma: f64,
    hurst: f64,
    c_h: f64,
    b: f64,
    k_max: usize,
}

impl BareRatioProfile {
    fn new(params: &ModelParams, sum: &FractionalSumConfig) -> Result<Self> {
        let h = params.hurst();
        Ok(BareRatioProfile {
            sigma: params.sigma(),
            hurst: h,
            c_h: special::gamma(2.0 * h + 1.0)? * (std::f64::consts::PI * h).sin(),
            b: b_constant(params)?,
            k_max: sum.k_max,
        })
    }

    /// `(gbar, hbar)` of the subcritical limit.
    fn subcritical(&self, l: f64) -> (f64, f64) {
        let (s0, s0_log) = spectral::bare_alias_sums(self.hurst, l, self.k_max);
        let g = 4.0 * self.sigma * self.c_h * (1.0 - l.cos()) * s0;
        let dlog = -2.0 * s0_log / s0;
        let h = 0.5 * self.sigma * g * (self.b + dlog);
        (g, h)
    }

    /// `(c~, d~)` of the short-memory limit, scaled by sigma powers.
    fn short_memory(&self, l: f64) -> (f64, f64) {
        let (s0, s0_log) = spectral::bare_alias_sums(self.hurst, l, self.k_max);
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let dlog = -2.0 * s0_log / s0;
        (inv_s2, inv_s2 * (self.b + dlog))
    }
}

pub fn constants_subcritical(
    params: &ModelParams,
    quad_cfg: &LimitQuadConfig,
) -> Result<SubcriticalConstants> {
    params.require_regime(HurstRegime::SubcriticalLongMemory)?;
    let p = params.rho();
    let prof = BareRatioProfile::new(params, &quad_cfg.sum)?;

    // near zero: gbar ~ c1 l^-p, hbar ~ (sigma/2) c1 l^-p (b - 2 ln l)
    let c1 = 2.0 * prof.sigma * prof.c_h;
    let ch = 0.5 * prof.sigma * c1;
    let b = prof.b;
    let eps = 1e-8;
    let i0 = power_log_integral(-2.0 * p, 0, eps);
    let i1 = power_log_integral(-2.0 * p, 1, eps);
    let i2 = power_log_integral(-2.0 * p, 2, eps);
    let heads = [
        c1 * c1 * i0,
        c1 * ch * (b * i0 - 2.0 * i1),
        ch * ch * (b * b * i0 - 4.0 * b * i1 + 4.0 * i2),
    ];
    let model = move |l: f64| -> [f64; 3] {
        let lp = l.powf(-p);
        let g = c1 * lp;
        let h = ch * lp * (b - 2.0 * l.ln());
        [g * g, g * h, h * h]
    };
    let exact = |l: f64| -> [f64; 3] {
        let (g, h) = prof.subcritical(l);
        [g * g, g * h, h * h]
    };
    // K = (1/2pi) int over [-pi, pi]; the helper already returns the full
    // even integral
    let moments = graded_even_moments(&exact, &model, heads, eps);
    let inv_2pi = 0.5 / std::f64::consts::PI;
    let (k_ss, k_sh, k_hh) = (
        moments[0] * inv_2pi,
        moments[1] * inv_2pi,
        moments[2] * inv_2pi,
    );
    Ok(SubcriticalConstants {
        p,
        k_ss,
        k_sh,
        k_hh,
        block_det: k_ss * k_hh - k_sh * k_sh,
    })
}

/// Limit constants of the short-memory regime and the assembled 2x2 block
///
/// ```text
/// I0 = [ sigma^2/pi K~ss      sigma^3/(2pi) K~sH ]
///      [ sigma^3/(2pi) K~sH   sigma^4/(4pi) K~HH ]
/// ```
///
/// with `K~` the limits of `int c~^2`, `int c~ d~`, `int d~^2` over
/// `[-pi, pi]`. In the mesh limit `c~ = 1/sigma^2` identically and
/// `d~ = (b + d/dH log S0)/sigma^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShortMemoryConstants {
    #[serde(rename = "Ktil_ss")]
    pub ktil_ss: f64,
    #[serde(rename = "Ktil_sH")]
    pub ktil_sh: f64,
    #[serde(rename = "Ktil_HH")]
    pub ktil_hh: f64,
    pub block: [[f64; 2]; 2],
}

pub fn constants_short_memory(
    params: &ModelParams,
    quad_cfg: &LimitQuadConfig,
) -> Result<ShortMemoryConstants> {
    params.require_regime(HurstRegime::ShortMemory)?;
    let sigma = params.sigma();
    let prof = BareRatioProfile::new(params, &quad_cfg.sum)?;

    let inv_s2 = 1.0 / (sigma * sigma);
    let b = prof.b;
    let eps = 1e-8;
    let i0 = power_log_integral(0.0, 0, eps);
    let i1 = power_log_integral(0.0, 1, eps);
    let i2 = power_log_integral(0.0, 2, eps);
    let heads = [
        inv_s2 * inv_s2 * i0,
        inv_s2 * inv_s2 * (b * i0 - 2.0 * i1),
        inv_s2 * inv_s2 * (b * b * i0 - 4.0 * b * i1 + 4.0 * i2),
    ];
    let model = move |l: f64| -> [f64; 3] {
        let c = inv_s2;
        let d = inv_s2 * (b - 2.0 * l.ln());
        [c * c, c * d, d * d]
    };
    let exact = |l: f64| -> [f64; 3] {
        let (c, d) = prof.short_memory(l);
        [c * c, c * d, d * d]
    };
    let moments = graded_even_moments(&exact, &model, heads, eps);
    let (ktil_ss, ktil_sh, ktil_hh) = (moments[0], moments[1], moments[2]);
    let pi = std::f64::consts::PI;
    let s2 = sigma * sigma;
    let block = [
        [s2 / pi * ktil_ss, s2 * sigma / (2.0 * pi) * ktil_sh],
        [
            s2 * sigma / (2.0 * pi) * ktil_sh,
            s2 * s2 / (4.0 * pi) * ktil_hh,
        ],
    ];
    Ok(ShortMemoryConstants {
        ktil_ss,
        ktil_sh,
        ktil_hh,
        block,
    })
}

/// `int_0^eps x^a ln^m x dx` in closed form, `a > -1`.
fn power_log_integral(a: f64, m: u32, eps: f64) -> f64 {
    let a1 = a + 1.0;
    let p = eps.powf(a1);
    let le = eps.ln();
    match m {
        0 => p / a1,
        1 => p * (le / a1 - 1.0 / (a1 * a1)),
        2 => p * (le * le / a1 - 2.0 * le / (a1 * a1) + 2.0 / (a1 * a1 * a1)),
        _ => unreachable!("only m <= 2 is used"),
    }
}

/// `2 int_0^pi f` by dyadic panels on `[eps, pi]` plus the closed head model
/// on `[0, eps]` with a numerically integrated remainder.
fn graded_even_moments(
    exact: &dyn Fn(f64) -> [f64; 3],
    model: &dyn Fn(f64) -> [f64; 3],
    heads: [f64; 3],
    eps: f64,
) -> [f64; 3] {
    let mut acc = heads;
    // remainder of the model on the head interval
    let rem = crate::quadrature::gl16_array(
        &|l| {
            let e = exact(l);
            let m = model(l);
            [e[0] - m[0], e[1] - m[1], e[2] - m[2]]
        },
        0.0,
        eps,
    );
    for i in 0..3 {
        acc[i] += rem[i];
    }
    let mut b = std::f64::consts::PI;
    while b > eps * 1.0000001 {
        let a = (0.5 * b).max(eps);
        let v = crate::quadrature::gl16_array(exact, a, b);
        for i in 0..3 {
            acc[i] += v[i];
        }
        b = a;
    }
    [2.0 * acc[0], 2.0 * acc[1], 2.0 * acc[2]]
}
