//! Shared oracles for the integration suites. Everything here recomputes
//! target quantities through routes independent of the library paths under
//! test.
//!
//! Each integration binary compiles this module separately and uses a
//! different subset of it.
#![allow(dead_code)]

use mfou::model::ModelParams;
use mfou::quadrature::adaptive_gk;
use mfou::special;

/// Upper cutoff of the numerical part of the profile integrals.
pub const PROFILE_CUT: f64 = 1e6;

/// `J_m = int_R w(u)^2 (ln|u|)^m du`, `w(u) = 1/(1 + A^-1 |u|^rho)`, via
/// adaptive Gauss-Kronrod on `[0, U]` plus an analytic power-series tail.
/// Independent of the closed Beta/digamma forms in the library.
pub fn j_integrals_quadrature(params: &ModelParams) -> (f64, f64, f64) {
    let rho = params.rho();
    let amp_a = params.sigma()
        * params.sigma()
        * special::gamma(2.0 * params.hurst() + 1.0).unwrap()
        * (std::f64::consts::PI * params.hurst()).sin();
    let w = move |u: f64| 1.0 / (1.0 + u.powf(rho) / amp_a);

    let mut out = [0.0; 3];
    for (m, slot) in out.iter_mut().enumerate() {
        let body = adaptive_gk(
            &|u: f64| {
                let wu = w(u);
                wu * wu * u.ln().powi(m as i32)
            },
            0.0,
            PROFILE_CUT,
            1e-12,
            1e-12,
            6000,
        )
        .unwrap();
        // tail: w^2 = sum_k (k+1) (-1)^k A^(k+2) u^-(k+2) rho  for u^rho >> A
        let mut tail = 0.0;
        for k in 0..10u32 {
            let s = (k as f64 + 2.0) * rho;
            let coeff = (k as f64 + 1.0) * (-1.0f64).powi(k as i32) * amp_a.powi(k as i32 + 2);
            tail += coeff * power_log_tail(s, m as u32, PROFILE_CUT);
        }
        *slot = 2.0 * (body + tail);
    }
    (out[0], out[1], out[2])
}

/// `int_U^inf u^-s (ln u)^m du` in closed form for `s > 1`.
pub fn power_log_tail(s: f64, m: u32, u: f64) -> f64 {
    let base = u.powf(1.0 - s);
    let lu = u.ln();
    let d = s - 1.0;
    match m {
        0 => base / d,
        1 => base * (lu / d + 1.0 / (d * d)),
        2 => base * (lu * lu / d + 2.0 * lu / (d * d) + 2.0 / (d * d * d)),
        _ => unreachable!("only m <= 2 is used"),
    }
}

/// Bootstrap standard error of the sample variance of `vals`.
pub fn bootstrap_se_of_variance(vals: &[f64], resamples: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = mfou::simulate::replication_rng(seed, 0);
    let n = vals.len();
    let mut boots = Vec::with_capacity(resamples);
    for _ in 0..resamples {
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

pub fn sample_mean_and_var(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
