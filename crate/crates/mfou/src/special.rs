//! Gamma, digamma and trigamma for positive arguments.
//!
//! Self-contained implementations (Lanczos approximation for the gamma
//! function, upward recurrence plus asymptotic series for the polygammas) so
//! the numerical core carries no external special-function dependency.
//! Relative accuracy is better than 1e-13 on the positive axis, comfortably
//! inside the 1e-12 contract used by the information constants.

use crate::error::{Error, Result};

/// Lanczos coefficients, g = 7, 9 terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.9999999999998099,
    676.5203681218851,
    -1259.1392167224028,
    771.3234287776531,
    -176.6150291621406,
    12.507343278686905,
    -0.13857109526572012,
    9.984369578019571e-6,
    1.5056327351493115e-7,
];

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            constraint: "x > 0 (finite)",
        });
    }
    Ok(())
}

/// Gamma function on (0, inf).
pub fn gamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the Lanczos kernel in its accurate range
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_pos(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

/// Digamma function psi(x) on (0, inf).
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    let mut x = x;
    let mut acc = 0.0;
    // psi(x) = psi(x + 1) - 1/x
    while x < 12.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // asymptotic series with Bernoulli numbers B_2..B_12
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    Ok(acc + x.ln() - 0.5 * inv - series)
}

/// Trigamma function psi'(x) on (0, inf).
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    let mut x = x;
    let mut acc = 0.0;
    // psi'(x) = psi'(x + 1) + 1/x^2
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0
            + inv * (0.5
                + inv * (1.0 / 6.0
                    - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0))))));
    Ok(acc + series)
}

/// log Gamma on (0, inf), used where Gamma itself would overflow.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        Ok(std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x)?)
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_factorials() {
        assert!(rel(gamma(1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(gamma(5.0).unwrap(), 24.0) < 1e-14);
        assert!(rel(gamma(0.5).unwrap(), std::f64::consts::PI.sqrt()) < 1e-14);
    }

    #[test]
    fn gamma_recurrence_property() {
        for &x in &[0.1, 0.37, 1.3, 2.6, 7.9, 15.2] {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-13, "x = {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn digamma_known_values() {
        // psi(1) = -Euler-Mascheroni
        assert!(rel(digamma(1.0).unwrap(), -0.5772156649015329) < 1e-13);
        assert!(rel(digamma(2.0).unwrap(), 0.4227843350984671) < 1e-13);
    }

    #[test]
    fn digamma_recurrence_vs_series() {
        // evaluate psi(2.6) by running the recurrence down from the
        // asymptotic series at 2.6 + 10 and compare with the direct value
        let x = 2.6_f64;
        let far = x + 10.0;
        let inv = 1.0 / far;
        let inv2 = inv * inv;
        let series = far.ln()
            - 0.5 * inv
            - inv2
                * (1.0 / 12.0
                    - inv2
                        * (1.0 / 120.0
                            - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
        let mut down = series;
        let mut y = far;
        while y > x + 0.5 {
            y -= 1.0;
            down -= 1.0 / y;
        }
        assert!(rel(digamma(x).unwrap(), down) < 1e-12);
    }

    #[test]
    fn trigamma_known_values() {
        let pi2_6 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
        assert!(rel(trigamma(1.0).unwrap(), pi2_6) < 1e-13);
        assert!(rel(trigamma(2.0).unwrap(), pi2_6 - 1.0) < 1e-12);
    }

    #[test]
    fn trigamma_recurrence_property() {
        for &x in &[0.3, 0.9, 1.7, 4.2] {
            let lhs = trigamma(x).unwrap();
            let rhs = trigamma(x + 1.0).unwrap() + 1.0 / (x * x);
            assert!(rel(lhs, rhs) < 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(gamma(0.0).is_err());
        assert!(digamma(-1.0).is_err());
        assert!(trigamma(f64::NAN).is_err());
    }

    #[test]
    fn ln_gamma_consistent_with_gamma() {
        for &x in &[0.2, 1.1, 6.5, 20.0] {
            assert!(rel(ln_gamma(x).unwrap().exp(), gamma(x).unwrap()) < 1e-12);
        }
    }
}
