//! Parameter and sampling-scheme domain types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst regime of the fractional component.
///
/// The boundaries H = 1/2 and H = 3/4 are excluded outright: the information
/// constants are singular or undefined there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HurstRegime {
    /// H > 3/4; low frequencies dominate and the full projected pipeline applies.
    Supercritical,
    /// 1/2 < H < 3/4; the (sigma, H) block is normalized by sqrt(n) * delta^(2H-1).
    SubcriticalLongMemory,
    /// 0 < H < 1/2; the (sigma, H) block is normalized by sqrt(n).
    ShortMemory,
}

impl HurstRegime {
    pub fn name(self) -> &'static str {
        match self {
            HurstRegime::Supercritical => "supercritical (H > 3/4)",
            HurstRegime::SubcriticalLongMemory => "subcritical long-memory (1/2 < H < 3/4)",
            HurstRegime::ShortMemory => "short-memory (0 < H < 1/2)",
        }
    }
}

/// Model parameter vector theta = (sigma, H, alpha).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    sigma: f64,
    hurst: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    sigma: f64,
    hurst: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.sigma, raw.hurst, raw.alpha)
    }
}

impl ModelParams {
    pub fn new(sigma: f64, hurst: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                constraint: "sigma > 0",
            });
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "alpha > 0",
            });
        }
        classify_hurst(hurst)?;
        Ok(Self { sigma, hurst, alpha })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// rho = 2H - 1, derived on demand; H stays the single source of truth.
    pub fn rho(&self) -> f64 {
        2.0 * self.hurst - 1.0
    }

    pub fn regime(&self) -> HurstRegime {
        // cannot fail: the constructor already rejected the boundaries
        classify_hurst(self.hurst).expect("validated at construction")
    }

    pub(crate) fn require_regime(&self, expected: HurstRegime) -> Result<()> {
        let got = self.regime();
        if got != expected {
            return Err(Error::WrongRegime {
                expected: expected.name(),
                got: got.name(),
            });
        }
        Ok(())
    }
}

fn classify_hurst(hurst: f64) -> Result<HurstRegime> {
    if !hurst.is_finite() || hurst <= 0.0 || hurst >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "hurst",
            value: hurst,
            constraint: "0 < hurst < 1, hurst not in {1/2, 3/4}",
        });
    }
    if hurst == 0.5 || hurst == 0.75 {
        return Err(Error::BoundaryHurst { hurst });
    }
    Ok(if hurst > 0.75 {
        HurstRegime::Supercritical
    } else if hurst > 0.5 {
        HurstRegime::SubcriticalLongMemory
    } else {
        HurstRegime::ShortMemory
    })
}

/// Classifies the regime of a valid parameter vector.
pub fn classify_regime(params: &ModelParams) -> HurstRegime {
    params.regime()
}

/// Observation grid `(n, delta)` with the derived quantities `T_n = n*delta`
/// and `L_n = log(1/delta)` cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct SamplingScheme {
    n: usize,
    delta: f64,
    kappa: Option<f64>,
    t_horizon: f64,
    log_inv_delta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawScheme {
    n: usize,
    delta: f64,
    kappa: Option<f64>,
}

impl TryFrom<RawScheme> for SamplingScheme {
    type Error = Error;
    fn try_from(raw: RawScheme) -> Result<Self> {
        match raw.kappa {
            Some(kappa) => {
                let scheme = SamplingScheme::from_kappa(raw.n, kappa)?;
                if (scheme.delta - raw.delta).abs() > 1e-12 * raw.delta.abs() {
                    return Err(Error::InvalidInput(format!(
                        "inconsistent scheme: delta = {} but n^-kappa = {}",
                        raw.delta, scheme.delta
                    )));
                }
                Ok(scheme)
            }
            None => SamplingScheme::from_delta(raw.n, raw.delta),
        }
    }
}

impl From<SamplingScheme> for RawScheme {
    fn from(s: SamplingScheme) -> Self {
        RawScheme {
            n: s.n,
            delta: s.delta,
            kappa: s.kappa,
        }
    }
}

impl SamplingScheme {
    /// Polynomial mesh `delta = n^-kappa`, `kappa` in (0, 1).
    pub fn from_kappa(n: usize, kappa: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                constraint: "n >= 2",
            });
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                value: kappa,
                constraint: "0 < kappa < 1",
            });
        }
        let ln_n = (n as f64).ln();
        let delta = (-kappa * ln_n).exp();
        Ok(Self {
            n,
            delta,
            kappa: Some(kappa),
            t_horizon: n as f64 * delta,
            log_inv_delta: kappa * ln_n,
        })
    }

    /// Explicit mesh; `kappa` is left unset.
    pub fn from_delta(n: usize, delta: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                constraint: "n >= 1",
            });
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                constraint: "delta > 0",
            });
        }
        Ok(Self {
            n,
            delta,
            kappa: None,
            t_horizon: n as f64 * delta,
            log_inv_delta: (1.0 / delta).ln(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    /// `T_n = n * delta`.
    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    /// `L_n = log(1/delta)`.
    pub fn log_inv_delta(&self) -> f64 {
        self.log_inv_delta
    }

    /// Reads kappa back from `(n, delta)`.
    pub fn kappa_readback(&self) -> f64 {
        self.log_inv_delta / (self.n as f64).ln()
    }

    /// `sqrt(n * delta)`, the common normalization of the central sequence.
    pub fn sqrt_t(&self) -> f64 {
        self.t_horizon.sqrt()
    }
}

/// Local parameter h in the projected coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalAlternative(pub [f64; 3]);

impl LocalAlternative {
    pub fn zero() -> Self {
        LocalAlternative([0.0; 3])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Shifts theta by `rate_inv * h` and revalidates the result.
///
/// `rate_inv` is the inverse rate matrix produced by the triangular
/// transform; the shifted parameter must stay inside the admissible region.
pub fn local_shift(
    theta: &ModelParams,
    h: &LocalAlternative,
    rate_inv: &[[f64; 3]; 3],
) -> Result<ModelParams> {
    if !h.is_finite() {
        return Err(Error::InvalidInput("local alternative has non-finite entries".into()));
    }
    let mut delta = [0.0_f64; 3];
    for (i, d) in delta.iter_mut().enumerate() {
        *d = rate_inv[i][0] * h.0[0] + rate_inv[i][1] * h.0[1] + rate_inv[i][2] * h.0[2];
    }
    let shifted = (
        theta.sigma() + delta[0],
        theta.hurst() + delta[1],
        theta.alpha() + delta[2],
    );
    ModelParams::new(shifted.0, shifted.1, shifted.2).map_err(|e| Error::ShiftOutOfDomain {
        detail: format!(
            "theta + rate_inv*h = ({}, {}, {}): {e}",
            shifted.0, shifted.1, shifted.2
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn regime_classification() {
        let p = ModelParams::new(1.0, 0.8, 1.0).unwrap();
        assert_eq!(classify_regime(&p), HurstRegime::Supercritical);
        let p = ModelParams::new(1.0, 0.6, 1.0).unwrap();
        assert_eq!(classify_regime(&p), HurstRegime::SubcriticalLongMemory);
        let p = ModelParams::new(1.0, 0.3, 1.0).unwrap();
        assert_eq!(classify_regime(&p), HurstRegime::ShortMemory);
    }

    #[test]
    fn boundary_hurst_rejected() {
        assert!(matches!(
            ModelParams::new(1.0, 0.75, 1.0),
            Err(Error::BoundaryHurst { .. })
        ));
        assert!(matches!(
            ModelParams::new(1.0, 0.5, 1.0),
            Err(Error::BoundaryHurst { .. })
        ));
        assert!(ModelParams::new(1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 0.8, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.8, -2.0).is_err());
    }

    #[test]
    fn scheme_from_kappa_powers_of_two() {
        let s = SamplingScheme::from_kappa(1024, 0.5).unwrap();
        assert!((s.delta() - 1.0 / 32.0).abs() < 1e-15);
        assert!((s.t_horizon() - 32.0).abs() < 1e-12);
        assert!((s.log_inv_delta() - 0.5 * (1024f64).ln()).abs() < 1e-14);

        let s = SamplingScheme::from_kappa(4, 0.5).unwrap();
        assert!((s.delta() - 0.5).abs() < 1e-15);
        assert!((s.t_horizon() - 2.0).abs() < 1e-15);

        assert!(SamplingScheme::from_kappa(2048, 1.0).is_err());
        assert!(SamplingScheme::from_kappa(1, 0.5).is_err());
    }

    #[test]
    fn local_shift_zero_is_identity() {
        let theta = ModelParams::new(1.0, 0.8, 1.0).unwrap();
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let shifted = local_shift(&theta, &LocalAlternative::zero(), &eye).unwrap();
        assert_eq!(shifted, theta);
    }

    #[test]
    fn local_shift_alpha_column() {
        // rate_inv whose last column moves only alpha by 1/sqrt(n*delta)
        let s = SamplingScheme::from_kappa(1024, 0.5).unwrap();
        let c = 1.0 / s.sqrt_t();
        let rate_inv = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, c]];
        let theta = ModelParams::new(1.0, 0.8, 1.0).unwrap();
        let h = LocalAlternative([0.0, 0.0, 1.0]);
        let shifted = local_shift(&theta, &h, &rate_inv).unwrap();
        assert!((shifted.alpha() - (1.0 + c)).abs() < 1e-15);
        assert_eq!(shifted.sigma(), 1.0);
        assert_eq!(shifted.hurst(), 0.8);
    }

    #[test]
    fn local_shift_out_of_domain() {
        let theta = ModelParams::new(1.0, 0.8, 1.0).unwrap();
        let eye = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let h = LocalAlternative([-5.0, 0.0, 0.0]);
        assert!(matches!(
            local_shift(&theta, &h, &eye),
            Err(Error::ShiftOutOfDomain { .. })
        ));
    }

    #[test]
    fn params_json_round_trip() {
        let p = ModelParams::new(1.0, 0.8, 2.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"sigma\"") && s.contains("\"hurst\"") && s.contains("\"alpha\""));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        // invalid payloads are rejected on deserialize
        assert!(serde_json::from_str::<ModelParams>(r#"{"sigma":1.0,"hurst":0.75,"alpha":1.0}"#).is_err());
    }

    #[test]
    fn scheme_json_round_trip_nullable_kappa() {
        let s = SamplingScheme::from_kappa(256, 0.5).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kappa\""));
        let back: SamplingScheme = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);

        let s = SamplingScheme::from_delta(100, 0.03).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kappa\":null"));
        let back: SamplingScheme = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn kappa_readback_is_identity(n in 2usize..100_000, kappa in 0.01f64..0.99) {
            let s = SamplingScheme::from_kappa(n, kappa).unwrap();
            let back = s.kappa_readback();
            prop_assert!((back - kappa).abs() <= 1e-12 * kappa);
        }

        #[test]
        fn classify_total_off_boundaries(h in 0.0001f64..0.9999) {
            prop_assume!((h - 0.5).abs() > 1e-9 && (h - 0.75).abs() > 1e-9);
            let p = ModelParams::new(1.0, h, 1.0).unwrap();
            let r = classify_regime(&p);
            if h > 0.75 {
                prop_assert_eq!(r, HurstRegime::Supercritical);
            } else if h > 0.5 {
                prop_assert_eq!(r, HurstRegime::SubcriticalLongMemory);
            } else {
                prop_assert_eq!(r, HurstRegime::ShortMemory);
            }
        }
    }
}
