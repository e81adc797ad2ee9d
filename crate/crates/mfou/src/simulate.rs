//! Exact stationary Gaussian path simulation: Cholesky at small n, circulant
//! embedding (Davies-Harte / Dietrich-Newsam) at large n. Both samplers draw
//! from exactly `N(0, Sigma)`; there is no approximate synthesis here.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::toeplitz::{AutocovSequence, CholeskyFactor, DENSE_MAX};

/// Sampler selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    /// Cholesky for n <= 1024 (factor reuse dominates), circulant above.
    Auto,
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub method: SimMethod,
    pub seed: u64,
    /// Embedding length is at least `embedding_pad * n`, rounded up to a
    /// power of two; must be >= 2.
    pub embedding_pad: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            method: SimMethod::Auto,
            seed: 0,
            embedding_pad: 2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_pad < 2 {
            return Err(Error::InvalidParameter {
                name: "embedding_pad",
                value: self.embedding_pad as f64,
                constraint: "embedding_pad >= 2",
            });
        }
        Ok(())
    }
}

/// Stream-keyed generator: replication `rep` under master `seed` always sees
/// the same substream, independent of evaluation order.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn standard_normals(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `X = L Z` with `Z` standard normal from the stream keyed by `seed`.
pub fn sample_cholesky(chol: &CholeskyFactor, seed: u64) -> Vec<f64> {
    let mut rng = replication_rng(seed, 0);
    sample_cholesky_with(chol, &mut rng)
}

pub fn sample_cholesky_with(chol: &CholeskyFactor, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let z = standard_normals(rng, chol.n());
    chol.multiply(&z)
}

/// Prepared circulant embedding of a Toeplitz covariance.
pub struct CirculantEmbedding {
    n: usize,
    m: usize,
    /// `sqrt(e_k / m)` for the spectral synthesis.
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl CirculantEmbedding {
    /// Builds the embedding of length `m = next_pow2(pad * n)`; requires
    /// `gamma` to cover lags `0..=m/2`. Eigenvalues below `-1e-10 * max` are
    /// rejected; smaller negative noise is clipped to zero.
    pub fn from_autocov(gamma: &AutocovSequence, n: usize, pad: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                constraint: "n >= 1",
            });
        }
        let m = (pad * n).next_power_of_two().max(2);
        let half = m / 2;
        if gamma.gamma.len() < half + 1 {
            return Err(Error::InvalidInput(format!(
                "circulant embedding needs gamma up to lag {half}, got {}",
                gamma.gamma.len()
            )));
        }
        // symmetrized ring: ring[j] = gamma[min(j, m - j)]
        let mut ring: Vec<Complex64> = (0..m)
            .map(|j| Complex64::new(gamma.gamma[j.min(m - j)], 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut ring);

        let max_eig = ring.iter().fold(0.0f64, |acc, c| acc.max(c.re));
        let min_eig = ring.iter().fold(f64::INFINITY, |acc, c| acc.min(c.re));
        if min_eig < -1e-10 * max_eig {
            return Err(Error::EmbeddingNotPositive {
                ratio: min_eig / max_eig,
                n,
            });
        }
        let sqrt_eig = ring
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(CirculantEmbedding {
            n,
            m,
            sqrt_eig,
            fft,
        })
    }

    pub fn embedding_len(&self) -> usize {
        self.m
    }

    /// One exact draw by spectral synthesis.
    pub fn sample_with(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let m = self.m;
        let half = m / 2;
        let mut spec = vec![Complex64::new(0.0, 0.0); m];
        // real coefficients at the self-conjugate frequencies
        let xi0: f64 = rng.sample(StandardNormal);
        spec[0] = Complex64::new(self.sqrt_eig[0] * xi0, 0.0);
        let xih: f64 = rng.sample(StandardNormal);
        spec[half] = Complex64::new(self.sqrt_eig[half] * xih, 0.0);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..half {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let s = self.sqrt_eig[k] * inv_sqrt2;
            spec[k] = Complex64::new(s * a, s * b);
            spec[m - k] = spec[k].conj();
        }
        self.fft.process(&mut spec);
        spec.iter().take(self.n).map(|c| c.re).collect()
    }
}

/// One exact draw via circulant embedding, falling back to Cholesky when the
/// embedding has structurally negative eigenvalues and `n` is small enough.
pub fn sample_circulant(
    gamma: &AutocovSequence,
    n: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    gamma.validate()?;
    if n == 1 {
        let mut rng = replication_rng(seed, 0);
        let z: f64 = rng.sample(StandardNormal);
        return Ok(vec![gamma.gamma[0].sqrt() * z]);
    }
    match CirculantEmbedding::from_autocov(gamma, n, cfg.embedding_pad) {
        Ok(embed) => {
            let mut rng = replication_rng(seed, 0);
            Ok(embed.sample_with(&mut rng))
        }
        Err(Error::EmbeddingNotPositive { ratio, .. }) => {
            if n <= DENSE_MAX && gamma.gamma.len() >= n {
                let chol = CholeskyFactor::factor(DenseMatrix::from_toeplitz(&gamma.gamma[..n]))?;
                Ok(sample_cholesky(&chol, seed))
            } else {
                Err(Error::EmbeddingNotPositive { ratio, n })
            }
        }
        Err(e) => Err(e),
    }
}
