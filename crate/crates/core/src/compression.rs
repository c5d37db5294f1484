//! Weight transformations applied to client models before upload
//! (magnitude pruning, min-max quantization, clipping with Gaussian
//! noise) and the communication and privacy objectives.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelWeights;

/// Quantization bit-width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QBits {
    B8,
    B16,
    B32,
}

impl QBits {
    pub fn bits(self) -> u32 {
        match self {
            QBits::B8 => 8,
            QBits::B16 => 16,
            QBits::B32 => 32,
        }
    }

    /// Number of quantization steps, `2^q - 1`.
    pub fn steps(self) -> f64 {
        2f64.powi(self.bits() as i32) - 1.0
    }
}

impl TryFrom<u32> for QBits {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(QBits::B8),
            16 => Ok(QBits::B16),
            32 => Ok(QBits::B32),
            other => Err(Error::Input(format!("q_bits must be 8, 16 or 32, got {other}"))),
        }
    }
}

impl From<QBits> for u32 {
    fn from(q: QBits) -> u32 {
        q.bits()
    }
}

/// Decoded operator parameters of one candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionParams {
    pub xi: f64,
    pub q_bits: QBits,
    pub sigma: f64,
    pub clip_z: f64,
}

impl CompressionParams {
    pub fn new(xi: f64, q_bits: QBits, sigma: f64, clip_z: f64) -> Result<Self> {
        let p = Self {
            xi,
            q_bits,
            sigma,
            clip_z,
        };
        p.validate()?;
        Ok(p)
    }

    /// No pruning, 32-bit quantization, no noise.
    pub fn identity(clip_z: f64) -> Self {
        Self {
            xi: 0.0,
            q_bits: QBits::B32,
            sigma: 0.0,
            clip_z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) {
            return Err(Error::Input(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Input(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.clip_z > 0.0) || !self.clip_z.is_finite() {
            return Err(Error::Input(format!("clip_z must be > 0, got {}", self.clip_z)));
        }
        Ok(())
    }
}

/// Zeroes every parameter of a prunable layer whose magnitude is below `xi`.
/// Weights with `|w| == xi` are kept.
pub fn sparsify(weights: &ModelWeights, xi: f64) -> Result<ModelWeights> {
    if !(xi >= 0.0) {
        return Err(Error::Input(format!("xi must be >= 0, got {xi}")));
    }
    let mut out = weights.clone();
    for layer in out.layers_mut().iter_mut().filter(|l| l.prunable()) {
        for v in layer.values_mut() {
            if v.abs() < xi {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Quantizes each layer to `2^q` evenly spaced levels spanning its own
/// `[min, max]` (round half up) and maps the codes back to reals.
/// A layer whose values are all equal is returned unchanged.
pub fn quantize_dequantize(weights: &ModelWeights, q_bits: QBits) -> ModelWeights {
    quantize_with_steps(weights, q_bits.steps())
}

fn quantize_with_steps(weights: &ModelWeights, steps: f64) -> ModelWeights {
    let mut out = weights.clone();
    for layer in out.layers_mut() {
        let (lo, hi) = layer
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !(hi > lo) {
            continue;
        }
        let range = hi - lo;
        for v in layer.values_mut() {
            let code = ((*v - lo) / range * steps + 0.5).floor().clamp(0.0, steps);
            // Endpoint codes reproduce the range exactly so that the
            // operator is idempotent.
            *v = if code == steps {
                hi
            } else {
                lo + code / steps * range
            };
        }
    }
    out
}

/// Scales the flattened parameter vector to L2 norm at most `clip_z`, then
/// adds independent `N(0, (sigma * clip_z)^2)` noise to every component.
pub fn clip_and_noise<R: Rng + ?Sized>(
    weights: &ModelWeights,
    clip_z: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<ModelWeights> {
    if !(clip_z > 0.0) || !clip_z.is_finite() {
        return Err(Error::Input(format!("clip_z must be > 0, got {clip_z}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Input(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = weights.clone();
    let scale = (out.l2_norm() / clip_z).max(1.0);
    if scale > 1.0 {
        out.params_mut().for_each(|v| *v /= scale);
    }
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma * clip_z)
            .map_err(|e| Error::Input(format!("noise distribution: {e}")))?;
        for v in out.params_mut() {
            *v += noise.sample(rng);
        }
    }
    Ok(out)
}

/// Ratio of transmitted payload bits to uncompressed 32-bit payload bits,
/// summed over clients. Payload bits of a compressed model are
/// `nonzero parameters * q_bits`; no index or header overhead is counted.
pub fn comm_overhead(processed: &[(&ModelWeights, QBits)], originals: &[&ModelWeights]) -> Result<f64> {
    if processed.is_empty() || originals.is_empty() {
        return Err(Error::Input("communication overhead needs at least one client".into()));
    }
    if processed.len() != originals.len() {
        return Err(Error::Input(format!(
            "{} processed models but {} originals",
            processed.len(),
            originals.len()
        )));
    }
    let mut sent = 0.0;
    let mut full = 0.0;
    for ((model, q), original) in processed.iter().zip(originals) {
        if !model.same_shape(original) {
            return Err(Error::Input("processed and original models differ in shape".into()));
        }
        sent += model.nonzero_count() as f64 * q.bits() as f64;
        full += original.num_params() as f64 * 32.0;
    }
    Ok(sent / full)
}

/// Privacy-leakage accountant for the `sqrt(2 T ln(1/delta)) / (v sigma)` budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAccountant {
    pub rounds: usize,
    pub sampling_rate: f64,
    pub delta: f64,
    /// Reported when `sigma == 0`, where the budget is unbounded.
    pub ceiling: f64,
}

impl PrivacyAccountant {
    pub fn new(rounds: usize, sampling_rate: f64, delta: f64, ceiling: f64) -> Result<Self> {
        if !(sampling_rate > 0.0 && sampling_rate <= 1.0) {
            return Err(Error::Input(format!(
                "sampling rate must lie in (0, 1], got {sampling_rate}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Input(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(ceiling > 0.0) || !ceiling.is_finite() {
            return Err(Error::Input(format!("budget ceiling must be > 0, got {ceiling}")));
        }
        Ok(Self {
            rounds,
            sampling_rate,
            delta,
            ceiling,
        })
    }

    pub fn with_rounds(self, rounds: usize) -> Self {
        Self { rounds, ..self }
    }
}

pub fn privacy_budget(accountant: &PrivacyAccountant, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return accountant.ceiling;
    }
    let t = accountant.rounds as f64;
    (2.0 * t * (1.0 / accountant.delta).ln()).sqrt() / (accountant.sampling_rate * sigma)
}
