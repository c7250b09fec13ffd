//! Fixed-point representation and stochastic rounding.
//!
//! Values are quantized onto a grid of step `eps = 2^-FL` within the signed
//! range afforded by IL integer bits. Rounding to the grid is stochastic:
//! down with probability proportional to the distance to the upper neighbor,
//! so the rounded value is unbiased in expectation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed fixed-point format with IL integer bits and FL fraction bits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPointSpec {
    pub il: u32,
    pub fl: u32,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        FixedPointSpec { il: 4, fl: 16 }
    }
}

impl FixedPointSpec {
    /// Smallest positive representable step.
    pub fn eps(&self) -> f64 {
        2f64.powi(-(self.fl as i32))
    }

    pub fn max_value(&self) -> f64 {
        2f64.powi(self.il as i32 - 1) - self.eps()
    }

    pub fn min_value(&self) -> f64 {
        -(2f64.powi(self.il as i32 - 1))
    }

    /// Largest grid multiple <= x.
    pub fn floor_to_grid(&self, x: f64) -> f64 {
        (x / self.eps()).floor() * self.eps()
    }

    pub fn bits(&self) -> u32 {
        self.il + self.fl
    }

    pub fn bytes_per_element(&self) -> f64 {
        self.bits() as f64 / 8.0
    }
}

/// Stochastic rounder with saturation accounting.
#[derive(Debug, Clone)]
pub struct Quantizer {
    pub spec: FixedPointSpec,
    pub saturations: u64,
}

impl Quantizer {
    pub fn new(spec: FixedPointSpec) -> Self {
        Quantizer {
            spec,
            saturations: 0,
        }
    }

    /// Round `x` to the grid: down to floor(x) with probability
    /// (floor(x) + eps - x) / eps, otherwise up to floor(x) + eps.
    /// Out-of-range inputs saturate and bump the saturation counter.
    pub fn round<R: Rng>(&mut self, x: f64, rng: &mut R) -> f64 {
        if !x.is_finite() {
            self.saturations += 1;
            return if x.is_sign_negative() {
                self.spec.min_value()
            } else {
                self.spec.max_value()
            };
        }
        if x > self.spec.max_value() {
            self.saturations += 1;
            return self.spec.max_value();
        }
        if x < self.spec.min_value() {
            self.saturations += 1;
            return self.spec.min_value();
        }
        let eps = self.spec.eps();
        let lo = self.spec.floor_to_grid(x);
        let p_down = (lo + eps - x) / eps;
        if rng.gen::<f64>() < p_down {
            lo
        } else {
            lo + eps
        }
    }
}

/// Convenience wrapper when no saturation accounting is needed.
pub fn stochastic_round<R: Rng>(x: f64, spec: &FixedPointSpec, rng: &mut R) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Parameter("cannot round a non-finite value".into()));
    }
    let mut q = Quantizer::new(*spec);
    Ok(q.round(x, rng))
}
