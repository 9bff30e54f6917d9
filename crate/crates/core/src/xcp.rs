//! Static nonlinearity of the cross-coupled transistor pair.
//!
//! The differential output current of the pair is a sigmoid of the
//! differential gate voltage, linear with slope `K = sqrt(k_n I)` near the
//! origin and saturating at `±I` beyond `V_sat = sqrt(2I/k_n)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XcpError {
    #[error("transistor gain k_n must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("tail current must be nonnegative and finite, got {0}")]
    InvalidCurrent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorNonlinearity {
    k_n: f64,
    current: f64,
}

impl SectorNonlinearity {
    /// A zero tail current is accepted and yields the identically zero map.
    pub fn new(k_n: f64, current: f64) -> Result<Self, XcpError> {
        if !(k_n > 0.0 && k_n.is_finite()) {
            return Err(XcpError::InvalidGain(k_n));
        }
        if !(current >= 0.0 && current.is_finite()) {
            return Err(XcpError::InvalidCurrent(current));
        }
        Ok(SectorNonlinearity { k_n, current })
    }

    pub fn k_n(&self) -> f64 {
        self.k_n
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    /// Maximum slope `sqrt(k_n I)`.
    pub fn slope(&self) -> f64 {
        (self.k_n * self.current).sqrt()
    }

    /// Input voltage at which the pair saturates.
    pub fn v_sat(&self) -> f64 {
        (2.0 * self.current / self.k_n).sqrt()
    }

    /// Slope sector `(0, K)`.
    pub fn sector_bounds(&self) -> (f64, f64) {
        (0.0, self.slope())
    }

    /// Lower slope bound of the relational inverse, `1/K`.
    pub fn inverse_sector_lower(&self) -> f64 {
        1.0 / self.slope()
    }

    pub fn phi(&self, dv: f64) -> f64 {
        let magnitude = dv.abs();
        let out = if magnitude <= self.v_sat() {
            let arg = 1.0 - self.k_n * magnitude * magnitude / (4.0 * self.current);
            self.slope() * magnitude * arg.max(0.0).sqrt()
        } else {
            self.current
        };
        // Built from |dv| so the map is exactly odd.
        if dv < 0.0 {
            -out
        } else {
            out
        }
    }

    /// Analytic derivative, zero on the saturated branch and at `±V_sat`.
    pub fn phi_derivative(&self, dv: f64) -> f64 {
        if self.current == 0.0 || dv.abs() >= self.v_sat() {
            return 0.0;
        }
        let x2 = dv * dv;
        let num = 1.0 - self.k_n * x2 / (2.0 * self.current);
        let den = (1.0 - self.k_n * x2 / (4.0 * self.current)).sqrt();
        (self.slope() * num / den).clamp(0.0, self.slope())
    }
}
