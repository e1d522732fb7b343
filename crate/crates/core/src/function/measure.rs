//! Reference measures: the isotropic Gaussian `γ_{n,τ}` or Lebesgue.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceMeasure {
    Flat,
    Gaussian { tau: f64 },
}

impl ReferenceMeasure {
    pub fn gaussian(tau: f64) -> Result<Self> {
        let m = ReferenceMeasure::Gaussian { tau };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceMeasure::Flat => Ok(()),
            ReferenceMeasure::Gaussian { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            ReferenceMeasure::Gaussian { tau } => {
                Err(Error::usage(format!("gaussian variance must be positive and finite, got {tau}")))
            }
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            ReferenceMeasure::Flat => None,
            ReferenceMeasure::Gaussian { tau } => Some(tau),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, ReferenceMeasure::Flat)
    }
}

impl fmt::Display for ReferenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceMeasure::Flat => write!(f, "flat"),
            ReferenceMeasure::Gaussian { tau } => write!(f, "{tau}"),
        }
    }
}

/// A reference measure on `Rⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMeasure {
    dim: usize,
    reference: ReferenceMeasure,
}

impl GaussianMeasure {
    pub fn new(dim: usize, reference: ReferenceMeasure) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("measure dimension must be positive"));
        }
        reference.validate()?;
        Ok(GaussianMeasure { dim, reference })
    }

    pub fn standard(dim: usize, tau: f64) -> Result<Self> {
        Self::new(dim, ReferenceMeasure::Gaussian { tau })
    }

    pub fn flat(dim: usize) -> Result<Self> {
        Self::new(dim, ReferenceMeasure::Flat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reference(&self) -> ReferenceMeasure {
        self.reference
    }

    /// Log-density with respect to Lebesgue measure (0 for the flat measure).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self.reference {
            ReferenceMeasure::Flat => 0.0,
            ReferenceMeasure::Gaussian { tau } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                -0.5 * r2 / tau - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * tau).ln()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_density_normalisation() {
        let m = GaussianMeasure::standard(1, 1.0).unwrap();
        let v = m.log_density(&[0.0]);
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        assert!(GaussianMeasure::standard(1, 0.0).is_err());
        assert!(GaussianMeasure::flat(0).is_err());
    }

    #[test]
    fn serde_shape() {
        let s = serde_json::to_string(&ReferenceMeasure::Flat).unwrap();
        assert_eq!(s, "\"flat\"");
        let g: ReferenceMeasure = serde_json::from_str(r#"{"gaussian":{"tau":4.0}}"#).unwrap();
        assert_eq!(g.tau(), Some(4.0));
    }
}
