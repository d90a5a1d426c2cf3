//! Attack distortion rate (ADR) and attack error rate (AER).
//!
//! Both operate on scalars; reduce maps with
//! [`masked_mean`](crate::estimation::masked_mean) first.

use crate::error::{Error, Result};

fn relative_deviation(value: f64, reference: f64) -> Result<f64> {
    if !(reference.is_finite() && reference > 0.0) {
        return Err(Error::NonPositiveDenominator(reference));
    }
    Ok((value - reference).abs() / reference)
}

/// `|attacked − benign| / benign`.
pub fn adr(attacked: f64, benign: f64) -> Result<f64> {
    relative_deviation(attacked, benign)
}

/// `|attacked − target| / target`.
pub fn aer(attacked: f64, target: f64) -> Result<f64> {
    relative_deviation(attacked, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Adr,
    Aer,
}

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Adr => "ADR",
            MetricName::Aer => "AER",
        }
    }
}
