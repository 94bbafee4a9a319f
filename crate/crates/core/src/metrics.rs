//! Agreement between perturbed-wall strain and ground-truth strain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strain::StrainField;

/// Thresholds for satisfactory agreement (both strict).
pub const R_SQUARED_MIN: f64 = 0.8;
pub const NRMSE_MAX: f64 = 0.05;

/// Denominator used to normalize the RMSE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrmseNorm {
    /// max(x) − min(x)
    #[default]
    Range,
    /// |mean(x)|
    Mean,
    /// population standard deviation of x
    StdDev,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityFit {
    pub r_squared: f64,
    pub nrmse: f64,
}

/// R² and NRMSE of `y` against the identity line `y = x`.
pub fn identity_fit(x: &[f64], y: &[f64]) -> Result<IdentityFit> {
    identity_fit_with(x, y, NrmseNorm::Range)
}

pub fn identity_fit_with(x: &[f64], y: &[f64], norm: NrmseNorm) -> Result<IdentityFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParams("identity fit needs at least 2 points".into()));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantGroundTruth);
    }
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
    let denom = match norm {
        NrmseNorm::Range => {
            let (lo, hi) = x
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        }
        NrmseNorm::Mean => mean.abs(),
        NrmseNorm::StdDev => (ss_tot / n as f64).sqrt(),
    };
    if !(denom > 0.0) {
        return Err(Error::InvalidParams("NRMSE normalization is zero".into()));
    }
    Ok(IdentityFit {
        r_squared: 1.0 - ss_res / ss_tot,
        nrmse: (ss_res / n as f64).sqrt() / denom,
    })
}

/// Largest masked value.
pub fn peak(strain: &StrainField) -> Result<f64> {
    strain
        .masked_values()
        .into_iter()
        .reduce(f64::max)
        .ok_or(Error::EmptyMask)
}

/// Percentile of the masked values with linear interpolation between order
/// statistics (`h = q (n − 1)`).
pub fn percentile(strain: &StrainField, q: f64) -> Result<f64> {
    let values = strain.masked_values();
    if values.len() < 2 {
        return Err(Error::EmptyMask);
    }
    percentile_of(values, q)
}

pub fn percentile_of(mut values: Vec<f64>, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidQuantile(q));
    }
    if values.is_empty() {
        return Err(Error::EmptyMask);
    }
    values.sort_by(f64::total_cmp);
    let h = q * (values.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    Ok(values[lo] + (h - lo as f64) * (values[hi] - values[lo]))
}

pub fn is_satisfactory(r_squared: f64, nrmse: f64) -> bool {
    r_squared > R_SQUARED_MIN && nrmse < NRMSE_MAX
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub r_squared: f64,
    pub nrmse: f64,
    pub peak: f64,
    pub p99: f64,
    pub n_points: usize,
    pub satisfactory: bool,
}

pub fn build_report(gt: &StrainField, pert: &StrainField) -> Result<AgreementReport> {
    build_report_with(gt, pert, NrmseNorm::Range)
}

/// Identity fit over jointly masked points; peak and p99 of `pert`.
pub fn build_report_with(gt: &StrainField, pert: &StrainField, norm: NrmseNorm) -> Result<AgreementReport> {
    if gt.len() != pert.len() {
        return Err(Error::LengthMismatch {
            left: gt.len(),
            right: pert.len(),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = (0..gt.len())
        .filter(|&i| gt.mask[i] && pert.mask[i])
        .map(|i| (gt.values[i], pert.values[i]))
        .unzip();
    let fit = identity_fit_with(&x, &y, norm)?;
    Ok(AgreementReport {
        r_squared: fit.r_squared,
        nrmse: fit.nrmse,
        peak: peak(pert)?,
        p99: percentile(pert, 0.99)?,
        n_points: x.len(),
        satisfactory: is_satisfactory(fit.r_squared, fit.nrmse),
    })
}
