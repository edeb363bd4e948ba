//! Closed-form reference estimators: IVW and MR-Egger.
//!
//! Both operate on LD-pruned instruments and weight by the inverse outcome
//! variance. IVW is the weighted average of per-SNP Wald ratios with
//! first-order weights; Egger adds an intercept for directional pleiotropy.
//! Egger standard errors come from the unscaled weighted normal-equation
//! covariance.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ingest::HarmonizedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ivw,
    Egger,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Ivw => write!(f, "ivw"),
            Method::Egger => write!(f, "egger"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub method: Method,
    pub beta_hat: f64,
    pub se: f64,
    pub pvalue: f64,
    pub intercept: Option<f64>,
    pub intercept_se: Option<f64>,
    pub n_snps: usize,
}

fn wald_pvalue(estimate: f64, se: f64) -> f64 {
    if !(se > 0.0) || !se.is_finite() {
        return f64::NAN;
    }
    let z = (estimate / se).abs();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * normal.sf(z)
}

/// Inverse-variance weighted estimate on independent (pruned) instruments.
pub fn ivw(pruned: &HarmonizedDataset) -> Result<BaselineResult> {
    pruned.validate()?;
    let j = pruned.len();
    let mut sum_w = 0.0;
    let mut sum_wb = 0.0;
    for i in 0..j {
        let g = pruned.exposure_beta[i];
        if g == 0.0 {
            return Err(Error::Numeric(format!(
                "zero exposure effect for SNP {}: Wald ratio undefined",
                pruned.snp_ids[i]
            )));
        }
        let var_y = pruned.outcome_se[i] * pruned.outcome_se[i];
        let w = g * g / var_y;
        let ratio = pruned.outcome_beta[i] / g;
        sum_w += w;
        sum_wb += w * ratio;
    }
    let beta_hat = sum_wb / sum_w;
    let se = sum_w.powf(-0.5);
    Ok(BaselineResult {
        method: Method::Ivw,
        beta_hat,
        se,
        pvalue: wald_pvalue(beta_hat, se),
        intercept: None,
        intercept_se: None,
        n_snps: j,
    })
}

/// Weighted regression of outcome on exposure effects with an intercept,
/// weights 1 / outcome variance.
pub fn mr_egger(pruned: &HarmonizedDataset) -> Result<BaselineResult> {
    pruned.validate()?;
    let j = pruned.len();
    if j < 3 {
        return Err(Error::Config(format!(
            "MR-Egger needs at least 3 instruments, got {j}"
        )));
    }
    let mut s_w = 0.0;
    let mut s_x = 0.0;
    let mut s_xx = 0.0;
    let mut s_y = 0.0;
    let mut s_xy = 0.0;
    for i in 0..j {
        let w = 1.0 / (pruned.outcome_se[i] * pruned.outcome_se[i]);
        let x = pruned.exposure_beta[i];
        let y = pruned.outcome_beta[i];
        s_w += w;
        s_x += w * x;
        s_xx += w * x * x;
        s_y += w * y;
        s_xy += w * x * y;
    }
    let det = s_w * s_xx - s_x * s_x;
    if !(det > 0.0) || det / (s_w * s_xx).max(f64::MIN_POSITIVE) < 1e-12 {
        return Err(Error::Numeric(
            "singular Egger design: exposure effects carry no spread".into(),
        ));
    }
    let slope = (s_w * s_xy - s_x * s_y) / det;
    let intercept = (s_xx * s_y - s_x * s_xy) / det;
    let se_slope = (s_w / det).sqrt();
    let se_intercept = (s_xx / det).sqrt();
    Ok(BaselineResult {
        method: Method::Egger,
        beta_hat: slope,
        se: se_slope,
        pvalue: wald_pvalue(slope, se_slope),
        intercept: Some(intercept),
        intercept_se: Some(se_intercept),
        n_snps: j,
    })
}

fn json_f64(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

impl BaselineResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method.to_string(),
            "estimate": json_f64(self.beta_hat),
            "se": json_f64(self.se),
            "pvalue": json_f64(self.pvalue),
            "intercept": self.intercept.map(json_f64).unwrap_or(serde_json::Value::Null),
            "intercept_se": self.intercept_se.map(json_f64).unwrap_or(serde_json::Value::Null),
            "n_snps": self.n_snps,
        })
    }

    /// One row under [`crate::vbem::RESULT_TSV_HEADER`].
    pub fn tsv_row(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        format!(
            "{}\t{}\t{}\t{}\tNA\t{}\t{}\t{}\ttrue",
            self.method,
            self.beta_hat,
            self.se,
            self.pvalue,
            fmt_opt(self.intercept),
            fmt_opt(self.intercept_se),
            self.n_snps
        )
    }
}
