//! Parameter-expanded variational-Bayes EM for the RBMR model.
//!
//! Each iteration runs a mean-field coordinate-ascent E-step (gamma sweep,
//! alpha sweep, then the Gamma weight), a closed-form M-step, and the
//! reduction step that collapses the expansion parameter back to 1. The
//! ELBO is evaluated after every iteration and must never decrease.
//!
//! Inference on the causal effect comes from fitting the model twice: the
//! likelihood-ratio statistic is twice the ELBO gap between the alternative
//! and the beta0 = 0 null, referred to a chi-square(1), and the calibrated
//! standard error is |beta0| / sqrt(LRT).

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::ingest::HarmonizedDataset;
use crate::ld::BlockLdMatrix;
use crate::model::{HyperParams, ModelParams};

const LN_2PI: f64 = 1.8378770664093453;

/// Mean-field posterior parameters: independent Gaussians for each gamma_j
/// and alpha_j, one Gamma for the scale weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub mu_gamma: Vec<f64>,
    pub s2_gamma: Vec<f64>,
    pub mu_alpha: Vec<f64>,
    pub s2_alpha: Vec<f64>,
    pub a_w_tilde: f64,
    pub b_w_tilde: f64,
}

impl VariationalState {
    pub fn expected_w(&self) -> f64 {
        self.a_w_tilde / self.b_w_tilde
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.mu_gamma.len();
        if self.s2_gamma.len() != j || self.mu_alpha.len() != j || self.s2_alpha.len() != j {
            return Err(Error::Config("variational vectors have mismatched lengths".into()));
        }
        if self
            .s2_gamma
            .iter()
            .chain(self.s2_alpha.iter())
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(Error::Domain("variational variances must be positive".into()));
        }
        if !(self.a_w_tilde > 0.0) || !(self.b_w_tilde > 0.0) {
            return Err(Error::Domain("variational Gamma parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Stopping rule and optional constraints for a fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub elbo_rel_tol: f64,
    pub seed: u64,
    /// Hold sigma0_2 fixed at this value instead of updating it in the
    /// M-step (used to drive the pleiotropy scale toward zero).
    pub fix_sigma0_2: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 10_000,
            elbo_rel_tol: 1e-7,
            seed: 0,
            fix_sigma0_2: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.elbo_rel_tol > 0.0) {
            return Err(Error::Config("elbo_rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Output of a single constrained or unconstrained model fit.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub params: ModelParams,
    pub state: VariationalState,
    pub elbo: f64,
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Full inference result: alternative fit plus LRT calibration against the
/// null fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta0_hat: f64,
    pub se: f64,
    pub lrt: f64,
    pub pvalue: f64,
    pub params: ModelParams,
    pub state: VariationalState,
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub null_elbo: f64,
    pub iterations: usize,
    pub n_snps: usize,
    /// Set when the LRT is zero while beta0 is not, so |beta0|/sqrt(LRT)
    /// has no finite value.
    pub infinite_se: bool,
}

fn check_problem(data: &HarmonizedDataset, ld: &BlockLdMatrix) -> Result<()> {
    data.validate()?;
    if ld.dim() != data.len() {
        return Err(Error::Config(format!(
            "LD matrix dimension {} does not match dataset size {}",
            ld.dim(),
            data.len()
        )));
    }
    if ld.block_sizes() != data.block_sizes() {
        return Err(Error::Config(
            "LD block sizes do not match dataset block assignment".into(),
        ));
    }
    Ok(())
}

/// One gamma-coordinate update; uses the most recent values of all other
/// coordinates.
fn update_gamma_coord(
    state: &mut VariationalState,
    j: usize,
    params: &ModelParams,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
) -> Result<()> {
    let (k, a) = ld.locate(j);
    let block = ld.block(k);
    let range = ld.block_range(k);
    let sy = &data.outcome_se;
    let sx = &data.exposure_se;
    let theta_jj = block[(a, a)];

    let precision = params.beta0 * params.beta0 * theta_jj / (sy[j] * sy[j])
        + params.zeta * params.zeta * theta_jj / (sx[j] * sx[j])
        + 1.0 / params.sigma2;

    let mut sum_y_gamma = 0.0;
    let mut sum_y_alpha = 0.0;
    let mut sum_x_gamma = 0.0;
    for (b, jj) in range.enumerate() {
        let th = block[(a, b)];
        sum_y_alpha += state.mu_alpha[jj] * th / sy[jj];
        if jj != j {
            sum_y_gamma += state.mu_gamma[jj] * th / sy[jj];
            sum_x_gamma += state.mu_gamma[jj] * th / sx[jj];
        }
    }

    let rhs = params.beta0 * data.outcome_beta[j] / (sy[j] * sy[j])
        - params.beta0 * params.beta0 / sy[j] * sum_y_gamma
        - params.beta0 / sy[j] * sum_y_alpha
        + params.zeta * data.exposure_beta[j] / (sx[j] * sx[j])
        - params.zeta * params.zeta / sx[j] * sum_x_gamma;

    let s2 = 1.0 / precision;
    let mu = rhs * s2;
    if !s2.is_finite() || !mu.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite gamma update at SNP index {j}"
        )));
    }
    state.s2_gamma[j] = s2;
    state.mu_gamma[j] = mu;
    Ok(())
}

/// One alpha-coordinate update.
fn update_alpha_coord(
    state: &mut VariationalState,
    j: usize,
    params: &ModelParams,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
) -> Result<()> {
    let (k, a) = ld.locate(j);
    let block = ld.block(k);
    let range = ld.block_range(k);
    let sy = &data.outcome_se;
    let theta_jj = block[(a, a)];
    let expected_w = state.expected_w();

    let precision = theta_jj / (sy[j] * sy[j]) + expected_w / params.sigma0_2;

    let mut sum_y_gamma_all = 0.0;
    let mut sum_y_alpha = 0.0;
    for (b, jj) in range.enumerate() {
        let th = block[(a, b)];
        sum_y_gamma_all += state.mu_gamma[jj] * th / sy[jj];
        if jj != j {
            sum_y_alpha += state.mu_alpha[jj] * th / sy[jj];
        }
    }

    let rhs = data.outcome_beta[j] / (sy[j] * sy[j])
        - params.beta0 / sy[j] * sum_y_gamma_all
        - sum_y_alpha / sy[j];

    let s2 = 1.0 / precision;
    let mu = rhs * s2;
    if !s2.is_finite() || !mu.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite alpha update at SNP index {j}"
        )));
    }
    state.s2_alpha[j] = s2;
    state.mu_alpha[j] = mu;
    Ok(())
}

/// Weight update: shape alpha_w + J/2, rate beta_w + sum E[alpha_j^2] / (2 sigma0_2).
fn update_weight(
    state: &mut VariationalState,
    params: &ModelParams,
    hyper: &HyperParams,
) {
    let j = state.mu_alpha.len() as f64;
    let e_alpha_sq: f64 = state
        .mu_alpha
        .iter()
        .zip(&state.s2_alpha)
        .map(|(m, s)| m * m + s)
        .sum();
    state.a_w_tilde = hyper.alpha_w + j / 2.0;
    state.b_w_tilde = hyper.beta_w + e_alpha_sq / (2.0 * params.sigma0_2);
}

/// Coordinate-ascent E-step: gamma sweep, alpha sweep, then the weight, in
/// ascending SNP index order, each update using the most recent values.
pub fn e_step(
    state: &VariationalState,
    params: &ModelParams,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    hyper: &HyperParams,
) -> Result<VariationalState> {
    check_problem(data, ld)?;
    params.validate()?;
    hyper.validate()?;
    let mut st = state.clone();
    for j in 0..data.len() {
        update_gamma_coord(&mut st, j, params, data, ld)?;
    }
    for j in 0..data.len() {
        update_alpha_coord(&mut st, j, params, data, ld)?;
    }
    update_weight(&mut st, params, hyper);
    Ok(st)
}

fn m_step_constrained(
    state: &VariationalState,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    constrain_null: bool,
    fix_sigma0_2: Option<f64>,
) -> Result<ModelParams> {
    let j = data.len();
    let jf = j as f64;
    let sy = &data.outcome_se;
    let sx = &data.exposure_se;

    // Outcome-side quadratics with A = D_Y^{-1} Theta D_Y^{-1}.
    let ty: Vec<f64> = (0..j).map(|i| state.mu_gamma[i] / sy[i]).collect();
    let qf_y = ld.quad_form(&ty);
    let tr_y: f64 = (0..j)
        .map(|i| ld.entry(i, i) * state.s2_gamma[i] / (sy[i] * sy[i]))
        .sum();
    let denom_beta = qf_y + tr_y;

    let beta0 = if constrain_null {
        0.0
    } else {
        let direct: f64 = (0..j)
            .map(|i| data.outcome_beta[i] * state.mu_gamma[i] / (sy[i] * sy[i]))
            .sum();
        let ta: Vec<f64> = (0..j).map(|i| state.mu_alpha[i] / sy[i]).collect();
        let tta = ld.matvec(&ta);
        let cross: f64 = ty.iter().zip(&tta).map(|(a, b)| a * b).sum();
        if denom_beta <= 0.0 || !denom_beta.is_finite() {
            return Err(Error::Numeric(
                "degenerate state: zero denominator in the beta0 update".into(),
            ));
        }
        (direct - cross) / denom_beta
    };

    let sigma2 = (state
        .mu_gamma
        .iter()
        .map(|m| m * m)
        .sum::<f64>()
        + state.s2_gamma.iter().sum::<f64>())
        / jf;

    let sigma0_2 = match fix_sigma0_2 {
        Some(v) => v,
        None => {
            let e_alpha_sq: f64 = state
                .mu_alpha
                .iter()
                .zip(&state.s2_alpha)
                .map(|(m, s)| m * m + s)
                .sum();
            state.a_w_tilde * e_alpha_sq / (jf * state.b_w_tilde)
        }
    };

    // Exposure-side quadratics with B = D_X^{-1} Theta D_X^{-1}.
    let tx: Vec<f64> = (0..j).map(|i| state.mu_gamma[i] / sx[i]).collect();
    let qf_x = ld.quad_form(&tx);
    let tr_x: f64 = (0..j)
        .map(|i| ld.entry(i, i) * state.s2_gamma[i] / (sx[i] * sx[i]))
        .sum();
    let denom_zeta = qf_x + tr_x;
    if denom_zeta <= 0.0 || !denom_zeta.is_finite() {
        return Err(Error::Numeric(
            "degenerate state: zero denominator in the zeta update".into(),
        ));
    }
    let num_zeta: f64 = (0..j)
        .map(|i| data.exposure_beta[i] * state.mu_gamma[i] / (sx[i] * sx[i]))
        .sum();
    let zeta = num_zeta / denom_zeta;

    let params = ModelParams {
        beta0,
        sigma2,
        sigma0_2,
        zeta,
    };
    params.validate().map_err(|e| {
        Error::Numeric(format!("M-step produced invalid parameters: {e}"))
    })?;
    Ok(params)
}

/// Closed-form M-step maximizing the ELBO over (beta0, sigma2, sigma0_2, zeta).
pub fn m_step(
    state: &VariationalState,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
) -> Result<ModelParams> {
    m_step_constrained(state, data, ld, false, None)
}

/// Collapse the parameter expansion: rescale the gamma posterior and sigma2
/// by zeta, divide beta0 by zeta, and reset zeta to 1. The ELBO is invariant
/// under this map.
pub fn reduction_step(
    state: &VariationalState,
    params: &ModelParams,
) -> Result<(VariationalState, ModelParams)> {
    if params.zeta == 0.0 || !params.zeta.is_finite() {
        return Err(Error::Domain(format!(
            "degenerate expansion parameter zeta = {}",
            params.zeta
        )));
    }
    let z = params.zeta;
    let new_state = VariationalState {
        mu_gamma: state.mu_gamma.iter().map(|m| z * m).collect(),
        s2_gamma: state.s2_gamma.iter().map(|s| z * z * s).collect(),
        mu_alpha: state.mu_alpha.clone(),
        s2_alpha: state.s2_alpha.clone(),
        a_w_tilde: state.a_w_tilde,
        b_w_tilde: state.b_w_tilde,
    };
    let new_params = ModelParams {
        beta0: params.beta0 / z,
        sigma2: z * z * params.sigma2,
        sigma0_2: params.sigma0_2,
        zeta: 1.0,
    };
    Ok((new_state, new_params))
}

/// Evidence lower bound: E_q[complete-data log-likelihood] plus the entropy
/// of q, all expectations in closed form.
pub fn elbo(
    state: &VariationalState,
    params: &ModelParams,
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    hyper: &HyperParams,
) -> Result<f64> {
    check_problem(data, ld)?;
    state.validate()?;
    params.validate()?;
    hyper.validate()?;

    let j = data.len();
    let jf = j as f64;
    let sy = &data.outcome_se;
    let sx = &data.exposure_se;
    let e_w = state.expected_w();
    let e_ln_w = digamma(state.a_w_tilde) - state.b_w_tilde.ln();

    // Outcome likelihood term.
    let u: Vec<f64> = (0..j).map(|i| data.outcome_beta[i] / sy[i]).collect();
    let my: Vec<f64> = (0..j)
        .map(|i| (params.beta0 * state.mu_gamma[i] + state.mu_alpha[i]) / sy[i])
        .collect();
    let var_y: f64 = (0..j)
        .map(|i| {
            ld.entry(i, i) * (params.beta0 * params.beta0 * state.s2_gamma[i] + state.s2_alpha[i])
                / (sy[i] * sy[i])
        })
        .sum();
    let dot_uy: f64 = u.iter().zip(&my).map(|(a, b)| a * b).sum();
    let t_outcome = -0.5 * jf * LN_2PI
        - sy.iter().map(|s| s.ln()).sum::<f64>()
        - 0.5 * ld.ln_det()
        - 0.5 * (ld.inv_quad_form(&u) - 2.0 * dot_uy + ld.quad_form(&my) + var_y);

    // Exposure likelihood term.
    let v: Vec<f64> = (0..j).map(|i| data.exposure_beta[i] / sx[i]).collect();
    let mx: Vec<f64> = (0..j)
        .map(|i| params.zeta * state.mu_gamma[i] / sx[i])
        .collect();
    let var_x: f64 = (0..j)
        .map(|i| {
            ld.entry(i, i) * params.zeta * params.zeta * state.s2_gamma[i] / (sx[i] * sx[i])
        })
        .sum();
    let dot_vx: f64 = v.iter().zip(&mx).map(|(a, b)| a * b).sum();
    let t_exposure = -0.5 * jf * LN_2PI
        - sx.iter().map(|s| s.ln()).sum::<f64>()
        - 0.5 * ld.ln_det()
        - 0.5 * (ld.inv_quad_form(&v) - 2.0 * dot_vx + ld.quad_form(&mx) + var_x);

    // Prior terms.
    let e_gamma_sq: f64 = state
        .mu_gamma
        .iter()
        .zip(&state.s2_gamma)
        .map(|(m, s)| m * m + s)
        .sum();
    let t_gamma_prior = -0.5 * jf * (LN_2PI + params.sigma2.ln()) - e_gamma_sq / (2.0 * params.sigma2);

    let e_alpha_sq: f64 = state
        .mu_alpha
        .iter()
        .zip(&state.s2_alpha)
        .map(|(m, s)| m * m + s)
        .sum();
    let t_alpha_prior = -0.5 * jf * (LN_2PI + params.sigma0_2.ln()) + 0.5 * jf * e_ln_w
        - e_w * e_alpha_sq / (2.0 * params.sigma0_2);

    let t_weight = hyper.alpha_w * hyper.beta_w.ln() - ln_gamma(hyper.alpha_w)
        + (hyper.alpha_w - 1.0) * e_ln_w
        - hyper.beta_w * e_w;

    // Entropies.
    let h_gamma: f64 = state
        .s2_gamma
        .iter()
        .map(|s| 0.5 * (LN_2PI + 1.0 + s.ln()))
        .sum();
    let h_alpha: f64 = state
        .s2_alpha
        .iter()
        .map(|s| 0.5 * (LN_2PI + 1.0 + s.ln()))
        .sum();
    let h_w = state.a_w_tilde - state.b_w_tilde.ln()
        + ln_gamma(state.a_w_tilde)
        + (1.0 - state.a_w_tilde) * digamma(state.a_w_tilde);

    let total = t_outcome + t_exposure + t_gamma_prior + t_alpha_prior + t_weight
        + h_gamma + h_alpha + h_w;
    if !total.is_finite() {
        return Err(Error::Numeric("ELBO is not finite".into()));
    }
    Ok(total)
}

/// Deterministic initialization: posterior means start at the exposure
/// effects, sigma2 at their variance, beta0 at the identity-LD weighted
/// regression slope.
fn init_state_params(
    data: &HarmonizedDataset,
    hyper: &HyperParams,
    constrain_null: bool,
    fix_sigma0_2: Option<f64>,
) -> (VariationalState, ModelParams) {
    let j = data.len();
    let jf = j as f64;
    let mean: f64 = data.exposure_beta.iter().sum::<f64>() / jf;
    let mut var: f64 = data
        .exposure_beta
        .iter()
        .map(|g| (g - mean) * (g - mean))
        .sum::<f64>()
        / jf;
    if !(var > 1e-12) {
        let msq = data.exposure_beta.iter().map(|g| g * g).sum::<f64>() / jf;
        var = msq.max(1e-8);
    }

    let beta0 = if constrain_null {
        0.0
    } else {
        let num: f64 = (0..j)
            .map(|i| data.exposure_beta[i] * data.outcome_beta[i] / (data.outcome_se[i] * data.outcome_se[i]))
            .sum();
        let den: f64 = (0..j)
            .map(|i| data.exposure_beta[i] * data.exposure_beta[i] / (data.outcome_se[i] * data.outcome_se[i]))
            .sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };

    let state = VariationalState {
        mu_gamma: data.exposure_beta.clone(),
        s2_gamma: vec![1.0; j],
        mu_alpha: vec![0.0; j],
        s2_alpha: vec![1.0; j],
        a_w_tilde: hyper.alpha_w + jf / 2.0,
        b_w_tilde: hyper.beta_w + jf / 2.0,
    };
    let params = ModelParams {
        beta0,
        sigma2: var,
        sigma0_2: fix_sigma0_2.unwrap_or(1e-2),
        zeta: 1.0,
    };
    (state, params)
}

/// Fit the model by iterating (E-step, M-step, reduction) until the relative
/// ELBO change falls below tolerance. With `constrain_null`, beta0 is held
/// at zero in every M-step. Non-convergence is reported on the result, not
/// as an error.
pub fn fit_model(
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    hyper: &HyperParams,
    opts: &FitOptions,
    constrain_null: bool,
) -> Result<ModelFit> {
    check_problem(data, ld)?;
    hyper.validate()?;
    opts.validate()?;
    if let Some(v) = opts.fix_sigma0_2 {
        if !(v > 0.0) {
            return Err(Error::Config(format!("fixed sigma0_2 must be positive, got {v}")));
        }
    }

    let (mut state, mut params) = init_state_params(data, hyper, constrain_null, opts.fix_sigma0_2);
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;

    for _ in 0..opts.max_iter {
        state = e_step(&state, &params, data, ld, hyper)?;
        params = m_step_constrained(&state, data, ld, constrain_null, opts.fix_sigma0_2)?;
        let (s, p) = reduction_step(&state, &params)?;
        state = s;
        params = p;
        let e = elbo(&state, &params, data, ld, hyper)?;
        trace.push(e);
        if let Some(prev) = prev {
            if (e - prev).abs() < opts.elbo_rel_tol * prev.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        prev = Some(e);
    }

    let elbo_final = *trace.last().expect("at least one iteration");
    Ok(ModelFit {
        params,
        state,
        elbo: elbo_final,
        iterations: trace.len(),
        elbo_trace: trace,
        converged,
    })
}

/// Upper tail of the chi-square with one degree of freedom.
pub fn chi2_1_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(1.0).expect("valid dof").sf(x)
}

/// Calibrated standard error |beta0| / sqrt(LRT); requires a positive LRT.
pub fn lrt_standard_error(beta0_hat: f64, lrt: f64) -> Result<f64> {
    if !(lrt > 0.0) || !lrt.is_finite() {
        return Err(Error::Domain(format!(
            "LRT statistic must be positive for the calibrated standard error, got {lrt}"
        )));
    }
    Ok(beta0_hat.abs() / lrt.sqrt())
}

/// Run the alternative and null fits and assemble the LRT-calibrated result.
pub fn fit(
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    hyper: &HyperParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let alt = fit_model(data, ld, hyper, opts, false)?;
    let null = fit_model(data, ld, hyper, opts, true)?;

    let lrt = (2.0 * (alt.elbo - null.elbo)).max(0.0);
    let beta0_hat = alt.params.beta0;
    let (se, infinite_se) = if lrt > 0.0 {
        (lrt_standard_error(beta0_hat, lrt)?, false)
    } else {
        (f64::INFINITY, beta0_hat != 0.0)
    };
    let pvalue = chi2_1_survival(lrt);

    Ok(FitResult {
        beta0_hat,
        se,
        lrt,
        pvalue,
        params: alt.params,
        state: alt.state,
        elbo_trace: alt.elbo_trace,
        converged: alt.converged && null.converged,
        null_elbo: null.elbo,
        iterations: alt.iterations,
        n_snps: data.len(),
        infinite_se,
    })
}

/// Shared header for one-row result TSVs (fit and baselines).
pub const RESULT_TSV_HEADER: &str =
    "method\tbeta_hat\tse\tpvalue\tlrt\tintercept\tintercept_se\tn_snps\tconverged";

fn json_f64(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

impl FitResult {
    /// JSON document with the headline estimate and diagnostics. The full
    /// variational state is intentionally not serialized.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": "rbmr",
            "estimate": json_f64(self.beta0_hat),
            "se": json_f64(self.se),
            "lrt": json_f64(self.lrt),
            "pvalue": json_f64(self.pvalue),
            "iterations": self.iterations,
            "converged": self.converged,
            "infinite_se": self.infinite_se,
            "n_snps": self.n_snps,
            "null_elbo": json_f64(self.null_elbo),
            "elbo": self.elbo_trace.last().map(|e| json_f64(*e)).unwrap_or(serde_json::Value::Null),
            "elbo_trace": self.elbo_trace.iter().map(|e| json_f64(*e)).collect::<Vec<_>>(),
            "params": {
                "beta0": json_f64(self.params.beta0),
                "sigma2": json_f64(self.params.sigma2),
                "sigma0_2": json_f64(self.params.sigma0_2),
                "zeta": json_f64(self.params.zeta),
            },
        })
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "rbmr\t{}\t{}\t{}\t{}\tNA\tNA\t{}\t{}",
            self.beta0_hat, self.se, self.pvalue, self.lrt, self.n_snps, self.converged
        )
    }
}
