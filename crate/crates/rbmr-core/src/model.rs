//! The RBMR probabilistic model.
//!
//! Direct SNP-outcome effects get a multivariate generalized t prior,
//! represented as a Gaussian scale mixture: alpha | w ~ N(0, sigma0^2 I / w)
//! with w ~ Gamma(alpha_w, beta_w). Both GWAS likelihoods carry the
//! block-diagonal LD matrix. Everything is computed in log space; the Gamma
//! function enters only through its logarithm.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ingest::HarmonizedDataset;
use crate::ld::BlockLdMatrix;

const LN_2PI: f64 = 1.8378770664093453;

/// Model parameters; `zeta` is the expansion parameter, 1 in the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta0: f64,
    pub sigma2: f64,
    pub sigma0_2: f64,
    pub zeta: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Domain(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.sigma0_2 > 0.0) || !self.sigma0_2.is_finite() {
            return Err(Error::Domain(format!(
                "sigma0_2 must be positive, got {}",
                self.sigma0_2
            )));
        }
        if !self.beta0.is_finite() || !self.zeta.is_finite() {
            return Err(Error::Domain("beta0 and zeta must be finite".into()));
        }
        Ok(())
    }
}

/// Gamma shape/rate of the scale-weight prior. `alpha_w = beta_w = nu/2`
/// recovers the multivariate t with nu degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha_w: f64,
    pub beta_w: f64,
}

impl Default for HyperParams {
    /// t with 4 degrees of freedom: heavy tails, finite variance.
    fn default() -> Self {
        HyperParams {
            alpha_w: 2.0,
            beta_w: 2.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_w > 0.0 && self.beta_w > 0.0)
            || !self.alpha_w.is_finite()
            || !self.beta_w.is_finite()
        {
            return Err(Error::Domain(format!(
                "Gamma hyperparameters must be positive, got shape {} rate {}",
                self.alpha_w, self.beta_w
            )));
        }
        Ok(())
    }
}

/// A configuration of the latent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub w: f64,
}

/// Log density of the multivariate generalized t with scale sigma0_2 * I.
///
/// Closed form of the Gaussian scale mixture
/// `int N(alpha | 0, sigma0_2 I / w) Gamma(w | alpha_w, beta_w) dw`.
pub fn generalized_t_logpdf(alpha_vec: &[f64], sigma0_2: f64, hyper: &HyperParams) -> Result<f64> {
    hyper.validate()?;
    if !(sigma0_2 > 0.0) || !sigma0_2.is_finite() {
        return Err(Error::Domain(format!(
            "sigma0_2 must be positive, got {sigma0_2}"
        )));
    }
    if alpha_vec.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("alpha vector must be finite".into()));
    }
    let j = alpha_vec.len() as f64;
    let quad: f64 = alpha_vec.iter().map(|a| a * a).sum::<f64>() / sigma0_2;
    let shape = hyper.alpha_w + j / 2.0;
    Ok(ln_gamma(shape) - ln_gamma(hyper.alpha_w)
        - 0.5 * j * sigma0_2.ln()
        - 0.5 * j * (2.0 * std::f64::consts::PI * hyper.beta_w).ln()
        - shape * (quad / (2.0 * hyper.beta_w)).ln_1p())
}

/// Log density of the Gamma weight prior at w > 0.
pub fn gamma_logpdf(w: f64, hyper: &HyperParams) -> Result<f64> {
    hyper.validate()?;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::Domain(format!("weight w must be positive, got {w}")));
    }
    Ok(hyper.alpha_w * hyper.beta_w.ln() - ln_gamma(hyper.alpha_w)
        + (hyper.alpha_w - 1.0) * w.ln()
        - hyper.beta_w * w)
}

fn check_dims(data: &HarmonizedDataset, ld: &BlockLdMatrix, latent: &LatentState) -> Result<()> {
    let j = data.len();
    if ld.dim() != j {
        return Err(Error::Config(format!(
            "LD matrix dimension {} does not match dataset size {j}",
            ld.dim()
        )));
    }
    if latent.gamma.len() != j || latent.alpha.len() != j {
        return Err(Error::Config("latent vectors must have length J".into()));
    }
    if ld.block_sizes() != data.block_sizes() {
        return Err(Error::Config(
            "LD block sizes do not match dataset block assignment".into(),
        ));
    }
    Ok(())
}

/// LD-aware Gaussian log density shared by both GWAS likelihood terms.
///
/// Computes `log N(hat | D Theta D^{-1} m, D Theta D)` via the standardized
/// residual `u - Theta (m / d)` with `u = hat / d`, so only block products
/// and cached Cholesky solves are needed.
fn ld_gaussian_loglik(hat: &[f64], d: &[f64], mean_core: &[f64], ld: &BlockLdMatrix) -> f64 {
    let j = hat.len();
    let u: Vec<f64> = hat.iter().zip(d).map(|(h, s)| h / s).collect();
    let m: Vec<f64> = mean_core.iter().zip(d).map(|(v, s)| v / s).collect();
    let tm = ld.matvec(&m);
    let r: Vec<f64> = u.iter().zip(&tm).map(|(a, b)| a - b).collect();
    let quad = ld.inv_quad_form(&r);
    let ln_det = 2.0 * d.iter().map(|s| s.ln()).sum::<f64>() + ld.ln_det();
    -0.5 * (j as f64) * LN_2PI - 0.5 * ln_det - 0.5 * quad
}

/// Complete-data log-likelihood of the expanded model: the sum of the
/// outcome and exposure LD-aware Gaussian terms, the gamma and alpha priors,
/// and the Gamma weight term.
pub fn complete_data_loglik(
    data: &HarmonizedDataset,
    ld: &BlockLdMatrix,
    latent: &LatentState,
    params: &ModelParams,
    hyper: &HyperParams,
) -> Result<f64> {
    params.validate()?;
    hyper.validate()?;
    check_dims(data, ld, latent)?;
    if !(latent.w > 0.0) || !latent.w.is_finite() {
        return Err(Error::Domain(format!("weight w must be positive, got {}", latent.w)));
    }
    let j = data.len() as f64;

    let outcome_mean: Vec<f64> = latent
        .gamma
        .iter()
        .zip(&latent.alpha)
        .map(|(g, a)| params.beta0 * g + a)
        .collect();
    let l_outcome = ld_gaussian_loglik(&data.outcome_beta, &data.outcome_se, &outcome_mean, ld);

    let exposure_mean: Vec<f64> = latent.gamma.iter().map(|g| params.zeta * g).collect();
    let l_exposure = ld_gaussian_loglik(&data.exposure_beta, &data.exposure_se, &exposure_mean, ld);

    let gg: f64 = latent.gamma.iter().map(|g| g * g).sum();
    let l_gamma_prior = -0.5 * j * (LN_2PI + params.sigma2.ln()) - gg / (2.0 * params.sigma2);

    let aa: f64 = latent.alpha.iter().map(|a| a * a).sum();
    let l_alpha_prior = -0.5 * j * (LN_2PI + params.sigma0_2.ln()) + 0.5 * j * latent.w.ln()
        - latent.w * aa / (2.0 * params.sigma0_2);

    let l_weight = gamma_logpdf(latent.w, hyper)?;

    let total = l_outcome + l_exposure + l_gamma_prior + l_alpha_prior + l_weight;
    if !total.is_finite() {
        return Err(Error::Numeric("complete-data log-likelihood is not finite".into()));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ld::assemble_block_diagonal;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    /// Composite 10-point Gauss-Legendre quadrature with fixed panel count.
    fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        // Nodes/weights for [-1, 1].
        const X: [f64; 5] = [
            0.1488743389816312,
            0.4333953941292472,
            0.6794095682990244,
            0.8650633666889845,
            0.9739065285171717,
        ];
        const W: [f64; 5] = [
            0.2955242247147529,
            0.2692667193099963,
            0.2190863625159820,
            0.1494513491505806,
            0.0666713443086881,
        ];
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let half = 0.5 * h;
            for k in 0..5 {
                total += W[k] * half * (f(mid - half * X[k]) + f(mid + half * X[k]));
            }
        }
        total
    }

    /// Numerically integrate the scale mixture
    /// `int N(alpha | 0, sigma0_2 I / w) Gamma(w) dw` in log space, using the
    /// substitution w = exp(t) so the integrand is smooth on the whole line.
    fn mixture_log_quadrature(alpha_vec: &[f64], sigma0_2: f64, hyper: &HyperParams) -> f64 {
        let j = alpha_vec.len() as f64;
        let quad: f64 = alpha_vec.iter().map(|a| a * a).sum::<f64>() / sigma0_2;
        let shape = hyper.alpha_w + j / 2.0;
        let rate = hyper.beta_w + quad / 2.0;
        let constant = -0.5 * j * (LN_2PI + sigma0_2.ln()) + hyper.alpha_w * hyper.beta_w.ln()
            - ln_gamma(hyper.alpha_w);
        // After w = exp(t): integrand exp(shape * t - rate * exp(t)), peaked
        // at t* = ln(shape / rate), decaying with slope `shape` to the left.
        let log_g = |t: f64| shape * t - rate * t.exp();
        let t_star = (shape / rate).ln();
        let log_peak = log_g(t_star);
        let t_lo = t_star - 90.0 / shape - 5.0;
        let t_hi = ((shape + 90.0 + 60.0 * shape.sqrt()) / rate).ln();
        let panels = (((t_hi - t_lo) / 0.05).ceil() as usize).max(200);
        let g = move |t: f64| (log_g(t) - log_peak).exp();
        let integral = gauss_legendre(&g, t_lo, t_hi, panels);
        constant + log_peak + integral.ln()
    }

    #[test]
    fn cauchy_at_zero() {
        let hyper = HyperParams { alpha_w: 0.5, beta_w: 0.5 };
        let lp = generalized_t_logpdf(&[0.0], 1.0, &hyper).unwrap();
        assert!((lp - (1.0 / std::f64::consts::PI).ln()).abs() < 1e-12, "{lp}");
        assert!((lp + 1.14473).abs() < 1e-5);
    }

    #[test]
    fn symmetric_in_sign() {
        let hyper = HyperParams::default();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let v: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let a = generalized_t_logpdf(&v, 0.3, &hyper).unwrap();
            let b = generalized_t_logpdf(&neg, 0.3, &hyper).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn matches_scale_mixture_quadrature() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for j in 1..=3usize {
            for _ in 0..10 {
                let hyper = HyperParams {
                    alpha_w: rng.random_range(0.4..4.0),
                    beta_w: rng.random_range(0.4..4.0),
                };
                let sigma0_2 = rng.random_range(0.05..2.0);
                let v: Vec<f64> = (0..j)
                    .map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let closed = generalized_t_logpdf(&v, sigma0_2, &hyper).unwrap();
                let quad = mixture_log_quadrature(&v, sigma0_2, &hyper);
                assert!(
                    (closed - quad).abs() < 1e-8,
                    "J={j} closed={closed} quadrature={quad}"
                );
            }
        }
    }

    #[test]
    fn matches_textbook_multivariate_t() {
        // alpha_w = beta_w = nu/2 reduces to a multivariate t with nu dof.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &nu in &[1.0, 3.0, 4.0, 10.0] {
            let hyper = HyperParams { alpha_w: nu / 2.0, beta_w: nu / 2.0 };
            for j in 1..=3usize {
                let sigma0_2 = rng.random_range(0.1..2.0);
                let v: Vec<f64> = (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let got = generalized_t_logpdf(&v, sigma0_2, &hyper).unwrap();
                let q: f64 = v.iter().map(|x| x * x).sum::<f64>() / sigma0_2;
                let jf = j as f64;
                let textbook = ln_gamma((nu + jf) / 2.0)
                    - ln_gamma(nu / 2.0)
                    - 0.5 * jf * (nu * std::f64::consts::PI).ln()
                    - 0.5 * jf * sigma0_2.ln()
                    - 0.5 * (nu + jf) * (1.0 + q / nu).ln();
                assert!((got - textbook).abs() < 1e-10, "nu={nu} J={j}");
            }
        }
    }

    #[test]
    fn gamma_logpdf_exponential_case() {
        let hyper = HyperParams { alpha_w: 1.0, beta_w: 1.0 };
        let lp = gamma_logpdf(1.0, &hyper).unwrap();
        assert!((lp + 1.0).abs() < 1e-14);
        assert!(gamma_logpdf(0.0, &hyper).is_err());
        assert!(gamma_logpdf(-1.0, &hyper).is_err());
    }

    #[test]
    fn gamma_logpdf_mode() {
        let hyper = HyperParams { alpha_w: 3.0, beta_w: 1.5 };
        let mode = (hyper.alpha_w - 1.0) / hyper.beta_w;
        let at_mode = gamma_logpdf(mode, &hyper).unwrap();
        for dw in [-0.05, 0.05] {
            assert!(gamma_logpdf(mode + dw, &hyper).unwrap() < at_mode);
        }
    }

    #[test]
    fn gamma_logpdf_integrates_to_one() {
        let hyper = HyperParams { alpha_w: 2.0, beta_w: 2.0 };
        let f = |w: f64| {
            if w <= 0.0 {
                0.0
            } else {
                gamma_logpdf(w, &hyper).unwrap().exp()
            }
        };
        let total = gauss_legendre(&f, 1e-12, 50.0, 2000);
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    fn toy_dataset(j: usize, seed: u64) -> HarmonizedDataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        HarmonizedDataset {
            snp_ids: (0..j).map(|i| format!("rs{i}")).collect(),
            exposure_beta: (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            exposure_se: (0..j).map(|_| rng.random_range(0.05..0.3)).collect(),
            outcome_beta: (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            outcome_se: (0..j).map(|_| rng.random_range(0.05..0.3)).collect(),
            block_index: vec![0; j],
        }
    }

    #[test]
    fn diagonal_case_reduces_to_scalar_terms() {
        // Theta = I, zeta = 1, all latents zero, beta0 = 0: the total is the
        // sum of five independently computable scalar log-densities.
        let j = 4;
        let data = toy_dataset(j, 13);
        let ld = BlockLdMatrix::identity(&[j]).unwrap();
        let latent = LatentState { gamma: vec![0.0; j], alpha: vec![0.0; j], w: 1.3 };
        let params = ModelParams { beta0: 0.0, sigma2: 0.5, sigma0_2: 0.2, zeta: 1.0 };
        let hyper = HyperParams::default();
        let got = complete_data_loglik(&data, &ld, &latent, &params, &hyper).unwrap();

        let norm_lp = |x: f64, mu: f64, var: f64| -0.5 * (LN_2PI + var.ln()) - (x - mu).powi(2) / (2.0 * var);
        let mut want = 0.0;
        for i in 0..j {
            want += norm_lp(data.outcome_beta[i], 0.0, data.outcome_se[i].powi(2));
            want += norm_lp(data.exposure_beta[i], 0.0, data.exposure_se[i].powi(2));
            want += norm_lp(0.0, 0.0, params.sigma2);
            want += norm_lp(0.0, 0.0, params.sigma0_2 / latent.w);
        }
        want += gamma_logpdf(latent.w, &hyper).unwrap();
        assert!((got - want).abs() < 1e-10, "got {got} want {want}");
    }

    /// Dense multivariate normal log density (oracle path, no block tricks).
    fn dense_mvn_logpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
        let j = x.len();
        let chol = cov.clone().cholesky().unwrap();
        let diff = DVector::from_iterator(j, x.iter().zip(mean).map(|(a, b)| a - b));
        let solved = chol.solve(&diff);
        let quad = diff.dot(&solved);
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * j as f64 * LN_2PI - 0.5 * ln_det - 0.5 * quad
    }

    #[test]
    fn matches_dense_mvn_oracle() {
        let j = 2;
        let data = toy_dataset(j, 14);
        let mut block = DMatrix::<f64>::identity(2, 2);
        block[(0, 1)] = 0.4;
        block[(1, 0)] = 0.4;
        let ld = assemble_block_diagonal(vec![block.clone()], 0.0).unwrap();
        let latent = LatentState { gamma: vec![0.3, -0.2], alpha: vec![0.05, 0.1], w: 0.8 };
        let params = ModelParams { beta0: 0.7, sigma2: 0.4, sigma0_2: 0.1, zeta: 1.2 };
        let hyper = HyperParams::default();
        let got = complete_data_loglik(&data, &ld, &latent, &params, &hyper).unwrap();

        let dy = DMatrix::from_diagonal(&DVector::from_column_slice(&data.outcome_se));
        let dx = DMatrix::from_diagonal(&DVector::from_column_slice(&data.exposure_se));
        let dy_inv = DMatrix::from_diagonal(&DVector::from_iterator(
            j,
            data.outcome_se.iter().map(|s| 1.0 / s),
        ));
        let dx_inv = DMatrix::from_diagonal(&DVector::from_iterator(
            j,
            data.exposure_se.iter().map(|s| 1.0 / s),
        ));
        let mean_y_core = DVector::from_column_slice(&[
            params.beta0 * latent.gamma[0] + latent.alpha[0],
            params.beta0 * latent.gamma[1] + latent.alpha[1],
        ]);
        let mean_y = &dy * &block * &dy_inv * mean_y_core;
        let cov_y = &dy * &block * &dy;
        let mean_x_core = DVector::from_column_slice(&latent.gamma) * params.zeta;
        let mean_x = &dx * &block * &dx_inv * mean_x_core;
        let cov_x = &dx * &block * &dx;

        let mut want = dense_mvn_logpdf(&data.outcome_beta, mean_y.as_slice(), &cov_y);
        want += dense_mvn_logpdf(&data.exposure_beta, mean_x.as_slice(), &cov_x);
        want += dense_mvn_logpdf(&latent.gamma, &[0.0, 0.0], &(DMatrix::identity(2, 2) * params.sigma2));
        want += dense_mvn_logpdf(
            &latent.alpha,
            &[0.0, 0.0],
            &(DMatrix::identity(2, 2) * (params.sigma0_2 / latent.w)),
        );
        want += gamma_logpdf(latent.w, &hyper).unwrap();
        assert!((got - want).abs() < 1e-10, "got {got} want {want}");
    }

    #[test]
    fn expansion_identity_leaves_mean_terms_unchanged() {
        // (beta0, gamma, zeta) -> (beta0/c, c gamma, zeta/c) with
        // sigma2 -> c^2 sigma2 changes the total only through the gamma-prior
        // normalization, by exactly -J ln|c|.
        let j = 3;
        let data = toy_dataset(j, 15);
        let ld = BlockLdMatrix::identity(&[j]).unwrap();
        let hyper = HyperParams::default();
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        for _ in 0..10 {
            let latent = LatentState {
                gamma: (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
                alpha: (0..j).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect(),
                w: rng.random_range(0.3..3.0),
            };
            let params = ModelParams {
                beta0: rng.random_range(-1.0..1.0),
                sigma2: rng.random_range(0.1..1.0),
                sigma0_2: rng.random_range(0.05..0.5),
                zeta: rng.random_range(0.5..2.0),
            };
            let c: f64 = rng.random_range(0.5..2.0);
            let mapped_latent = LatentState {
                gamma: latent.gamma.iter().map(|g| c * g).collect(),
                alpha: latent.alpha.clone(),
                w: latent.w,
            };
            let mapped_params = ModelParams {
                beta0: params.beta0 / c,
                sigma2: c * c * params.sigma2,
                sigma0_2: params.sigma0_2,
                zeta: params.zeta / c,
            };
            let before = complete_data_loglik(&data, &ld, &latent, &params, &hyper).unwrap();
            let after =
                complete_data_loglik(&data, &ld, &mapped_latent, &mapped_params, &hyper).unwrap();
            assert!(
                (after - (before - j as f64 * c.ln())).abs() < 1e-10,
                "before {before} after {after} c {c}"
            );
        }
    }

    #[test]
    fn loglik_decreases_in_alpha_norm() {
        let j = 3;
        let data = toy_dataset(j, 17);
        let ld = BlockLdMatrix::identity(&[j]).unwrap();
        let hyper = HyperParams::default();
        let params = ModelParams { beta0: 0.0, sigma2: 1.0, sigma0_2: 0.3, zeta: 0.0 };
        // With zero-mean configuration everywhere else, scaling alpha up can
        // only lower the Gaussian terms.
        let zero = HarmonizedDataset {
            outcome_beta: vec![0.0; j],
            exposure_beta: vec![0.0; j],
            ..data
        };
        let mut prev = f64::INFINITY;
        for scale in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let latent = LatentState {
                gamma: vec![0.0; j],
                alpha: vec![scale * 0.2; j],
                w: 1.0,
            };
            let ll = complete_data_loglik(&zero, &ld, &latent, &params, &hyper).unwrap();
            assert!(ll < prev || scale == 0.0);
            prev = ll;
        }
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(generalized_t_logpdf(&[0.0], -1.0, &HyperParams::default()).is_err());
        assert!(generalized_t_logpdf(&[f64::NAN], 1.0, &HyperParams::default()).is_err());
        let hyper = HyperParams { alpha_w: 0.0, beta_w: 1.0 };
        assert!(generalized_t_logpdf(&[0.0], 1.0, &hyper).is_err());
    }
}
