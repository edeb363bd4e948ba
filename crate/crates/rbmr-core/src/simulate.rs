//! Synthetic data generation and the Monte-Carlo benchmark harness.
//!
//! Individual-level two-sample data are generated structurally: dosages come
//! from thresholded AR(1) latent Gaussians arranged in independent blocks,
//! confounders load on both traits with correlated coefficients, and a small
//! fraction of instruments receives inflated (idiosyncratic) direct effects.
//! The exposure and outcome noise variances are fixed at 0.8 and 0.4 and the
//! gamma / alpha signal scales are solved from the heritability targets; the
//! achieved values are reported alongside the truth.
//!
//! Each dataset is reduced to per-SNP simple-regression summary statistics,
//! which is what every estimator consumes.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::{ivw, mr_egger};
use crate::error::{Error, Result};
use crate::ingest::{HarmonizedDataset, SnpMeta};
use crate::ld::{assemble_block_diagonal, estimate_block_ld, ld_prune, GenotypeBlock, PruneCandidate};
use crate::model::HyperParams;
use crate::vbem::{fit, FitOptions};

/// Exposure heritability used to scale gamma when the outcome-side target is
/// unavailable (null simulations with beta0 = 0).
const EXPOSURE_H2: f64 = 0.1;

/// Fixed structural noise variances for the exposure and outcome equations.
const NOISE_VAR_X: f64 = 0.8;
const NOISE_VAR_Y: f64 = 0.4;

const PHI_SD: f64 = 0.01;
const CONFOUNDER_CORR: f64 = 0.85;

/// Simulation configuration. Defaults reproduce the full-scale benchmark
/// design (n = 20000, 10 blocks of 50 SNPs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_x: usize,
    pub n_y: usize,
    pub n_r: usize,
    pub n_blocks: usize,
    pub block_size: usize,
    pub beta0: f64,
    pub h2_gamma: f64,
    pub h2_alpha: f64,
    pub sigma0_2: f64,
    pub idio_fraction: f64,
    pub idio_sd_multiplier: f64,
    pub ld_decay: f64,
    pub confounder_count: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_x: 20_000,
            n_y: 20_000,
            n_r: 5_000,
            n_blocks: 10,
            block_size: 50,
            beta0: 1.0,
            h2_gamma: 0.1,
            h2_alpha: 0.05,
            sigma0_2: 0.008,
            idio_fraction: 0.05,
            idio_sd_multiplier: 40.0,
            ld_decay: 0.8,
            confounder_count: 2,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// CI-runnable profile: n = 5000, J = 100 (5 blocks of 20).
    pub fn desk_scale() -> Self {
        SimConfig {
            n_x: 5_000,
            n_y: 5_000,
            n_r: 1_250,
            n_blocks: 5,
            block_size: 20,
            ..Default::default()
        }
    }

    pub fn n_snps(&self) -> usize {
        self.n_blocks * self.block_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x < 3 || self.n_y < 3 || self.n_r < 2 {
            return Err(Error::Config("sample sizes too small to simulate".into()));
        }
        if self.n_blocks == 0 || self.block_size == 0 {
            return Err(Error::Config("block layout must be non-empty".into()));
        }
        if !(0.0..1.0).contains(&self.h2_gamma)
            || !(0.0..1.0).contains(&self.h2_alpha)
            || self.h2_gamma + self.h2_alpha >= 1.0
        {
            return Err(Error::Config(format!(
                "heritability targets must satisfy 0 <= h2 and h2_gamma + h2_alpha < 1, got {} + {}",
                self.h2_gamma, self.h2_alpha
            )));
        }
        if self.beta0 == 0.0 && self.h2_gamma > 0.0 {
            return Err(Error::Config(
                "h2_gamma > 0 is unreachable when beta0 = 0; set h2_gamma = 0 for null simulations"
                    .into(),
            ));
        }
        if !(self.sigma0_2 > 0.0) {
            return Err(Error::Config("sigma0_2 must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.idio_fraction) {
            return Err(Error::Config("idio_fraction must lie in [0, 1]".into()));
        }
        if !(self.idio_sd_multiplier > 0.0) {
            return Err(Error::Config("idio_sd_multiplier must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ld_decay) {
            return Err(Error::Config("ld_decay must lie in [0, 1)".into()));
        }
        if self.confounder_count == 0 {
            return Err(Error::Config("confounder_count must be positive".into()));
        }
        Ok(())
    }
}

/// True effect configuration behind one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub beta0: f64,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub idiosyncratic: Vec<usize>,
}

/// Realized variance decomposition after calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievedScales {
    pub var_x: f64,
    pub var_y: f64,
    pub sigma_eps_x2: f64,
    pub sigma_eps_y2: f64,
    pub h2_gamma_realized: f64,
    pub h2_alpha_realized: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub dataset: HarmonizedDataset,
    pub reference_blocks: Vec<GenotypeBlock>,
    pub truth: SimTruth,
    pub meta: Vec<SnpMeta>,
    pub exposure_pvalue: Vec<f64>,
    pub outcome_pvalue: Vec<f64>,
    pub achieved: AchievedScales,
}

/// Latent AR(1) Gaussian block: n samples of an m-dimensional process with
/// correlation rho^|i-j|.
fn latent_ar1_block(n: usize, m: usize, rho: f64, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let innov_sd = (1.0 - rho * rho).sqrt();
    let mut z = DMatrix::<f64>::zeros(n, m);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        z[(i, 0)] = prev;
        for j in 1..m {
            let e: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov_sd * e;
            z[(i, j)] = prev;
        }
    }
    z
}

/// Dosages for all blocks: two latent haplotype draws per block, each
/// thresholded at the normal quantile of the SNP's minor-allele frequency.
fn genotypes_with_mafs(
    n: usize,
    n_blocks: usize,
    block_size: usize,
    ld_decay: f64,
    mafs: &[f64],
    rng: &mut ChaCha12Rng,
) -> DMatrix<f64> {
    let j = n_blocks * block_size;
    assert_eq!(mafs.len(), j);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let thresholds: Vec<f64> = mafs.iter().map(|f| normal.inverse_cdf(*f)).collect();
    let mut g = DMatrix::<f64>::zeros(n, j);
    for b in 0..n_blocks {
        let h1 = latent_ar1_block(n, block_size, ld_decay, rng);
        let h2 = latent_ar1_block(n, block_size, ld_decay, rng);
        for c in 0..block_size {
            let col = b * block_size + c;
            let t = thresholds[col];
            for i in 0..n {
                let a1 = if h1[(i, c)] < t { 1.0 } else { 0.0 };
                let a2 = if h2[(i, c)] < t { 1.0 } else { 0.0 };
                g[(i, col)] = a1 + a2;
            }
        }
    }
    g
}

fn draw_mafs(j: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    (0..j).map(|_| rng.random_range(0.05..0.5)).collect()
}

/// Generate a dosage matrix with block-AR(1) LD and freshly drawn MAFs.
pub fn generate_genotypes(
    n: usize,
    n_blocks: usize,
    block_size: usize,
    ld_decay: f64,
    seed: u64,
) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mafs = draw_mafs(n_blocks * block_size, &mut rng);
    genotypes_with_mafs(n, n_blocks, block_size, ld_decay, &mafs, &mut rng)
}

fn sample_var(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n
}

fn matvec_cols(g: &DMatrix<f64>, coef: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.nrows()];
    for (c, &w) in coef.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = g.column(c);
        for i in 0..g.nrows() {
            out[i] += w * col[i];
        }
    }
    out
}

/// Confounder construction: U = G phi + xi with phi entries N(0, PHI_SD^2)
/// and standard-normal xi columns. Returns the per-sample confounder effect
/// for the given loading vector.
fn confounder_effect(
    g: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    eta: &[f64],
) -> Vec<f64> {
    let n = g.nrows();
    let n0 = eta.len();
    // U * eta = G * (phi * eta) + xi * eta
    let phi_eta: Vec<f64> = (0..phi.nrows())
        .map(|r| (0..n0).map(|k| phi[(r, k)] * eta[k]).sum())
        .collect();
    let mut out = matvec_cols(g, &phi_eta);
    for i in 0..n {
        let mut v = 0.0;
        for k in 0..n0 {
            v += xi[(i, k)] * eta[k];
        }
        out[i] += v;
    }
    out
}

/// Simulate one two-sample dataset plus a reference panel, reduce it to
/// summary statistics, and return everything needed by the pipeline.
pub fn simulate_dataset(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let j = config.n_snps();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    // Shared SNP panel: MAFs and (chrom, pos, alleles) metadata.
    let mafs = draw_mafs(j, &mut rng);
    let allele_cycle = [('A', 'G'), ('C', 'T'), ('G', 'A'), ('T', 'C')];
    let meta: Vec<SnpMeta> = (0..j)
        .map(|i| {
            let block = i / config.block_size;
            let within = i % config.block_size;
            let (ea, oa) = allele_cycle[i % allele_cycle.len()];
            SnpMeta {
                id: format!("rs{}", i + 1),
                chrom: format!("{}", block + 1),
                pos: 1000 * (within as u64 + 1),
                effect_allele: ea,
                other_allele: oa,
            }
        })
        .collect();

    // Genotypes for the three independent cohorts.
    let g_x = genotypes_with_mafs(config.n_x, config.n_blocks, config.block_size, config.ld_decay, &mafs, &mut rng);
    let g_y = genotypes_with_mafs(config.n_y, config.n_blocks, config.block_size, config.ld_decay, &mafs, &mut rng);
    let g_r = genotypes_with_mafs(config.n_r, config.n_blocks, config.block_size, config.ld_decay, &mafs, &mut rng);

    // Confounders: loadings are bivariate normal pairs with correlation 0.85.
    let n0 = config.confounder_count;
    let mut eta_x = vec![0.0; n0];
    let mut eta_y = vec![0.0; n0];
    let corr_rest = (1.0 - CONFOUNDER_CORR * CONFOUNDER_CORR).sqrt();
    for k in 0..n0 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        eta_x[k] = z1;
        eta_y[k] = CONFOUNDER_CORR * z1 + corr_rest * z2;
    }
    let phi_x = DMatrix::from_fn(j, n0, |_, _| PHI_SD * rng.sample::<f64, _>(StandardNormal));
    let phi_y = DMatrix::from_fn(j, n0, |_, _| PHI_SD * rng.sample::<f64, _>(StandardNormal));
    let xi_x = DMatrix::from_fn(config.n_x, n0, |_, _| rng.sample::<f64, _>(StandardNormal));
    let xi_y = DMatrix::from_fn(config.n_y, n0, |_, _| rng.sample::<f64, _>(StandardNormal));

    let u_x = confounder_effect(&g_x, &phi_x, &xi_x, &eta_x); // exposure cohort, exposure loading
    let u_yx = confounder_effect(&g_y, &phi_y, &xi_y, &eta_x); // outcome cohort, exposure loading
    let u_yy = confounder_effect(&g_y, &phi_y, &xi_y, &eta_y); // outcome cohort, outcome loading

    // Raw effect vectors before scale calibration.
    let gamma_raw: Vec<f64> = (0..j).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let sigma0 = config.sigma0_2.sqrt();
    let mut alpha_raw: Vec<f64> = (0..j)
        .map(|_| sigma0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let idio_count = (config.idio_fraction * j as f64).round() as usize;
    let mut indices: Vec<usize> = (0..j).collect();
    indices.shuffle(&mut rng);
    let mut idiosyncratic: Vec<usize> = indices.into_iter().take(idio_count).collect();
    idiosyncratic.sort_unstable();
    for &i in &idiosyncratic {
        alpha_raw[i] = config.idio_sd_multiplier * sigma0 * rng.sample::<f64, _>(StandardNormal);
    }

    let gx_raw = matvec_cols(&g_x, &gamma_raw);
    let gy_gamma_raw = matvec_cols(&g_y, &gamma_raw);
    let gy_alpha_raw = matvec_cols(&g_y, &alpha_raw);

    let var_gx = sample_var(&gx_raw);
    let var_gy_gamma = sample_var(&gy_gamma_raw);
    let var_gy_alpha = sample_var(&gy_alpha_raw);
    let var_ux = sample_var(&u_x);
    let var_uyx = sample_var(&u_yx);
    let var_uyy = sample_var(&u_yy);
    let cov_uxy = sample_cov(&u_yx, &u_yy);
    if !(var_gx > 0.0) || !(var_gy_gamma > 0.0) {
        return Err(Error::Numeric("degenerate genetic variance in simulation".into()));
    }

    // Scale calibration. The outcome-side heritability target pins the gamma
    // scale when beta0 != 0; otherwise the exposure-side heritability does.
    let beta0 = config.beta0;
    let c2 = if config.h2_gamma > 0.0 {
        let ratio = var_gy_gamma / var_gx;
        let denom = 1.0 - config.h2_gamma * ratio - config.h2_alpha;
        if denom <= 0.0 {
            return Err(Error::Config(format!(
                "infeasible heritability targets: denominator {denom} <= 0"
            )));
        }
        let var_y = (beta0 * beta0 * (var_uyx + NOISE_VAR_X)
            + var_uyy
            + NOISE_VAR_Y
            + 2.0 * beta0 * cov_uxy)
            / denom;
        if var_y <= 0.0 {
            return Err(Error::Config("infeasible heritability targets: negative variance".into()));
        }
        config.h2_gamma * var_y / (beta0 * beta0 * var_gx)
    } else {
        EXPOSURE_H2 * (var_ux + NOISE_VAR_X) / ((1.0 - EXPOSURE_H2) * var_gx)
    };
    let c = c2.sqrt();

    let var_y_for_alpha = {
        let base = beta0 * beta0 * (c2 * var_gy_gamma + var_uyx + NOISE_VAR_X)
            + var_uyy
            + NOISE_VAR_Y
            + 2.0 * beta0 * cov_uxy;
        let denom = 1.0 - config.h2_alpha;
        if base <= 0.0 || denom <= 0.0 {
            return Err(Error::Config("infeasible heritability targets: negative variance".into()));
        }
        base / denom
    };
    let d2 = if config.h2_alpha > 0.0 {
        if !(var_gy_alpha > 0.0) {
            return Err(Error::Config(
                "h2_alpha > 0 requires a non-degenerate direct-effect draw".into(),
            ));
        }
        config.h2_alpha * var_y_for_alpha / var_gy_alpha
    } else {
        0.0
    };
    let d = d2.sqrt();

    let gamma: Vec<f64> = gamma_raw.iter().map(|g| c * g).collect();
    let alpha: Vec<f64> = alpha_raw.iter().map(|a| d * a).collect();

    // Structural equations, exposure cohort then outcome cohort.
    let noise_x_sd = NOISE_VAR_X.sqrt();
    let noise_y_sd = NOISE_VAR_Y.sqrt();
    let x: Vec<f64> = (0..config.n_x)
        .map(|i| c * gx_raw[i] + u_x[i] + noise_x_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x_on_outcome: Vec<f64> = (0..config.n_y)
        .map(|i| c * gy_gamma_raw[i] + u_yx[i] + noise_x_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y: Vec<f64> = (0..config.n_y)
        .map(|i| {
            beta0 * x_on_outcome[i]
                + d * gy_alpha_raw[i]
                + u_yy[i]
                + noise_y_sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    // Reduce to summary statistics.
    let (exposure_beta, exposure_se) = gwas_summary(&g_x, &x)?;
    let (outcome_beta, outcome_se) = gwas_summary(&g_y, &y)?;
    let exposure_pvalue = wald_pvalues(&exposure_beta, &exposure_se);
    let outcome_pvalue = wald_pvalues(&outcome_beta, &outcome_se);

    let block_index: Vec<usize> = (0..j).map(|i| i / config.block_size).collect();
    let dataset = HarmonizedDataset {
        snp_ids: meta.iter().map(|m| m.id.clone()).collect(),
        exposure_beta,
        exposure_se,
        outcome_beta,
        outcome_se,
        block_index,
    };
    dataset.validate()?;

    let reference_blocks: Vec<GenotypeBlock> = (0..config.n_blocks)
        .map(|b| {
            let cols = b * config.block_size..(b + 1) * config.block_size;
            GenotypeBlock {
                dosages: g_r.columns(cols.start, config.block_size).into_owned(),
                snp_ids: meta[cols].iter().map(|m| m.id.clone()).collect(),
            }
        })
        .collect();

    let var_x = sample_var(&x);
    let var_y = sample_var(&y);
    let achieved = AchievedScales {
        var_x,
        var_y,
        sigma_eps_x2: NOISE_VAR_X,
        sigma_eps_y2: NOISE_VAR_Y,
        h2_gamma_realized: beta0 * beta0 * c2 * var_gx / var_y,
        h2_alpha_realized: d2 * var_gy_alpha / var_y,
    };

    Ok(SimOutput {
        dataset,
        reference_blocks,
        truth: SimTruth {
            beta0,
            gamma,
            alpha,
            idiosyncratic,
        },
        meta,
        exposure_pvalue,
        outcome_pvalue,
        achieved,
    })
}

/// Per-SNP simple regression of the trait on each dosage column, fitted
/// marginally with an intercept. Returns slopes and their standard errors.
pub fn gwas_summary(genotypes: &DMatrix<f64>, trait_values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = genotypes.nrows();
    if trait_values.len() != n {
        return Err(Error::Config(format!(
            "trait has {} values but genotypes have {n} samples",
            trait_values.len()
        )));
    }
    if n < 3 {
        return Err(Error::Config("single-variant regression needs n >= 3".into()));
    }
    let nf = n as f64;
    let y_mean = trait_values.iter().sum::<f64>() / nf;
    let yc: Vec<f64> = trait_values.iter().map(|v| v - y_mean).collect();
    let syy: f64 = yc.iter().map(|v| v * v).sum();

    let j = genotypes.ncols();
    let mut betas = Vec::with_capacity(j);
    let mut ses = Vec::with_capacity(j);
    for c in 0..j {
        let col = genotypes.column(c);
        let g_mean = col.iter().sum::<f64>() / nf;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for i in 0..n {
            let gc = col[i] - g_mean;
            sxx += gc * gc;
            sxy += gc * yc[i];
        }
        if sxx <= 0.0 {
            return Err(Error::Numeric(format!(
                "degenerate (constant) genotype column {c}"
            )));
        }
        let slope = sxy / sxx;
        let rss = (syy - slope * sxy).max(0.0);
        let sigma2 = rss / (nf - 2.0);
        betas.push(slope);
        ses.push((sigma2 / sxx).sqrt());
    }
    Ok((betas, ses))
}

fn wald_pvalues(betas: &[f64], ses: &[f64]) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    betas
        .iter()
        .zip(ses)
        .map(|(b, s)| {
            if *s > 0.0 {
                2.0 * normal.sf((b / s).abs())
            } else {
                0.0
            }
        })
        .collect()
}

/// Benchmarked estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Rbmr,
    Ivw,
    Egger,
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchMethod::Rbmr => write!(f, "rbmr"),
            BenchMethod::Ivw => write!(f, "ivw"),
            BenchMethod::Egger => write!(f, "egger"),
        }
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "rbmr" => Ok(BenchMethod::Rbmr),
            "ivw" => Ok(BenchMethod::Ivw),
            "egger" | "mr-egger" | "mr_egger" => Ok(BenchMethod::Egger),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Harness options shared by every replicate.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkOptions {
    pub n_replicates: usize,
    pub methods: Vec<BenchMethod>,
    pub lambda: f64,
    pub r2_threshold: f64,
    pub hyper: HyperParams,
    pub fit_options: FitOptions,
    pub threads: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            n_replicates: 100,
            methods: vec![BenchMethod::Rbmr, BenchMethod::Ivw, BenchMethod::Egger],
            lambda: 0.15,
            r2_threshold: 0.05,
            hyper: HyperParams::default(),
            fit_options: FitOptions::default(),
            threads: 1,
        }
    }
}

/// One estimator's outcome on one replicate.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateEstimate {
    pub replicate: usize,
    pub method: BenchMethod,
    pub estimate: f64,
    pub se: f64,
    pub pvalue: f64,
    pub n_snps: usize,
}

/// Aggregated metrics for one estimator.
#[derive(Debug, Clone, Serialize)]
pub struct MethodMetrics {
    pub method: BenchMethod,
    pub n_replicates: usize,
    pub mean_estimate: f64,
    /// 100 (mean - beta0) / beta0 when beta0 != 0, else 100 * mean.
    pub bias_pct: f64,
    pub rmse_pct: f64,
    pub coverage_pct: f64,
    /// Rejection rate at nominal 0.05; the type-I error when beta0 = 0.
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub config: SimConfig,
    pub true_beta0: f64,
    pub metrics: Vec<MethodMetrics>,
    pub estimates: Vec<ReplicateEstimate>,
}

fn run_replicate(
    config: &SimConfig,
    opts: &BenchmarkOptions,
    replicate: usize,
) -> Result<Vec<ReplicateEstimate>> {
    let rep_config = SimConfig {
        seed: config.seed ^ replicate as u64,
        ..config.clone()
    };
    let sim = simulate_dataset(&rep_config)?;

    let blocks: Vec<_> = sim
        .reference_blocks
        .iter()
        .map(|b| estimate_block_ld(b, opts.lambda))
        .collect::<Result<_>>()?;
    let ld = assemble_block_diagonal(blocks, opts.lambda)?;

    let mut out = Vec::with_capacity(opts.methods.len());
    let mut pruned_cache: Option<HarmonizedDataset> = None;
    for &method in &opts.methods {
        match method {
            BenchMethod::Rbmr => {
                let res = fit(&sim.dataset, &ld, &opts.hyper, &opts.fit_options)?;
                out.push(ReplicateEstimate {
                    replicate,
                    method,
                    estimate: res.beta0_hat,
                    se: res.se,
                    pvalue: res.pvalue,
                    n_snps: res.n_snps,
                });
            }
            BenchMethod::Ivw | BenchMethod::Egger => {
                if pruned_cache.is_none() {
                    let candidates: Vec<PruneCandidate> = (0..sim.dataset.len())
                        .map(|i| PruneCandidate {
                            index: i,
                            pvalue: sim.exposure_pvalue[i],
                        })
                        .collect();
                    let kept = ld_prune(&candidates, &ld, opts.r2_threshold);
                    pruned_cache = Some(sim.dataset.subset(&kept)?);
                }
                let pruned = pruned_cache.as_ref().unwrap();
                let res = match method {
                    BenchMethod::Ivw => ivw(pruned)?,
                    BenchMethod::Egger => mr_egger(pruned)?,
                    BenchMethod::Rbmr => unreachable!(),
                };
                out.push(ReplicateEstimate {
                    replicate,
                    method,
                    estimate: res.beta_hat,
                    se: res.se,
                    pvalue: res.pvalue,
                    n_snps: res.n_snps,
                });
            }
        }
    }
    Ok(out)
}

/// Run the Monte-Carlo benchmark: replicate seeds are `seed XOR replicate`,
/// so results are independent of the execution schedule.
pub fn run_benchmark(config: &SimConfig, opts: &BenchmarkOptions) -> Result<BenchmarkReport> {
    config.validate()?;
    if opts.n_replicates == 0 {
        return Err(Error::Config("n_replicates must be at least 1".into()));
    }
    if opts.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }

    let replicate_results: Vec<Result<Vec<ReplicateEstimate>>> = if opts.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..opts.n_replicates)
                .into_par_iter()
                .map(|r| run_replicate(config, opts, r))
                .collect()
        })
    } else {
        (0..opts.n_replicates)
            .map(|r| run_replicate(config, opts, r))
            .collect()
    };

    let mut estimates = Vec::with_capacity(opts.n_replicates * opts.methods.len());
    for res in replicate_results {
        estimates.extend(res?);
    }

    let z975 = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.975);
    let beta0 = config.beta0;
    let mut metrics = Vec::with_capacity(opts.methods.len());
    for &method in &opts.methods {
        let rows: Vec<&ReplicateEstimate> =
            estimates.iter().filter(|e| e.method == method).collect();
        let n = rows.len();
        let nf = n as f64;
        let mean = rows.iter().map(|e| e.estimate).sum::<f64>() / nf;
        let bias_pct = if beta0 != 0.0 {
            100.0 * (mean - beta0) / beta0
        } else {
            100.0 * mean
        };
        let rmse_pct = 100.0
            * (rows
                .iter()
                .map(|e| (e.estimate - beta0) * (e.estimate - beta0))
                .sum::<f64>()
                / nf)
                .sqrt();
        let covered = rows
            .iter()
            .filter(|e| {
                let half = z975 * e.se;
                e.estimate - half <= beta0 && beta0 <= e.estimate + half
            })
            .count();
        let rejected = rows.iter().filter(|e| e.pvalue < 0.05).count();
        metrics.push(MethodMetrics {
            method,
            n_replicates: n,
            mean_estimate: mean,
            bias_pct,
            rmse_pct,
            coverage_pct: 100.0 * covered as f64 / nf,
            rejection_rate: rejected as f64 / nf,
        });
    }

    Ok(BenchmarkReport {
        config: config.clone(),
        true_beta0: beta0,
        metrics,
        estimates,
    })
}

impl BenchmarkReport {
    pub const METRICS_TSV_HEADER: &'static str =
        "method\tn_replicates\tbeta_hat\tbias_pct\trmse_pct\tcover_pct\trejection_rate";

    pub fn metrics_tsv(&self) -> String {
        let mut out = String::from(Self::METRICS_TSV_HEADER);
        out.push('\n');
        for m in &self.metrics {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                m.method,
                m.n_replicates,
                m.mean_estimate,
                m.bias_pct,
                m.rmse_pct,
                m.coverage_pct,
                m.rejection_rate
            ));
        }
        out
    }

    pub fn estimates_tsv(&self) -> String {
        let mut out = String::from("replicate\tmethod\testimate\tse\tpvalue\tn_snps\n");
        for e in &self.estimates {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.replicate, e.method, e.estimate, e.se, e.pvalue, e.n_snps
            ));
        }
        out
    }
}

/// Persist a simulated dataset in the exact file formats the ingest pipeline
/// reads: exposure/outcome summary TSVs (the exposure file doubles as the
/// selection file), the reference panel dosage matrix and SNP metadata, the
/// block boundary file, and the generative truth as JSON.
pub fn write_sim_files(
    dir: &std::path::Path,
    sim: &SimOutput,
    config: &SimConfig,
) -> Result<Vec<std::path::PathBuf>> {
    use std::fmt::Write as _;

    let write = |name: &str, content: &str| -> Result<std::path::PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };

    let summary_tsv = |betas: &[f64], ses: &[f64], pvals: &[f64]| -> String {
        let mut out =
            String::from("snp\tchrom\tpos\teffect_allele\tother_allele\tbeta\tse\tpvalue\n");
        for (i, m) in sim.meta.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.id, m.chrom, m.pos, m.effect_allele, m.other_allele, betas[i], ses[i], pvals[i]
            )
            .expect("write to string");
        }
        out
    };

    let exposure = summary_tsv(
        &sim.dataset.exposure_beta,
        &sim.dataset.exposure_se,
        &sim.exposure_pvalue,
    );
    let outcome = summary_tsv(
        &sim.dataset.outcome_beta,
        &sim.dataset.outcome_se,
        &sim.outcome_pvalue,
    );

    let mut panel = String::new();
    let n_r = sim.reference_blocks[0].n_samples();
    for i in 0..n_r {
        let mut first = true;
        for block in &sim.reference_blocks {
            for c in 0..block.n_snps() {
                if !first {
                    panel.push('\t');
                }
                first = false;
                write!(panel, "{}", block.dosages[(i, c)]).expect("write to string");
            }
        }
        panel.push('\n');
    }

    let mut panel_snps = String::from("snp\tchrom\tpos\teffect_allele\tother_allele\n");
    for m in &sim.meta {
        writeln!(
            panel_snps,
            "{}\t{}\t{}\t{}\t{}",
            m.id, m.chrom, m.pos, m.effect_allele, m.other_allele
        )
        .expect("write to string");
    }

    let mut blocks = String::from("chrom\tstart\tend\n");
    for b in 0..config.n_blocks {
        writeln!(blocks, "{}\t0\t{}", b + 1, 1000 * (config.block_size as u64 + 1))
            .expect("write to string");
    }

    let truth = serde_json::json!({
        "truth": sim.truth,
        "achieved": sim.achieved,
    });
    let mut truth_text = serde_json::to_string_pretty(&truth)
        .map_err(|e| Error::Config(format!("serialize truth: {e}")))?;
    truth_text.push('\n');

    Ok(vec![
        write("exposure.tsv", &exposure)?,
        write("outcome.tsv", &outcome)?,
        write("panel.tsv", &panel)?,
        write("panel_snps.tsv", &panel_snps)?,
        write("blocks.tsv", &blocks)?,
        write("truth.json", &truth_text)?,
    ])
}
