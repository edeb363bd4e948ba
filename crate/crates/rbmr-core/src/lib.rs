//! Robust Bayesian Mendelian randomization (RBMR) from GWAS summary statistics.
//!
//! The estimator models outcome-side direct effects with a multivariate
//! generalized t-distribution (a Gaussian scale mixture with a Gamma weight)
//! and keeps correlated instruments by carrying a block-diagonal LD matrix
//! through the likelihood. Fitting is done by a parameter-expanded
//! variational-Bayes EM; standard errors come from a likelihood-ratio
//! calibration of the evidence lower bound.
//!
//! Modules:
//! - [`ingest`]: summary-statistics loading, instrument selection, allele
//!   harmonization into an analysis-ready dataset.
//! - [`ld`]: shrinkage LD estimation from a reference panel, block-diagonal
//!   assembly, greedy LD pruning.
//! - [`model`]: densities of the probabilistic model and the complete-data
//!   log-likelihood.
//! - [`vbem`]: the PX-VBEM fitting loop, ELBO, and LRT-calibrated inference.
//! - [`baselines`]: IVW and MR-Egger on pruned instruments.
//! - [`simulate`]: synthetic individual-level data generation and the
//!   Monte-Carlo benchmark harness.
//! - [`cli`]: the `rbmr` command-line front end.

pub use nalgebra;

pub mod baselines;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod ld;
pub mod model;
pub mod simulate;
pub mod vbem;

pub use error::{Error, Result};
pub use ingest::{HarmonizedDataset, SnpRecord, SummaryTable};
pub use ld::{BlockLdMatrix, GenotypeBlock};
pub use model::{HyperParams, LatentState, ModelParams};
pub use vbem::{FitOptions, FitResult, VariationalState};
