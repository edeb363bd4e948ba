//! The `rbmr` command-line front end.
//!
//! Subcommands: `fit` (ingest -> LD -> PX-VBEM), `baselines` (LD pruning ->
//! IVW / MR-Egger), `simulate` (write a synthetic dataset in the same file
//! formats the ingest pipeline reads), and `benchmark` (Monte-Carlo metrics
//! table).
//!
//! Every command writes a run manifest next to its outputs. Exit codes:
//! 0 success, 1 configuration error, 2 empty data, 3 numerical failure.
//! Errors are also emitted as one JSON object on standard error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{ivw, mr_egger};
use crate::error::{Error, Result};
use crate::ingest::{
    harmonize, load_blocks, load_snp_meta, load_summary_stats, select_instruments, ColumnMap,
    HarmonizedDataset, HarmonizeStats,
};
use crate::ld::{
    assemble_block_diagonal, estimate_block_ld, ld_prune, load_genotype_matrix, panel_blocks,
    BlockLdMatrix, PruneCandidate,
};
use crate::model::HyperParams;
use crate::simulate::{
    run_benchmark, simulate_dataset, write_sim_files, BenchMethod, BenchmarkOptions, SimConfig,
};
use crate::vbem::{fit, FitOptions, RESULT_TSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "rbmr", version, about = "Robust Bayesian Mendelian randomization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the RBMR model on harmonized summary statistics.
    Fit(FitArgs),
    /// LD-prune and run the IVW and MR-Egger baselines.
    Baselines(BaselinesArgs),
    /// Generate a synthetic dataset and write it as pipeline input files.
    Simulate(SimulateArgs),
    /// Run the Monte-Carlo benchmark and emit a metrics table.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Exposure GWAS summary statistics (TSV with header).
    #[arg(long)]
    pub exposure: PathBuf,
    /// Outcome GWAS summary statistics (TSV with header).
    #[arg(long)]
    pub outcome: PathBuf,
    /// Selection GWAS used only for instrument filtering.
    #[arg(long)]
    pub selection: PathBuf,
    /// Reference-panel dosage matrix (samples x SNPs, whitespace-separated).
    #[arg(long)]
    pub panel: PathBuf,
    /// Reference-panel SNP metadata TSV (snp, chrom, pos, alleles).
    #[arg(long)]
    pub panel_snps: PathBuf,
    /// LD block boundaries TSV (chrom, start, end), half-open.
    #[arg(long)]
    pub blocks: PathBuf,
    /// Selection p-value threshold for instrument inclusion.
    #[arg(long, default_value_t = 1e-4)]
    pub p_threshold: f64,
    /// LD shrinkage weight toward the identity.
    #[arg(long, default_value_t = 0.15)]
    pub lambda: f64,
    /// Column overrides for the exposure table, e.g. "snp=rsid,beta=b".
    #[arg(long)]
    pub exposure_columns: Option<String>,
    /// Column overrides for the outcome table.
    #[arg(long)]
    pub outcome_columns: Option<String>,
    /// Column overrides for the selection table.
    #[arg(long)]
    pub selection_columns: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Gamma shape of the scale-weight prior.
    #[arg(long, default_value_t = 2.0)]
    pub alpha_w: f64,
    /// Gamma rate of the scale-weight prior.
    #[arg(long, default_value_t = 2.0)]
    pub beta_w: f64,
    /// Relative ELBO convergence tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Greedy pruning threshold on squared correlation.
    #[arg(long, default_value_t = 0.05)]
    pub r2_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML file with simulation settings (all fields optional).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchmarkArgs {
    /// TOML file with simulation settings (all fields optional).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    /// Comma-separated method list.
    #[arg(long, default_value = "rbmr,ivw,egger")]
    pub methods: String,
    #[arg(long, default_value_t = 0.15)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r2_threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_w: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta_w: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Worker threads for replicates (default 1, or RBMR_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub input_paths: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    fn new<C: Serialize>(command: &str, config: &C, input_paths: Vec<String>, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash: config_hash(config),
            input_paths,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Digest of the resolved configuration. Hashing the resolved struct (not
/// the raw file) makes the hash independent of key ordering in config files.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Baselines(args) => cmd_baselines(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            let payload = serde_json::json!({
                "error": {
                    "kind": err.kind(),
                    "message": err.to_string(),
                    "exit_code": err.exit_code(),
                }
            });
            eprintln!("{payload}");
            err.exit_code()
        }
    }
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let value = serde_json::to_value(manifest)
        .map_err(|e| Error::Config(format!("serialize manifest: {e}")))?;
    write_json(&dir.join("manifest.json"), &value)
}

fn column_map(overrides: &Option<String>) -> Result<ColumnMap> {
    match overrides {
        Some(spec) => ColumnMap::default().with_overrides(spec),
        None => Ok(ColumnMap::default()),
    }
}

struct PipelineData {
    dataset: HarmonizedDataset,
    stats: HarmonizeStats,
    ld: BlockLdMatrix,
    /// Selection p-values aligned with the dataset SNPs.
    selection_pvalues: Vec<f64>,
}

/// Shared front half of `fit` and `baselines`: load, select, harmonize,
/// orient the panel, estimate LD.
fn build_pipeline(input: &InputArgs) -> Result<PipelineData> {
    let exp_map = column_map(&input.exposure_columns)?;
    let out_map = column_map(&input.outcome_columns)?;
    let sel_map = column_map(&input.selection_columns)?;

    let (exposure, _) = load_summary_stats(&input.exposure, &exp_map, "exposure")?;
    let (outcome, _) = load_summary_stats(&input.outcome, &out_map, "outcome")?;
    let (selection, _) = load_summary_stats(&input.selection, &sel_map, "selection")?;

    let instruments = select_instruments(&selection, input.p_threshold)?;
    let meta = load_snp_meta(&input.panel_snps)?;
    let blocks = load_blocks(&input.blocks)?;
    let (dataset, stats) = harmonize(&exposure, &outcome, &instruments, &meta, &blocks)?;

    // Subset the panel columns to the harmonized SNPs, in dataset order.
    let panel = load_genotype_matrix(&input.panel)?;
    if panel.ncols() != meta.len() {
        return Err(Error::Config(format!(
            "panel has {} columns but {} metadata rows",
            panel.ncols(),
            meta.len()
        )));
    }
    let col_of: HashMap<&str, usize> = meta
        .iter()
        .enumerate()
        .map(|(i, m)| (m.id.as_str(), i))
        .collect();
    let mut sub = DMatrix::<f64>::zeros(panel.nrows(), dataset.len());
    for (k, id) in dataset.snp_ids.iter().enumerate() {
        let c = *col_of
            .get(id.as_str())
            .ok_or_else(|| Error::Config(format!("SNP {id} missing from panel metadata")))?;
        sub.column_mut(k).copy_from(&panel.column(c));
    }
    let genotype_blocks = panel_blocks(
        &sub,
        &dataset.snp_ids,
        &dataset.block_sizes(),
        &stats.reference_flip,
    )?;
    let estimated: Vec<_> = genotype_blocks
        .iter()
        .map(|b| estimate_block_ld(b, input.lambda))
        .collect::<Result<_>>()?;
    let ld = assemble_block_diagonal(estimated, input.lambda)?;

    let sel_by_id = selection.by_id();
    let selection_pvalues = dataset
        .snp_ids
        .iter()
        .map(|id| sel_by_id.get(id.as_str()).map_or(1.0, |r| r.pvalue))
        .collect();

    Ok(PipelineData {
        dataset,
        stats,
        ld,
        selection_pvalues,
    })
}

fn dropped_snp_report(stats: &HarmonizeStats) -> String {
    let mut out = String::from("snp\treason\n");
    for d in &stats.dropped {
        out.push_str(&format!("{}\t{}\n", d.id, d.reason));
    }
    out
}

fn input_path_list(input: &InputArgs) -> Vec<String> {
    [
        &input.exposure,
        &input.outcome,
        &input.selection,
        &input.panel,
        &input.panel_snps,
        &input.blocks,
    ]
    .iter()
    .map(|p| p.display().to_string())
    .collect()
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.input)?;
    let hyper = HyperParams {
        alpha_w: args.alpha_w,
        beta_w: args.beta_w,
    };
    let opts = FitOptions {
        max_iter: args.max_iter,
        elbo_rel_tol: args.tol,
        seed: args.seed,
        fix_sigma0_2: None,
    };
    let result = fit(&pipeline.dataset, &pipeline.ld, &hyper, &opts)?;

    ensure_out_dir(&args.out)?;
    write_json(&args.out.join("result.json"), &result.to_json())?;
    write_text(
        &args.out.join("result.tsv"),
        &format!("{RESULT_TSV_HEADER}\n{}\n", result.tsv_row()),
    )?;
    write_text(
        &args.out.join("dropped_snps.tsv"),
        &dropped_snp_report(&pipeline.stats),
    )?;
    let manifest = RunManifest::new("fit", args, input_path_list(&args.input), args.seed);
    write_manifest(&args.out, &manifest)?;
    Ok(())
}

pub fn cmd_baselines(args: &BaselinesArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.input)?;
    let candidates: Vec<PruneCandidate> = (0..pipeline.dataset.len())
        .map(|i| PruneCandidate {
            index: i,
            pvalue: pipeline.selection_pvalues[i],
        })
        .collect();
    let kept = ld_prune(&candidates, &pipeline.ld, args.r2_threshold);
    let pruned = pipeline.dataset.subset(&kept)?;

    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let ivw_result = ivw(&pruned)?;
    json_rows.push(ivw_result.to_json());
    rows.push(ivw_result.tsv_row());
    if pruned.len() >= 3 {
        let egger_result = mr_egger(&pruned)?;
        json_rows.push(egger_result.to_json());
        rows.push(egger_result.tsv_row());
    } else {
        eprintln!(
            "{}",
            serde_json::json!({
                "warning": format!(
                    "egger skipped: only {} instruments after pruning (need 3)",
                    pruned.len()
                )
            })
        );
        rows.push(format!("egger\tNA\tNA\tNA\tNA\tNA\tNA\t{}\tfalse", pruned.len()));
    }

    ensure_out_dir(&args.out)?;
    let mut tsv = String::from(RESULT_TSV_HEADER);
    tsv.push('\n');
    for r in &rows {
        tsv.push_str(r);
        tsv.push('\n');
    }
    write_text(&args.out.join("results.tsv"), &tsv)?;
    write_json(
        &args.out.join("results.json"),
        &serde_json::Value::Array(json_rows),
    )?;
    write_text(
        &args.out.join("dropped_snps.tsv"),
        &dropped_snp_report(&pipeline.stats),
    )?;
    let manifest = RunManifest::new("baselines", args, input_path_list(&args.input), args.seed);
    write_manifest(&args.out, &manifest)?;
    Ok(())
}

fn load_sim_config(path: &Option<PathBuf>, seed_override: Option<u64>) -> Result<SimConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<SimConfig>(&text)
                .map_err(|e| Error::Config(format!("bad config {}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = load_sim_config(&args.config, args.seed)?;
    let sim = simulate_dataset(&config)?;
    ensure_out_dir(&args.out)?;
    write_sim_files(&args.out, &sim, &config)?;
    let inputs = args
        .config
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let manifest = RunManifest::new("simulate", &config, inputs, config.seed);
    write_manifest(&args.out, &manifest)?;
    Ok(())
}

fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("RBMR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let config = load_sim_config(&args.config, args.seed)?;
    let methods: Vec<BenchMethod> = args
        .methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let opts = BenchmarkOptions {
        n_replicates: args.replicates,
        methods,
        lambda: args.lambda,
        r2_threshold: args.r2_threshold,
        hyper: HyperParams {
            alpha_w: args.alpha_w,
            beta_w: args.beta_w,
        },
        fit_options: FitOptions {
            max_iter: args.max_iter,
            elbo_rel_tol: args.tol,
            seed: config.seed,
            fix_sigma0_2: None,
        },
        threads: thread_count(args.threads),
    };
    let report = run_benchmark(&config, &opts)?;

    ensure_out_dir(&args.out)?;
    write_text(&args.out.join("metrics.tsv"), &report.metrics_tsv())?;
    write_text(&args.out.join("estimates.tsv"), &report.estimates_tsv())?;
    let bundle = serde_json::to_value(&report)
        .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
    write_json(&args.out.join("metrics.json"), &bundle)?;

    #[derive(Serialize)]
    struct ResolvedBenchmark<'a> {
        config: &'a SimConfig,
        options: &'a BenchmarkOptions,
    }
    let resolved = ResolvedBenchmark {
        config: &config,
        options: &opts,
    };
    let manifest = RunManifest::new(
        "benchmark",
        &resolved,
        args.config.iter().map(|p| p.display().to_string()).collect(),
        config.seed,
    );
    write_manifest(&args.out, &manifest)?;
    Ok(())
}
