//! End-to-end CLI tests: simulate -> fit / baselines on real files, the
//! exit-code contract, and CLI-vs-library equivalence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rbmr")
}

struct SimFiles {
    dir: PathBuf,
}

impl SimFiles {
    fn arg(&self, name: &str) -> String {
        self.dir.join(name).to_str().unwrap().to_string()
    }
}

/// Simulate once into `root` and return the file handles.
fn simulate_into(root: &Path, toml: &str) -> SimFiles {
    let config_path = root.join("sim.toml");
    std::fs::write(&config_path, toml).unwrap();
    let dir = root.join("sim");
    let out = Command::new(bin())
        .args([
            "simulate",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .expect("spawn simulate");
    assert!(out.status.success(), "simulate: {out:?}");
    for name in [
        "exposure.tsv",
        "outcome.tsv",
        "panel.tsv",
        "panel_snps.tsv",
        "blocks.tsv",
        "truth.json",
        "manifest.json",
    ] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    SimFiles { dir }
}

const DESK_TOML: &str = "n_x = 3000\nn_y = 3000\nn_r = 800\nn_blocks = 4\nblock_size = 10\nseed = 11\n";

fn fit_args(sim: &SimFiles, out_dir: &Path) -> Vec<String> {
    vec![
        "fit".into(),
        "--exposure".into(), sim.arg("exposure.tsv"),
        "--outcome".into(), sim.arg("outcome.tsv"),
        "--selection".into(), sim.arg("exposure.tsv"),
        "--panel".into(), sim.arg("panel.tsv"),
        "--panel-snps".into(), sim.arg("panel_snps.tsv"),
        "--blocks".into(), sim.arg("blocks.tsv"),
        "--p-threshold".into(), "1".into(),
        "--out".into(), out_dir.to_str().unwrap().into(),
    ]
}

#[test]
fn fit_recovers_true_effect_end_to_end() {
    let work = tempfile::tempdir().unwrap();
    let sim = simulate_into(work.path(), DESK_TOML);
    let out_dir = work.path().join("fit");
    let out = Command::new(bin())
        .args(fit_args(&sim, &out_dir))
        .output()
        .expect("spawn fit");
    assert!(out.status.success(), "fit: {out:?}");

    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("result.json")).unwrap()).unwrap();
    let estimate = result["estimate"].as_f64().unwrap();
    assert!(
        (estimate - 1.0).abs() < 0.35,
        "estimate {estimate} far from the simulated effect 1.0"
    );
    // p-threshold 1 keeps every simulated SNP.
    assert_eq!(result["n_snps"].as_u64().unwrap(), 40);
    assert!(out_dir.join("manifest.json").exists());

    // A result file always comes with a manifest.
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn baselines_match_direct_library_call() {
    let work = tempfile::tempdir().unwrap();
    let sim = simulate_into(work.path(), DESK_TOML);
    let out_dir = work.path().join("baselines");
    let out = Command::new(bin())
        .args([
            "baselines",
            "--exposure", &sim.arg("exposure.tsv"),
            "--outcome", &sim.arg("outcome.tsv"),
            "--selection", &sim.arg("exposure.tsv"),
            "--panel", &sim.arg("panel.tsv"),
            "--panel-snps", &sim.arg("panel_snps.tsv"),
            "--blocks", &sim.arg("blocks.tsv"),
            "--p-threshold", "1",
            "--r2-threshold", "0.05",
            "--out", out_dir.to_str().unwrap(),
        ])
        .output()
        .expect("spawn baselines");
    assert!(out.status.success(), "baselines: {out:?}");

    let tsv = std::fs::read_to_string(out_dir.join("results.tsv")).unwrap();
    let mut lines = tsv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("method\tbeta_hat"));
    let ivw_line = lines.next().unwrap();
    assert!(ivw_line.starts_with("ivw\t"));
    let egger_line = lines.next().unwrap();
    assert!(egger_line.starts_with("egger\t"));

    // Library-side replication of the same pipeline must agree bit-for-bit.
    use rbmr_core::ingest::{harmonize, load_blocks, load_snp_meta, load_summary_stats, select_instruments, ColumnMap};
    use rbmr_core::ld::{assemble_block_diagonal, estimate_block_ld, ld_prune, load_genotype_matrix, panel_blocks, PruneCandidate};

    let cm = ColumnMap::default();
    let (exposure, _) = load_summary_stats(&sim.dir.join("exposure.tsv"), &cm, "x").unwrap();
    let (outcome, _) = load_summary_stats(&sim.dir.join("outcome.tsv"), &cm, "y").unwrap();
    let instruments = select_instruments(&exposure, 1.0).unwrap();
    let meta = load_snp_meta(&sim.dir.join("panel_snps.tsv")).unwrap();
    let blocks = load_blocks(&sim.dir.join("blocks.tsv")).unwrap();
    let (dataset, stats) = harmonize(&exposure, &outcome, &instruments, &meta, &blocks).unwrap();
    let panel = load_genotype_matrix(&sim.dir.join("panel.tsv")).unwrap();
    let gblocks = panel_blocks(&panel, &dataset.snp_ids, &dataset.block_sizes(), &stats.reference_flip).unwrap();
    let est: Vec<_> = gblocks.iter().map(|b| estimate_block_ld(b, 0.15).unwrap()).collect();
    let ld = assemble_block_diagonal(est, 0.15).unwrap();
    let exp_by_id = exposure.by_id();
    let candidates: Vec<PruneCandidate> = dataset
        .snp_ids
        .iter()
        .enumerate()
        .map(|(i, id)| PruneCandidate { index: i, pvalue: exp_by_id[id.as_str()].pvalue })
        .collect();
    let kept = ld_prune(&candidates, &ld, 0.05);
    let pruned = dataset.subset(&kept).unwrap();
    let direct = rbmr_core::baselines::ivw(&pruned).unwrap();

    let fields: Vec<&str> = ivw_line.split('\t').collect();
    assert_eq!(fields[1], direct.beta_hat.to_string(), "CLI and library IVW differ");
    assert_eq!(fields[2], direct.se.to_string());
}

#[test]
fn missing_block_file_exits_one_with_structured_error() {
    let work = tempfile::tempdir().unwrap();
    let sim = simulate_into(work.path(), DESK_TOML);
    let out_dir = work.path().join("fit");
    let mut args = fit_args(&sim, &out_dir);
    let idx = args.iter().position(|a| a == "--blocks").unwrap();
    args[idx + 1] = work.path().join("nope.tsv").to_str().unwrap().into();
    let out = Command::new(bin()).args(&args).output().expect("spawn fit");
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn empty_selection_exits_two() {
    let work = tempfile::tempdir().unwrap();
    let sim = simulate_into(work.path(), DESK_TOML);
    let out_dir = work.path().join("fit");
    let mut args = fit_args(&sim, &out_dir);
    let idx = args.iter().position(|a| a == "--p-threshold").unwrap();
    args[idx + 1] = "1e-300".into();
    let out = Command::new(bin()).args(&args).output().expect("spawn fit");
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(err["error"]["kind"], "empty");
}

#[test]
fn benchmark_single_replicate_reruns_identically() {
    let work = tempfile::tempdir().unwrap();
    let config_path = work.path().join("sim.toml");
    std::fs::write(&config_path, "n_x = 1200\nn_y = 1200\nn_r = 400\nn_blocks = 3\nblock_size = 6\nseed = 7\n").unwrap();
    let run = |label: &str| {
        let dir = work.path().join(label);
        let out = Command::new(bin())
            .args([
                "benchmark",
                "--config", config_path.to_str().unwrap(),
                "--replicates", "1",
                "--max-iter", "800",
                "--out", dir.to_str().unwrap(),
            ])
            .output()
            .expect("spawn benchmark");
        assert!(out.status.success(), "benchmark: {out:?}");
        dir
    };
    let a = run("a");
    let b = run("b");
    for name in ["metrics.tsv", "estimates.tsv", "metrics.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} not reproducible"
        );
    }
    let metrics = std::fs::read_to_string(a.join("metrics.tsv")).unwrap();
    assert!(metrics.starts_with("method\tn_replicates\tbeta_hat\tbias_pct\trmse_pct\tcover_pct"));
}

#[test]
fn benchmark_rejects_unknown_method() {
    let work = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args([
            "benchmark",
            "--replicates", "1",
            "--methods", "rbmr,gsmr",
            "--out", work.path().join("x").to_str().unwrap(),
        ])
        .output()
        .expect("spawn benchmark");
    assert_eq!(out.status.code(), Some(1));
}
