//! GWAS summary-statistics ingestion and harmonization.
//!
//! Loads tab-separated association tables, selects instruments with a third
//! (selection) GWAS, and aligns exposure/outcome/reference-panel SNPs into a
//! single analysis-ready dataset ordered by genome position with LD-block
//! assignments.
//!
//! Allele handling: outcome and reference records must either match the
//! exposure allele coding or be an exact effect/other swap (the outcome beta
//! sign is flipped, the reference dosage orientation is flagged). Strand-
//! ambiguous SNPs (A/T, C/G) and irreconcilable codings are dropped and
//! counted.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One SNP association record from a GWAS summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpRecord {
    pub id: String,
    pub chrom: String,
    pub pos: u64,
    pub effect_allele: char,
    pub other_allele: char,
    pub beta: f64,
    pub se: f64,
    pub pvalue: f64,
}

/// Summary statistics for one trait; SNP identifiers are unique.
#[derive(Debug, Clone, Default)]
pub struct SummaryTable {
    pub records: Vec<SnpRecord>,
    pub trait_label: String,
}

impl SummaryTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of records by SNP id.
    pub fn by_id(&self) -> HashMap<&str, &SnpRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }
}

/// Maps the required column roles onto header names of a summary-stats TSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub snp: String,
    pub chrom: String,
    pub pos: String,
    pub effect_allele: String,
    pub other_allele: String,
    pub beta: String,
    pub se: String,
    pub pvalue: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            snp: "snp".into(),
            chrom: "chrom".into(),
            pos: "pos".into(),
            effect_allele: "effect_allele".into(),
            other_allele: "other_allele".into(),
            beta: "beta".into(),
            se: "se".into(),
            pvalue: "pvalue".into(),
        }
    }
}

impl ColumnMap {
    /// Apply `role=name` overrides, e.g. `"snp=rsid,beta=b"`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
            let (role, name) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("bad column override '{part}', expected role=name"))
            })?;
            let name = name.trim().to_string();
            match role.trim() {
                "snp" => self.snp = name,
                "chrom" => self.chrom = name,
                "pos" => self.pos = name,
                "effect_allele" => self.effect_allele = name,
                "other_allele" => self.other_allele = name,
                "beta" => self.beta = name,
                "se" => self.se = name,
                "pvalue" => self.pvalue = name,
                other => {
                    return Err(Error::Config(format!("unknown column role '{other}'")));
                }
            }
        }
        Ok(self)
    }
}

/// Row-level bookkeeping from [`load_summary_stats`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadStats {
    pub rows: usize,
    pub dropped_nonfinite: usize,
    pub dropped_invalid: usize,
    pub dropped_duplicate: usize,
}

fn required_col(header: &HashMap<&str, usize>, name: &str, path: &Path) -> Result<usize> {
    header.get(name).copied().ok_or_else(|| {
        Error::Config(format!(
            "column '{name}' not found in header of {}",
            path.display()
        ))
    })
}

fn parse_allele(field: &str) -> Option<char> {
    let t = field.trim();
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

/// Load a summary-statistics TSV with a header row.
///
/// Rows whose beta or se fail to parse as finite numbers are dropped and
/// counted; rows violating the record invariants (se <= 0, p-value outside
/// [0,1], identical or multi-character alleles) are dropped and counted
/// separately, as are duplicate SNP ids (first occurrence wins).
pub fn load_summary_stats(
    path: &Path,
    columns: &ColumnMap,
    trait_label: &str,
) -> Result<(SummaryTable, LoadStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header_line = match lines.next() {
        Some((_, Ok(l))) => l,
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        None => return Err(Error::Empty(format!("{} has no header row", path.display()))),
    };
    let names: Vec<&str> = header_line.trim_end_matches('\r').split('\t').collect();
    let header: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let c_snp = required_col(&header, &columns.snp, path)?;
    let c_chrom = required_col(&header, &columns.chrom, path)?;
    let c_pos = required_col(&header, &columns.pos, path)?;
    let c_ea = required_col(&header, &columns.effect_allele, path)?;
    let c_oa = required_col(&header, &columns.other_allele, path)?;
    let c_beta = required_col(&header, &columns.beta, path)?;
    let c_se = required_col(&header, &columns.se, path)?;
    let c_p = required_col(&header, &columns.pvalue, path)?;

    let mut records = Vec::new();
    let mut stats = LoadStats::default();
    let mut seen: HashSet<String> = HashSet::new();

    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.rows += 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let max_col = [c_snp, c_chrom, c_pos, c_ea, c_oa, c_beta, c_se, c_p]
            .into_iter()
            .max()
            .unwrap();
        if fields.len() <= max_col {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected at least {} columns, found {}", max_col + 1, fields.len()),
            ));
        }

        let beta = fields[c_beta].trim().parse::<f64>().ok();
        let se = fields[c_se].trim().parse::<f64>().ok();
        let (beta, se) = match (beta, se) {
            (Some(b), Some(s)) if b.is_finite() && s.is_finite() => (b, s),
            _ => {
                stats.dropped_nonfinite += 1;
                continue;
            }
        };

        let pos = match fields[c_pos].trim().parse::<u64>() {
            Ok(p) => p,
            Err(_) => {
                stats.dropped_invalid += 1;
                continue;
            }
        };
        let pvalue = match fields[c_p].trim().parse::<f64>() {
            Ok(p) if p.is_finite() => p,
            _ => {
                stats.dropped_invalid += 1;
                continue;
            }
        };
        let (ea, oa) = match (parse_allele(fields[c_ea]), parse_allele(fields[c_oa])) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                stats.dropped_invalid += 1;
                continue;
            }
        };

        if se <= 0.0 || !(0.0..=1.0).contains(&pvalue) || ea == oa {
            stats.dropped_invalid += 1;
            continue;
        }

        let id = fields[c_snp].trim().to_string();
        if !seen.insert(id.clone()) {
            stats.dropped_duplicate += 1;
            continue;
        }

        records.push(SnpRecord {
            id,
            chrom: fields[c_chrom].trim().to_string(),
            pos,
            effect_allele: ea,
            other_allele: oa,
            beta,
            se,
            pvalue,
        });
    }

    if records.is_empty() {
        return Err(Error::Empty(format!(
            "{} contains no usable rows",
            path.display()
        )));
    }

    Ok((
        SummaryTable {
            records,
            trait_label: trait_label.to_string(),
        },
        stats,
    ))
}

/// Key giving the canonical genomic order: numeric chromosomes first in
/// numeric order, then non-numeric labels lexicographically, then position.
pub fn genomic_key(chrom: &str, pos: u64) -> (u8, u64, String, u64) {
    match chrom.trim().parse::<u64>() {
        Ok(n) => (0, n, String::new(), pos),
        Err(_) => (1, 0, chrom.trim().to_uppercase(), pos),
    }
}

/// Select instrument SNPs from the selection GWAS at a p-value threshold.
///
/// Returns SNP ids in genomic order. The threshold must lie in (0, 1].
pub fn select_instruments(selection: &SummaryTable, p_threshold: f64) -> Result<Vec<String>> {
    if !(p_threshold > 0.0 && p_threshold <= 1.0) {
        return Err(Error::Config(format!(
            "p-value threshold must be in (0, 1], got {p_threshold}"
        )));
    }
    let mut hits: Vec<&SnpRecord> = selection
        .records
        .iter()
        .filter(|r| r.pvalue <= p_threshold)
        .collect();
    if hits.is_empty() {
        return Err(Error::Empty(format!(
            "no SNP passes the selection threshold {p_threshold}"
        )));
    }
    hits.sort_by_key(|r| genomic_key(&r.chrom, r.pos));
    Ok(hits.iter().map(|r| r.id.clone()).collect())
}

/// SNP metadata for the reference panel (no association statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnpMeta {
    pub id: String,
    pub chrom: String,
    pub pos: u64,
    pub effect_allele: char,
    pub other_allele: char,
}

/// Load reference-panel SNP metadata: TSV with header
/// `snp chrom pos effect_allele other_allele`, one row per panel column.
pub fn load_snp_meta(path: &Path) -> Result<Vec<SnpMeta>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if f.len() < 5 {
            return Err(Error::parse(path, lineno + 1, "expected 5 columns"));
        }
        let pos = f[2]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(path, lineno + 1, format!("bad position: {e}")))?;
        let ea = parse_allele(f[3])
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad effect allele"))?;
        let oa = parse_allele(f[4])
            .ok_or_else(|| Error::parse(path, lineno + 1, "bad other allele"))?;
        out.push(SnpMeta {
            id: f[0].trim().to_string(),
            chrom: f[1].trim().to_string(),
            pos,
            effect_allele: ea,
            other_allele: oa,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{} has no SNP rows", path.display())));
    }
    Ok(out)
}

/// Half-open genome interval `[start, end)` on one chromosome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBoundary {
    pub chrom: String,
    pub start: u64,
    pub end: u64,
}

/// Load LD-block boundaries: TSV with header `chrom start end`.
pub fn load_blocks(path: &Path) -> Result<Vec<BlockBoundary>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if f.len() < 3 {
            return Err(Error::parse(path, lineno + 1, "expected 3 columns"));
        }
        let start = f[1]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(path, lineno + 1, format!("bad start: {e}")))?;
        let end = f[2]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(path, lineno + 1, format!("bad end: {e}")))?;
        if end <= start {
            return Err(Error::parse(path, lineno + 1, "end must exceed start"));
        }
        out.push(BlockBoundary {
            chrom: f[0].trim().to_string(),
            start,
            end,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{} has no blocks", path.display())));
    }
    out.sort_by_key(|b| genomic_key(&b.chrom, b.start));
    Ok(out)
}

/// Aligned exposure/outcome summary statistics for the selected instruments.
///
/// All vectors have length J; SNPs are in genomic order and each block's
/// SNPs are contiguous, with `block_index` non-decreasing in 0..Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizedDataset {
    pub snp_ids: Vec<String>,
    pub exposure_beta: Vec<f64>,
    pub exposure_se: Vec<f64>,
    pub outcome_beta: Vec<f64>,
    pub outcome_se: Vec<f64>,
    pub block_index: Vec<usize>,
}

impl HarmonizedDataset {
    pub fn len(&self) -> usize {
        self.snp_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snp_ids.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_index.last().map_or(0, |q| q + 1)
    }

    /// Number of SNPs in each block, in block order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_blocks()];
        for &b in &self.block_index {
            sizes[b] += 1;
        }
        sizes
    }

    /// Check the structural invariants (lengths, positivity, contiguity).
    pub fn validate(&self) -> Result<()> {
        let j = self.snp_ids.len();
        if j == 0 {
            return Err(Error::Empty("dataset has no SNPs".into()));
        }
        if [
            self.exposure_beta.len(),
            self.exposure_se.len(),
            self.outcome_beta.len(),
            self.outcome_se.len(),
            self.block_index.len(),
        ]
        .iter()
        .any(|&l| l != j)
        {
            return Err(Error::Config("dataset vectors have mismatched lengths".into()));
        }
        if self
            .exposure_se
            .iter()
            .chain(self.outcome_se.iter())
            .any(|&s| !(s > 0.0) || !s.is_finite())
        {
            return Err(Error::Config("standard errors must be positive and finite".into()));
        }
        if self.block_index[0] != 0 {
            return Err(Error::Config("block indices must start at 0".into()));
        }
        for w in self.block_index.windows(2) {
            if w[1] != w[0] && w[1] != w[0] + 1 {
                return Err(Error::Config("block indices must be dense and non-decreasing".into()));
            }
        }
        Ok(())
    }

    /// Restrict the dataset to the given SNP positions (ascending order);
    /// blocks are renumbered densely.
    pub fn subset(&self, keep: &[usize]) -> Result<HarmonizedDataset> {
        let mut idx: Vec<usize> = keep.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() {
            return Err(Error::Empty("subset selects no SNPs".into()));
        }
        if *idx.last().unwrap() >= self.len() {
            return Err(Error::Config("subset index out of range".into()));
        }
        let mut out = HarmonizedDataset {
            snp_ids: Vec::with_capacity(idx.len()),
            exposure_beta: Vec::with_capacity(idx.len()),
            exposure_se: Vec::with_capacity(idx.len()),
            outcome_beta: Vec::with_capacity(idx.len()),
            outcome_se: Vec::with_capacity(idx.len()),
            block_index: Vec::with_capacity(idx.len()),
        };
        let mut next_block = 0usize;
        let mut last_orig: Option<usize> = None;
        for &i in &idx {
            out.snp_ids.push(self.snp_ids[i].clone());
            out.exposure_beta.push(self.exposure_beta[i]);
            out.exposure_se.push(self.exposure_se[i]);
            out.outcome_beta.push(self.outcome_beta[i]);
            out.outcome_se.push(self.outcome_se[i]);
            let b = self.block_index[i];
            if let Some(prev) = last_orig {
                if b != prev {
                    next_block += 1;
                }
            }
            out.block_index.push(next_block);
            last_orig = Some(b);
        }
        Ok(out)
    }
}

/// Per-SNP drop record for the harmonization report.
#[derive(Debug, Clone, Serialize)]
pub struct DroppedSnp {
    pub id: String,
    pub reason: &'static str,
}

/// Counts and per-SNP flags produced by [`harmonize`].
#[derive(Debug, Clone, Default)]
pub struct HarmonizeStats {
    pub requested: usize,
    pub kept: usize,
    pub dropped_missing: usize,
    pub dropped_ambiguous: usize,
    pub dropped_irreconcilable: usize,
    pub dropped_unblocked: usize,
    pub flipped_outcome: usize,
    /// For each kept SNP: true when the reference-panel dosage column must be
    /// reoriented (2 - g) to match the exposure effect allele.
    pub reference_flip: Vec<bool>,
    pub dropped: Vec<DroppedSnp>,
}

fn is_strand_ambiguous(a: char, b: char) -> bool {
    matches!((a, b), ('A', 'T') | ('T', 'A') | ('C', 'G') | ('G', 'C'))
}

/// match -> Some(false), swap -> Some(true), otherwise None.
fn allele_orientation(ea: char, oa: char, ea2: char, oa2: char) -> Option<bool> {
    if ea == ea2 && oa == oa2 {
        Some(false)
    } else if ea == oa2 && oa == ea2 {
        Some(true)
    } else {
        None
    }
}

/// Align exposure, outcome and reference-panel SNPs on the instrument list.
///
/// Keeps the intersection of the three sources, flips outcome betas for
/// swapped allele codings, drops strand-ambiguous and irreconcilable SNPs,
/// orders everything genomically, and assigns LD-block indices from the
/// boundary intervals. Errors only when nothing survives.
pub fn harmonize(
    exposure: &SummaryTable,
    outcome: &SummaryTable,
    instruments: &[String],
    reference: &[SnpMeta],
    blocks: &[BlockBoundary],
) -> Result<(HarmonizedDataset, HarmonizeStats)> {
    if instruments.is_empty() {
        return Err(Error::Empty("instrument list is empty".into()));
    }
    let exp_idx = exposure.by_id();
    let out_idx = outcome.by_id();
    let ref_idx: HashMap<&str, &SnpMeta> = reference.iter().map(|m| (m.id.as_str(), m)).collect();

    let mut stats = HarmonizeStats {
        requested: instruments.len(),
        ..Default::default()
    };

    struct Row<'a> {
        exp: &'a SnpRecord,
        outcome_beta: f64,
        outcome_se: f64,
        ref_flip: bool,
    }

    let mut rows: Vec<Row> = Vec::new();
    for id in instruments {
        let (exp, out, meta) = match (
            exp_idx.get(id.as_str()),
            out_idx.get(id.as_str()),
            ref_idx.get(id.as_str()),
        ) {
            (Some(e), Some(o), Some(m)) => (*e, *o, *m),
            _ => {
                stats.dropped_missing += 1;
                stats.dropped.push(DroppedSnp {
                    id: id.clone(),
                    reason: "missing_from_source",
                });
                continue;
            }
        };

        if is_strand_ambiguous(exp.effect_allele, exp.other_allele) {
            stats.dropped_ambiguous += 1;
            stats.dropped.push(DroppedSnp {
                id: id.clone(),
                reason: "strand_ambiguous",
            });
            continue;
        }

        let out_orient = allele_orientation(
            exp.effect_allele,
            exp.other_allele,
            out.effect_allele,
            out.other_allele,
        );
        let ref_orient = allele_orientation(
            exp.effect_allele,
            exp.other_allele,
            meta.effect_allele,
            meta.other_allele,
        );
        let (out_swap, ref_swap) = match (out_orient, ref_orient) {
            (Some(o), Some(r)) => (o, r),
            _ => {
                stats.dropped_irreconcilable += 1;
                stats.dropped.push(DroppedSnp {
                    id: id.clone(),
                    reason: "irreconcilable_alleles",
                });
                continue;
            }
        };

        if out_swap {
            stats.flipped_outcome += 1;
        }
        rows.push(Row {
            exp,
            outcome_beta: if out_swap { -out.beta } else { out.beta },
            outcome_se: out.se,
            ref_flip: ref_swap,
        });
    }

    if rows.is_empty() {
        return Err(Error::Empty(
            "no instrument survives the exposure/outcome/reference intersection".into(),
        ));
    }

    rows.sort_by_key(|r| genomic_key(&r.exp.chrom, r.exp.pos));

    // Assign block indices from the boundary intervals, then renumber densely.
    let mut kept: Vec<(Row, usize)> = Vec::new();
    for row in rows {
        let hit = blocks.iter().position(|b| {
            b.chrom.trim().eq_ignore_ascii_case(row.exp.chrom.trim())
                && row.exp.pos >= b.start
                && row.exp.pos < b.end
        });
        match hit {
            Some(b) => kept.push((row, b)),
            None => {
                stats.dropped_unblocked += 1;
                stats.dropped.push(DroppedSnp {
                    id: row.exp.id.clone(),
                    reason: "outside_block_boundaries",
                });
            }
        }
    }

    if kept.is_empty() {
        return Err(Error::Empty(
            "no instrument falls inside the block boundaries".into(),
        ));
    }

    let mut dataset = HarmonizedDataset {
        snp_ids: Vec::with_capacity(kept.len()),
        exposure_beta: Vec::with_capacity(kept.len()),
        exposure_se: Vec::with_capacity(kept.len()),
        outcome_beta: Vec::with_capacity(kept.len()),
        outcome_se: Vec::with_capacity(kept.len()),
        block_index: Vec::with_capacity(kept.len()),
    };
    let mut next = 0usize;
    let mut last_raw: Option<usize> = None;
    for (row, raw_block) in kept {
        if let Some(prev) = last_raw {
            if raw_block != prev {
                next += 1;
            }
        }
        last_raw = Some(raw_block);
        dataset.snp_ids.push(row.exp.id.clone());
        dataset.exposure_beta.push(row.exp.beta);
        dataset.exposure_se.push(row.exp.se);
        dataset.outcome_beta.push(row.outcome_beta);
        dataset.outcome_se.push(row.outcome_se);
        dataset.block_index.push(next);
        stats.reference_flip.push(row.ref_flip);
    }
    stats.kept = dataset.len();

    dataset.validate()?;
    Ok((dataset, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn write_tsv(content: &str) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    const HEADER: &str = "snp\tchrom\tpos\teffect_allele\tother_allele\tbeta\tse\tpvalue\n";

    fn rec(id: &str, chrom: &str, pos: u64, ea: char, oa: char, beta: f64, se: f64, p: f64) -> SnpRecord {
        SnpRecord {
            id: id.into(),
            chrom: chrom.into(),
            pos,
            effect_allele: ea,
            other_allele: oa,
            beta,
            se,
            pvalue: p,
        }
    }

    #[test]
    fn load_passes_through_finite_rows() {
        let f = write_tsv(&format!(
            "{HEADER}rs1\t1\t100\tA\tG\t0.1\t0.05\t0.01\nrs2\t1\t200\tC\tA\t-0.2\t0.04\t0.5\nrs3\t2\t50\tT\tC\t0.0\t0.1\t1.0\n"
        ));
        let (table, stats) = load_summary_stats(f.path(), &ColumnMap::default(), "x").unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(stats.rows, 3);
        assert_eq!(stats.dropped_nonfinite, 0);
        assert_eq!(table.records[1].beta, -0.2);
    }

    #[test]
    fn load_drops_and_counts_na_se() {
        let f = write_tsv(&format!(
            "{HEADER}rs1\t1\t100\tA\tG\t0.1\tNA\t0.01\nrs2\t1\t200\tC\tA\t-0.2\t0.04\t0.5\n"
        ));
        let (table, stats) = load_summary_stats(f.path(), &ColumnMap::default(), "x").unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(stats.dropped_nonfinite, 1);
    }

    #[test]
    fn load_missing_mapped_column_is_config_error() {
        let f = write_tsv("snp\tchrom\tpos\teffect_allele\tother_allele\tbeta\tpvalue\nrs1\t1\t1\tA\tG\t0.1\t0.5\n");
        let err = load_summary_stats(f.path(), &ColumnMap::default(), "x").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn load_all_rows_unusable_is_empty_error() {
        let f = write_tsv(&format!("{HEADER}rs1\t1\t100\tA\tG\tNA\tNA\t0.01\n"));
        let err = load_summary_stats(f.path(), &ColumnMap::default(), "x").unwrap_err();
        assert!(matches!(err, Error::Empty(_)), "{err}");
    }

    #[test]
    fn load_renamed_columns_via_overrides() {
        let f = write_tsv("rsid\tchrom\tpos\tA1\tA2\tb\tstderr\tp\nrs1\t1\t5\tA\tG\t1.0\t0.1\t0.2\n");
        let map = ColumnMap::default()
            .with_overrides("snp=rsid,effect_allele=A1,other_allele=A2,beta=b,se=stderr,pvalue=p")
            .unwrap();
        let (table, _) = load_summary_stats(f.path(), &map, "x").unwrap();
        assert_eq!(table.records[0].id, "rs1");
    }

    #[test]
    fn select_filters_and_orders() {
        let table = SummaryTable {
            records: vec![
                rec("b", "2", 10, 'A', 'G', 0.1, 0.1, 3e-4),
                rec("a", "1", 99, 'A', 'G', 0.1, 0.1, 1e-5),
                rec("c", "1", 5, 'A', 'G', 0.1, 0.1, 0.2),
            ],
            trait_label: "sel".into(),
        };
        let got = select_instruments(&table, 1e-4).unwrap();
        assert_eq!(got, vec!["a".to_string()]);
        let all = select_instruments(&table, 1.0).unwrap();
        assert_eq!(all, vec!["c".to_string(), "a".to_string(), "b".to_string()]);
        assert!(matches!(select_instruments(&table, 1e-9), Err(Error::Empty(_))));
        assert!(matches!(select_instruments(&table, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn select_is_monotone_in_threshold_brute_force() {
        // Brute-force oracle: selecting at each threshold independently and
        // checking set inclusion across the paper's three thresholds.
        let mut records = Vec::new();
        let mut state = 88172645463325252u64;
        let mut next = || {
            // xorshift64
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..200 {
            let p = 10f64.powf(-6.0 * next());
            records.push(rec(&format!("rs{i}"), "1", 100 + i as u64, 'A', 'G', 0.1, 0.1, p));
        }
        let table = SummaryTable { records, trait_label: "sel".into() };
        let thresholds = [1e-4, 5e-4, 1e-3];
        let sets: Vec<HashSet<String>> = thresholds
            .iter()
            .map(|t| select_instruments(&table, *t).unwrap().into_iter().collect())
            .collect();
        assert!(sets[0].is_subset(&sets[1]));
        assert!(sets[1].is_subset(&sets[2]));
        // Oracle: direct filter at each threshold.
        for (t, set) in thresholds.iter().zip(&sets) {
            let expect: HashSet<String> = table
                .records
                .iter()
                .filter(|r| r.pvalue <= *t)
                .map(|r| r.id.clone())
                .collect();
            assert_eq!(*set, expect);
        }
    }

    fn toy_meta(ids: &[(&str, char, char)]) -> Vec<SnpMeta> {
        ids.iter()
            .enumerate()
            .map(|(i, (id, ea, oa))| SnpMeta {
                id: id.to_string(),
                chrom: "1".into(),
                pos: 100 * (i as u64 + 1),
                effect_allele: *ea,
                other_allele: *oa,
            })
            .collect()
    }

    fn one_block() -> Vec<BlockBoundary> {
        vec![BlockBoundary { chrom: "1".into(), start: 0, end: 1_000_000 }]
    }

    #[test]
    fn harmonize_identity_coding_passes_through() {
        let exposure = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'A', 'G', 0.5, 0.1, 1e-6)],
            trait_label: "x".into(),
        };
        let outcome = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'A', 'G', 0.3, 0.2, 1e-3)],
            trait_label: "y".into(),
        };
        let (ds, stats) = harmonize(
            &exposure,
            &outcome,
            &["rs1".into()],
            &toy_meta(&[("rs1", 'A', 'G')]),
            &one_block(),
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.outcome_beta[0], 0.3);
        assert_eq!(stats.flipped_outcome, 0);
        assert!(!stats.reference_flip[0]);
    }

    #[test]
    fn harmonize_swapped_alleles_flip_outcome_sign() {
        let exposure = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'A', 'G', 0.5, 0.1, 1e-6)],
            trait_label: "x".into(),
        };
        let outcome = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'G', 'A', 0.3, 0.2, 1e-3)],
            trait_label: "y".into(),
        };
        let (ds, stats) = harmonize(
            &exposure,
            &outcome,
            &["rs1".into()],
            &toy_meta(&[("rs1", 'A', 'G')]),
            &one_block(),
        )
        .unwrap();
        assert_eq!(ds.outcome_beta[0], -0.3);
        assert_eq!(stats.flipped_outcome, 1);
    }

    #[test]
    fn harmonize_drops_ambiguous_and_counts() {
        let mut exp_records = Vec::new();
        let mut out_records = Vec::new();
        let mut metas = Vec::new();
        for i in 0..10u64 {
            let (ea, oa) = if i == 3 { ('A', 'T') } else { ('A', 'G') };
            exp_records.push(rec(&format!("rs{i}"), "1", 100 + i, ea, oa, 0.1, 0.1, 0.01));
            out_records.push(rec(&format!("rs{i}"), "1", 100 + i, ea, oa, 0.2, 0.1, 0.01));
            metas.push(SnpMeta {
                id: format!("rs{i}"),
                chrom: "1".into(),
                pos: 100 + i,
                effect_allele: ea,
                other_allele: oa,
            });
        }
        let exposure = SummaryTable { records: exp_records, trait_label: "x".into() };
        let outcome = SummaryTable { records: out_records, trait_label: "y".into() };
        let instruments: Vec<String> = (0..10).map(|i| format!("rs{i}")).collect();
        let (ds, stats) = harmonize(&exposure, &outcome, &instruments, &metas, &one_block()).unwrap();
        assert_eq!(ds.len(), 9);
        assert_eq!(stats.dropped_ambiguous, 1);
    }

    #[test]
    fn harmonize_irreconcilable_dropped_error_when_all_drop() {
        let exposure = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'A', 'G', 0.5, 0.1, 1e-6)],
            trait_label: "x".into(),
        };
        let outcome = SummaryTable {
            records: vec![rec("rs1", "1", 100, 'A', 'C', 0.3, 0.2, 1e-3)],
            trait_label: "y".into(),
        };
        let err = harmonize(
            &exposure,
            &outcome,
            &["rs1".into()],
            &toy_meta(&[("rs1", 'A', 'G')]),
            &one_block(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn harmonize_is_idempotent() {
        // Re-harmonizing tables rebuilt from a harmonized dataset must give
        // back the identical dataset.
        let exposure = SummaryTable {
            records: vec![
                rec("rs1", "1", 100, 'A', 'G', 0.5, 0.1, 1e-6),
                rec("rs2", "1", 200, 'C', 'A', -0.2, 0.15, 1e-5),
            ],
            trait_label: "x".into(),
        };
        let outcome = SummaryTable {
            records: vec![
                rec("rs1", "1", 100, 'G', 'A', 0.3, 0.2, 1e-3),
                rec("rs2", "1", 200, 'C', 'A', 0.1, 0.25, 0.02),
            ],
            trait_label: "y".into(),
        };
        let meta = toy_meta(&[("rs1", 'A', 'G'), ("rs2", 'C', 'A')]);
        let instruments = vec!["rs1".to_string(), "rs2".to_string()];
        let (first, _) = harmonize(&exposure, &outcome, &instruments, &meta, &one_block()).unwrap();

        // Rebuild source tables in the harmonized (exposure) coding.
        let exp2 = SummaryTable {
            records: first
                .snp_ids
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let orig = exposure.records.iter().find(|r| &r.id == id).unwrap();
                    rec(id, &orig.chrom, orig.pos, orig.effect_allele, orig.other_allele,
                        first.exposure_beta[i], first.exposure_se[i], orig.pvalue)
                })
                .collect(),
            trait_label: "x".into(),
        };
        let out2 = SummaryTable {
            records: first
                .snp_ids
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let orig = exposure.records.iter().find(|r| &r.id == id).unwrap();
                    rec(id, &orig.chrom, orig.pos, orig.effect_allele, orig.other_allele,
                        first.outcome_beta[i], first.outcome_se[i], 0.5)
                })
                .collect(),
            trait_label: "y".into(),
        };
        let (second, stats2) = harmonize(&exp2, &out2, &first.snp_ids, &meta, &one_block()).unwrap();
        assert_eq!(first, second);
        assert_eq!(stats2.flipped_outcome, 0);
    }

    #[test]
    fn harmonized_snps_present_in_all_sources() {
        let exposure = SummaryTable {
            records: vec![
                rec("rs1", "1", 100, 'A', 'G', 0.5, 0.1, 1e-6),
                rec("rs2", "1", 200, 'C', 'A', -0.2, 0.15, 1e-5),
                rec("rs3", "1", 300, 'T', 'C', 0.4, 0.15, 1e-4),
            ],
            trait_label: "x".into(),
        };
        let outcome = SummaryTable {
            records: vec![
                rec("rs1", "1", 100, 'A', 'G', 0.3, 0.2, 1e-3),
                rec("rs3", "1", 300, 'T', 'C', 0.2, 0.2, 1e-2),
            ],
            trait_label: "y".into(),
        };
        // rs3 missing from the reference panel.
        let meta = toy_meta(&[("rs1", 'A', 'G'), ("rs2", 'C', 'A')]);
        let instruments = vec!["rs1".into(), "rs2".into(), "rs3".into()];
        let (ds, stats) = harmonize(&exposure, &outcome, &instruments, &meta, &one_block()).unwrap();
        assert_eq!(ds.snp_ids, vec!["rs1".to_string()]);
        assert_eq!(stats.dropped_missing, 2);
        for id in &ds.snp_ids {
            assert!(exposure.by_id().contains_key(id.as_str()));
            assert!(outcome.by_id().contains_key(id.as_str()));
            assert!(meta.iter().any(|m| &m.id == id));
        }
    }

    #[test]
    fn subset_renumbers_blocks() {
        let ds = HarmonizedDataset {
            snp_ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            exposure_beta: vec![1.0, 2.0, 3.0, 4.0],
            exposure_se: vec![0.1; 4],
            outcome_beta: vec![0.0; 4],
            outcome_se: vec![0.1; 4],
            block_index: vec![0, 0, 1, 2],
        };
        let sub = ds.subset(&[0, 3]).unwrap();
        assert_eq!(sub.block_index, vec![0, 1]);
        assert_eq!(sub.snp_ids, vec!["a".to_string(), "d".to_string()]);
        sub.validate().unwrap();
    }
}
