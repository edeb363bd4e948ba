//! Block-diagonal LD estimation from a reference panel.
//!
//! Per-block correlation matrices are shrunk toward the identity,
//! `(1 - lambda) * R + lambda * I`, which keeps every block positive
//! definite with minimum eigenvalue >= lambda. Blocks are assembled into a
//! [`BlockLdMatrix`] whose Cholesky factors are cached once and reused by
//! every downstream quadratic form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Reference-panel dosages for one LD block (samples x SNPs, values in [0,2]).
#[derive(Debug, Clone)]
pub struct GenotypeBlock {
    pub dosages: DMatrix<f64>,
    pub snp_ids: Vec<String>,
}

impl GenotypeBlock {
    pub fn n_samples(&self) -> usize {
        self.dosages.nrows()
    }

    pub fn n_snps(&self) -> usize {
        self.dosages.ncols()
    }
}

/// Shrinkage estimate of one block's SNP correlation matrix.
///
/// Columns are standardized internally; the result is
/// `(1 - lambda) * R + lambda * I` with `R` the sample correlation matrix.
pub fn estimate_block_ld(block: &GenotypeBlock, lambda: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!(
            "shrinkage lambda must be in [0, 1], got {lambda}"
        )));
    }
    let n = block.n_samples();
    let m = block.n_snps();
    if n < 2 {
        return Err(Error::Config(format!(
            "LD estimation needs at least 2 panel samples, got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::Empty("genotype block has no SNPs".into()));
    }

    // Standardize columns to mean 0, unit sample variance.
    let mut z = block.dosages.clone();
    for c in 0..m {
        let mut col = z.column_mut(c);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        let var = ss / (n as f64 - 1.0);
        if var <= 0.0 || !var.is_finite() {
            let id = block
                .snp_ids
                .get(c)
                .map(String::as_str)
                .unwrap_or("<unnamed>");
            return Err(Error::Numeric(format!(
                "degenerate (zero-variance) panel column for SNP {id}"
            )));
        }
        let sd = var.sqrt();
        col.iter_mut().for_each(|v| *v /= sd);
    }

    let mut r = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        r[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let dot: f64 = z.column(i).dot(&z.column(j)) / (n as f64 - 1.0);
            let v = (1.0 - lambda) * dot;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    // Diagonal stays exactly 1: (1 - lambda) * 1 + lambda * 1.
    Ok(r)
}

/// Block-diagonal shrunken SNP correlation matrix with cached factorizations.
#[derive(Debug, Clone)]
pub struct BlockLdMatrix {
    blocks: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
    lambda: f64,
    chols: Vec<Cholesky<f64, Dyn>>,
    ln_dets: Vec<f64>,
    dim: usize,
}

/// Validate and assemble per-block correlation matrices in block order.
pub fn assemble_block_diagonal(blocks: Vec<DMatrix<f64>>, lambda: f64) -> Result<BlockLdMatrix> {
    if blocks.is_empty() {
        return Err(Error::Empty("no LD blocks to assemble".into()));
    }
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut chols = Vec::with_capacity(blocks.len());
    let mut ln_dets = Vec::with_capacity(blocks.len());
    let mut dim = 0usize;
    for (k, b) in blocks.iter().enumerate() {
        if b.nrows() != b.ncols() || b.nrows() == 0 {
            return Err(Error::Config(format!(
                "LD block {k} is not a non-empty square matrix ({}x{})",
                b.nrows(),
                b.ncols()
            )));
        }
        for i in 0..b.nrows() {
            if (b[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(Error::Config(format!(
                    "LD block {k} has non-unit diagonal at {i}: {}",
                    b[(i, i)]
                )));
            }
            for j in (i + 1)..b.ncols() {
                if (b[(i, j)] - b[(j, i)]).abs() > 1e-10 {
                    return Err(Error::Config(format!(
                        "LD block {k} is asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let chol = b.clone().cholesky().ok_or_else(|| {
            Error::Numeric(format!("LD block {k} is not positive definite"))
        })?;
        let ln_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        offsets.push(dim);
        dim += b.nrows();
        chols.push(chol);
        ln_dets.push(ln_det);
    }
    Ok(BlockLdMatrix {
        blocks,
        offsets,
        lambda,
        chols,
        ln_dets,
        dim,
    })
}

impl BlockLdMatrix {
    /// Identity LD with the given block sizes.
    pub fn identity(block_sizes: &[usize]) -> Result<BlockLdMatrix> {
        let blocks = block_sizes
            .iter()
            .map(|&m| DMatrix::<f64>::identity(m, m))
            .collect();
        assemble_block_diagonal(blocks, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    /// Index range of block `k` in the global SNP ordering.
    pub fn block_range(&self, k: usize) -> Range<usize> {
        let start = self.offsets[k];
        start..start + self.blocks[k].nrows()
    }

    /// Entry (i, j) of the full matrix; zero across blocks.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (ki, ai) = self.locate(i);
        let (kj, aj) = self.locate(j);
        if ki == kj {
            self.blocks[ki][(ai, aj)]
        } else {
            0.0
        }
    }

    /// (block index, within-block index) of global SNP index `i`.
    pub fn locate(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.dim);
        let k = match self.offsets.binary_search(&i) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        (k, i - self.offsets[k])
    }

    /// Blockwise matrix-vector product `Theta * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (k, b) in self.blocks.iter().enumerate() {
            let r = self.block_range(k);
            let xv = DVector::from_column_slice(&x[r.clone()]);
            let y = b * xv;
            out[r].copy_from_slice(y.as_slice());
        }
        out
    }

    /// Blockwise solve `Theta^{-1} x` using the cached Cholesky factors.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (k, chol) in self.chols.iter().enumerate() {
            let r = self.block_range(k);
            let xv = DVector::from_column_slice(&x[r.clone()]);
            let y = chol.solve(&xv);
            out[r].copy_from_slice(y.as_slice());
        }
        out
    }

    /// Quadratic form `x^T Theta x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let tx = self.matvec(x);
        x.iter().zip(tx.iter()).map(|(a, b)| a * b).sum()
    }

    /// Inverse quadratic form `x^T Theta^{-1} x`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let sx = self.solve(x);
        x.iter().zip(sx.iter()).map(|(a, b)| a * b).sum()
    }

    /// Log-determinant of the full block-diagonal matrix.
    pub fn ln_det(&self) -> f64 {
        self.ln_dets.iter().sum()
    }

    /// Dense copy; intended for small J (tests, oracles).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(self.dim, self.dim);
        for (k, b) in self.blocks.iter().enumerate() {
            let o = self.offsets[k];
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    m[(o + i, o + j)] = b[(i, j)];
                }
            }
        }
        m
    }

    /// Serialize: magic, version, J, Q, lambda, block sizes, then row-major
    /// block payloads (little-endian f64).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);
        w.write_all(b"RBLD").map_err(io_err)?;
        w.write_u32::<LittleEndian>(1).map_err(io_err)?;
        w.write_u64::<LittleEndian>(self.dim as u64).map_err(io_err)?;
        w.write_u64::<LittleEndian>(self.blocks.len() as u64)
            .map_err(io_err)?;
        w.write_f64::<LittleEndian>(self.lambda).map_err(io_err)?;
        for b in &self.blocks {
            w.write_u64::<LittleEndian>(b.nrows() as u64).map_err(io_err)?;
        }
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    w.write_f64::<LittleEndian>(b[(i, j)]).map_err(io_err)?;
                }
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<BlockLdMatrix> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != b"RBLD" {
            return Err(Error::parse(path, 0, "bad magic, not an LD container"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != 1 {
            return Err(Error::parse(path, 0, format!("unsupported version {version}")));
        }
        let dim = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        let q = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        let lambda = r.read_f64::<LittleEndian>().map_err(io_err)?;
        let mut sizes = Vec::with_capacity(q);
        for _ in 0..q {
            sizes.push(r.read_u64::<LittleEndian>().map_err(io_err)? as usize);
        }
        if sizes.iter().sum::<usize>() != dim {
            return Err(Error::parse(path, 0, "block sizes do not sum to J"));
        }
        let mut blocks = Vec::with_capacity(q);
        for &m in &sizes {
            let mut b = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    b[(i, j)] = r.read_f64::<LittleEndian>().map_err(io_err)?;
                }
            }
            blocks.push(b);
        }
        assemble_block_diagonal(blocks, lambda)
    }
}

/// A pruning candidate: dataset position plus its selection p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneCandidate {
    pub index: usize,
    pub pvalue: f64,
}

/// Greedy LD pruning.
///
/// Visits candidates by ascending p-value (ties by index) and retains a SNP
/// iff its squared correlation with every already-retained SNP is below the
/// threshold. Cross-block correlations are zero by construction. Returns the
/// retained dataset positions in ascending order.
pub fn ld_prune(
    candidates: &[PruneCandidate],
    ld: &BlockLdMatrix,
    r2_threshold: f64,
) -> Vec<usize> {
    let mut order: Vec<&PruneCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        a.pvalue
            .partial_cmp(&b.pvalue)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index))
    });

    let mut retained: Vec<usize> = Vec::new();
    // Retained SNPs grouped by block to skip cross-block checks.
    let mut by_block: Vec<Vec<usize>> = vec![Vec::new(); ld.n_blocks()];
    for cand in order {
        let (k, _) = ld.locate(cand.index);
        let ok = by_block[k].iter().all(|&other| {
            let r = ld.entry(cand.index, other);
            r * r < r2_threshold
        });
        if ok {
            by_block[k].push(cand.index);
            retained.push(cand.index);
        }
    }
    retained.sort_unstable();
    retained
}

/// Load a whitespace-separated dosage matrix (samples x SNPs).
pub fn load_genotype_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in std::io::BufRead::lines(BufReader::new(file)).enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(|t| t.parse::<f64>()).collect();
        let row = row.map_err(|e| Error::parse(path, lineno + 1, format!("bad dosage: {e}")))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(path, lineno + 1, "ragged dosage row"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no dosage rows", path.display())));
    }
    let n = rows.len();
    let m = rows[0].len();
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Cut a full panel matrix into per-block [`GenotypeBlock`]s following the
/// dataset's block sizes, applying per-SNP orientation flips (dosage 2 - g).
pub fn panel_blocks(
    panel: &DMatrix<f64>,
    snp_ids: &[String],
    block_sizes: &[usize],
    flip: &[bool],
) -> Result<Vec<GenotypeBlock>> {
    let j: usize = block_sizes.iter().sum();
    if panel.ncols() != j || snp_ids.len() != j || flip.len() != j {
        return Err(Error::Config(format!(
            "panel has {} columns but the dataset has {j} SNPs",
            panel.ncols()
        )));
    }
    let mut out = Vec::with_capacity(block_sizes.len());
    let mut start = 0usize;
    for &m in block_sizes {
        let mut dosages = DMatrix::<f64>::zeros(panel.nrows(), m);
        for c in 0..m {
            let src = panel.column(start + c);
            if flip[start + c] {
                dosages.column_mut(c).zip_apply(&src, |d, s| *d = 2.0 - s);
            } else {
                dosages.column_mut(c).copy_from(&src);
            }
        }
        out.push(GenotypeBlock {
            dosages,
            snp_ids: snp_ids[start..start + m].to_vec(),
        });
        start += m;
    }
    Ok(out)
}
