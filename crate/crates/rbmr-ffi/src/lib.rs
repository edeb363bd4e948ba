//! C ABI over the RBMR core: opaque handles, status codes, and a
//! last-error message per thread. The generated header lands in
//! `include/rbmr.h` at build time.
//!
//! Ownership rules: every `*_new`/`rbmr_fit` pointer must be released with
//! the matching `*_free`; strings returned by `rbmr_last_error` must be
//! released with `rbmr_string_free`. Handles are not thread-safe; share
//! them across threads only behind external synchronization.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::slice;

use rbmr_core::error::Error;
use rbmr_core::ingest::HarmonizedDataset;
use rbmr_core::ld::{assemble_block_diagonal, BlockLdMatrix};
use rbmr_core::model::HyperParams;
use rbmr_core::vbem::{fit, FitOptions, FitResult};

/// Status codes mirroring the CLI exit-code contract.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmrStatus {
    Ok = 0,
    ConfigError = 1,
    EmptyInput = 2,
    NumericError = 3,
    NullPointer = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let cstring = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_of(err: &Error) -> RbmrStatus {
    match err.exit_code() {
        1 => RbmrStatus::ConfigError,
        2 => RbmrStatus::EmptyInput,
        _ => RbmrStatus::NumericError,
    }
}

/// Opaque harmonized dataset handle.
pub struct RbmrDataset(HarmonizedDataset);

/// Opaque block-diagonal LD matrix handle.
pub struct RbmrLd(BlockLdMatrix);

/// Opaque fit-result handle.
pub struct RbmrFit(FitResult);

/// Fit options passed by value across the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RbmrFitOptions {
    pub max_iter: u64,
    pub elbo_rel_tol: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
}

/// Baseline estimator output passed by value across the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RbmrBaselineResult {
    pub beta_hat: f64,
    pub se: f64,
    pub pvalue: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub has_intercept: bool,
    pub n_snps: u64,
}

/// Version string of the linked library; static storage, do not free.
#[no_mangle]
pub extern "C" fn rbmr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread, or NULL. The caller
/// owns the returned string and must free it with `rbmr_string_free`.
#[no_mangle]
pub extern "C" fn rbmr_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.clone().into_raw())
            .unwrap_or(std::ptr::null_mut())
    })
}

/// # Safety
/// `s` must be a pointer returned by `rbmr_last_error` (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default fit options (10000 iterations, 1e-7 relative ELBO tolerance,
/// Gamma(2, 2) scale-weight prior).
#[no_mangle]
pub extern "C" fn rbmr_fit_options_default() -> RbmrFitOptions {
    let opts = FitOptions::default();
    let hyper = HyperParams::default();
    RbmrFitOptions {
        max_iter: opts.max_iter as u64,
        elbo_rel_tol: opts.elbo_rel_tol,
        alpha_w: hyper.alpha_w,
        beta_w: hyper.beta_w,
    }
}

/// Build a dataset from parallel arrays of length `n_snps` and a block
/// layout given as `n_blocks` contiguous block sizes summing to `n_snps`.
/// Returns NULL on error (see `rbmr_last_error`).
///
/// # Safety
/// All array pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rbmr_dataset_new(
    exposure_beta: *const f64,
    exposure_se: *const f64,
    outcome_beta: *const f64,
    outcome_se: *const f64,
    n_snps: u64,
    block_sizes: *const u64,
    n_blocks: u64,
) -> *mut RbmrDataset {
    if exposure_beta.is_null()
        || exposure_se.is_null()
        || outcome_beta.is_null()
        || outcome_se.is_null()
        || block_sizes.is_null()
    {
        set_last_error("null pointer argument");
        return std::ptr::null_mut();
    }
    let j = n_snps as usize;
    let sizes = slice::from_raw_parts(block_sizes, n_blocks as usize);
    if sizes.iter().sum::<u64>() != n_snps {
        set_last_error("block sizes do not sum to n_snps");
        return std::ptr::null_mut();
    }
    let mut block_index = Vec::with_capacity(j);
    for (b, &m) in sizes.iter().enumerate() {
        block_index.extend(std::iter::repeat(b).take(m as usize));
    }
    let dataset = HarmonizedDataset {
        snp_ids: (0..j).map(|i| format!("snp{i}")).collect(),
        exposure_beta: slice::from_raw_parts(exposure_beta, j).to_vec(),
        exposure_se: slice::from_raw_parts(exposure_se, j).to_vec(),
        outcome_beta: slice::from_raw_parts(outcome_beta, j).to_vec(),
        outcome_se: slice::from_raw_parts(outcome_se, j).to_vec(),
        block_index,
    };
    match dataset.validate() {
        Ok(()) => Box::into_raw(Box::new(RbmrDataset(dataset))),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `ds` must be a pointer from `rbmr_dataset_new` (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmr_dataset_free(ds: *mut RbmrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Identity LD matching the dataset's block layout.
///
/// # Safety
/// `ds` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn rbmr_ld_identity(ds: *const RbmrDataset) -> *mut RbmrLd {
    if ds.is_null() {
        set_last_error("null dataset handle");
        return std::ptr::null_mut();
    }
    let sizes = (*ds).0.block_sizes();
    match BlockLdMatrix::identity(&sizes) {
        Ok(ld) => Box::into_raw(Box::new(RbmrLd(ld))),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Build a block-diagonal LD matrix from concatenated row-major block
/// payloads: block k occupies `block_sizes[k]^2` consecutive doubles.
///
/// # Safety
/// `block_sizes` must hold `n_blocks` entries and `payload` the matching
/// total number of doubles.
#[no_mangle]
pub unsafe extern "C" fn rbmr_ld_new(
    block_sizes: *const u64,
    n_blocks: u64,
    payload: *const f64,
    lambda: f64,
) -> *mut RbmrLd {
    if block_sizes.is_null() || payload.is_null() {
        set_last_error("null pointer argument");
        return std::ptr::null_mut();
    }
    let sizes = slice::from_raw_parts(block_sizes, n_blocks as usize);
    let total: usize = sizes.iter().map(|&m| (m * m) as usize).sum();
    let data = slice::from_raw_parts(payload, total);
    let mut blocks = Vec::with_capacity(sizes.len());
    let mut offset = 0usize;
    for &m in sizes {
        let m = m as usize;
        let block = nalgebra_block_from_row_major(&data[offset..offset + m * m], m);
        offset += m * m;
        blocks.push(block);
    }
    match assemble_block_diagonal(blocks, lambda) {
        Ok(ld) => Box::into_raw(Box::new(RbmrLd(ld))),
        Err(e) => {
            set_last_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

fn nalgebra_block_from_row_major(data: &[f64], m: usize) -> rbmr_core::nalgebra::DMatrix<f64> {
    rbmr_core::nalgebra::DMatrix::from_fn(m, m, |i, j| data[i * m + j])
}

/// # Safety
/// `ld` must be a pointer from an `rbmr_ld_*` constructor (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmr_ld_free(ld: *mut RbmrLd) {
    if !ld.is_null() {
        drop(Box::from_raw(ld));
    }
}

/// Fit the model; on success writes a fresh fit handle into `out`.
///
/// # Safety
/// `ds` and `ld` must be valid handles; `out` must point to writable storage
/// for one pointer. `opts` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn rbmr_fit(
    ds: *const RbmrDataset,
    ld: *const RbmrLd,
    opts: *const RbmrFitOptions,
    out: *mut *mut RbmrFit,
) -> RbmrStatus {
    if ds.is_null() || ld.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return RbmrStatus::NullPointer;
    }
    let options = if opts.is_null() {
        rbmr_fit_options_default()
    } else {
        *opts
    };
    let fit_options = FitOptions {
        max_iter: options.max_iter as usize,
        elbo_rel_tol: options.elbo_rel_tol,
        seed: 0,
        fix_sigma0_2: None,
    };
    let hyper = HyperParams {
        alpha_w: options.alpha_w,
        beta_w: options.beta_w,
    };
    match fit(&(*ds).0, &(*ld).0, &hyper, &fit_options) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(RbmrFit(result)));
            RbmrStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            *out = std::ptr::null_mut();
            status_of(&e)
        }
    }
}

/// # Safety
/// `f` must be a pointer from `rbmr_fit` (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmr_fit_free(f: *mut RbmrFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

macro_rules! fit_getter {
    ($name:ident, $ty:ty, $field:ident, $default:expr) => {
        /// # Safety
        /// `f` must be a valid fit handle.
        #[no_mangle]
        pub unsafe extern "C" fn $name(f: *const RbmrFit) -> $ty {
            if f.is_null() {
                return $default;
            }
            (*f).0.$field as $ty
        }
    };
}

fit_getter!(rbmr_fit_beta0, f64, beta0_hat, f64::NAN);
fit_getter!(rbmr_fit_se, f64, se, f64::NAN);
fit_getter!(rbmr_fit_lrt, f64, lrt, f64::NAN);
fit_getter!(rbmr_fit_pvalue, f64, pvalue, f64::NAN);
fit_getter!(rbmr_fit_iterations, u64, iterations, 0);
fit_getter!(rbmr_fit_converged, bool, converged, false);
fit_getter!(rbmr_fit_infinite_se, bool, infinite_se, false);

/// Inverse-variance weighted estimate on a (pruned) dataset.
///
/// # Safety
/// `ds` must be a valid dataset handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rbmr_ivw(
    ds: *const RbmrDataset,
    out: *mut RbmrBaselineResult,
) -> RbmrStatus {
    baseline(ds, out, false)
}

/// MR-Egger regression on a (pruned) dataset.
///
/// # Safety
/// `ds` must be a valid dataset handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rbmr_mr_egger(
    ds: *const RbmrDataset,
    out: *mut RbmrBaselineResult,
) -> RbmrStatus {
    baseline(ds, out, true)
}

unsafe fn baseline(
    ds: *const RbmrDataset,
    out: *mut RbmrBaselineResult,
    egger: bool,
) -> RbmrStatus {
    if ds.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return RbmrStatus::NullPointer;
    }
    let result = if egger {
        rbmr_core::baselines::mr_egger(&(*ds).0)
    } else {
        rbmr_core::baselines::ivw(&(*ds).0)
    };
    match result {
        Ok(r) => {
            *out = RbmrBaselineResult {
                beta_hat: r.beta_hat,
                se: r.se,
                pvalue: r.pvalue,
                intercept: r.intercept.unwrap_or(f64::NAN),
                intercept_se: r.intercept_se.unwrap_or(f64::NAN),
                has_intercept: r.intercept.is_some(),
                n_snps: r.n_snps as u64,
            };
            RbmrStatus::Ok
        }
        Err(e) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
    }
}
