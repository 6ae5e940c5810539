//! C ABI over the `unitzipf` library.
//!
//! Every fallible function returns a [`UzStatus`]. On failure a description
//! is kept per thread and can be read with [`uz_last_error_message`].
//! Codebooks and n-gram tables are opaque handles that the caller releases
//! with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use unitzipf::powerlaw::fit_band;
use unitzipf::quantize::{read_codebook, write_codebook};
use unitzipf::{AlphabetKind, Codebook, Error, FeatureMatrix, NgramTable, PowerLawFit, TrainOptions};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UzStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 2,
    /// Input data was malformed or insufficient.
    InputError = 3,
    /// A file could not be read or written.
    IoError = 4,
    /// An unexpected internal failure.
    Internal = 5,
}

/// Trained k-means codebook.
pub struct UzCodebook(Codebook);

/// Mergeable n-gram count table over unit ids.
pub struct UzNgramTable(NgramTable);

/// Result of a power-law fit `f = a * r^(-eta)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UzPowerLawFit {
    pub a: f64,
    pub eta: f64,
    pub eta_fixed: bool,
    pub rmse_log: f64,
    pub n_points: usize,
    pub trim_lo_rank: usize,
    pub trim_hi_rank: usize,
}

impl From<PowerLawFit> for UzPowerLawFit {
    fn from(f: PowerLawFit) -> Self {
        UzPowerLawFit {
            a: f.a,
            eta: f.eta,
            eta_fixed: f.eta_fixed,
            rmse_log: f.rmse_log,
            n_points: f.n_points,
            trim_lo_rank: f.trim_lo_rank,
            trim_hi_rank: f.trim_hi_rank,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(UzStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } if !e.is_input_error() => UzStatus::IoError,
            Error::InvalidArgument(_) | Error::BadBand { .. } => UzStatus::InvalidArgument,
            _ if e.is_input_error() => UzStatus::InputError,
            _ => UzStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UzStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(UzStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UzStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            UzStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

/// Message describing the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn uz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Collapses runs of repeated units. `out` must hold `len` elements; the
/// number written is stored in `out_len`.
///
/// # Safety
/// `units` must point to `len` readable values, `out` to `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn uz_dedupe(
    units: *const u32,
    len: usize,
    out: *mut u32,
    out_len: *mut usize,
) -> UzStatus {
    guard(|| {
        let input = slice(units, len, "units")?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        if len > 0 && out.is_null() {
            return Err(null("out"));
        }
        let d = unitzipf::dedupe(input);
        ptr::copy_nonoverlapping(d.as_ptr(), out, d.len());
        *out_len = d.len();
        Ok(())
    })
}

/// Trains a `k`-centroid codebook on `n_frames` row-major frames of `dim`
/// values each.
///
/// # Safety
/// `frames` must point to `n_frames * dim` readable floats and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn uz_kmeans_train(
    frames: *const f32,
    n_frames: usize,
    dim: usize,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
    out: *mut *mut UzCodebook,
) -> UzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_frames.checked_mul(dim).ok_or_else(|| invalid("frame buffer too large"))?;
        let values = slice(frames, len, "frames")?.to_vec();
        let m = FeatureMatrix::new("ffi", dim, values)?;
        let opts = TrainOptions { k, seed, max_iters, tol };
        let training = unitzipf::kmeans_train(std::slice::from_ref(&m), &opts)?;
        *out = Box::into_raw(Box::new(UzCodebook(training.codebook)));
        Ok(())
    })
}

/// Loads a codebook file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_read(path: *const c_char, out: *mut *mut UzCodebook) -> UzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cb = read_codebook(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(UzCodebook(cb)));
        Ok(())
    })
}

/// Saves a codebook file.
///
/// # Safety
/// `codebook` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_write(codebook: *const UzCodebook, path: *const c_char) -> UzStatus {
    guard(|| {
        let cb = codebook.as_ref().ok_or_else(|| null("codebook"))?;
        write_codebook(&cb.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a codebook. Null is ignored.
///
/// # Safety
/// `codebook` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_free(codebook: *mut UzCodebook) {
    if !codebook.is_null() {
        drop(Box::from_raw(codebook));
    }
}

/// Number of centroids, or 0 for a null handle.
///
/// # Safety
/// `codebook` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_k(codebook: *const UzCodebook) -> usize {
    codebook.as_ref().map_or(0, |c| c.0.k())
}

/// Frame dimension, or 0 for a null handle.
///
/// # Safety
/// `codebook` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_dim(codebook: *const UzCodebook) -> usize {
    codebook.as_ref().map_or(0, |c| c.0.dim())
}

/// Maps each of `n_frames` frames to its nearest centroid id, writing
/// `n_frames` ids to `out_units`.
///
/// # Safety
/// `codebook` must be a live handle, `frames` must point to
/// `n_frames * dim` floats and `out_units` to `n_frames` writable ids.
#[no_mangle]
pub unsafe extern "C" fn uz_codebook_assign(
    codebook: *const UzCodebook,
    frames: *const f32,
    n_frames: usize,
    dim: usize,
    out_units: *mut u32,
) -> UzStatus {
    guard(|| {
        let cb = codebook.as_ref().ok_or_else(|| null("codebook"))?;
        let len = n_frames.checked_mul(dim).ok_or_else(|| invalid("frame buffer too large"))?;
        let values = slice(frames, len, "frames")?.to_vec();
        if n_frames > 0 && out_units.is_null() {
            return Err(null("out_units"));
        }
        let m = FeatureMatrix::new("ffi", dim, values)?;
        let units = unitzipf::assign(&cb.0, &m)?.units;
        ptr::copy_nonoverlapping(units.as_ptr(), out_units, units.len());
        Ok(())
    })
}

/// Creates an empty table of unit `n`-grams.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uz_table_new_units(n: usize, out: *mut *mut UzNgramTable) -> UzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = NgramTable::new(n, AlphabetKind::Unit)?;
        *out = Box::into_raw(Box::new(UzNgramTable(t)));
        Ok(())
    })
}

/// Counts the n-grams of one utterance into the table.
///
/// # Safety
/// `table` must be a live handle and `units` must point to `len` ids.
#[no_mangle]
pub unsafe extern "C" fn uz_table_add_units(table: *mut UzNgramTable, units: *const u32, len: usize) -> UzStatus {
    guard(|| {
        let t = table.as_mut().ok_or_else(|| null("table"))?;
        t.0.add_unit_sequence(slice(units, len, "units")?)?;
        Ok(())
    })
}

/// Adds the counts of `other` into `table`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn uz_table_merge(table: *mut UzNgramTable, other: *const UzNgramTable) -> UzStatus {
    guard(|| {
        let o = other.as_ref().ok_or_else(|| null("other"))?;
        let t = table.as_mut().ok_or_else(|| null("table"))?;
        t.0.merge_from(&o.0)?;
        Ok(())
    })
}

/// Total n-gram occurrences, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uz_table_total(table: *const UzNgramTable) -> u64 {
    table.as_ref().map_or(0, |t| t.0.total())
}

/// Number of distinct n-grams, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uz_table_vocab(table: *const UzNgramTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Writes the table as CSV.
///
/// # Safety
/// `table` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uz_table_write_csv(table: *const UzNgramTable, path: *const c_char) -> UzStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let path = path_arg(path)?;
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        t.0.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    })
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uz_table_free(table: *mut UzNgramTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

fn fixed(eta: f64) -> Option<f64> {
    (!eta.is_nan()).then_some(eta)
}

/// Fits `f = a * r^(-eta)` to `n` (rank, frequency) pairs. Pass NaN as
/// `fix_eta` to estimate the exponent, or a number to hold it fixed.
///
/// # Safety
/// `ranks` and `freqs` must each point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uz_fit_powerlaw(
    ranks: *const f64,
    freqs: *const f64,
    n: usize,
    fix_eta: f64,
    out: *mut UzPowerLawFit,
) -> UzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = slice(ranks, n, "ranks")?;
        let f = slice(freqs, n, "freqs")?;
        let points: Vec<(f64, f64)> = r.iter().copied().zip(f.iter().copied()).collect();
        *out = unitzipf::fit_powerlaw(&points, fixed(fix_eta))?.into();
        Ok(())
    })
}

/// Ranks the table, keeps the band between the rank fractions `trim_lo` and
/// `trim_hi`, and fits it. `fix_eta` behaves as in [`uz_fit_powerlaw`].
///
/// # Safety
/// `table` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uz_table_fit(
    table: *const UzNgramTable,
    trim_lo: f64,
    trim_hi: f64,
    fix_eta: f64,
    out: *mut UzPowerLawFit,
) -> UzStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rf = unitzipf::rank_frequency(&t.0)?;
        *out = fit_band(&rf, trim_lo, trim_hi, fixed(fix_eta))?.into();
        Ok(())
    })
}

/// Smallest `n` with `n * ref_total_len >= target_total_len`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uz_choose_n(ref_total_len: u64, target_total_len: u64, out: *mut usize) -> UzStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = unitzipf::choose_n(ref_total_len, target_total_len)?;
        Ok(())
    })
}
