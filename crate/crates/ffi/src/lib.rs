//! C ABI over `art_core`.
//!
//! Datasets live behind an opaque [`ArtDataset`] handle. Every fallible call
//! returns an [`ArtStatus`]; on failure the message is available from
//! [`art_last_error_message`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use art_core::art::{self, TestVariant};
use art_core::error::ArtError;
use art_core::group::{GroupSpec, DEFAULT_DRAWS, DEFAULT_SEED};
use art_core::interval;
use art_core::model::{ClusteredDataset, ExtendedReal, LinearHypothesis, RawRow};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    IdentificationFailure = 4,
    NumericalFailure = 5,
    Panic = 6,
}

/// How sign changes are drawn.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtGroupMode {
    /// Exhaustive up to 14 clusters, sampled beyond.
    Auto = 0,
    Exhaustive = 1,
    Sampled = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ArtGroupOptions {
    pub mode: ArtGroupMode,
    /// Number of sign vectors in sampled mode, identity included.
    pub draws: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ArtTestOutput {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    /// 1 when the null is rejected.
    pub reject: i32,
    pub group_size: usize,
}

/// Interval endpoints; an infinite endpoint sets its flag and stores
/// `-INFINITY` or `INFINITY`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ArtInterval {
    pub lambda0: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_infinite: i32,
    pub upper_infinite: i32,
}

/// Opaque clustered dataset.
pub struct ArtDataset {
    inner: ClusteredDataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &ArtError) -> ArtStatus {
    match err {
        ArtError::IdentificationFailure { .. } | ArtError::SingularFullGram { .. } => {
            ArtStatus::IdentificationFailure
        }
        ArtError::DegenerateVariance | ArtError::SingularSigma => ArtStatus::NumericalFailure,
        ArtError::TooFewClusters { .. }
        | ArtError::EmptyCluster { .. }
        | ArtError::WidthMismatch { .. }
        | ArtError::NonFiniteValue { .. }
        | ArtError::NoCovariates
        | ArtError::TooFewObservations { .. } => ArtStatus::InvalidData,
        _ => ArtStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (ArtStatus, String)>) -> ArtStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ArtStatus::Panic
        }
    }
}

fn art_err(e: ArtError) -> (ArtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ArtStatus, String) {
    (ArtStatus::NullPointer, format!("{what} is null"))
}

fn group_spec(opts: *const ArtGroupOptions) -> GroupSpec {
    // SAFETY: caller passes null or a valid pointer.
    match unsafe { opts.as_ref() } {
        None => GroupSpec::Auto {
            draws: DEFAULT_DRAWS,
            seed: DEFAULT_SEED,
        },
        Some(o) => match o.mode {
            ArtGroupMode::Auto => GroupSpec::Auto {
                draws: o.draws,
                seed: o.seed,
            },
            ArtGroupMode::Exhaustive => GroupSpec::exhaustive(),
            ArtGroupMode::Sampled => GroupSpec::sampled(o.draws, o.seed),
        },
    }
}

/// Build a dataset from `n` observations with `d` covariates.
///
/// `covariates` is row-major `n * d`; `cluster_ids` assigns each row to a
/// cluster. Clusters are ordered by first appearance.
///
/// # Safety
/// `outcomes` and `cluster_ids` must point to `n` values, `covariates` to
/// `n * d` values, and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn art_dataset_new(
    n: usize,
    d: usize,
    outcomes: *const f64,
    covariates: *const f64,
    cluster_ids: *const i64,
    out: *mut *mut ArtDataset,
) -> ArtStatus {
    guard(|| {
        if outcomes.is_null() || covariates.is_null() || cluster_ids.is_null() {
            return Err(null("input array"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let cells = n
            .checked_mul(d)
            .ok_or((ArtStatus::InvalidArgument, "n * d overflows".to_string()))?;
        let y = std::slice::from_raw_parts(outcomes, n);
        let z = std::slice::from_raw_parts(covariates, cells);
        let ids = std::slice::from_raw_parts(cluster_ids, n);
        let rows = (0..n)
            .map(|i| RawRow::new(ids[i].to_string(), y[i], z[i * d..(i + 1) * d].to_vec()))
            .collect();
        let names = (1..=d).map(|k| format!("x{k}")).collect();
        let inner = ClusteredDataset::from_rows(rows, names).map_err(art_err)?;
        *out = Box::into_raw(Box::new(ArtDataset { inner }));
        Ok(())
    })
}

/// Release a dataset. Null is ignored.
///
/// # Safety
/// `ds` must come from [`art_dataset_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn art_dataset_free(ds: *mut ArtDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of clusters, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn art_dataset_num_clusters(ds: *const ArtDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.q())
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn art_dataset_num_observations(ds: *const ArtDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.n())
}

/// Randomization test of `c'beta = null_value`. `group` may be null for the
/// default automatic group; `studentized` selects the studentized statistic.
///
/// # Safety
/// `ds` must be a live handle, `contrast` must point to `contrast_len`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn art_test(
    ds: *const ArtDataset,
    contrast: *const f64,
    contrast_len: usize,
    null_value: f64,
    alpha: f64,
    group: *const ArtGroupOptions,
    studentized: i32,
    out: *mut ArtTestOutput,
) -> ArtStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if contrast.is_null() {
            return Err(null("contrast"));
        }
        let c = std::slice::from_raw_parts(contrast, contrast_len).to_vec();
        let h = LinearHypothesis::new(c, null_value).map_err(art_err)?;
        let g = group_spec(group).build(ds.inner.q()).map_err(art_err)?;
        let variant = if studentized != 0 {
            TestVariant::Studentized
        } else {
            TestVariant::Unstudentized
        };
        let r = art::run_test(&ds.inner, &h, alpha, &g, variant).map_err(art_err)?;
        *out = ArtTestOutput {
            statistic: r.statistic,
            critical_value: r.critical_value,
            p_value: r.p_value,
            reject: r.reject as i32,
            group_size: r.group_size,
        };
        Ok(())
    })
}

/// Closed-form confidence interval for `c'beta` at level `1 - alpha`.
///
/// # Safety
/// Same requirements as [`art_test`].
#[no_mangle]
pub unsafe extern "C" fn art_ci(
    ds: *const ArtDataset,
    contrast: *const f64,
    contrast_len: usize,
    alpha: f64,
    group: *const ArtGroupOptions,
    out: *mut ArtInterval,
) -> ArtStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if contrast.is_null() {
            return Err(null("contrast"));
        }
        let c = std::slice::from_raw_parts(contrast, contrast_len);
        let g = group_spec(group).build(ds.inner.q()).map_err(art_err)?;
        let ci = interval::confidence_interval(&ds.inner, c, alpha, &g).map_err(art_err)?;
        *out = ArtInterval {
            lambda0: ci.lambda0,
            lower: ci.lower.to_f64(),
            upper: ci.upper.to_f64(),
            lower_infinite: (ci.lower == ExtendedReal::NegInf) as i32,
            upper_infinite: (ci.upper == ExtendedReal::PosInf) as i32,
        };
        Ok(())
    })
}

/// Sizes of `q` consecutive blocks over `n` observations.
///
/// # Safety
/// `base_size` and `last_size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn art_plan_blocks(
    n: usize,
    q: usize,
    base_size: *mut usize,
    last_size: *mut usize,
) -> ArtStatus {
    guard(|| {
        if base_size.is_null() || last_size.is_null() {
            return Err(null("output"));
        }
        let plan = art_core::blocks::plan_blocks(n, q).map_err(art_err)?;
        *base_size = plan.base_size;
        *last_size = plan.last_size;
        Ok(())
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn art_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn art_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
