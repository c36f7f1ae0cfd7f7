//! C ABI for the group knockoff toolkit.
//!
//! Every function returns a [`GkStatus`]. On failure a message is kept per
//! thread and can be copied out with [`gk_last_error_message`]. Matrices are
//! dense, row-major `double` arrays. Handles are opaque and must be released
//! with their `_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::DMatrix;

use gknock::knockoff::{group_block_s, sample_group_knockoffs};
use gknock::net::TrainConfig;
use gknock::pipeline::{group_statistic, StatisticConfig};
use gknock::rng::Stream;
use gknock::{AugmentedDesign, CovarianceMatrix, Error, GroupPartition, KnockoffSpec, Method};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidPartition = 4,
    InvalidLevel = 5,
    InvalidCounts = 6,
    DegenerateInput = 7,
    NotPositiveDefinite = 8,
    DegenerateCovariance = 9,
    NonConvergence = 10,
    NumericalDivergence = 11,
    Internal = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkMethod {
    Gknock = 0,
    GroupLcd = 1,
}

/// Network training settings. Obtain defaults from [`gk_train_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkTrainConfig {
    pub learning_rate: f64,
    pub l1_strength: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
}

pub struct GkPartition(GroupPartition);
pub struct GkCovariance(CovarianceMatrix);
pub struct GkKnockoffSpec(KnockoffSpec);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> GkStatus {
    match err {
        Error::NotPositiveDefinite { .. } | Error::NotSymmetric { .. } => GkStatus::NotPositiveDefinite,
        Error::NonConvergence { .. } => GkStatus::NonConvergence,
        Error::DimensionMismatch(_) => GkStatus::DimensionMismatch,
        Error::DegenerateCovariance(_) => GkStatus::DegenerateCovariance,
        Error::DegenerateInput(_) | Error::EmptyInput(_) => GkStatus::DegenerateInput,
        Error::InvalidPartition(_) => GkStatus::InvalidPartition,
        Error::InvalidLevel(_) => GkStatus::InvalidLevel,
        Error::InvalidCounts(_) => GkStatus::InvalidCounts,
        Error::NumericalDivergence { .. } => GkStatus::NumericalDivergence,
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Io { .. } => GkStatus::InvalidArgument,
    }
}

struct Fail(GkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GkStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GkStatus::Internal
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn row_major(values: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, values)
}

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    for (dst, src) in out.chunks_mut(m.ncols()).zip(m.row_iter()) {
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = *s;
        }
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn gk_train_config_default() -> GkTrainConfig {
    let d = TrainConfig::default();
    GkTrainConfig {
        learning_rate: d.learning_rate,
        l1_strength: d.l1_strength,
        epochs: d.epochs,
        batch_size: d.batch_size,
        patience: d.patience,
    }
}

/// Builds a partition of `p` features from one group label per feature.
/// Groups are numbered by first appearance of their label.
///
/// # Safety
/// `labels` must point to `p` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_partition_from_labels(
    labels: *const u32,
    p: usize,
    out: *mut *mut GkPartition,
) -> GkStatus {
    guard(|| {
        let labels = input(labels, p, "labels")?;
        let part = GroupPartition::from_labels(labels)?;
        store(out, GkPartition(part))
    })
}

/// Number of groups, or 0 for a null handle.
///
/// # Safety
/// `part` must be null or a live partition handle.
#[no_mangle]
pub unsafe extern "C" fn gk_partition_group_count(part: *const GkPartition) -> usize {
    part.as_ref().map_or(0, |p| p.0.m())
}

/// # Safety
/// `part` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_partition_free(part: *mut GkPartition) {
    if !part.is_null() {
        drop(Box::from_raw(part));
    }
}

/// Validates a symmetric positive definite `dim x dim` matrix.
///
/// # Safety
/// `values` must point to `dim * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_covariance_new(
    values: *const f64,
    dim: usize,
    out: *mut *mut GkCovariance,
) -> GkStatus {
    guard(|| {
        let values = input(values, dim * dim, "values")?;
        let cov = CovarianceMatrix::new(row_major(values, dim, dim))?;
        store(out, GkCovariance(cov))
    })
}

/// # Safety
/// `cov` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_covariance_free(cov: *mut GkCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Group-block knockoff construction for a unit-diagonal covariance.
///
/// # Safety
/// `cov` and `part` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_knockoff_spec_new(
    cov: *const GkCovariance,
    part: *const GkPartition,
    out: *mut *mut GkKnockoffSpec,
) -> GkStatus {
    guard(|| {
        let cov = handle(cov, "covariance")?;
        let part = handle(part, "partition")?;
        let spec = group_block_s(&cov.0, &part.0)?;
        store(out, GkKnockoffSpec(spec))
    })
}

/// Scale factor of the construction, written to `eta`.
///
/// # Safety
/// `spec` must be a live handle; `eta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_knockoff_spec_eta(spec: *const GkKnockoffSpec, eta: *mut f64) -> GkStatus {
    guard(|| {
        let spec = handle(spec, "spec")?;
        output(eta, 1, "eta")?[0] = spec.0.eta();
        Ok(())
    })
}

/// Writes the `p x p` block-diagonal matrix `S`.
///
/// # Safety
/// `spec` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gk_knockoff_spec_s_matrix(
    spec: *const GkKnockoffSpec,
    out: *mut f64,
    len: usize,
) -> GkStatus {
    guard(|| {
        let spec = handle(spec, "spec")?;
        let p = spec.0.dim();
        if len != p * p {
            return Err(Error::DimensionMismatch(format!("buffer holds {len}, need {}", p * p)).into());
        }
        write_row_major(spec.0.s_matrix(), output(out, len, "out")?);
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_knockoff_spec_free(spec: *mut GkKnockoffSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Samples knockoffs for the `n x p` design `x` into `x_knock`.
///
/// # Safety
/// `spec` must be a live handle; `x` and `x_knock` must each hold `n * p`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn gk_sample_knockoffs(
    spec: *const GkKnockoffSpec,
    x: *const f64,
    n: usize,
    p: usize,
    seed: u64,
    x_knock: *mut f64,
) -> GkStatus {
    guard(|| {
        let spec = handle(spec, "spec")?;
        let x = row_major(input(x, n * p, "x")?, n, p);
        let design = sample_group_knockoffs(&x, &spec.0, &mut Stream::Knockoffs.rng(seed))?;
        write_row_major(design.x_knock(), output(x_knock, n * p, "x_knock")?);
        Ok(())
    })
}

/// Knockoff+ threshold of `m` statistics at level `q`. `tau` receives the
/// threshold (infinity when nothing is selected) and `selected[j]` is set to
/// 1 for selected groups and 0 otherwise.
///
/// # Safety
/// `w` and `selected` must hold `m` elements; `tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_knockoff_threshold(
    w: *const f64,
    m: usize,
    q: f64,
    tau: *mut f64,
    selected: *mut u8,
) -> GkStatus {
    guard(|| {
        let w = input(w, m, "w")?;
        let result = gknock::knockoff_threshold(w, q)?;
        let mask = output(selected, m, "selected")?;
        mask.fill(0);
        for &j in &result.selected {
            mask[j] = 1;
        }
        output(tau, 1, "tau")?[0] = result.tau;
        Ok(())
    })
}

/// Probability of at least `threshold` successes when drawing `draws` items
/// without replacement from `successes + failures`.
///
/// # Safety
/// `prob` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gk_hypergeom_tail(
    successes: u64,
    failures: u64,
    draws: u64,
    threshold: u64,
    prob: *mut f64,
) -> GkStatus {
    guard(|| {
        let p = gknock::metrics::hypergeom_tail(successes, failures, draws, threshold)?;
        output(prob, 1, "prob")?[0] = p;
        Ok(())
    })
}

/// Group statistics for an `n x p` design, its knockoffs and a response.
/// `train` may be null for the defaults; it is ignored by `GroupLcd`, which
/// picks its penalty from the data.
///
/// # Safety
/// `x` and `x_knock` must hold `n * p` doubles, `y` must hold `n`, `part`
/// must be a live handle and `w_out` must hold one double per group.
#[no_mangle]
pub unsafe extern "C" fn gk_group_statistic(
    x: *const f64,
    x_knock: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    part: *const GkPartition,
    method: GkMethod,
    train: *const GkTrainConfig,
    seed: u64,
    w_out: *mut f64,
) -> GkStatus {
    guard(|| {
        let part = handle(part, "partition")?;
        let design = AugmentedDesign::new(
            row_major(input(x, n * p, "x")?, n, p),
            row_major(input(x_knock, n * p, "x_knock")?, n, p),
            part.0.clone(),
        )?;
        let y = input(y, n, "y")?;
        let t = train.as_ref().copied().unwrap_or_else(|| gk_train_config_default());
        let cfg = StatisticConfig {
            method: match method {
                GkMethod::Gknock => Method::GKnock,
                GkMethod::GroupLcd => Method::GroupLcd,
            },
            train: TrainConfig {
                learning_rate: t.learning_rate,
                l1_strength: t.l1_strength,
                epochs: t.epochs,
                batch_size: t.batch_size,
                patience: t.patience,
                seed,
            },
            lambda: None,
        };
        let w = group_statistic(&design, y, &cfg)?;
        output(w_out, part.0.m(), "w_out")?.copy_from_slice(&w);
        Ok(())
    })
}
