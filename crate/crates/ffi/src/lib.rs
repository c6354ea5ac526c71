//! C interface to the quadls line searches.
//!
//! Every fallible call returns a [`QlsStatus`]. On failure the message is
//! kept per thread and can be read with [`qls_last_error`]. Datasets and
//! training runs are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use quadls::approx::{
    step_size_fff, step_size_fgf, step_size_ffg, step_size_fgfg, step_size_gg, ApproxKind, Bounds, Outcome,
    StepDecision, EPS_K,
};
use quadls::data::{load_cifar10, load_mnist, load_wdbc, Dataset, SamplerMode};
use quadls::net::{init_weights, NetworkSpec};
use quadls::objective::{NetObjective, Objective};
use quadls::search::{golden_section, initial_guess, ExtrapolationPolicy, LineSearchConfig};
use quadls::train::{train, StepRule, TrainConfig, TrainRun};
use quadls::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    NonFinite = 4,
    Io = 5,
    Parse = 6,
    Config = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlsKind {
    Fff = 0,
    Fgf = 1,
    Ffg = 2,
    Fgfg = 3,
    Gg = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlsOutcome {
    Resample = 0,
    ImmediateAccept = 1,
    Interpolation = 2,
    BoundedExtrapolation = 3,
    ClampedMin = 4,
    ClampedMax = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlsExtrapolation {
    Reject = 0,
    Accept = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlsBounds {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub enforced: bool,
}

/// Result of one step-size fit. Coefficients are NaN when the fit failed;
/// `k3` is NaN for the derivative-only model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlsDecision {
    pub alpha_star: f64,
    pub outcome: QlsOutcome,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub has_vertex: bool,
    pub vertex: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlsTrainOptions {
    pub kind: QlsKind,
    pub flag: QlsExtrapolation,
    /// Batches at least as large as the training split use the full split.
    pub batch_size: usize,
    pub budget: u64,
    pub seed: u64,
    /// 0 trains a logistic model, otherwise one sigmoid hidden layer.
    pub hidden: usize,
    pub bounds: QlsBounds,
}

/// Missing errors are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlsRecord {
    pub fe: u64,
    pub iter: u64,
    pub alpha: f64,
    pub train_error: f64,
    pub test_error: f64,
    pub dtheta: f64,
    pub outcome: QlsOutcome,
}

pub struct QlsDataset(Dataset);

pub struct QlsRun(TrainRun);

pub type QlsObjectiveFn = Option<unsafe extern "C" fn(alpha: f64, user: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(QlsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::SingularMatrix | Error::RankDeficient { .. } => QlsStatus::Singular,
            Error::NonFinite(_) => QlsStatus::NonFinite,
            Error::Io { .. } => QlsStatus::Io,
            Error::Parse { .. } | Error::BadMagic { .. } | Error::LengthMismatch(_) => QlsStatus::Parse,
            Error::Config(_) | Error::Checkpoint(_) => QlsStatus::Config,
            _ => QlsStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QlsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QlsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QlsStatus::Panic
        }
    }
}

fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: caller passes a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller passes a valid pointer or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null pointers must reference NUL-terminated strings.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(QlsStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn opt_path(p: *const c_char, what: &str) -> Result<Option<PathBuf>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        path_arg(p, what).map(Some)
    }
}

fn bounds(b: *const QlsBounds) -> Result<Bounds, Fail> {
    let b = in_ref(b, "bounds")?;
    Ok(Bounds::new(b.alpha_min, b.alpha_max, b.enforced)?)
}

fn outcome(o: Outcome) -> QlsOutcome {
    match o {
        Outcome::Resample => QlsOutcome::Resample,
        Outcome::ImmediateAccept => QlsOutcome::ImmediateAccept,
        Outcome::Interpolation => QlsOutcome::Interpolation,
        Outcome::BoundedExtrapolation => QlsOutcome::BoundedExtrapolation,
        Outcome::ClampedMin => QlsOutcome::ClampedMin,
        Outcome::ClampedMax => QlsOutcome::ClampedMax,
    }
}

fn kind(k: QlsKind) -> ApproxKind {
    match k {
        QlsKind::Fff => ApproxKind::Fff,
        QlsKind::Fgf => ApproxKind::Fgf,
        QlsKind::Ffg => ApproxKind::Ffg,
        QlsKind::Fgfg => ApproxKind::Fgfg,
        QlsKind::Gg => ApproxKind::Gg,
    }
}

fn decision(d: StepDecision) -> QlsDecision {
    let (k1, k2, k3) = d.model.map_or((f64::NAN, f64::NAN, f64::NAN), |m| (m.k1, m.k2, m.k3.unwrap_or(f64::NAN)));
    QlsDecision {
        alpha_star: d.alpha_star,
        outcome: outcome(d.outcome),
        k1,
        k2,
        k3,
        has_vertex: d.vertex.is_some(),
        vertex: d.vertex.unwrap_or(f64::NAN),
    }
}

fn fit(out: *mut QlsDecision, b: *const QlsBounds, f: impl FnOnce(&Bounds) -> StepDecision) -> QlsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = decision(f(&bounds(b)?));
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn qls_bounds_standard() -> QlsBounds {
    let b = Bounds::standard();
    QlsBounds { alpha_min: b.alpha_min(), alpha_max: b.alpha_max(), enforced: true }
}

#[no_mangle]
pub extern "C" fn qls_bounds_wdbc() -> QlsBounds {
    let b = Bounds::wdbc();
    QlsBounds { alpha_min: b.alpha_min(), alpha_max: b.alpha_max(), enforced: true }
}

/// # Safety
/// `bounds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qls_step_size_fff(
    alpha1: f64,
    alpha2: f64,
    f0: f64,
    f1: f64,
    f2: f64,
    bounds: *const QlsBounds,
    out: *mut QlsDecision,
) -> QlsStatus {
    fit(out, bounds, |b| step_size_fff(alpha1, alpha2, f0, f1, f2, b, EPS_K))
}

/// # Safety
/// `bounds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qls_step_size_fgf(
    alpha1: f64,
    f0: f64,
    f1: f64,
    fp0: f64,
    bounds: *const QlsBounds,
    out: *mut QlsDecision,
) -> QlsStatus {
    fit(out, bounds, |b| step_size_fgf(alpha1, f0, f1, fp0, b, EPS_K))
}

/// # Safety
/// `bounds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qls_step_size_ffg(
    alpha1: f64,
    f0: f64,
    f1: f64,
    fp1: f64,
    bounds: *const QlsBounds,
    out: *mut QlsDecision,
) -> QlsStatus {
    fit(out, bounds, |b| step_size_ffg(alpha1, f0, f1, fp1, b, EPS_K))
}

/// # Safety
/// `bounds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qls_step_size_fgfg(
    alpha1: f64,
    f0: f64,
    f1: f64,
    fp0: f64,
    fp1: f64,
    bounds: *const QlsBounds,
    out: *mut QlsDecision,
) -> QlsStatus {
    fit(out, bounds, |b| step_size_fgfg(alpha1, f0, f1, fp0, fp1, b, EPS_K))
}

/// # Safety
/// `bounds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qls_step_size_gg(
    alpha1: f64,
    fp0: f64,
    fp1: f64,
    bounds: *const QlsBounds,
    out: *mut QlsDecision,
) -> QlsStatus {
    fit(out, bounds, |b| step_size_gg(alpha1, fp0, fp1, b, EPS_K))
}

/// Inverse norm of `d`, clamped to the bounds.
///
/// # Safety
/// `d` must point to `n` doubles; `bounds` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qls_initial_guess(d: *const f64, n: usize, bounds: *const QlsBounds, out: *mut f64) -> QlsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if d.is_null() {
            return Err(null("d"));
        }
        // SAFETY: the caller guarantees `n` readable doubles.
        let d = unsafe { std::slice::from_raw_parts(d, n) };
        *out = initial_guess(d, &self::bounds(bounds)?)?;
        Ok(())
    })
}

/// Minimizes `f` over `[a, b]` to absolute tolerance `tol`.
///
/// # Safety
/// `f` must be callable with `user`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qls_golden_section(
    f: QlsObjectiveFn,
    user: *mut c_void,
    a: f64,
    b: f64,
    tol: f64,
    out: *mut f64,
) -> QlsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let f = f.ok_or_else(|| null("f"))?;
        let eval = |x: f64| {
            // SAFETY: the caller vouches for the callback and its context.
            let v = unsafe { f(x, user) };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite("objective callback"))
            }
        };
        *out = golden_section(eval, a, b, tol)?;
        Ok(())
    })
}

fn store_dataset(out: *mut *mut QlsDataset, load: impl FnOnce() -> Result<Dataset, Fail>) -> QlsStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        *slot = Box::into_raw(Box::new(QlsDataset(load()?)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_load_wdbc(
    path: *const c_char,
    split_seed: u64,
    out: *mut *mut QlsDataset,
) -> QlsStatus {
    store_dataset(out, || Ok(load_wdbc(path_arg(path, "path")?, split_seed)?))
}

/// The test pair may be null.
///
/// # Safety
/// Non-null paths must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_load_mnist(
    train_images: *const c_char,
    train_labels: *const c_char,
    test_images: *const c_char,
    test_labels: *const c_char,
    out: *mut *mut QlsDataset,
) -> QlsStatus {
    store_dataset(out, || {
        let ti = path_arg(train_images, "train_images")?;
        let tl = path_arg(train_labels, "train_labels")?;
        let vi = opt_path(test_images, "test_images")?;
        let vl = opt_path(test_labels, "test_labels")?;
        let test = match (&vi, &vl) {
            (Some(i), Some(l)) => Some((i.as_path(), l.as_path())),
            (None, None) => None,
            _ => return Err(Fail(QlsStatus::InvalidArgument, "give both test files or neither".into())),
        };
        Ok(load_mnist(ti, tl, test)?)
    })
}

/// One training batch file; the test batch may be null.
///
/// # Safety
/// Non-null paths must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_load_cifar10(
    train_batch: *const c_char,
    test_batch: *const c_char,
    out: *mut *mut QlsDataset,
) -> QlsStatus {
    store_dataset(out, || {
        let train = path_arg(train_batch, "train_batch")?;
        let test = opt_path(test_batch, "test_batch")?;
        Ok(load_cifar10(&[train], test.as_deref())?)
    })
}

/// # Safety
/// `ds` must come from a `qls_dataset_load_*` call, or be null.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_free(ds: *mut QlsDataset) {
    if !ds.is_null() {
        // SAFETY: produced by Box::into_raw in store_dataset.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Training samples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_n_train(ds: *const QlsDataset) -> usize {
    // SAFETY: live handle or null.
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.n_train())
}

/// # Safety
/// `ds` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_n_test(ds: *const QlsDataset) -> usize {
    // SAFETY: live handle or null.
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.test().len())
}

/// # Safety
/// `ds` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qls_dataset_n_features(ds: *const QlsDataset) -> usize {
    // SAFETY: live handle or null.
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.n_features())
}

/// g-g, extrapolation rejected, batch 10, 10⁴ evaluations, seed 0,
/// logistic model, WDBC bounds.
#[no_mangle]
pub extern "C" fn qls_train_options_default() -> QlsTrainOptions {
    QlsTrainOptions {
        kind: QlsKind::Gg,
        flag: QlsExtrapolation::Reject,
        batch_size: 10,
        budget: 10_000,
        seed: 0,
        hidden: 0,
        bounds: qls_bounds_wdbc(),
    }
}

/// Trains from a seeded initialization until the budget is spent.
///
/// # Safety
/// `ds` must be a live handle; `options` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qls_train(
    ds: *const QlsDataset,
    options: *const QlsTrainOptions,
    out: *mut *mut QlsRun,
) -> QlsStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = ptr::null_mut();
        let ds = &in_ref(ds, "dataset")?.0;
        let o = in_ref(options, "options")?;
        let spec = if o.hidden == 0 {
            NetworkSpec::logistic(ds.n_features())
        } else {
            NetworkSpec::shallow(ds.n_features(), o.hidden, ds.n_targets())
        };
        let obj = NetObjective::new(&spec, ds)?;
        let policy = match o.flag {
            QlsExtrapolation::Reject => ExtrapolationPolicy::Reject,
            QlsExtrapolation::Accept => ExtrapolationPolicy::Accept,
        };
        let b = Bounds::new(o.bounds.alpha_min, o.bounds.alpha_max, o.bounds.enforced)?;
        let rule = StepRule::Approx(LineSearchConfig::new(kind(o.kind), policy, b));
        let n = obj.n_samples();
        let (mode, m) = if o.batch_size >= n { (SamplerMode::Full, n) } else { (SamplerMode::Dynamic, o.batch_size) };
        let run = train(&obj, init_weights(&spec, o.seed).into_inner(), &TrainConfig::new(mode, m, rule, o.budget, o.seed))?;
        *slot = Box::into_raw(Box::new(QlsRun(run)));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`qls_train`], or be null.
#[no_mangle]
pub unsafe extern "C" fn qls_run_free(run: *mut QlsRun) {
    if !run.is_null() {
        // SAFETY: produced by Box::into_raw in qls_train.
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Iterations recorded, or 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qls_run_len(run: *const QlsRun) -> usize {
    // SAFETY: live handle or null.
    unsafe { run.as_ref() }.map_or(0, |r| r.0.records.len())
}

/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qls_run_record(run: *const QlsRun, index: usize, out: *mut QlsRecord) -> QlsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let run = &in_ref(run, "run")?.0;
        let r = run.records.get(index).ok_or_else(|| {
            Fail(QlsStatus::InvalidArgument, format!("record {index} out of range ({} recorded)", run.records.len()))
        })?;
        *out = QlsRecord {
            fe: r.fe,
            iter: r.iter,
            alpha: r.alpha,
            train_error: r.train_error.unwrap_or(f64::NAN),
            test_error: r.test_error.unwrap_or(f64::NAN),
            dtheta: r.dtheta.unwrap_or(f64::NAN),
            outcome: outcome(r.outcome.unwrap_or(Outcome::Resample)),
        };
        Ok(())
    })
}

/// Last measured train and test classification error.
///
/// # Safety
/// `run` must be a live handle; `train_error` and `test_error` valid.
#[no_mangle]
pub unsafe extern "C" fn qls_run_final_errors(
    run: *const QlsRun,
    train_error: *mut f64,
    test_error: *mut f64,
) -> QlsStatus {
    guard(|| {
        let tr = out_ref(train_error, "train_error")?;
        let te = out_ref(test_error, "test_error")?;
        let run = &in_ref(run, "run")?.0;
        let (a, b) = run.final_errors().ok_or_else(|| Fail(QlsStatus::InvalidArgument, "run has no error measurements".into()))?;
        (*tr, *te) = (a, b);
        Ok(())
    })
}

/// Total evaluations spent, or 0 for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qls_run_total_fe(run: *const QlsRun) -> u64 {
    // SAFETY: live handle or null.
    unsafe { run.as_ref() }.map_or(0, |r| r.0.total_fe())
}
