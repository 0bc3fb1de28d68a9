//! C ABI for the signature-feature toolkit.
//!
//! Conventions: objects are opaque handles created and freed by this
//! library; every fallible call returns a [`SigkinStatus`] and writes its
//! result through out-pointers; `sigkin_last_error_message` returns a
//! thread-local description of the most recent failure. Strings are
//! NUL-terminated UTF-8. The generated header lives in `include/sigkin.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char, c_double};
use std::path::PathBuf;

use sigkin::error::Error;
use sigkin::estimator::{MLPModel, estimate_features, load_model};
use sigkin::evaluation::compute_eer;
use sigkin::replay::{JointFeatureSeries, WorkspacePlacement, replay};
use sigkin::robot::{KinematicChain, default_chain, load_chain_file};
use sigkin::signature::{ColumnSpec, Label, Sample, SignatureTrajectory, parse_signature_file};
use sigkin::verifier::{FeatureGroup, RefStats, build_feature_matrix, score_questioned};

/// Return status of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigkinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    ParseError = 4,
    InvalidData = 5,
    NumericalFailure = 6,
}

/// Feature group selector for scoring.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigkinGroup {
    Theta = 0,
    Omega = 1,
    Tau = 2,
}

impl SigkinGroup {
    fn to_group(self) -> FeatureGroup {
        match self {
            SigkinGroup::Theta => FeatureGroup::Theta,
            SigkinGroup::Omega => FeatureGroup::Omega,
            SigkinGroup::Tau => FeatureGroup::Tau,
        }
    }
}

/// Two-stage verification score of a questioned signature.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SigkinScore {
    /// Minimum DTW distance over the reference set.
    pub s_r: c_double,
    /// Warping-path length of the minimizing alignment.
    pub path_len: usize,
    /// s_r normalized by path length (random-forgery score).
    pub s_hat_1: c_double,
    /// s_r normalized by the reference factor mu_R (skilled-forgery score).
    pub s_hat_2: c_double,
    pub mu_r: c_double,
}

pub struct SigkinChain(KinematicChain);
pub struct SigkinSignature(SignatureTrajectory);
pub struct SigkinFeatures(JointFeatureSeries);
pub struct SigkinModel(MLPModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SigkinStatus {
    match err {
        Error::Io { .. } => SigkinStatus::Io,
        Error::Parse { .. } => SigkinStatus::ParseError,
        Error::Unreachable { .. }
        | Error::Planning { .. }
        | Error::Training { .. }
        | Error::DegenerateReferences => SigkinStatus::NumericalFailure,
        _ => SigkinStatus::InvalidData,
    }
}

fn fail(err: &Error) -> SigkinStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Last error message for this thread; valid until the next failing call.
#[unsafe(no_mangle)]
pub extern "C" fn sigkin_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn sigkin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, SigkinStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(SigkinStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SigkinStatus::InvalidUtf8)
        }
    }
}

macro_rules! out_write {
    ($out:ident, $value:expr) => {{
        if $out.is_null() {
            set_error("null out-pointer");
            return SigkinStatus::NullPointer;
        }
        unsafe { $out.write($value) };
        SigkinStatus::Ok
    }};
}

// ---------------------------------------------------------------------------
// Chain

/// Creates the bundled UR5e-style chain.
///
/// # Safety
/// `out` must be a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_chain_default(out: *mut *mut SigkinChain) -> SigkinStatus {
    out_write!(out, Box::into_raw(Box::new(SigkinChain(default_chain()))))
}

/// Loads and validates a chain description file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_chain_load(
    path: *const c_char,
    out: *mut *mut SigkinChain,
) -> SigkinStatus {
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_chain_file(&path) {
        Ok(chain) => out_write!(out, Box::into_raw(Box::new(SigkinChain(chain)))),
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `chain` must come from a sigkin constructor and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_chain_free(chain: *mut SigkinChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

// ---------------------------------------------------------------------------
// Signatures

/// Reads a signature file in the canonical `t x y [p]` format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_signature_read(
    path: *const c_char,
    out: *mut *mut SigkinSignature,
) -> SigkinStatus {
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return fail(&Error::Io { path, source: e }),
    };
    match parse_signature_file(&bytes, &ColumnSpec::txy()) {
        Ok(sig) => out_write!(out, Box::into_raw(Box::new(SigkinSignature(sig)))),
        Err(e) => fail(&e),
    }
}

/// Builds a signature from parallel arrays. `pressure` may be NULL.
///
/// # Safety
/// `t`, `x`, `y` (and `pressure` when non-NULL) must point to `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_signature_from_arrays(
    t: *const c_double,
    x: *const c_double,
    y: *const c_double,
    pressure: *const c_double,
    len: usize,
    out: *mut *mut SigkinSignature,
) -> SigkinStatus {
    if t.is_null() || x.is_null() || y.is_null() {
        set_error("null sample array");
        return SigkinStatus::NullPointer;
    }
    let samples: Vec<Sample> = (0..len)
        .map(|i| unsafe {
            Sample {
                t: *t.add(i),
                x: *x.add(i),
                y: *y.add(i),
                pressure: if pressure.is_null() {
                    None
                } else {
                    Some(*pressure.add(i))
                },
            }
        })
        .collect();
    let sig = SignatureTrajectory {
        samples,
        user_id: "capi".into(),
        label: Label::Genuine,
        session: 1,
    };
    if let Err(e) = sig.validate() {
        return fail(&e);
    }
    out_write!(out, Box::into_raw(Box::new(SigkinSignature(sig))))
}

/// Number of samples in the signature.
///
/// # Safety
/// `sig` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_signature_len(sig: *const SigkinSignature) -> usize {
    if sig.is_null() {
        return 0;
    }
    unsafe { &*sig }.0.samples.len()
}

/// # Safety
/// `sig` must come from a sigkin constructor and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_signature_free(sig: *mut SigkinSignature) {
    if !sig.is_null() {
        drop(unsafe { Box::from_raw(sig) });
    }
}

// ---------------------------------------------------------------------------
// Replay and estimation

/// Replays a signature on the simulated arm with the default workspace
/// placement, producing ground-truth joint features.
///
/// # Safety
/// `chain` and `sig` must be live handles; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_replay(
    chain: *const SigkinChain,
    sig: *const SigkinSignature,
    out: *mut *mut SigkinFeatures,
) -> SigkinStatus {
    if chain.is_null() || sig.is_null() {
        set_error("null handle");
        return SigkinStatus::NullPointer;
    }
    let chain = unsafe { &*chain };
    let sig = unsafe { &*sig };
    match replay(&chain.0, &sig.0, &WorkspacePlacement::default()) {
        Ok(series) => out_write!(out, Box::into_raw(Box::new(SigkinFeatures(series)))),
        Err(e) => fail(&e),
    }
}

/// Loads a trained estimator model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_model_load(
    path: *const c_char,
    out: *mut *mut SigkinModel,
) -> SigkinStatus {
    let path = match unsafe { path_from(path) } {
        Ok(p) => p,
        Err(status) => return status,
    };
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) => return fail(&Error::Io { path, source: e }),
    };
    match load_model(&bytes) {
        Ok(model) => out_write!(out, Box::into_raw(Box::new(SigkinModel(model)))),
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `model` must come from a sigkin constructor and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_model_free(model: *mut SigkinModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Estimates joint features from a pen trajectory with a trained model.
///
/// # Safety
/// `model` and `sig` must be live handles; `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_estimate(
    model: *const SigkinModel,
    sig: *const SigkinSignature,
    out: *mut *mut SigkinFeatures,
) -> SigkinStatus {
    if model.is_null() || sig.is_null() {
        set_error("null handle");
        return SigkinStatus::NullPointer;
    }
    let model = unsafe { &*model };
    let sig = unsafe { &*sig };
    match estimate_features(&model.0, &sig.0) {
        Ok(series) => out_write!(out, Box::into_raw(Box::new(SigkinFeatures(series)))),
        Err(e) => fail(&e),
    }
}

// ---------------------------------------------------------------------------
// Feature access

/// Number of rows (samples) in a feature series.
///
/// # Safety
/// `features` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_features_rows(features: *const SigkinFeatures) -> usize {
    if features.is_null() {
        return 0;
    }
    unsafe { &*features }.0.len()
}

/// 1 when the features came from the simulated arm, 0 when estimated.
///
/// # Safety
/// `features` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_features_is_simulated(features: *const SigkinFeatures) -> i32 {
    if features.is_null() {
        return 0;
    }
    match unsafe { &*features }.0.source {
        sigkin::replay::FeatureSource::Simulated => 1,
        sigkin::replay::FeatureSource::Estimated => 0,
    }
}

/// Copies one channel into `out[0..rows]`. Channels 0..6 are joint angles,
/// 6..12 angular velocities, 12..18 torques; channel 18 is the timestamp.
///
/// # Safety
/// `features` must be a live handle and `out` must hold `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_features_channel(
    features: *const SigkinFeatures,
    channel: usize,
    out: *mut c_double,
    len: usize,
) -> SigkinStatus {
    if features.is_null() || out.is_null() {
        set_error("null handle or buffer");
        return SigkinStatus::NullPointer;
    }
    let series = &unsafe { &*features }.0;
    if len < series.len() {
        set_error("output buffer too small");
        return SigkinStatus::InvalidData;
    }
    if channel > 18 {
        set_error("channel out of range (0..=18)");
        return SigkinStatus::InvalidData;
    }
    for i in 0..series.len() {
        let v = match channel {
            0..=5 => series.theta[i][channel],
            6..=11 => series.omega[i][channel - 6],
            12..=17 => series.tau[i][channel - 12],
            _ => series.t[i],
        };
        unsafe { out.add(i).write(v) };
    }
    SigkinStatus::Ok
}

/// # Safety
/// `features` must come from a sigkin constructor and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_features_free(features: *mut SigkinFeatures) {
    if !features.is_null() {
        drop(unsafe { Box::from_raw(features) });
    }
}

// ---------------------------------------------------------------------------
// Verification

/// Scores a questioned feature series against a reference set on one feature
/// group. At least two references are required.
///
/// # Safety
/// `questioned` must be a live handle, `refs` must point to `n_refs` live
/// handles, and `out` must be a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_score(
    group: SigkinGroup,
    questioned: *const SigkinFeatures,
    refs: *const *const SigkinFeatures,
    n_refs: usize,
    out: *mut SigkinScore,
) -> SigkinStatus {
    if questioned.is_null() || refs.is_null() {
        set_error("null handle");
        return SigkinStatus::NullPointer;
    }
    let group = group.to_group();
    let questioned = &unsafe { &*questioned }.0;
    let mut ref_matrices = Vec::with_capacity(n_refs);
    for i in 0..n_refs {
        let handle = unsafe { *refs.add(i) };
        if handle.is_null() {
            set_error("null reference handle");
            return SigkinStatus::NullPointer;
        }
        match build_feature_matrix(&unsafe { &*handle }.0, group) {
            Ok(m) => ref_matrices.push(m),
            Err(e) => return fail(&e),
        }
    }
    let q = match build_feature_matrix(questioned, group) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let stats = match RefStats::compute(&ref_matrices) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    match score_questioned(&q, &ref_matrices, &stats) {
        Ok(score) => out_write!(
            out,
            SigkinScore {
                s_r: score.s_r,
                path_len: score.path_len,
                s_hat_1: score.s_hat_1,
                s_hat_2: score.s_hat_2,
                mu_r: score.mu_r,
            }
        ),
        Err(e) => fail(&e),
    }
}

/// Equal error rate of two score lists (lower score = more genuine).
///
/// # Safety
/// `genuine` and `impostor` must point to `n_genuine` / `n_impostor`
/// doubles; `out` must be a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn sigkin_eer(
    genuine: *const c_double,
    n_genuine: usize,
    impostor: *const c_double,
    n_impostor: usize,
    out: *mut c_double,
) -> SigkinStatus {
    if genuine.is_null() || impostor.is_null() {
        set_error("null score array");
        return SigkinStatus::NullPointer;
    }
    let genuine = unsafe { std::slice::from_raw_parts(genuine, n_genuine) };
    let impostor = unsafe { std::slice::from_raw_parts(impostor, n_impostor) };
    match compute_eer(genuine, impostor) {
        Ok(eer) => out_write!(out, eer),
        Err(e) => fail(&e),
    }
}
