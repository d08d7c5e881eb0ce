//! C interface.
//!
//! Every function returns a [`PemweStatus`]; results come back through out
//! pointers. Handles are opaque and must be released with their `_free`
//! function. On failure, [`pemwe_last_error_message`] describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use pemwe_core::config::RunConfig;
use pemwe_core::dataset::generate_dataset;
use pemwe_core::network::NetworkParameters;
use pemwe_core::simulator::{integrate_trajectory, Trajectory};
use pemwe_core::training::{train, PhysicsContext};
use pemwe_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PemweStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numerical = 3,
    Io = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// Run configuration.
pub struct PemweConfig(RunConfig);

/// Simulated trajectory.
pub struct PemweTrajectory(Trajectory);

/// Trained network.
pub struct PemweModel(NetworkParameters);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).expect("no interior nul"));
}

fn status_of(err: &Error) -> PemweStatus {
    match err.exit_code() {
        2 => PemweStatus::Config,
        4 => PemweStatus::Io,
        _ => PemweStatus::Numerical,
    }
}

struct Failure(PemweStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PemweStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(PemweStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PemweStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PemweStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            PemweStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread. Empty after a
/// successful call. The pointer stays valid until the next call.
#[no_mangle]
pub extern "C" fn pemwe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pemwe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_config_default(out: *mut *mut PemweConfig) -> PemweStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store(out, PemweConfig(RunConfig::default()));
        Ok(())
    })
}

/// Parses a JSON configuration document. Missing keys take defaults.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_config_from_json(json: *const c_char, out: *mut *mut PemweConfig) -> PemweStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::from_json_str(text(json, "json")?)?;
        store(out, PemweConfig(config));
        Ok(())
    })
}

/// Loads a JSON configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_config_load(path: *const c_char, out: *mut *mut PemweConfig) -> PemweStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::load(&PathBuf::from(text(path, "path")?))?;
        store(out, PemweConfig(config));
        Ok(())
    })
}

/// Overrides the number of training epochs.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pemwe_config_set_epochs(config: *mut PemweConfig, epochs: usize) -> PemweStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        if epochs == 0 {
            return Err(invalid("epochs must be positive"));
        }
        config.0.training.max_epochs = epochs;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pemwe_config_free(config: *mut PemweConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulates the trajectory at rate constant `k5` in m³/(mol s).
/// A negative `k5` selects the configured `k5_true`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_simulate(
    config: *const PemweConfig,
    k5: f64,
    out: *mut *mut PemweTrajectory,
) -> PemweStatus {
    guard(|| {
        let c = &borrow(config, "config")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if k5.is_nan() {
            return Err(invalid("k5 is NaN"));
        }
        let k5 = if k5 < 0.0 { c.physics.k5_true } else { k5 };
        let traj = integrate_trajectory(&c.physics, &c.conditions, k5, c.pipeline.n_steps)?;
        store(out, PemweTrajectory(traj));
        Ok(())
    })
}

/// Number of stored time points.
///
/// # Safety
/// `traj` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_trajectory_len(traj: *const PemweTrajectory, len: *mut usize) -> PemweStatus {
    guard(|| {
        let t = &borrow(traj, "trajectory")?.0;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = t.len();
        Ok(())
    })
}

/// Copies times (h), voltages (V) and thicknesses (cm) into caller buffers
/// of `capacity` elements each. Any buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn pemwe_trajectory_copy(
    traj: *const PemweTrajectory,
    times: *mut f64,
    voltages: *mut f64,
    thicknesses: *mut f64,
    capacity: usize,
) -> PemweStatus {
    guard(|| {
        let t = &borrow(traj, "trajectory")?.0;
        if capacity < t.len() {
            return Err(invalid(format!("capacity {capacity} is below the trajectory length {}", t.len())));
        }
        for (dst, src) in [(times, &t.times), (voltages, &t.voltages), (thicknesses, &t.thicknesses)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pemwe_trajectory_free(traj: *mut PemweTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Simulates the configured experiment, samples the noisy training data and
/// trains a network. Blocks until training finishes.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_train(config: *const PemweConfig, out: *mut *mut PemweModel) -> PemweStatus {
    guard(|| {
        let c = &borrow(config, "config")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let traj = integrate_trajectory(&c.physics, &c.conditions, c.physics.k5_true, c.pipeline.n_steps)?;
        let p = &c.pipeline;
        let dataset = generate_dataset(&traj, p.n_train, p.n_test, p.train_fraction, p.seed)?;
        let ctx = PhysicsContext::new(&c.physics, &c.conditions, c.training.v_ref)?;
        let (net, _) = train(&ctx, &dataset, &c.training)?;
        store(out, PemweModel(net));
        Ok(())
    })
}

/// Loads a model checkpoint written by the `train` command.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_model_load(path: *const c_char, out: *mut *mut PemweModel) -> PemweStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = NetworkParameters::load(&PathBuf::from(text(path, "path")?))?;
        store(out, PemweModel(net));
        Ok(())
    })
}

/// Writes the model to `path`.
///
/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pemwe_model_save(model: *const PemweModel, path: *const c_char) -> PemweStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        m.save(&PathBuf::from(text(path, "path")?), 0)?;
        Ok(())
    })
}

/// Predicted voltage (V) and thickness (cm) at time `t` (h).
///
/// # Safety
/// `model` must be a live handle; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pemwe_model_predict(
    model: *const PemweModel,
    t: f64,
    voltage: *mut f64,
    thickness: *mut f64,
) -> PemweStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        if voltage.is_null() || thickness.is_null() {
            return Err(null("output"));
        }
        if !t.is_finite() {
            return Err(invalid(format!("time must be finite, got {t}")));
        }
        let p = m.forward(t);
        *voltage = p.voltage;
        *thickness = p.thickness;
        Ok(())
    })
}

/// Learned scaled rate constant; the physical value is `k5_hat * 1000`.
///
/// # Safety
/// `model` must be a live handle and `k5_hat` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pemwe_model_k5_hat(model: *const PemweModel, k5_hat: *mut f64) -> PemweStatus {
    guard(|| {
        let m = &borrow(model, "model")?.0;
        if k5_hat.is_null() {
            return Err(null("k5_hat"));
        }
        *k5_hat = m.k5_hat();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pemwe_model_free(model: *mut PemweModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
