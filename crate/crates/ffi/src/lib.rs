//! C ABI over the `thermodamage` simulator.
//!
//! Configurations and simulations are opaque handles created and destroyed
//! through this interface. Every fallible function returns a [`TdStatus`];
//! on failure the message is kept per thread and can be copied out with
//! [`td_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use thermodamage::constitutive::{h2_bootstrap_iterations, validate_exponents};
use thermodamage::io::{load_config, parse_config, run_single, RunConfig};
use thermodamage::stepper::{Simulation, StepOutcome};
use thermodamage::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Solver = 5,
    RunAborted = 6,
    Io = 7,
    BufferTooSmall = 8,
    Finished = 9,
    Panic = 10,
}

/// Nodal arrays that can be copied out of a simulation.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdField {
    Displacement = 0,
    Velocity = 1,
    Enthalpy = 2,
    Damage = 3,
    /// Multiplier of `χ ≥ 0` from the last step, zeros before the first.
    Multiplier = 4,
}

/// Summary of the last accepted step.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TdStepSummary {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub tau_halvings: usize,
    pub outer_iterations: usize,
    pub cancel_resid: f64,
    /// Energy ledger left-hand side minus right-hand side.
    pub energy_excess: f64,
    pub energy_scale: f64,
    pub w_min: f64,
    pub chi_min: f64,
    pub chi_max: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TdExponents {
    pub admissible: c_int,
    /// NaN when inadmissible.
    pub r: f64,
    pub s: f64,
    pub s_star_star: f64,
}

/// Opaque parsed and validated run configuration.
pub struct TdConfig {
    inner: RunConfig,
}

/// Opaque run in progress.
pub struct TdSimulation {
    sim: Simulation,
    last: Option<StepOutcome>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure {
    status: TdStatus,
    message: String,
}

impl Failure {
    fn new(status: TdStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ConfigParse { .. } | Error::ConfigInvalid(_) => TdStatus::Config,
            Error::Solver(_) | Error::StepRejected(_) => TdStatus::Solver,
            Error::RunAborted { .. } => TdStatus::RunAborted,
            Error::Io { .. } | Error::Format { .. } => TdStatus::Io,
            Error::Domain(_) | Error::Coefficient(_) | Error::Mesh(_) | Error::Assembly(_) => TdStatus::Domain,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            TdStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            TdStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(TdStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(s, name)?;
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::new(TdStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Copies `values` into `buf[..cap]` and stores the count in `len`; fails
/// with `BufferTooSmall` (after setting `len`) when `cap` is short.
///
/// # Safety
/// `buf` must be valid for `cap` writes and `len` for one write.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    non_null(len, "len")?;
    *len = values.len();
    if cap < values.len() {
        return Err(Failure::new(
            TdStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    non_null(buf, "buf")?;
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message of this thread, without the
/// terminating NUL; zero after a successful call.
#[no_mangle]
pub extern "C" fn td_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message of this thread into `buf` with a
/// terminating NUL. Does not reset the stored message.
///
/// # Safety
/// `buf` must be valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn td_last_error_message(buf: *mut c_char, cap: usize) -> TdStatus {
    if buf.is_null() {
        return TdStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if cap < msg.len() + 1 {
            return TdStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, msg.len());
        *buf.add(msg.len()) = 0;
        TdStatus::Ok
    })
}

/// Reads and validates a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_config_load(path: *const c_char, out: *mut *mut TdConfig) -> TdStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = read_str(path, "path")?;
        let inner = load_config(Path::new(path))?;
        *out = Box::into_raw(Box::new(TdConfig { inner }));
        Ok(())
    })
}

/// Parses and validates a configuration held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_config_parse(text: *const c_char, out: *mut *mut TdConfig) -> TdStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(text, "text")?;
        let inner = parse_config(text)?;
        *out = Box::into_raw(Box::new(TdConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from `td_config_load`/`td_config_parse`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn td_config_free(config: *mut TdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Replaces the time step of a configuration.
///
/// # Safety
/// `config` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn td_config_set_tau(config: *mut TdConfig, tau: f64) -> TdStatus {
    guard(|| {
        non_null(config, "config")?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Failure::new(
                TdStatus::Domain,
                format!("time step must be positive, got {tau}"),
            ));
        }
        let cfg = &mut *config;
        cfg.inner = cfg.inner.with_tau(tau);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live configuration handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_config_node_count(config: *const TdConfig, out: *mut usize) -> TdStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        *out = (*config).inner.problem.mesh.node_count();
        Ok(())
    })
}

/// Runs a configuration to its final time and writes time series,
/// snapshots and the audit into `out_dir`. `all_pass` is set to 1 when every
/// audit verdict passes.
///
/// # Safety
/// `config` must be a live handle, `out_dir` a NUL-terminated string and
/// `all_pass` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_run_single(
    config: *const TdConfig,
    out_dir: *const c_char,
    all_pass: *mut c_int,
) -> TdStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(all_pass, "all_pass")?;
        let dir = read_str(out_dir, "out_dir")?;
        let run = run_single(&(*config).inner, Path::new(dir))?;
        *all_pass = c_int::from(run.report.all_pass());
        Ok(())
    })
}

/// Starts a simulation at the initial state of a configuration. The
/// configuration may be freed afterwards.
///
/// # Safety
/// `config` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_new(config: *const TdConfig, out: *mut *mut TdSimulation) -> TdStatus {
    guard(|| {
        non_null(config, "config")?;
        non_null(out, "out")?;
        let cfg = &(*config).inner;
        let sim = Simulation::new(
            cfg.problem.clone(),
            cfg.controls.clone(),
            cfg.initial.clone(),
            cfg.final_time,
        )?;
        *out = Box::into_raw(Box::new(TdSimulation { sim, last: None }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_free(sim: *mut TdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Takes one accepted step; `finished` is set to 1 once the final time is
/// reached. Returns `Finished` when called after that.
///
/// # Safety
/// `sim` must be a live handle; `finished` may be null.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_step(sim: *mut TdSimulation, finished: *mut c_int) -> TdStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let s = &mut *sim;
        if s.sim.is_finished() {
            return Err(Failure::new(TdStatus::Finished, "final time already reached"));
        }
        s.last = Some(s.sim.advance()?);
        if !finished.is_null() {
            *finished = c_int::from(s.sim.is_finished());
        }
        Ok(())
    })
}

/// Steps until the final time.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_run(sim: *mut TdSimulation) -> TdStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let s = &mut *sim;
        while !s.sim.is_finished() {
            s.last = Some(s.sim.advance()?);
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `t` and `steps` may be null.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_progress(sim: *const TdSimulation, t: *mut f64, steps: *mut usize) -> TdStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let s = &*sim;
        if !t.is_null() {
            *t = s.sim.time();
        }
        if !steps.is_null() {
            *steps = s.sim.steps_taken();
        }
        Ok(())
    })
}

/// Copies a nodal field of the current state. Vector fields are stored
/// node-major, `dim` components per node.
///
/// # Safety
/// `sim` must be a live handle, `buf` valid for `cap` writes and `len` for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_copy_field(
    sim: *const TdSimulation,
    field: TdField,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> TdStatus {
    guard(|| {
        non_null(sim, "sim")?;
        let s = &*sim;
        let state = s.sim.state();
        let zeros;
        let values: &[f64] = match field {
            TdField::Displacement => &state.u,
            TdField::Velocity => &state.v,
            TdField::Enthalpy => &state.w,
            TdField::Damage => &state.chi,
            TdField::Multiplier => match &s.last {
                Some(out) => &out.xi,
                None => {
                    zeros = vec![0.0; state.chi.len()];
                    &zeros
                }
            },
        };
        copy_out(values, buf, cap, len)
    })
}

/// Summary of the last accepted step; fails with `Domain` before the first
/// step.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_last_step(sim: *const TdSimulation, out: *mut TdStepSummary) -> TdStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(out, "out")?;
        let Some(last) = &(*sim).last else {
            return Err(Failure::new(TdStatus::Domain, "no step has been taken"));
        };
        let r = &last.report;
        *out = TdStepSummary {
            step: r.step,
            t: r.t,
            tau: r.tau,
            tau_halvings: r.tau_halvings,
            outer_iterations: r.outer_iterations,
            cancel_resid: r.cancel_resid,
            energy_excess: r.ledger.excess(),
            energy_scale: r.ledger.scale(),
            w_min: r.w_min,
            chi_min: r.chi_min,
            chi_max: r.chi_max,
        };
        Ok(())
    })
}

/// Admissibility of `(σ, q, q₀)` and the derived integrability exponents.
/// Inadmissible input is not an error: `admissible` is 0 and the reason is
/// left in the last-error slot.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn td_validate_exponents(sigma: f64, q: f64, q0: f64, out: *mut TdExponents) -> TdStatus {
    let mut reason = None;
    let status = guard(|| {
        non_null(out, "out")?;
        let v = validate_exponents(sigma, q, q0);
        *out = TdExponents {
            admissible: c_int::from(v.admissible),
            r: v.r.unwrap_or(f64::NAN),
            s: v.s.unwrap_or(f64::NAN),
            s_star_star: v.s_star_star.unwrap_or(f64::NAN),
        };
        reason = v.violation;
        Ok(())
    });
    if let Some(clause) = reason {
        set_last_error(format!("violated: {clause}"));
    }
    status
}

/// Writes the integrability bootstrap trace for `p > 3` into `buf`; `len`
/// receives the trace length.
///
/// # Safety
/// `buf` must be valid for `cap` writes and `len` for one write.
#[no_mangle]
pub unsafe extern "C" fn td_h2_bootstrap(p: f64, buf: *mut f64, cap: usize, len: *mut usize) -> TdStatus {
    guard(|| {
        let b = h2_bootstrap_iterations(p)?;
        copy_out(&b.trace, buf, cap, len)
    })
}
