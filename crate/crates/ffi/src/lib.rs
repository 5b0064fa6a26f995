//! C ABI over `dfl-core`.
//!
//! Scenarios and solutions are opaque heap handles released with their
//! `*_free` function. Every fallible call returns a [`DflStatus`]; on failure
//! a description is available from [`dfl_last_error_message`] on the same
//! thread until the next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dfl_core::{
    generate_scenario, global_cost, run_baseline, solve, Allocation, BaselineKind, CostBreakdown,
    CostWeights, Error, Scenario, ScenarioConfig, SolverConfig, SolverTrace,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Configuration rejected (bad JSON, unknown key, out-of-range value).
    Validation = 3,
    /// Inputs break an operation's preconditions.
    Contract = 4,
    Runtime = 5,
    Panic = 6,
}

/// A generated network scenario.
pub struct DflScenario {
    inner: Scenario,
}

/// An allocation with its cost and solver trace.
pub struct DflSolution {
    alloc: Allocation,
    cost: CostBreakdown,
    trace: SolverTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: DflStatus, msg: impl Into<String>) -> DflStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> DflStatus {
    let status = match e {
        Error::Validation(_) | Error::Json(_) => DflStatus::Validation,
        Error::Contract(_) => DflStatus::Contract,
        _ => DflStatus::Runtime,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DflStatus) -> DflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DflStatus::Panic, "internal panic"),
    }
}

/// Borrow a C string; `Ok(None)` for NULL.
unsafe fn opt_str<'a>(s: *const c_char) -> Result<Option<&'a str>, DflStatus> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| fail(DflStatus::InvalidArgument, "string is not valid UTF-8"))
}

unsafe fn solver_config(json: *const c_char) -> Result<SolverConfig, DflStatus> {
    match opt_str(json)? {
        None => Ok(SolverConfig::default()),
        Some(text) => {
            let cfg: SolverConfig = serde_json::from_str(text)
                .map_err(|e| fail(DflStatus::Validation, format!("solver config: {e}")))?;
            cfg.validate().map_err(from_core)?;
            Ok(cfg)
        }
    }
}

macro_rules! check_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(DflStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        })+
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn dfl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generate a scenario from a JSON scenario config (NULL or `{}` for the
/// defaults). On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be NULL or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_scenario_from_json(
    json: *const c_char,
    out: *mut *mut DflScenario,
) -> DflStatus {
    guard(|| {
        check_null!(out);
        *out = ptr::null_mut();
        let cfg = match tri!(opt_str(json)) {
            None => ScenarioConfig::default(),
            Some(text) => match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => return fail(DflStatus::Validation, format!("scenario config: {e}")),
            },
        };
        match generate_scenario(&cfg) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(DflScenario { inner: s }));
                DflStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from [`dfl_scenario_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dfl_scenario_free(scenario: *mut DflScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Write the number of cars, RSUs and resource blocks (any pointer may be NULL).
///
/// # Safety
/// `scenario` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_scenario_dims(
    scenario: *const DflScenario,
    num_cars: *mut usize,
    num_rsus: *mut usize,
    num_rbs: *mut usize,
) -> DflStatus {
    guard(|| {
        check_null!(scenario);
        let s = &(*scenario).inner;
        for (p, v) in [
            (num_cars, s.num_cars()),
            (num_rsus, s.num_rsus()),
            (num_rbs, s.num_rbs()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        DflStatus::Ok
    })
}

unsafe fn finish(
    out: *mut *mut DflSolution,
    (alloc, cost, trace): (Allocation, CostBreakdown, SolverTrace),
) -> DflStatus {
    *out = Box::into_raw(Box::new(DflSolution { alloc, cost, trace }));
    DflStatus::Ok
}

/// Run the full solver from the default starting allocation.
/// `solver_json` may be NULL for the default solver config.
///
/// # Safety
/// `scenario` must be a live handle, `solver_json` NULL or a C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_solve(
    scenario: *const DflScenario,
    solver_json: *const c_char,
    out: *mut *mut DflSolution,
) -> DflStatus {
    guard(|| {
        check_null!(scenario, out);
        *out = ptr::null_mut();
        let cfg = tri!(solver_config(solver_json));
        match solve(&(*scenario).inner, &cfg, None) {
            Ok(r) => finish(out, r),
            Err(e) => from_core(e),
        }
    })
}

/// Run a comparison scheme by name: `baseline_a`, `baseline_p`,
/// `baseline_r`, `equal_power` or `random`.
///
/// # Safety
/// As [`dfl_solve`]; `kind` must be a C string.
#[no_mangle]
pub unsafe extern "C" fn dfl_run_baseline(
    scenario: *const DflScenario,
    kind: *const c_char,
    solver_json: *const c_char,
    seed: u64,
    out: *mut *mut DflSolution,
) -> DflStatus {
    guard(|| {
        check_null!(scenario, kind, out);
        *out = ptr::null_mut();
        let name = tri!(opt_str(kind)).unwrap_or_default();
        let kind: BaselineKind = match name.parse() {
            Ok(k) => k,
            Err(msg) => return fail(DflStatus::InvalidArgument, msg),
        };
        let cfg = tri!(solver_config(solver_json));
        finish(out, run_baseline(&(*scenario).inner, kind, &cfg, seed))
    })
}

/// # Safety
/// `solution` must be NULL or a handle from a solve call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dfl_solution_free(solution: *mut DflSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Final cost components (any pointer may be NULL).
///
/// # Safety
/// `solution` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_solution_cost(
    solution: *const DflSolution,
    per_sum: *mut f64,
    latency_sum: *mut f64,
    total: *mut f64,
) -> DflStatus {
    guard(|| {
        check_null!(solution);
        let c = &(*solution).cost;
        for (p, v) in [
            (per_sum, c.per_sum),
            (latency_sum, c.latency_sum),
            (total, c.total),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        DflStatus::Ok
    })
}

/// Outer iterations used and whether the stopping test was met.
///
/// # Safety
/// `solution` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_solution_convergence(
    solution: *const DflSolution,
    iterations_used: *mut usize,
    converged: *mut bool,
) -> DflStatus {
    guard(|| {
        check_null!(solution);
        let t = &(*solution).trace;
        if !iterations_used.is_null() {
            *iterations_used = t.iterations_used;
        }
        if !converged.is_null() {
            *converged = t.converged;
        }
        DflStatus::Ok
    })
}

/// Copy the cost after each outer iteration (index 0 is the starting
/// point) into `costs`. `*len` holds the buffer capacity on entry and the
/// number of values on exit; a short buffer yields `InvalidArgument` with
/// `*len` set to the size needed.
///
/// # Safety
/// `solution` must be a live handle; `costs` must hold `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dfl_solution_objective(
    solution: *const DflSolution,
    costs: *mut f64,
    len: *mut usize,
) -> DflStatus {
    guard(|| {
        check_null!(solution, len);
        let its = &(*solution).trace.iterations;
        let cap = *len;
        *len = its.len();
        if cap < its.len() {
            return fail(
                DflStatus::InvalidArgument,
                format!("buffer holds {cap}, need {}", its.len()),
            );
        }
        check_null!(costs);
        for (i, r) in its.iter().enumerate() {
            *costs.add(i) = r.total;
        }
        DflStatus::Ok
    })
}

/// Per-car RSU index, RB index (-1 when unassigned) and transmit power in
/// watts. Each non-NULL array must hold `len` entries, `len` being the
/// number of cars.
///
/// # Safety
/// `solution` must be a live handle; non-NULL arrays must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn dfl_solution_allocation(
    solution: *const DflSolution,
    rsu: *mut i64,
    rb: *mut i64,
    power: *mut f64,
    len: usize,
) -> DflStatus {
    guard(|| {
        check_null!(solution);
        let a = &(*solution).alloc;
        let n = a.num_cars();
        if len != n {
            return fail(
                DflStatus::InvalidArgument,
                format!("len {len} != number of cars {n}"),
            );
        }
        let idx = |v: Option<usize>| v.map_or(-1, |i| i as i64);
        for car in 0..n {
            if !rsu.is_null() {
                *rsu.add(car) = idx(a.rsu_of(car));
            }
            if !rb.is_null() {
                *rb.add(car) = idx(a.rb_of(car));
            }
            if !power.is_null() {
                *power.add(car) = a.power[car];
            }
        }
        DflStatus::Ok
    })
}

/// Evaluate the weighted cost of an arbitrary allocation given as per-car
/// RSU and RB indices (negative for none) and powers, with weights
/// `alpha` and `1 - alpha`. Feasibility is not checked.
///
/// # Safety
/// `scenario` must be a live handle; the three arrays must hold `len`
/// elements; `total` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfl_global_cost(
    scenario: *const DflScenario,
    rsu: *const i64,
    rb: *const i64,
    power: *const f64,
    len: usize,
    alpha: f64,
    total: *mut f64,
) -> DflStatus {
    guard(|| {
        check_null!(scenario, rsu, rb, power, total);
        let s = &(*scenario).inner;
        if len != s.num_cars() {
            return fail(
                DflStatus::InvalidArgument,
                format!("len {len} != number of cars {}", s.num_cars()),
            );
        }
        let weights = match CostWeights::from_alpha(alpha) {
            Ok(w) => w,
            Err(e) => return from_core(e),
        };
        let rsu = std::slice::from_raw_parts(rsu, len);
        let rb = std::slice::from_raw_parts(rb, len);
        let power = std::slice::from_raw_parts(power, len).to_vec();
        let to_idx = |v: i64, bound: usize, what: &str| -> Result<Option<usize>, DflStatus> {
            match v {
                v if v < 0 => Ok(None),
                v if (v as u64) < bound as u64 => Ok(Some(v as usize)),
                v => Err(fail(
                    DflStatus::InvalidArgument,
                    format!("{what} index {v} out of range"),
                )),
            }
        };
        let rsu_of = tri!(rsu
            .iter()
            .map(|&v| to_idx(v, s.num_rsus(), "RSU"))
            .collect::<Result<Vec<_>, _>>());
        let rb_of = tri!(rb
            .iter()
            .map(|&v| to_idx(v, s.num_rbs(), "RB"))
            .collect::<Result<Vec<_>, _>>());
        let alloc = Allocation::from_indices(s.num_rsus(), s.num_rbs(), &rsu_of, &rb_of, power);
        *total = global_cost(s, &alloc, &weights).total;
        DflStatus::Ok
    })
}
