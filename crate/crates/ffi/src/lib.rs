//! C ABI over the `tailor` library.
//!
//! Objects cross the boundary as opaque handles created by `tailor_*`
//! constructors and released with the matching `*_free`. Every fallible
//! call returns a [`TailorStatus`]; on failure a description is available
//! from [`tailor_last_error`] on the same thread. Outputs are written only
//! on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tailor::baselines::{aoi_np_solve, zero_wait_cost};
use tailor::grids::{GridSpec, ThetaMax, DEFAULT_DT, DEFAULT_N_LOG, DEFAULT_TAIL_EPS};
use tailor::simulator::{simulate, SimConfig, SimError};
use tailor::solver::{self, SolvedPolicy, SolverConfig, SolverError};
use tailor::{DistributionError, ServiceDistribution, Theta};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    NotConverged = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque service-time distribution.
pub struct TailorDistribution {
    inner: ServiceDistribution,
}

/// Opaque solved policy.
pub struct TailorSolution {
    inner: SolvedPolicy,
}

/// Grid parameters; a field `<= 0` selects the library default.
/// `theta_max > 0` takes precedence over `tail_eps`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailorGridOptions {
    pub dt: f64,
    pub y_cut: f64,
    pub theta_fine: f64,
    pub theta_max: f64,
    pub tail_eps: f64,
    pub n_log: u32,
    pub far_field_slope: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    let c = CString::new(msg).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TailorStatus, msg: impl Into<String>) -> TailorStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> TailorStatus>(f: F) -> TailorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TailorStatus::Panic, "internal panic"),
    }
}

fn dist_status(e: &DistributionError) -> TailorStatus {
    match e {
        DistributionError::Io(_) => TailorStatus::Io,
        _ => TailorStatus::InvalidArgument,
    }
}

fn solver_status(e: &SolverError) -> TailorStatus {
    match e {
        SolverError::Grid(_) | SolverError::InvalidCost { .. } => TailorStatus::InvalidArgument,
        _ => TailorStatus::Numerical,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tailor_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

unsafe fn put_distribution(
    result: Result<ServiceDistribution, DistributionError>,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    if out.is_null() {
        return fail(TailorStatus::NullPointer, "output pointer is NULL");
    }
    match result {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(TailorDistribution { inner }));
            TailorStatus::Ok
        }
        Err(e) => fail(dist_status(&e), e.to_string()),
    }
}

/// Exponential service with the given rate.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_exponential(
    rate: f64,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    guard(|| put_distribution(ServiceDistribution::exponential(rate), out))
}

/// Lomax (Pareto II) service; `shape` must exceed 2.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_lomax(
    scale: f64,
    shape: f64,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    guard(|| put_distribution(ServiceDistribution::lomax(scale, shape), out))
}

/// Log-normal service, `ln Y ~ N(mu, sigma2)`.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_lognormal(
    mu: f64,
    sigma2: f64,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    guard(|| put_distribution(ServiceDistribution::log_normal(mu, sigma2), out))
}

/// Empirical distribution of `len` observed service times.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be NULL or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    guard(|| {
        if values.is_null() {
            return fail(TailorStatus::NullPointer, "values is NULL");
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        put_distribution(ServiceDistribution::from_values(v), out)
    })
}

/// Empirical distribution read from a trace file (one value per line).
///
/// # Safety
/// `path` must be NULL or a nul-terminated string; `out` must be NULL or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_from_samples(
    path: *const c_char,
    out: *mut *mut TailorDistribution,
) -> TailorStatus {
    guard(|| {
        if path.is_null() {
            return fail(TailorStatus::NullPointer, "path is NULL");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(TailorStatus::InvalidArgument, "path is not valid UTF-8");
        };
        put_distribution(ServiceDistribution::from_samples(PathBuf::from(p)), out)
    })
}

/// Releases a distribution; NULL is ignored.
///
/// # Safety
/// `d` must be NULL or a handle from a `tailor_distribution_*` constructor
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_free(d: *mut TailorDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// `E[Y]` and `E[Y²]`.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_moments(
    d: *const TailorDistribution,
    mean: *mut f64,
    second: *mut f64,
) -> TailorStatus {
    guard(|| {
        if d.is_null() || mean.is_null() || second.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        let m = (*d).inner.moments();
        *mean = m.mean;
        *second = m.second;
        TailorStatus::Ok
    })
}

/// Hazard rate at service age `b`.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_distribution_hazard(
    d: *const TailorDistribution,
    b: f64,
    out: *mut f64,
) -> TailorStatus {
    guard(|| {
        if d.is_null() || out.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        match (*d).inner.hazard(b) {
            Ok(h) => {
                *out = h;
                TailorStatus::Ok
            }
            Err(e) => fail(dist_status(&e), e.to_string()),
        }
    })
}

/// Average cost of sampling immediately after every delivery.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_zero_wait_cost(
    d: *const TailorDistribution,
    kappa_s: f64,
    rho: *mut f64,
) -> TailorStatus {
    guard(|| {
        if d.is_null() || rho.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        if !(kappa_s.is_finite() && kappa_s >= 0.0) {
            return fail(TailorStatus::InvalidArgument, "kappa_s must be >= 0");
        }
        *rho = zero_wait_cost(&(*d).inner, kappa_s);
        TailorStatus::Ok
    })
}

/// Optimal threshold sampling without preemption.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_aoi_np(
    d: *const TailorDistribution,
    kappa_s: f64,
    rho: *mut f64,
    beta: *mut f64,
) -> TailorStatus {
    guard(|| {
        if d.is_null() || rho.is_null() || beta.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        match aoi_np_solve(&(*d).inner, kappa_s) {
            Ok(r) => {
                *rho = r.rho;
                *beta = r.beta;
                TailorStatus::Ok
            }
            Err(e) => fail(TailorStatus::Numerical, e.to_string()),
        }
    })
}

/// Library defaults: every field selects its default.
#[no_mangle]
pub extern "C" fn tailor_grid_options_default() -> TailorGridOptions {
    TailorGridOptions {
        dt: DEFAULT_DT,
        y_cut: 0.0,
        theta_fine: 0.0,
        theta_max: 0.0,
        tail_eps: DEFAULT_TAIL_EPS,
        n_log: DEFAULT_N_LOG as u32,
        far_field_slope: 0.0,
    }
}

fn grid_spec(o: &TailorGridOptions) -> GridSpec {
    let pos = |x: f64| (x > 0.0).then_some(x);
    GridSpec {
        dt: pos(o.dt).unwrap_or(DEFAULT_DT),
        y_cut: pos(o.y_cut),
        theta_fine: pos(o.theta_fine),
        theta_max: match pos(o.theta_max) {
            Some(v) => ThetaMax::Value(v),
            None => ThetaMax::TailEps(pos(o.tail_eps).unwrap_or(DEFAULT_TAIL_EPS)),
        },
        n_log: if o.n_log == 0 {
            DEFAULT_N_LOG
        } else {
            o.n_log as usize
        },
        far_field_slope: pos(o.far_field_slope),
    }
}

/// Runs policy iteration. `grid` may be NULL for defaults.
///
/// When iteration stops at the limit without converging, the best iterate is
/// still returned through `out` together with `NotConverged`.
///
/// # Safety
/// Pointers must be NULL or valid; `*out` receives a handle to free with
/// [`tailor_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn tailor_solve(
    d: *const TailorDistribution,
    kappa_s: f64,
    kappa_p: f64,
    grid: *const TailorGridOptions,
    out: *mut *mut TailorSolution,
) -> TailorStatus {
    guard(|| {
        if d.is_null() || out.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        let spec = if grid.is_null() {
            GridSpec::default()
        } else {
            grid_spec(&*grid)
        };
        match solver::solve(&(*d).inner, &spec, &SolverConfig::new(kappa_s, kappa_p)) {
            Ok(inner) => {
                let converged = inner.converged;
                let iterations = inner.iterations;
                *out = Box::into_raw(Box::new(TailorSolution { inner }));
                if converged {
                    TailorStatus::Ok
                } else {
                    fail(
                        TailorStatus::NotConverged,
                        format!("no convergence after {iterations} iterations"),
                    )
                }
            }
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// Releases a solution; NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a handle from [`tailor_solve`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_free(s: *mut TailorSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Optimal average cost.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_rho(
    s: *const TailorSolution,
    rho: *mut f64,
) -> TailorStatus {
    guard(|| {
        if s.is_null() || rho.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        *rho = (*s).inner.rho;
        TailorStatus::Ok
    })
}

/// Number of state-grid nodes (length of the per-node arrays).
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_len(
    s: *const TailorSolution,
    len: *mut usize,
) -> TailorStatus {
    guard(|| {
        if s.is_null() || len.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        *len = (*s).inner.v.len();
        TailorStatus::Ok
    })
}

unsafe fn copy_nodes<F: Fn(&SolvedPolicy, usize) -> f64>(
    s: *const TailorSolution,
    buf: *mut f64,
    len: usize,
    get: F,
) -> TailorStatus {
    if s.is_null() || buf.is_null() {
        return fail(TailorStatus::NullPointer, "NULL argument");
    }
    let sol = &(*s).inner;
    let n = sol.v.len();
    if len < n {
        return fail(
            TailorStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {n}"),
        );
    }
    let out = std::slice::from_raw_parts_mut(buf, n);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = get(sol, i);
    }
    TailorStatus::Ok
}

/// Copies the relative value function `v(y_i)` into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_values(
    s: *const TailorSolution,
    buf: *mut f64,
    len: usize,
) -> TailorStatus {
    guard(|| copy_nodes(s, buf, len, |sol, i| sol.v[i]))
}

/// Copies the sampling AoI `z(y_i)` into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_sample_targets(
    s: *const TailorSolution,
    buf: *mut f64,
    len: usize,
) -> TailorStatus {
    guard(|| copy_nodes(s, buf, len, |sol, i| sol.policy.z[i].aoi(sol.policy.dt)))
}

/// Copies the preemption threshold `θ(y_i)` into `buf` (`INFINITY` = never).
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tailor_solution_thresholds(
    s: *const TailorSolution,
    buf: *mut f64,
    len: usize,
) -> TailorStatus {
    guard(|| {
        copy_nodes(s, buf, len, |sol, i| match sol.policy.theta[i] {
            Theta::Finite(j) => j as f64 * sol.policy.dt,
            Theta::Never => f64::INFINITY,
        })
    })
}

/// Simulates the solved policy for `cycles` deliveries.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tailor_simulate(
    s: *const TailorSolution,
    d: *const TailorDistribution,
    kappa_s: f64,
    kappa_p: f64,
    cycles: u64,
    seed: u64,
    avg_cost: *mut f64,
    stderr: *mut f64,
) -> TailorStatus {
    guard(|| {
        if s.is_null() || d.is_null() || avg_cost.is_null() || stderr.is_null() {
            return fail(TailorStatus::NullPointer, "NULL argument");
        }
        let cfg = SimConfig {
            seed,
            ..SimConfig::with_cycles(cycles)
        };
        match simulate(&(*s).inner.policy, &(*d).inner, kappa_s, kappa_p, &cfg) {
            Ok(r) => {
                *avg_cost = r.avg_cost;
                *stderr = r.stderr;
                TailorStatus::Ok
            }
            Err(e @ SimError::InvalidConfig(_)) => {
                fail(TailorStatus::InvalidArgument, e.to_string())
            }
            Err(e) => fail(TailorStatus::Numerical, e.to_string()),
        }
    })
}
