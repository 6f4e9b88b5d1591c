//! C ABI for the switching contact process simulator.
//!
//! Conventions: opaque handles behind pointers, integer status codes, and a
//! thread-local last-error message. Every function catches panics at the
//! boundary and reports them as `CPS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cps::analysis::survival_sweep;
use cps::dynamics::{simulate_direct, Extinction, Trajectory};
use cps::lattice::{Boundary, Lattice, LatticeSpec};
use cps::rates::{preset, BaseRates, DormantRecovery, EffectiveRates, Preset, RateSet, Variant};
use cps::sites::SiteSet;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CpsStatus {
    CpsStatusOk = 0,
    CpsStatusNullPointer = 1,
    CpsStatusInvalidArgument = 2,
    CpsStatusPrecondition = 3,
    CpsStatusPanic = 4,
}

use CpsStatus::*;

/// Opaque rate-parameter handle.
pub struct CpsRates {
    inner: RateSet,
}

/// Opaque lattice handle.
pub struct CpsLattice {
    inner: Arc<Lattice>,
}

/// Opaque sampled-trajectory handle.
pub struct CpsTrajectory {
    inner: Trajectory,
}

/// Closed-form comparison rates for one parameter set.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CpsBounds {
    pub alpha: f64,
    pub lambda_star: f64,
    pub delta_star: f64,
    pub lambda_max: f64,
    pub delta_bar: f64,
    pub lambda_bar_outgoing: f64,
    pub lambda_bar_incoming: f64,
    pub delta_max: f64,
}

fn map_err(e: cps::error::CpsError) -> CpsStatus {
    set_error(&e.to_string());
    match e {
        cps::error::CpsError::InvalidParameter(_) | cps::error::CpsError::InvalidLattice(_) => {
            CpsStatusInvalidArgument
        }
        _ => CpsStatusPrecondition,
    }
}

fn guarded(f: impl FnOnce() -> CpsStatus) -> CpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            CpsStatusPanic
        }
    }
}

/// Latest error message for this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn cps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a named preset. `name` is one of `cp`, `cpd_microbial`,
/// `cpd_social`, `cpree`, `cpb`, `cpid`. `delta_d` is ignored by presets
/// that pin it; pass any value there.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cps_rates_preset(
    name: *const c_char,
    lambda: f64,
    delta_a: f64,
    delta_d: f64,
    sigma: f64,
    rho: f64,
    out: *mut *mut CpsRates,
) -> CpsStatus {
    if name.is_null() || out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let name = match unsafe { CStr::from_ptr(name) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("preset name is not valid utf-8");
                return CpsStatusInvalidArgument;
            }
        };
        let which = match Preset::parse(name) {
            Ok(p) => p,
            Err(e) => return map_err(e),
        };
        let base = BaseRates {
            lambda,
            delta_a,
            delta_d: if delta_d.is_nan() {
                None
            } else {
                Some(delta_d)
            },
            sigma,
            rho,
        };
        match preset(which, &base) {
            Ok(rates) => {
                unsafe { *out = Box::into_raw(Box::new(CpsRates { inner: rates })) };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// Builds a fully custom plain-variant rate set.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cps_rates_custom(
    lambda_aa: f64,
    lambda_ad: f64,
    lambda_da: f64,
    lambda_dd: f64,
    delta_a: f64,
    delta_d: f64,
    sigma: f64,
    rho: f64,
    out: *mut *mut CpsRates,
) -> CpsStatus {
    if out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let rates = RateSet::plain(
            lambda_aa, lambda_ad, lambda_da, lambda_dd, delta_a, delta_d, sigma, rho,
        );
        match rates.validate() {
            Ok(()) => {
                unsafe { *out = Box::into_raw(Box::new(CpsRates { inner: rates })) };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// # Safety
/// `rates` must come from a constructor of this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn cps_rates_free(rates: *mut CpsRates) {
    if !rates.is_null() {
        drop(unsafe { Box::from_raw(rates) });
    }
}

/// One-dimensional periodic ring with nearest-neighbor offsets.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cps_lattice_ring(len: usize, out: *mut *mut CpsLattice) -> CpsStatus {
    if out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| match LatticeSpec::ring(len).compile() {
        Ok(lat) => {
            unsafe {
                *out = Box::into_raw(Box::new(CpsLattice {
                    inner: Arc::new(lat),
                }))
            };
            CpsStatusOk
        }
        Err(e) => map_err(e),
    })
}

/// d-dimensional box with nearest-neighbor offsets; `periodic != 0` wraps.
///
/// # Safety
/// `sides` must point to `ndim` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cps_lattice_box(
    sides: *const usize,
    ndim: usize,
    periodic: i32,
    out: *mut *mut CpsLattice,
) -> CpsStatus {
    if sides.is_null() || out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let sides = unsafe { std::slice::from_raw_parts(sides, ndim) }.to_vec();
        let mut spec = LatticeSpec::torus(sides);
        if periodic == 0 {
            spec.boundary = Boundary::Free;
        }
        match spec.compile() {
            Ok(lat) => {
                unsafe {
                    *out = Box::into_raw(Box::new(CpsLattice {
                        inner: Arc::new(lat),
                    }))
                };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// # Safety
/// `lattice` must come from a constructor of this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn cps_lattice_free(lattice: *mut CpsLattice) {
    if !lattice.is_null() {
        drop(unsafe { Box::from_raw(lattice) });
    }
}

/// Number of sites of a lattice handle.
///
/// # Safety
/// `lattice` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn cps_lattice_sites(lattice: *const CpsLattice) -> usize {
    if lattice.is_null() {
        return 0;
    }
    unsafe { &*lattice }.inner.n_sites()
}

/// Computes every closed-form comparison rate for `rates` with the given
/// neighborhood size.
///
/// # Safety
/// `rates` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cps_bounds(
    rates: *const CpsRates,
    neighborhood_size: usize,
    out: *mut CpsBounds,
) -> CpsStatus {
    if rates.is_null() || out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let rates = &unsafe { &*rates }.inner;
        match EffectiveRates::compute(rates, neighborhood_size) {
            Ok(eff) => {
                unsafe {
                    *out = CpsBounds {
                        alpha: eff.alpha,
                        lambda_star: eff.lambda_star,
                        delta_star: eff.delta_star,
                        lambda_max: eff.lambda_max,
                        delta_bar: eff.delta_bar,
                        lambda_bar_outgoing: eff.lambda_bar_outgoing,
                        lambda_bar_incoming: eff.lambda_bar_incoming,
                        delta_max: eff.delta_max,
                    }
                };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// Simulates one trajectory and returns a handle to its samples.
///
/// `x0`/`a0` list initially infected/active sites. For the blocking variant
/// initially infected sites are forced active.
///
/// # Safety
/// Array pointers must cover their stated lengths; handles must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn cps_simulate(
    lattice: *const CpsLattice,
    rates: *const CpsRates,
    x0: *const usize,
    x0_len: usize,
    a0: *const usize,
    a0_len: usize,
    horizon: f64,
    seed: u64,
    sample_times: *const f64,
    n_samples: usize,
    out: *mut *mut CpsTrajectory,
) -> CpsStatus {
    if lattice.is_null()
        || rates.is_null()
        || out.is_null()
        || (x0.is_null() && x0_len > 0)
        || (a0.is_null() && a0_len > 0)
        || (sample_times.is_null() && n_samples > 0)
    {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let lattice = &unsafe { &*lattice }.inner;
        let rates = &unsafe { &*rates }.inner;
        let n = lattice.n_sites();
        let take = |ptr: *const usize, len: usize| -> Option<SiteSet> {
            let sites = if len == 0 {
                &[][..]
            } else {
                unsafe { std::slice::from_raw_parts(ptr, len) }
            };
            if sites.iter().any(|&s| s >= n) {
                None
            } else {
                Some(SiteSet::from_sites(n, sites.iter().copied()))
            }
        };
        let x0 = match take(x0, x0_len) {
            Some(s) => s,
            None => {
                set_error("x0 contains a site outside the lattice");
                return CpsStatusInvalidArgument;
            }
        };
        let mut a0 = match take(a0, a0_len) {
            Some(s) => s,
            None => {
                set_error("a0 contains a site outside the lattice");
                return CpsStatusInvalidArgument;
            }
        };
        if rates.variant == Variant::Cpb {
            for site in x0.iter() {
                a0.insert(site);
            }
        }
        let times = if n_samples == 0 {
            &[][..]
        } else {
            unsafe { std::slice::from_raw_parts(sample_times, n_samples) }
        };
        match simulate_direct(lattice, rates, &x0, &a0, horizon, seed, times, false) {
            Ok(traj) => {
                unsafe { *out = Box::into_raw(Box::new(CpsTrajectory { inner: traj })) };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// # Safety
/// `traj` must come from `cps_simulate`, or be null.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_free(traj: *mut CpsTrajectory) {
    if !traj.is_null() {
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Number of samples in a trajectory.
///
/// # Safety
/// `traj` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_len(traj: *const CpsTrajectory) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }.inner.sample_times.len()
}

/// Sample time at index `i`, or NaN when out of range.
///
/// # Safety
/// `traj` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_time(traj: *const CpsTrajectory, i: usize) -> f64 {
    if traj.is_null() {
        return f64::NAN;
    }
    unsafe { &*traj }
        .inner
        .sample_times
        .get(i)
        .copied()
        .unwrap_or(f64::NAN)
}

/// Infected count at sample `i`; 0 when out of range.
///
/// # Safety
/// `traj` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_infected(traj: *const CpsTrajectory, i: usize) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }
        .inner
        .infected_counts
        .get(i)
        .copied()
        .unwrap_or(0)
}

/// Active count at sample `i`; 0 when out of range.
///
/// # Safety
/// `traj` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_active(traj: *const CpsTrajectory, i: usize) -> usize {
    if traj.is_null() {
        return 0;
    }
    unsafe { &*traj }
        .inner
        .active_counts
        .get(i)
        .copied()
        .unwrap_or(0)
}

/// Writes the extinction time to `out_time` and returns 1 if the infection
/// died before the horizon, else returns 0 and writes the horizon.
///
/// # Safety
/// `traj` and `out_time` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cps_trajectory_extinction(
    traj: *const CpsTrajectory,
    out_time: *mut f64,
) -> i32 {
    if traj.is_null() || out_time.is_null() {
        return 0;
    }
    match unsafe { &*traj }.inner.extinction {
        Extinction::Extinct(t) => {
            unsafe { *out_time = t };
            1
        }
        Extinction::Censored(t) => {
            unsafe { *out_time = t };
            0
        }
    }
}

/// Runs a survival sweep and returns the result CSV as a heap string; free
/// it with `cps_string_free`.
///
/// # Safety
/// Array pointers must cover their stated lengths; handles must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn cps_survival_sweep_csv(
    lattice: *const CpsLattice,
    template: *const CpsRates,
    lambda_grid: *const f64,
    n_lambda: usize,
    horizons: *const f64,
    n_horizons: usize,
    replicas: u32,
    seed: u64,
    out: *mut *mut c_char,
) -> CpsStatus {
    if lattice.is_null()
        || template.is_null()
        || lambda_grid.is_null()
        || horizons.is_null()
        || out.is_null()
    {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let lattice = &unsafe { &*lattice }.inner;
        let template = &unsafe { &*template }.inner;
        let grid = unsafe { std::slice::from_raw_parts(lambda_grid, n_lambda) };
        let horizons = unsafe { std::slice::from_raw_parts(horizons, n_horizons) };
        match survival_sweep(lattice, template, grid, horizons, replicas, seed) {
            Ok(result) => {
                let mut csv = Vec::new();
                if result.write_csv(&mut csv).is_err() {
                    set_error("csv serialization failed");
                    return CpsStatusPrecondition;
                }
                let cstr = CString::new(csv).expect("csv has no NUL bytes");
                unsafe { *out = cstr.into_raw() };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `ptr` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn cps_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Instant dormant recovery marker for `cps_rates_custom_variant`.
pub const CPS_DELTA_D_INSTANT: f64 = -1.0;

/// Builds a rate set for a non-plain variant: `variant` is 1 for blocking,
/// 2 for infection dormancy. Pass `CPS_DELTA_D_INSTANT` as `delta_d` for the
/// blocking variant.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn cps_rates_custom_variant(
    lambda_aa: f64,
    lambda_ad: f64,
    delta_a: f64,
    delta_d: f64,
    sigma: f64,
    rho: f64,
    variant: i32,
    out: *mut *mut CpsRates,
) -> CpsStatus {
    if out.is_null() {
        set_error("null pointer");
        return CpsStatusNullPointer;
    }
    guarded(|| {
        let variant = match variant {
            1 => Variant::Cpb,
            2 => Variant::Cpid,
            other => {
                set_error(&format!("unknown variant code {other}"));
                return CpsStatusInvalidArgument;
            }
        };
        let dd = if delta_d == CPS_DELTA_D_INSTANT {
            DormantRecovery::Instant
        } else {
            DormantRecovery::Finite(delta_d)
        };
        let rates = RateSet {
            lambda_aa,
            lambda_ad,
            lambda_da: 0.0,
            lambda_dd: 0.0,
            delta_a,
            delta_d: dd,
            sigma0: sigma,
            rho0: rho,
            sigma1: sigma,
            rho1: rho,
            variant,
        };
        match rates.validate() {
            Ok(()) => {
                unsafe { *out = Box::into_raw(Box::new(CpsRates { inner: rates })) };
                CpsStatusOk
            }
            Err(e) => map_err(e),
        }
    })
}
