//! C interface to `beamwave`: opaque handles, status codes, and a
//! thread-local message for the last failure.
//!
//! Every function returns a [`BwStatus`]. Handles created by `*_new` or
//! `*_from_*` must be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use beamwave::covariance::{build_kernel_grid, gamma1_radial, gamma_prime_structure, CovarianceKernel, KernelOptions};
use beamwave::grid::TransverseGrid;
use beamwave::harness::ensemble::{run_ensemble, EnsembleOptions};
use beamwave::harness::{EnsembleStats, Model, RunConfig};
use beamwave::spectra::{SpectrumParams, SpectrumVariant};
use beamwave::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BwStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid parameters or configuration (CLI exit code 2).
    InvalidArgument = 2,
    /// Numerical invariant violated (CLI exit code 3).
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BwVariant {
    BoundedPowerLaw = 0,
    VonKarman = 1,
    Hill = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BwModel {
    Parabolic = 0,
    WhiteNoise = 1,
}

/// Moments of one observable `<Psi_z, theta>`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BwObservable {
    pub mean_re: f64,
    pub mean_im: f64,
    pub var_re: f64,
    pub var_im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

pub struct BwSpectrum(SpectrumParams);
pub struct BwKernel(CovarianceKernel);
pub struct BwConfig(RunConfig);
pub struct BwStats(EnsembleStats);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BwStatus {
    match e {
        Error::Io(_) => BwStatus::Io,
        other => match other.exit_code() {
            2 => BwStatus::InvalidArgument,
            3 => BwStatus::Numerical,
            _ => BwStatus::Io,
        },
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), BwStatus>>(f: F) -> BwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BwStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BwStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, BwStatus>;
}

impl<T> OrStatus<T> for beamwave::Result<T> {
    fn or_status(self) -> Result<T, BwStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, BwStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        BwStatus::NullPointer
    })
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), BwStatus> {
    if out.is_null() {
        set_error("null output pointer".into());
        return Err(BwStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the message of the last failure on this thread into `buf`
/// (NUL-terminated). `needed` receives the full length including the NUL;
/// returns `BW_STATUS_BUFFER_TOO_SMALL` if `len` is not enough.
///
/// # Safety
/// `buf` must be valid for `len` bytes (or null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn bw_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> BwStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let bytes = msg.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return BwStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
    *buf.add(bytes.len()) = 0;
    BwStatus::Ok
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bw_spectrum_new(
    variant: BwVariant,
    h: f64,
    eta: f64,
    rho: f64,
    amplitude: f64,
    out: *mut *mut BwSpectrum,
) -> BwStatus {
    guard(|| {
        let v = match variant {
            BwVariant::BoundedPowerLaw => SpectrumVariant::BoundedPowerLaw,
            BwVariant::VonKarman => SpectrumVariant::VonKarman,
            BwVariant::Hill => SpectrumVariant::Hill,
        };
        let p = SpectrumParams::new(v, h, eta, rho, amplitude).or_status()?;
        write_out(out, Box::into_raw(Box::new(BwSpectrum(p))))
    })
}

/// `Φ(|κ|)`.
///
/// # Safety
/// `spec` must come from `bw_spectrum_new`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_spectrum_eval(spec: *const BwSpectrum, kappa: f64, out: *mut f64) -> BwStatus {
    guard(|| {
        let s = borrow(spec)?;
        let v = s.0.eval_spectrum([kappa, 0.0, 0.0]).or_status()?;
        write_out(out, v)
    })
}

/// `∫|κ|²Φ dκ`.
///
/// # Safety
/// As for `bw_spectrum_eval`.
#[no_mangle]
pub unsafe extern "C" fn bw_spectrum_laplacian_moment(spec: *const BwSpectrum, out: *mut f64) -> BwStatus {
    guard(|| {
        let s = borrow(spec)?;
        write_out(out, s.0.laplacian_moment().or_status()?)
    })
}

/// `Γ(r)` by quadrature.
///
/// # Safety
/// As for `bw_spectrum_eval`.
#[no_mangle]
pub unsafe extern "C" fn bw_gamma1_radial(spec: *const BwSpectrum, r: f64, out: *mut f64) -> BwStatus {
    guard(|| {
        let s = borrow(spec)?;
        write_out(out, gamma1_radial(&s.0, r).or_status()?)
    })
}

/// Structure function `D(r)` of the origin-pinned kernel.
///
/// # Safety
/// As for `bw_spectrum_eval`.
#[no_mangle]
pub unsafe extern "C" fn bw_gamma_prime_structure(spec: *const BwSpectrum, r: f64, out: *mut f64) -> BwStatus {
    guard(|| {
        let s = borrow(spec)?;
        write_out(out, gamma_prime_structure(&s.0, r).or_status()?)
    })
}

/// # Safety
/// `spec` must be null or come from `bw_spectrum_new`, and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn bw_spectrum_free(spec: *mut BwSpectrum) {
    free_box(spec);
}

/// Kernel tabulated on an `n`-point (per axis) grid of spacing `dx`.
///
/// # Safety
/// `spec` must come from `bw_spectrum_new`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_kernel_new(
    spec: *const BwSpectrum,
    dim_t: usize,
    n: usize,
    dx: f64,
    periodic: bool,
    out: *mut *mut BwKernel,
) -> BwStatus {
    guard(|| {
        let s = borrow(spec)?;
        let grid = TransverseGrid::new(dim_t, n, dx).or_status()?;
        let k = build_kernel_grid(&s.0, &grid, KernelOptions { matrix: false, periodic }).or_status()?;
        write_out(out, Box::into_raw(Box::new(BwKernel(k))))
    })
}

/// `Γ₀`; fails for the origin-pinned kernel.
///
/// # Safety
/// `kernel` must come from `bw_kernel_new`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_kernel_gamma0(kernel: *const BwKernel, out: *mut f64) -> BwStatus {
    guard(|| {
        let k = borrow(kernel)?;
        match k.0.gamma0 {
            Some(g) => write_out(out, g),
            None => {
                set_error("the origin-pinned kernel has no finite on-diagonal value".into());
                Err(BwStatus::InvalidArgument)
            }
        }
    })
}

/// Interpolated radial kernel at distance `r`.
///
/// # Safety
/// As for `bw_kernel_gamma0`.
#[no_mangle]
pub unsafe extern "C" fn bw_kernel_radial(kernel: *const BwKernel, r: f64, out: *mut f64) -> BwStatus {
    guard(|| {
        let k = borrow(kernel)?;
        write_out(out, k.0.radial(r).or_status()?)
    })
}

/// Kernel between flat grid indices `i` and `j`.
///
/// # Safety
/// As for `bw_kernel_gamma0`.
#[no_mangle]
pub unsafe extern "C" fn bw_kernel_grid_value(kernel: *const BwKernel, i: usize, j: usize, out: *mut f64) -> BwStatus {
    guard(|| {
        let k = borrow(kernel)?;
        let len = k.0.grid.len();
        if i >= len || j >= len {
            set_error(format!("grid index out of range (grid has {len} points)"));
            return Err(BwStatus::InvalidArgument);
        }
        write_out(out, k.0.grid_value(i, j))
    })
}

/// # Safety
/// `kernel` must be null or come from `bw_kernel_new`.
#[no_mangle]
pub unsafe extern "C" fn bw_kernel_free(kernel: *mut BwKernel) {
    free_box(kernel);
}

/// The built-in desk configuration.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_config_desk(out: *mut *mut BwConfig) -> BwStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(BwConfig(RunConfig::desk())))))
}

/// Parses and validates a JSON run configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_config_from_json(json: *const c_char, out: *mut *mut BwConfig) -> BwStatus {
    guard(|| {
        if json.is_null() {
            set_error("null string".into());
            return Err(BwStatus::NullPointer);
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("configuration is not UTF-8: {e}"));
            BwStatus::InvalidArgument
        })?;
        let cfg = RunConfig::from_json(text).or_status()?;
        write_out(out, Box::into_raw(Box::new(BwConfig(cfg))))
    })
}

/// SHA-256 of the canonical configuration JSON as 64 hex digits plus NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bw_config_hash(config: *const BwConfig, buf: *mut c_char, len: usize) -> BwStatus {
    guard(|| {
        let c = borrow(config)?;
        let h = c.0.sha256().or_status()?;
        if buf.is_null() || len < h.len() + 1 {
            set_error(format!("hash needs {} bytes", h.len() + 1));
            return Err(BwStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(h.as_ptr() as *const c_char, buf, h.len());
        *buf.add(h.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from a `bw_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bw_config_free(config: *mut BwConfig) {
    free_box(config);
}

/// Runs `realizations` realizations (seeded by `seed`) and returns their
/// statistics.
///
/// # Safety
/// `config` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_run_ensemble(
    config: *const BwConfig,
    model: BwModel,
    realizations: usize,
    seed: u64,
    out: *mut *mut BwStats,
) -> BwStatus {
    guard(|| {
        let c = borrow(config)?;
        let m = match model {
            BwModel::Parabolic => Model::Parabolic,
            BwModel::WhiteNoise => Model::Wn,
        };
        let run = run_ensemble(&c.0, m, realizations, seed, EnsembleOptions::default()).or_status()?;
        write_out(out, Box::into_raw(Box::new(BwStats(run.stats))))
    })
}

/// # Safety
/// `stats` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_stats_count(stats: *const BwStats, out: *mut u64) -> BwStatus {
    guard(|| {
        let s = borrow(stats)?;
        write_out(out, s.0.count)
    })
}

/// Moments of `<Psi, theta_j>` at checkpoint `c`.
///
/// # Safety
/// `stats` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bw_stats_observable(stats: *const BwStats, c: usize, j: usize, out: *mut BwObservable) -> BwStatus {
    guard(|| {
        let s = borrow(stats)?;
        if c >= s.0.checkpoints.len() || j >= s.0.n_theta {
            set_error("checkpoint or test-function index out of range".into());
            return Err(BwStatus::InvalidArgument);
        }
        let o = s.0.observable(c, j);
        write_out(
            out,
            BwObservable {
                mean_re: o.mean.re,
                mean_im: o.mean.im,
                var_re: o.var_re,
                var_im: o.var_im,
                se_re: o.se_re,
                se_im: o.se_im,
            },
        )
    })
}

/// `into ← into ∪ from` (exact).
///
/// # Safety
/// Both must be valid handles; `into` must not alias `from`.
#[no_mangle]
pub unsafe extern "C" fn bw_stats_merge(into: *mut BwStats, from: *const BwStats) -> BwStatus {
    guard(|| {
        let src = borrow(from)?.0.clone();
        let dst = into.as_mut().ok_or_else(|| {
            set_error("null handle".into());
            BwStatus::NullPointer
        })?;
        dst.0.merge(&src).or_status()
    })
}

/// # Safety
/// `stats` must be null or come from `bw_run_ensemble`.
#[no_mangle]
pub unsafe extern "C" fn bw_stats_free(stats: *mut BwStats) {
    free_box(stats);
}
