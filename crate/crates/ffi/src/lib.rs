//! C ABI over the `heralded` library.
//!
//! Every fallible call returns an [`HsStatus`]. On failure a human-readable
//! message is kept per thread and can be fetched with
//! [`hs_last_error_message`]. Event streams are opaque handles owned by the
//! caller and released with [`hs_event_stream_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use heralded::bell::{chsh_s, AnalyzerAngles, EntangledModel};
use heralded::coincidence::{count_coincidences, CoincidenceConfig, CountsSummary};
use heralded::correction::{forward_cc, forward_singles, solve_inverse, WindowParams};
use heralded::sim::{simulate, SourceModel};
use heralded::stream::{Channel, EventStream};
use heralded::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Convergence = 3,
    Io = 4,
    Panic = 5,
}

/// Opaque timestamp stream for one channel.
pub struct HsEventStream(EventStream);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsSourceModel {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub deadtime_signal_ps: i64,
    pub deadtime_herald_ps: i64,
    pub jitter_fwhm_signal_ps: i64,
    pub jitter_fwhm_herald_ps: i64,
    pub background_rate_signal_hz: f64,
    pub background_rate_herald_hz: f64,
    pub duration_ps: i64,
    pub rng_seed: u64,
}

impl From<&HsSourceModel> for SourceModel {
    fn from(m: &HsSourceModel) -> Self {
        SourceModel {
            pair_rate_hz: m.pair_rate_hz,
            eta_signal: m.eta_signal,
            eta_herald: m.eta_herald,
            deadtime_signal_ps: m.deadtime_signal_ps,
            deadtime_herald_ps: m.deadtime_herald_ps,
            jitter_fwhm_signal_ps: m.jitter_fwhm_signal_ps,
            jitter_fwhm_herald_ps: m.jitter_fwhm_herald_ps,
            background_rate_signal_hz: m.background_rate_signal_hz,
            background_rate_herald_hz: m.background_rate_herald_hz,
            duration_ps: m.duration_ps,
            rng_seed: m.rng_seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsCoincidenceConfig {
    pub pulse_len_signal_ps: i64,
    pub pulse_len_herald_ps: i64,
    pub min_overlap_ps: i64,
    pub delay_offset_ps: i64,
}

impl From<&HsCoincidenceConfig> for CoincidenceConfig {
    fn from(c: &HsCoincidenceConfig) -> Self {
        CoincidenceConfig {
            pulse_len_signal_ps: c.pulse_len_signal_ps,
            pulse_len_herald_ps: c.pulse_len_herald_ps,
            min_overlap_ps: c.min_overlap_ps,
            delay_offset_ps: c.delay_offset_ps,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsWindowParams {
    pub tau_w_ps: i64,
    pub tau_max_ps: i64,
    pub tau_d_signal_ps: i64,
    pub tau_d_herald_ps: i64,
}

impl From<&HsWindowParams> for WindowParams {
    fn from(w: &HsWindowParams) -> Self {
        WindowParams {
            tau_w_ps: w.tau_w_ps,
            tau_max_ps: w.tau_max_ps,
            tau_d_signal_ps: w.tau_d_signal_ps,
            tau_d_herald_ps: w.tau_d_herald_ps,
        }
    }
}

/// Measured singles and coincidences.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsCounts {
    pub singles_signal_hz: f64,
    pub singles_herald_hz: f64,
    pub coincidences_hz: f64,
    pub duration_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HsEstimate {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub sigma_eta_signal: f64,
    pub sigma_eta_herald: f64,
    pub sigma_pair_rate: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|&b| b != 0);
        CString::new(bytes).expect("nul bytes removed")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Convergence { .. } => HsStatus::Convergence,
        Error::Io(_) | Error::Csv(_) => HsStatus::Io,
        _ => HsStatus::Validation,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), HsStatus>) -> HsStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            HsStatus::Panic
        }
    }
}

fn check<T>(r: heralded::Result<T>) -> Result<T, HsStatus> {
    r.map_err(|e| {
        set_last_error(e.to_string());
        status_of(&e)
    })
}

fn null_error(name: &str) -> HsStatus {
    set_last_error(format!("null pointer: {name}"));
    HsStatus::NullPointer
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn read_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, HsStatus> {
    p.as_ref().ok_or_else(|| null_error(name))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, value: T, name: &str) -> Result<(), HsStatus> {
    if p.is_null() {
        return Err(null_error(name));
    }
    p.write(value);
    Ok(())
}

/// Message for the most recent failure on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next call on the same
/// thread.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Creates a stream from strictly increasing timestamps in `[0, duration_ps)`.
/// `channel` is 1 for signal, 2 for herald.
///
/// # Safety
/// `times` must point to `len` readable `int64_t` values (or be null when
/// `len` is 0). `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_event_stream_new(
    channel: u8,
    times: *const i64,
    len: usize,
    duration_ps: i64,
    out: *mut *mut HsEventStream,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_error("out"));
        }
        let slice: &[i64] = if len == 0 {
            &[]
        } else if times.is_null() {
            return Err(null_error("times"));
        } else {
            std::slice::from_raw_parts(times, len)
        };
        let ch = check(Channel::from_code(channel))?;
        let s = check(EventStream::new(ch, slice.to_vec(), duration_ps))?;
        out.write(Box::into_raw(Box::new(HsEventStream(s))));
        Ok(())
    })
}

/// Number of events in the stream; 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hs_event_stream_len(s: *const HsEventStream) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Acquisition length of the stream; 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hs_event_stream_duration_ps(s: *const HsEventStream) -> i64 {
    s.as_ref().map_or(0, |s| s.0.duration_ps())
}

/// Copies up to `capacity` timestamps into `buf` and stores the number
/// copied in `written`. Fails with `HS_STATUS_VALIDATION` when `capacity` is
/// smaller than the stream length, after copying what fits.
///
/// # Safety
/// `s` must be a live handle, `buf` valid for `capacity` writes (or null when
/// `capacity` is 0), and `written` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_event_stream_copy_timestamps(
    s: *const HsEventStream,
    buf: *mut i64,
    capacity: usize,
    written: *mut usize,
) -> HsStatus {
    guard(|| {
        let s = read_ref(s, "stream")?;
        if written.is_null() {
            return Err(null_error("written"));
        }
        let ts = s.0.timestamps();
        let n = ts.len().min(capacity);
        if n > 0 {
            if buf.is_null() {
                return Err(null_error("buf"));
            }
            ptr::copy_nonoverlapping(ts.as_ptr(), buf, n);
        }
        written.write(n);
        if n < ts.len() {
            set_last_error(format!("buffer holds {capacity} of {} timestamps", ts.len()));
            return Err(HsStatus::Validation);
        }
        Ok(())
    })
}

/// Releases a stream. Null is ignored.
///
/// # Safety
/// `s` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn hs_event_stream_free(s: *mut HsEventStream) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Simulates both detector streams. On success the caller owns both handles.
///
/// # Safety
/// `model` must be valid for reads; `out_signal` and `out_herald` valid for
/// one pointer write each.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(
    model: *const HsSourceModel,
    out_signal: *mut *mut HsEventStream,
    out_herald: *mut *mut HsEventStream,
) -> HsStatus {
    guard(|| {
        let m = SourceModel::from(read_ref(model, "model")?);
        if out_signal.is_null() || out_herald.is_null() {
            return Err(null_error("out"));
        }
        let (s, h) = check(simulate(&m))?;
        out_signal.write(Box::into_raw(Box::new(HsEventStream(s))));
        out_herald.write(Box::into_raw(Box::new(HsEventStream(h))));
        Ok(())
    })
}

/// Counts singles and coincidences between a signal and a herald stream.
///
/// # Safety
/// All pointers must be valid; the streams must be live handles.
#[no_mangle]
pub unsafe extern "C" fn hs_count_coincidences(
    signal: *const HsEventStream,
    herald: *const HsEventStream,
    config: *const HsCoincidenceConfig,
    out: *mut HsCounts,
) -> HsStatus {
    guard(|| {
        let s = read_ref(signal, "signal")?;
        let h = read_ref(herald, "herald")?;
        let cfg = CoincidenceConfig::from(read_ref(config, "config")?);
        let c = check(count_coincidences(&s.0, &h.0, &cfg))?;
        let counts = HsCounts {
            singles_signal_hz: c.singles_signal_hz,
            singles_herald_hz: c.singles_herald_hz,
            coincidences_hz: c.coincidences_hz,
            duration_s: c.duration_s,
        };
        write_out(out, counts, "out")
    })
}

/// Measured singles rate for a pair rate, arm efficiency and dead-time in
/// seconds.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_forward_singles(r0: f64, eta: f64, tau_d_s: f64, out: *mut f64) -> HsStatus {
    guard(|| {
        let v = check(forward_singles(r0, eta, tau_d_s))?;
        write_out(out, v, "out")
    })
}

/// Measured coincidence rate including accidentals.
///
/// # Safety
/// `window` must be valid for reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_forward_cc(
    r0: f64,
    eta_signal: f64,
    eta_herald: f64,
    window: *const HsWindowParams,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        let w = WindowParams::from(read_ref(window, "window")?);
        let v = check(forward_cc(r0, eta_signal, eta_herald, &w))?;
        write_out(out, v, "out")
    })
}

/// Recovers pair rate and efficiencies with Jacobian uncertainties.
///
/// # Safety
/// `counts` and `window` must be valid for reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_solve_inverse(
    counts: *const HsCounts,
    window: *const HsWindowParams,
    out: *mut HsEstimate,
) -> HsStatus {
    guard(|| {
        let c = read_ref(counts, "counts")?;
        let w = WindowParams::from(read_ref(window, "window")?);
        let m = check(CountsSummary::from_rates(
            c.singles_signal_hz,
            c.singles_herald_hz,
            c.coincidences_hz,
            c.duration_s,
        ))?;
        let e = check(solve_inverse(&m, &w))?;
        let est = HsEstimate {
            pair_rate_hz: e.pair_rate_hz,
            eta_signal: e.eta_signal,
            eta_herald: e.eta_herald,
            sigma_eta_signal: e.sigma_eta_signal,
            sigma_eta_herald: e.sigma_eta_herald,
            sigma_pair_rate: e.sigma_pair_rate,
        };
        write_out(out, est, "out")
    })
}

/// Expected CHSH value at the given visibility and analyzer angles in
/// radians.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hs_chsh_s(
    visibility: f64,
    a: f64,
    a_prime: f64,
    b: f64,
    b_prime: f64,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        let mut m = EntangledModel::new(visibility);
        m.angles = AnalyzerAngles { a, a_prime, b, b_prime };
        check(m.validate())?;
        write_out(out, chsh_s(&m), "out")
    })
}
