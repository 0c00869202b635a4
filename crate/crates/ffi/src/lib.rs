//! C ABI over the `univfb` library.
//!
//! Every fallible call returns a [`UfbStatus`]; on failure the message is
//! available from [`ufb_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_generate` functions and released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use univfb::bounds;
use univfb::noise::{read_noise_file, write_noise_file};
use univfb::refsys::collapsed_entropy;
use univfb::scheme::{message_stream, run_session, SchemeConfig};
use univfb::srccode::{KtMixture, Lz78Coder, Metric, SequentialCoder};
use univfb::{Alphabet, Error, NoiseSpec, SymbolSeq};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UfbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Invariant = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(err: Error) -> UfbStatus {
    let status = match &err {
        Error::Io(_) | Error::Csv(_) => UfbStatus::Io,
        Error::NoiseFormat { .. } => UfbStatus::Io,
        Error::Invariant(_) => UfbStatus::Invariant,
        _ => UfbStatus::InvalidArgument,
    };
    set_error(err.to_string());
    status
}

fn null(what: &str) -> UfbStatus {
    set_error(format!("{what} is NULL"));
    UfbStatus::NullPointer
}

/// Runs `f`, turning panics into [`UfbStatus::Panic`].
fn guard(f: impl FnOnce() -> UfbStatus) -> UfbStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal panic".into());
        UfbStatus::Panic
    })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, UfbStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        UfbStatus::InvalidArgument
    })
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return fail(err),
        }
    };
}

macro_rules! deref {
    ($p:expr, $what:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return null($what),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:expr) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return null($what),
        }
    };
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ufb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ufb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A noise sequence over an alphabet `{0..q-1}`.
pub struct UfbNoise(SymbolSeq);

/// Generates `n` symbols from a spec string such as `bern:p=0.11,seed=4`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_generate(
    spec: *const c_char,
    q: u32,
    n: usize,
    seed: u64,
    out: *mut *mut UfbNoise,
) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let spec = match str_arg(spec, "spec") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let a = try_status!(Alphabet::new(q));
        let spec = try_status!(NoiseSpec::parse(spec, a));
        let z = try_status!(spec.generate(a, n, seed));
        *out = Box::into_raw(Box::new(UfbNoise(z)));
        UfbStatus::Ok
    })
}

/// Copies `len` symbols into a new noise handle.
///
/// # Safety
/// `data` must point to `len` readable bytes (may be NULL when `len` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_from_symbols(
    q: u32,
    data: *const u8,
    len: usize,
    out: *mut *mut UfbNoise,
) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        if data.is_null() && len > 0 {
            return null("data");
        }
        let a = try_status!(Alphabet::new(q));
        let v = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let z = try_status!(SymbolSeq::new(a, v));
        *out = Box::into_raw(Box::new(UfbNoise(z)));
        UfbStatus::Ok
    })
}

/// Reads a MODZ noise file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_read(path: *const c_char, out: *mut *mut UfbNoise) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let z = try_status!(read_noise_file(Path::new(path)));
        *out = Box::into_raw(Box::new(UfbNoise(z)));
        UfbStatus::Ok
    })
}

/// Writes a MODZ noise file atomically.
///
/// # Safety
/// `noise` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_write(noise: *const UfbNoise, path: *const c_char) -> UfbStatus {
    guard(|| {
        let noise = deref!(noise, "noise");
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        try_status!(write_noise_file(Path::new(path), &noise.0));
        UfbStatus::Ok
    })
}

/// Number of symbols, or 0 for NULL.
///
/// # Safety
/// `noise` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_len(noise: *const UfbNoise) -> usize {
    noise.as_ref().map_or(0, |z| z.0.len())
}

/// Alphabet size, or 0 for NULL.
///
/// # Safety
/// `noise` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_q(noise: *const UfbNoise) -> u32 {
    noise.as_ref().map_or(0, |z| z.0.alphabet().size() as u32)
}

/// Copies the symbols into `buf`, which must hold `ufb_noise_len` bytes.
///
/// # Safety
/// `noise` must be a live handle; `buf` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_copy(
    noise: *const UfbNoise,
    buf: *mut u8,
    cap: usize,
) -> UfbStatus {
    guard(|| {
        let noise = deref!(noise, "noise");
        let src = noise.0.as_slice();
        if cap < src.len() {
            set_error(format!("buffer holds {cap} symbols, need {}", src.len()));
            return UfbStatus::InvalidArgument;
        }
        if !src.is_empty() {
            if buf.is_null() {
                return null("buf");
            }
            ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        }
        UfbStatus::Ok
    })
}

/// # Safety
/// `noise` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ufb_noise_free(noise: *mut UfbNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

/// Sequential LZ78 coder.
pub struct UfbLz78(Lz78Coder);

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_lz78_new(q: u32, out: *mut *mut UfbLz78) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let a = try_status!(Alphabet::new(q));
        *out = Box::into_raw(Box::new(UfbLz78(Lz78Coder::new(a))));
        UfbStatus::Ok
    })
}

/// # Safety
/// `coder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ufb_lz78_feed(coder: *mut UfbLz78, symbol: u8) -> UfbStatus {
    guard(|| {
        let coder = deref_mut!(coder, "coder");
        let q = coder.0.alphabet().size();
        if !coder.0.alphabet().contains(symbol) {
            return fail(Error::SymbolOutOfRange {
                symbol: symbol as u32,
                q,
            });
        }
        coder.0.feed(symbol);
        UfbStatus::Ok
    })
}

/// Unterminated and terminated code lengths in bits.
///
/// # Safety
/// `coder` must be a live handle; `l_s` and `l_t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_lz78_lengths(
    coder: *const UfbLz78,
    l_s: *mut u64,
    l_t: *mut u64,
) -> UfbStatus {
    guard(|| {
        let coder = deref!(coder, "coder");
        let l_s = deref_mut!(l_s, "l_s");
        let l_t = deref_mut!(l_t, "l_t");
        *l_s = coder.0.l_s();
        *l_t = coder.0.l_t();
        UfbStatus::Ok
    })
}

/// # Safety
/// `coder` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ufb_lz78_free(coder: *mut UfbLz78) {
    if !coder.is_null() {
        drop(Box::from_raw(coder));
    }
}

/// Sequential KT mixture over block lengths `1..=k_max`.
pub struct UfbKt(KtMixture);

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_kt_new(q: u32, k_max: usize, out: *mut *mut UfbKt) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let a = try_status!(Alphabet::new(q));
        let kt = try_status!(KtMixture::new(a, k_max));
        *out = Box::into_raw(Box::new(UfbKt(kt)));
        UfbStatus::Ok
    })
}

/// # Safety
/// `coder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ufb_kt_feed(coder: *mut UfbKt, symbol: u8) -> UfbStatus {
    guard(|| {
        let coder = deref_mut!(coder, "coder");
        let q = coder.0.alphabet().size();
        if !coder.0.alphabet().contains(symbol) {
            return fail(Error::SymbolOutOfRange {
                symbol: symbol as u32,
                q,
            });
        }
        coder.0.feed(symbol);
        UfbStatus::Ok
    })
}

/// `-log2` of the mixture probability of everything fed so far.
///
/// # Safety
/// `coder` must be a live handle; `bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_kt_code_length(coder: *const UfbKt, bits: *mut f64) -> UfbStatus {
    guard(|| {
        let coder = deref!(coder, "coder");
        *deref_mut!(bits, "bits") = coder.0.code_length();
        UfbStatus::Ok
    })
}

/// # Safety
/// `coder` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ufb_kt_free(coder: *mut UfbKt) {
    if !coder.is_null() {
        drop(Box::from_raw(coder));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UfbMetric {
    Lz78 = 0,
    Kt = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UfbSessionConfig {
    pub n: usize,
    pub q: u32,
    pub k_bits: u32,
    pub epsilon: f64,
    pub seed: u64,
    pub metric: UfbMetric,
    /// Deepest KT block length; 0 picks the default for `n`.
    pub kt_k_max: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UfbSessionSummary {
    pub blocks: usize,
    pub bits: u64,
    pub r_act: f64,
    pub r_emp: f64,
    pub rate_floor: f64,
    pub l_t_noise: f64,
    pub error: bool,
    pub floor_violated: bool,
}

/// Runs one feedback session over `noise` (whose length must equal `n`)
/// with messages drawn from the config seed.
///
/// # Safety
/// All pointers must be valid; `noise` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ufb_session_run(
    config: *const UfbSessionConfig,
    noise: *const UfbNoise,
    out: *mut UfbSessionSummary,
) -> UfbStatus {
    guard(|| {
        let c = deref!(config, "config");
        let noise = deref!(noise, "noise");
        let out = deref_mut!(out, "out");
        let a = try_status!(Alphabet::new(c.q));
        let metric = match c.metric {
            UfbMetric::Lz78 => Metric::Lz78,
            UfbMetric::Kt => Metric::Kt {
                k_max: (c.kt_k_max > 0).then_some(c.kt_k_max),
            },
        };
        let cfg = SchemeConfig::new(c.n, a, c.k_bits, c.epsilon, c.seed, metric);
        let log = try_status!(run_session(
            &cfg,
            &noise.0,
            message_stream(c.seed, c.k_bits)
        ));
        *out = UfbSessionSummary {
            blocks: log.decoded_blocks,
            bits: log.bits_decoded,
            r_act: log.r_act,
            r_emp: log.r_emp,
            rate_floor: log.rate_floor,
            l_t_noise: log.l_t_noise,
            error: log.error,
            floor_violated: log.floor_violated(),
        };
        UfbStatus::Ok
    })
}

/// Entropy of the empirical distribution of the first `b` `k`-blocks.
///
/// # Safety
/// `noise` must be a live handle; `bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_collapsed_entropy(
    noise: *const UfbNoise,
    k: usize,
    b: usize,
    bits: *mut f64,
) -> UfbStatus {
    guard(|| {
        let noise = deref!(noise, "noise");
        let bits = deref_mut!(bits, "bits");
        *bits = try_status!(collapsed_entropy(&noise.0, k, b));
        UfbStatus::Ok
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_binary_entropy(p: f64, out: *mut f64) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = try_status!(bounds::binary_entropy(p));
        UfbStatus::Ok
    })
}

/// `max(0, (1-eps) r - h(eps)/block_len)`.
#[no_mangle]
pub extern "C" fn ufb_effective_rate(r: f64, eps: f64, block_len: usize) -> f64 {
    bounds::effective_rate(r, eps, block_len)
}

macro_rules! redundancy_fn {
    ($name:ident, $f:path) => {
        /// # Safety
        /// `out` must be writable.
        #[no_mangle]
        pub unsafe extern "C" fn $name(n: f64, k: usize, q: u16, out: *mut f64) -> UfbStatus {
            guard(|| {
                let out = deref_mut!(out, "out");
                *out = try_status!($f(n, k, q));
                UfbStatus::Ok
            })
        }
    };
}

redundancy_fn!(ufb_delta_minus, bounds::delta_minus);
redundancy_fn!(ufb_delta_plus, bounds::delta_plus);
redundancy_fn!(ufb_delta_pi, bounds::delta_pi);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct UfbNStar {
    pub lower: f64,
    /// Infinite when `upper_unbounded`.
    pub upper: f64,
    pub upper_unbounded: bool,
    pub saturated: bool,
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ufb_n_star_bounds(
    k: usize,
    delta: f64,
    q: u16,
    out: *mut UfbNStar,
) -> UfbStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let s = try_status!(bounds::n_star_bounds(k, delta, q));
        *out = UfbNStar {
            lower: s.lower,
            upper: s.upper,
            upper_unbounded: s.upper_unbounded,
            saturated: s.saturated,
        };
        UfbStatus::Ok
    })
}
