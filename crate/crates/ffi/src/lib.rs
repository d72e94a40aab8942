//! C ABI over the `uclab` library.
//!
//! Every fallible function returns a [`UclabStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`uclab_last_error_message`]. Objects are exposed as opaque
//! handles created by `*_new`/`*_parse` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uclab::counterexample::{counterexample_report, CounterexampleParams};
use uclab::coupling::{self, DeltaSearchOptions, DeltaStatus, RateConvention};
use uclab::families::{self, Family};
use uclab::measure::{self, DiscreteMeasure};
use uclab::scalar;
use uclab::set_dist::{self, ExplicitSetDistribution, SubsetMask};
use uclab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UclabStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidInput = 3,
    TooLarge = 4,
    Degenerate = 5,
    NotUnionClosed = 6,
    Solver = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> UclabStatus {
    match e {
        Error::Domain { .. } => UclabStatus::Domain,
        Error::TooLarge { .. } => UclabStatus::TooLarge,
        Error::Degenerate(_) | Error::ZeroProbabilityPrefix | Error::EmptyFamily => UclabStatus::Degenerate,
        Error::NotUnionClosed => UclabStatus::NotUnionClosed,
        Error::Solver(_) => UclabStatus::Solver,
        _ => UclabStatus::InvalidInput,
    }
}

struct Failure(UclabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UclabStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> UclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UclabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            UclabStatus::Panic
        }
    }
}

/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null("text"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(UclabStatus::InvalidInput, "text is not UTF-8".into()))
}

/// # Safety
/// `ptr` must be null or a live handle of type `T`.
unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 if the last call succeeded.
#[no_mangle]
pub extern "C" fn uclab_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (truncated, always
/// NUL-terminated when `len > 0`) and returns its full length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn uclab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn uclab_golden_threshold() -> f64 {
    scalar::golden_threshold()
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_binary_entropy(p: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, scalar::binary_entropy(p)?, "out"))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_union_prob(p: f64, q: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, scalar::union_prob(p, q)?, "out"))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_lambda(u: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, scalar::lambda(u)?, "out"))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_ratio_f(s: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, scalar::ratio_f(s)?, "out"))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_coupled_union_prob(p: f64, r: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, coupling::coupled_union_prob(p, r)?, "out"))
}

/// Opaque explicit distribution over subsets of `[n]`.
pub struct UclabSetDist(ExplicitSetDistribution);

/// Builds a distribution from a dense table of `2^n` probabilities indexed by mask.
///
/// # Safety
/// `probs` must point to `len` doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_new(n: u32, probs: *const f64, len: usize, out: *mut *mut UclabSetDist) -> UclabStatus {
    guard(|| {
        let d = ExplicitSetDistribution::new(n, slice(probs, len, "probs")?.to_vec())?;
        write(out, Box::into_raw(Box::new(UclabSetDist(d))), "out")
    })
}

/// Parses the text format: `n=<size>` then `hexmask probability` lines.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_parse(src: *const c_char, out: *mut *mut UclabSetDist) -> UclabStatus {
    guard(|| {
        let d = ExplicitSetDistribution::parse(text(src)?)?;
        write(out, Box::into_raw(Box::new(UclabSetDist(d))), "out")
    })
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_free(d: *mut UclabSetDist) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_entropy(d: *const UclabSetDist, out: *mut f64) -> UclabStatus {
    guard(|| write(out, handle(d, "distribution")?.0.entropy(), "out"))
}

/// `Pr[i ∈ A]` for 0-based element `i`.
///
/// # Safety
/// `d` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_marginal(d: *const UclabSetDist, i: u32, out: *mut f64) -> UclabStatus {
    guard(|| write(out, handle(d, "distribution")?.0.marginal(i)?, "out"))
}

/// Law of `A ∪ B` for independent `A ~ a`, `B ~ b`; the result is a new handle.
///
/// # Safety
/// `a`, `b` must be live handles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_set_dist_union(
    a: *const UclabSetDist,
    b: *const UclabSetDist,
    out: *mut *mut UclabSetDist,
) -> UclabStatus {
    guard(|| {
        let u = set_dist::union_of_independent(&handle(a, "a")?.0, &handle(b, "b")?.0)?;
        write(out, Box::into_raw(Box::new(UclabSetDist(u))), "out")
    })
}

/// `D(p || q)`; `+inf` when `p` is not absolutely continuous with respect to `q`.
///
/// # Safety
/// `p`, `q` must be live handles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_kl_divergence(p: *const UclabSetDist, q: *const UclabSetDist, out: *mut f64) -> UclabStatus {
    guard(|| write(out, set_dist::kl_divergence(&handle(p, "p")?.0, &handle(q, "q")?.0)?, "out"))
}

/// `H(A∪B) − λ(u)·H(A)` with `u` the largest marginal.
///
/// # Safety
/// `d` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_theorem2_slack(d: *const UclabSetDist, out: *mut f64) -> UclabStatus {
    guard(|| write(out, set_dist::verify_theorem2(&handle(d, "distribution")?.0)?.slack, "out"))
}

/// Opaque finitely supported probability measure on [0, 1].
pub struct UclabMeasure(DiscreteMeasure);

/// # Safety
/// `locations` and `weights` must point to `len` doubles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_measure_new(
    locations: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut UclabMeasure,
) -> UclabStatus {
    guard(|| {
        let xs = slice(locations, len, "locations")?;
        let ws = slice(weights, len, "weights")?;
        let mu = DiscreteMeasure::new(xs.iter().copied().zip(ws.iter().copied()))?;
        write(out, Box::into_raw(Box::new(UclabMeasure(mu))), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uclab_measure_free(m: *mut UclabMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_measure_mean(m: *const UclabMeasure, out: *mut f64) -> UclabStatus {
    guard(|| write(out, handle(m, "measure")?.0.mean(), "out"))
}

/// `E[H(p+q−pq)] − λ·E[H(p)]`.
///
/// # Safety
/// `m` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_measure_objective(m: *const UclabMeasure, lambda: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, measure::objective(&handle(m, "measure")?.0, lambda).value, "out"))
}

/// Minimum of the expected coupled-union entropy over self-couplings.
///
/// # Safety
/// `m` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_worst_coupling_value(m: *const UclabMeasure, out: *mut f64) -> UclabStatus {
    guard(|| write(out, coupling::worst_coupling_value(&handle(m, "measure")?.0)?.value, "out"))
}

/// # Safety
/// `m` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_improved_slack(m: *const UclabMeasure, alpha: f64, out: *mut f64) -> UclabStatus {
    guard(|| write(out, coupling::improved_slack(&handle(m, "measure")?.0, alpha)?, "out"))
}

/// Opaque family of subsets of `[n]`.
pub struct UclabFamily(Family);

/// # Safety
/// `masks` must point to `len` values; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_family_new(n: u32, masks: *const u32, len: usize, out: *mut *mut UclabFamily) -> UclabStatus {
    guard(|| {
        let f = Family::new(n, slice(masks, len, "masks")?.iter().map(|&m| SubsetMask(m)))?;
        write(out, Box::into_raw(Box::new(UclabFamily(f))), "out")
    })
}

/// Parses the text format: `n=<size>` then one hex mask per line.
///
/// # Safety
/// `src` must be NUL-terminated; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_family_parse(src: *const c_char, out: *mut *mut UclabFamily) -> UclabStatus {
    guard(|| {
        let f = Family::parse(text(src)?)?;
        write(out, Box::into_raw(Box::new(UclabFamily(f))), "out")
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uclab_family_free(f: *mut UclabFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_family_is_union_closed(f: *const UclabFamily, out: *mut bool) -> UclabStatus {
    guard(|| write(out, families::is_union_closed(&handle(f, "family")?.0), "out"))
}

/// Largest proportion of members containing a common element.
///
/// # Safety
/// `f` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_family_best_proportion(f: *const UclabFamily, out: *mut f64) -> UclabStatus {
    guard(|| write(out, families::max_element_frequency(&handle(f, "family")?.0).best_proportion, "out"))
}

/// Runs the greedy coupling DP and returns `H(A∪C)` and the largest deviation
/// of either marginal from uniform. `crossed` selects the crossed-prefix rates.
///
/// # Safety
/// `f` must be a live handle; out-pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uclab_greedy_coupling(
    f: *const UclabFamily,
    crossed: bool,
    h_union: *mut f64,
    max_deviation: *mut f64,
) -> UclabStatus {
    guard(|| {
        let convention = if crossed { RateConvention::Crossed } else { RateConvention::OwnPrefix };
        let r = coupling::greedy_coupling_dp(&handle(f, "family")?.0, convention)?;
        write(h_union, r.h_union, "h_union")?;
        write(max_deviation, r.deviation_a.max(r.deviation_c), "max_deviation")
    })
}

/// Exhaustive check on `[n]`, `n ≤ 4`: smallest best-element proportion over
/// nontrivial union-closed families, and whether it reaches the golden threshold.
///
/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uclab_verify_theorem1(n: u32, min_proportion: *mut f64, holds: *mut bool) -> UclabStatus {
    guard(|| {
        let r = families::verify_theorem1(n)?;
        write(min_proportion, r.min_best_proportion, "min_proportion")?;
        write(holds, r.holds, "holds")
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct UclabCounterexampleParams {
    pub u_bar: f64,
    pub u: f64,
    pub d: f64,
    pub theta: f64,
    pub n: u64,
    /// Truncation index; 0 selects the default.
    pub k_max: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct UclabCounterexampleBounds {
    pub marginal: f64,
    pub admissible: bool,
    pub entropy_lower_bound: f64,
    pub union_entropy_upper_bound: f64,
    pub ratio_bound: f64,
    pub kl_upper_bound: f64,
}

/// # Safety
/// `params` must be readable; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uclab_counterexample_bounds(
    params: *const UclabCounterexampleParams,
    out: *mut UclabCounterexampleBounds,
) -> UclabStatus {
    guard(|| {
        let p = *handle(params, "params")?;
        let mut cp = CounterexampleParams::new(p.u_bar, p.u, p.d, p.theta, p.n)?;
        if p.k_max > 0 {
            cp = cp.with_truncation(p.k_max as usize)?;
        }
        let r = counterexample_report(&cp)?;
        write(
            out,
            UclabCounterexampleBounds {
                marginal: r.marginal,
                admissible: r.admissible,
                entropy_lower_bound: r.entropy_lower_bound,
                union_entropy_upper_bound: r.union_entropy_upper_bound,
                ratio_bound: r.ratio_bound,
                kl_upper_bound: r.kl_upper_bound,
            },
            "out",
        )
    })
}

/// δ search with default grids; `delta` is 0 when no positive value survives.
///
/// # Safety
/// Out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uclab_delta_search(alpha: f64, seed: u64, delta: *mut f64, certified: *mut bool) -> UclabStatus {
    guard(|| {
        let r = coupling::delta_search(&DeltaSearchOptions { alpha, seed, ..Default::default() })?;
        write(delta, r.delta, "delta")?;
        write(certified, r.status != DeltaStatus::NoPositiveDelta, "certified")
    })
}
