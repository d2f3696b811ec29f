//! C ABI for optspan.
//!
//! Markets and pricing inputs live behind opaque handles created by
//! `os_market_new` / `os_pricing_new` and released with the matching
//! `_free`. Every call returns an [`OsStatus`]; on failure a description is
//! kept per thread and can be copied out with [`os_last_error`]. Panics are
//! caught at the boundary and reported as [`OsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use optspan::pricing::{extend_by_arbitrage, no_free_lunch, price_bounds, CallQuote, NflResult};
use optspan::replication::exact_replicate;
use optspan::topology::norm;
use optspan::{build_market, conditional_expectation, Claim, Error, FiniteMarket, Leg, NormSpec, OptionPortfolio, PricingFunctional};

/// Opaque market handle.
pub struct OsMarket(FiniteMarket);

/// Opaque handle for a bond price and call price curve.
pub struct OsPricing(PricingFunctional);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotMeasurable = 4,
    FreeLunch = 5,
    NotDetermined = 6,
    BufferTooSmall = 7,
    Parse = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OsPriceBounds {
    pub p_min: f64,
    pub p_max: f64,
    pub p_min_strict: f64,
    pub p_max_strict: f64,
    pub gap: f64,
    pub unique: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Fail(OsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } => OsStatus::DimensionMismatch,
            Error::NotMeasurable { .. } => OsStatus::NotMeasurable,
            Error::FreeLunchPresent => OsStatus::FreeLunch,
            Error::NotDeterminedByArbitrage { .. } => OsStatus::NotDetermined,
            Error::InvalidNormSpec(_) => OsStatus::Parse,
            _ => OsStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(OsStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> OsStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".to_string());
        Err(Fail(OsStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            OsStatus::Ok
        }
        Err(Fail(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn floats<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn floats_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn market<'a>(m: *const OsMarket) -> Result<&'a FiniteMarket, Fail> {
    m.as_ref().map(|h| &h.0).ok_or_else(|| null("market"))
}

unsafe fn pricing<'a>(p: *const OsPricing) -> Result<&'a PricingFunctional, Fail> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null("pricing"))
}

unsafe fn claim(m: &FiniteMarket, ptr: *const f64, len: usize) -> Result<Claim, Fail> {
    if len != m.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), got: len }.into());
    }
    Ok(Claim::new(floats(ptr, len, "claim")?.to_vec()))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

/// Creates a market from `n` probabilities (summing to one) and underlying
/// values.
///
/// # Safety
/// `probs` and `underlying` must point to `n` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn os_market_new(
    probs: *const f64,
    underlying: *const f64,
    n: usize,
    out: *mut *mut OsMarket,
) -> OsStatus {
    guard(|| {
        let p = floats(probs, n, "probs")?.to_vec();
        let f = floats(underlying, n, "underlying")?.to_vec();
        let m = build_market(p, f)?;
        put(out, Box::into_raw(Box::new(OsMarket(m))), "out")
    })
}

/// Creates a market from JSON `{"probs": [...], "underlying": [...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_market_from_json(json: *const c_char, out: *mut *mut OsMarket) -> OsStatus {
    #[derive(serde::Deserialize)]
    struct Raw {
        probs: Vec<f64>,
        underlying: Vec<f64>,
    }
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail(OsStatus::Parse, e.to_string()))?;
        let raw: Raw = serde_json::from_str(text).map_err(|e| Fail(OsStatus::Parse, e.to_string()))?;
        let m = build_market(raw.probs, raw.underlying)?;
        put(out, Box::into_raw(Box::new(OsMarket(m))), "out")
    })
}

/// # Safety
/// `m` must come from a market constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn os_market_free(m: *mut OsMarket) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live market handle.
#[no_mangle]
pub unsafe extern "C" fn os_market_len(m: *const OsMarket) -> usize {
    m.as_ref().map_or(0, |h| h.0.len())
}

/// Creates pricing input from a bond price and `count` calls with strictly
/// increasing strikes.
///
/// # Safety
/// `strikes` and `prices` must point to `count` readable doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn os_pricing_new(
    bond: f64,
    strikes: *const f64,
    prices: *const f64,
    count: usize,
    out: *mut *mut OsPricing,
) -> OsStatus {
    guard(|| {
        let ks = floats(strikes, count, "strikes")?;
        let ps = floats(prices, count, "prices")?;
        let calls = ks.iter().zip(ps).map(|(&k, &price)| CallQuote { k, price }).collect();
        let p = PricingFunctional::new(bond, calls)?;
        put(out, Box::into_raw(Box::new(OsPricing(p))), "out")
    })
}

/// # Safety
/// `p` must come from [`os_pricing_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn os_pricing_free(p: *mut OsPricing) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Whether the claim is constant on the level sets of the underlying.
///
/// # Safety
/// `claim` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_is_measurable(m: *const OsMarket, claim_ptr: *const f64, n: usize, out: *mut bool) -> OsStatus {
    guard(|| {
        let m = market(m)?;
        let x = claim(m, claim_ptr, n)?;
        put(out, m.sigma_f().measurability_violation(&x).is_none(), "out")
    })
}

/// Writes the conditional expectation of the claim given the underlying.
///
/// # Safety
/// `claim` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn os_conditional_expectation(
    m: *const OsMarket,
    claim_ptr: *const f64,
    n: usize,
    out: *mut f64,
) -> OsStatus {
    guard(|| {
        let m = market(m)?;
        let x = claim(m, claim_ptr, n)?;
        let ce = conditional_expectation(&x, &m.sigma_f(), m)?;
        floats_mut(out, n, "out")?.copy_from_slice(ce.values());
        Ok(())
    })
}

/// Exact option replication of a measurable claim. Legs go to `strikes` and
/// `weights`, which hold `capacity` entries; `legs` receives the number of
/// legs, also when the buffers are too small.
///
/// # Safety
/// `claim` must hold `n` doubles, `strikes` and `weights` `capacity`
/// doubles; `cash` and `legs` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_exact_replicate(
    m: *const OsMarket,
    claim_ptr: *const f64,
    n: usize,
    cash: *mut f64,
    strikes: *mut f64,
    weights: *mut f64,
    capacity: usize,
    legs: *mut usize,
) -> OsStatus {
    guard(|| {
        let m = market(m)?;
        let x = claim(m, claim_ptr, n)?;
        let port = exact_replicate(&x, m)?;
        put(legs, port.legs().len(), "legs")?;
        if port.legs().len() > capacity {
            return Err(Fail(OsStatus::BufferTooSmall, format!("{} legs do not fit in {capacity}", port.legs().len())));
        }
        put(cash, port.cash(), "cash")?;
        let ks = floats_mut(strikes, port.legs().len(), "strikes")?;
        let ws = floats_mut(weights, port.legs().len(), "weights")?;
        for (i, leg) in port.legs().iter().enumerate() {
            ks[i] = leg.strike;
            ws[i] = leg.weight;
        }
        Ok(())
    })
}

/// Payoff of `cash + sum weights[j] (f - strikes[j])^+` in every state.
///
/// # Safety
/// `strikes` and `weights` must hold `legs` doubles; `out` must hold one
/// double per state.
#[no_mangle]
pub unsafe extern "C" fn os_portfolio_payoff(
    m: *const OsMarket,
    cash: f64,
    strikes: *const f64,
    weights: *const f64,
    legs: usize,
    out: *mut f64,
) -> OsStatus {
    guard(|| {
        let m = market(m)?;
        let ks = floats(strikes, legs, "strikes")?;
        let ws = floats(weights, legs, "weights")?;
        let port = OptionPortfolio::new(cash, ks.iter().zip(ws).map(|(&strike, &weight)| Leg { strike, weight }).collect())?;
        floats_mut(out, m.len(), "out")?.copy_from_slice(port.payoff(m).values());
        Ok(())
    })
}

/// Norm of a claim; `spec` is e.g. "L1", "Lp:2.5", "Linf", "Orlicz:exp".
///
/// # Safety
/// `claim` must hold `n` doubles, `spec` must be NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn os_norm(
    m: *const OsMarket,
    claim_ptr: *const f64,
    n: usize,
    spec: *const c_char,
    out: *mut f64,
) -> OsStatus {
    guard(|| {
        let m = market(m)?;
        let x = claim(m, claim_ptr, n)?;
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec).to_str().map_err(|e| Fail(OsStatus::Parse, e.to_string()))?;
        let spec: NormSpec = text.parse()?;
        put(out, norm(&x, m, spec)?, "out")
    })
}

/// Decides whether the quotes admit a free lunch. When they do not, `nfl`
/// is set and, if non-null, `witness` receives a strictly positive density
/// with mean one and `lambda` the scale that reprices the quotes.
///
/// # Safety
/// `nfl` must be writable; `witness` must be null or hold one double per
/// state; `lambda` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn os_no_free_lunch(
    p: *const OsPricing,
    m: *const OsMarket,
    nfl: *mut bool,
    witness: *mut f64,
    lambda: *mut f64,
) -> OsStatus {
    guard(|| {
        let (p, m) = (pricing(p)?, market(m)?);
        match no_free_lunch(p, m)? {
            NflResult::NoFreeLunch { witness: w, lambda: l, .. } => {
                put(nfl, true, "nfl")?;
                if !witness.is_null() {
                    floats_mut(witness, m.len(), "witness")?.copy_from_slice(w.weights());
                }
                if !lambda.is_null() {
                    *lambda = l;
                }
            }
            NflResult::FreeLunch { .. } => put(nfl, false, "nfl")?,
        }
        Ok(())
    })
}

/// Price bounds of a claim consistent with the quotes.
///
/// # Safety
/// `claim` must hold `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_price_bounds(
    p: *const OsPricing,
    m: *const OsMarket,
    claim_ptr: *const f64,
    n: usize,
    out: *mut OsPriceBounds,
) -> OsStatus {
    guard(|| {
        let (p, m) = (pricing(p)?, market(m)?);
        let x = claim(m, claim_ptr, n)?;
        let b = price_bounds(&x, p, m)?;
        put(
            out,
            OsPriceBounds {
                p_min: b.p_min,
                p_max: b.p_max,
                p_min_strict: b.p_min_strict,
                p_max_strict: b.p_max_strict,
                gap: b.gap,
                unique: b.unique,
            },
            "out",
        )
    })
}

/// The unique arbitrage price of a measurable claim.
///
/// # Safety
/// `claim` must hold `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_extend_by_arbitrage(
    p: *const OsPricing,
    m: *const OsMarket,
    claim_ptr: *const f64,
    n: usize,
    out: *mut f64,
) -> OsStatus {
    guard(|| {
        let (p, m) = (pricing(p)?, market(m)?);
        let x = claim(m, claim_ptr, n)?;
        put(out, extend_by_arbitrage(&x, p, m)?, "out")
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// plus one.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn os_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn os_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
