//! Bracketed scalar root finding.

use crate::error::{ensure, Result};

/// Bisection on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// The endpoints must carry opposite signs (a zero at either endpoint is
/// returned immediately).
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    ensure(lo < hi && lo.is_finite() && hi.is_finite(), || {
        format!("bad bracket [{lo}, {hi}]")
    })?;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    ensure(f_lo.signum() != f_hi.signum(), || {
        format!("no sign change on [{lo}, {hi}]: f = {f_lo:e}, {f_hi:e}")
    })?;
    // 200 halvings exhaust any f64 bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One Newton step from `x`, kept only if it stays inside `[lo, hi]` and
/// does not increase `|f|`.
pub fn newton_polish<F, D>(f: F, df: D, x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let fx = f(x);
    let dfx = df(x);
    if dfx == 0.0 || !dfx.is_finite() {
        return x;
    }
    let candidate = x - fx / dfx;
    if candidate >= lo && candidate <= hi && f(candidate).abs() <= fx.abs() {
        candidate
    } else {
        x
    }
}
