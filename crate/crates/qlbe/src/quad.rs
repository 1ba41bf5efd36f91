//! Adaptive Simpson quadrature on a finite interval.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 60;

/// Integrate `f` over `[a, b]` to combined absolute + relative tolerance
/// `tol`, i.e. the local error target on a panel is `tol * max(1, |I|)`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b >= a) {
        return Err(Error::parameter("interval", format!("bad bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut converged = true;
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut converged);
    if !converged {
        return Err(Error::numeric(
            "adaptive_simpson",
            format!("no convergence to tol {tol:e} on [{a}, {b}]"),
        ));
    }
    Ok(v)
}

/// Like [`adaptive_simpson`], but pre-split into unit-width panels so
/// integrands with localized mass cannot be missed by the initial coarse
/// sample.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b >= a) {
        return Err(Error::parameter("interval", format!("bad bounds [{a}, {b}]")));
    }
    let panels = ((b - a).ceil() as usize).clamp(1, 64);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = if i == panels - 1 { b } else { lo + width };
        total += adaptive_simpson(&f, lo, hi, tol)?;
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    converged: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol * f64::max(1.0, (left + right).abs()) {
        return left + right + err / 15.0;
    }
    if depth == 0 {
        *converged = false;
        return left + right;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, converged)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, converged)
}
