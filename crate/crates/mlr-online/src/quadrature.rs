//! Adaptive Simpson quadrature on a finite interval.
//!
//! The interval is pre-split into panels before adaptive refinement so
//! oscillatory integrands cannot fool the initial error estimate, which is
//! enough for the smooth, rapidly decaying integrands used by the lemma
//! oracles in [`crate::ode_lab`].

use crate::error::{Error, Result};

const PRE_SPLIT_PANELS: usize = 64;
const MAX_DEPTH: u32 = 48;

fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "max refinement depth {MAX_DEPTH} exceeded on [{a}, {b}]"
        )));
    }
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(m - a, fa, flm, fm);
    let right = simpson(b - m, fm, frm, fb);
    let delta = left + right - whole;
    if delta.is_finite() && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    let half = 0.5 * tol;
    Ok(refine(f, a, fa, lm, flm, m, fm, left, half, depth + 1)?
        + refine(f, m, fm, rm, frm, b, fb, right, half, depth + 1)?)
}

/// Integrates `f` over [a, b] to absolute tolerance `tol`.
///
/// Returns an error if adaptive bisection exceeds its depth limit, which
/// indicates a non-integrable or pathologically rough integrand.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let panel_tol = tol / PRE_SPLIT_PANELS as f64;
    let width = (b - a) / PRE_SPLIT_PANELS as f64;
    let mut total = 0.0;
    for i in 0..PRE_SPLIT_PANELS {
        let pa = a + i as f64 * width;
        let pb = if i + 1 == PRE_SPLIT_PANELS {
            b
        } else {
            pa + width
        };
        let pm = 0.5 * (pa + pb);
        let fa = f(pa);
        let fm = f(pm);
        let fb = f(pb);
        let whole = simpson(pb - pa, fa, fm, fb);
        total += refine(&f, pa, fa, pm, fm, pb, fb, whole, panel_tol, 0)?;
    }
    Ok(total)
}
