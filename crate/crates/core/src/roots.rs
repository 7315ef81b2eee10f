//! Scalar root bracketing and one-dimensional maximization.
//!
//! Brent's method drives the closure and replacement solves; golden-section
//! search refines the threshold optimum. Both keep a bracket at every
//! iteration, so failures are reported with the offending endpoint values
//! instead of silently extrapolating.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on bracket [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root not bracketed after {max_iter} iterations, last estimate {last}")]
    IterationLimit { max_iter: usize, last: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct BrentResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Brent's bracketing root finder: inverse-quadratic/secant steps with a
/// bisection fallback, terminating when the bracket width falls below
/// `tol` (absolute) plus a machine-precision floor.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a0: f64,
    b0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BrentResult, RootError> {
    let (mut a, mut b) = (a0, b0);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(BrentResult {
            root: a,
            residual: 0.0,
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(BrentResult {
            root: b,
            residual: 0.0,
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange { a, b, fa, fb });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(BrentResult {
                root: b,
                residual: fb,
                iterations: iter,
            });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // interpolation step: secant, or inverse quadratic when distinct
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(RootError::IterationLimit { max_iter, last: b })
}

/// Why a golden-section result should be treated with suspicion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldenWarning {
    /// The first interior probes were worse than both bracket endpoints.
    NotUnimodal,
    /// Every probed value agreed to machine precision; the midpoint is
    /// returned as a representative.
    Flat,
}

#[derive(Debug, Clone, Copy)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub warning: Option<GoldenWarning>,
}

/// Golden-section search for the maximum of `f` on `[a, b]`, shrinking the
/// bracket until its width falls below `tol`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> GoldenResult {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    assert!(a < b && tol > 0.0);

    let fa = f(a);
    let fb = f(b);
    let mut lo = a;
    let mut hi = b;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);

    let mut warning = if fc.max(fd) < fa.min(fb) {
        Some(GoldenWarning::NotUnimodal)
    } else {
        None
    };

    let mut probes_min = fa.min(fb).min(fc).min(fd);
    let mut probes_max = fa.max(fb).max(fc).max(fd);

    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
            probes_min = probes_min.min(fc);
            probes_max = probes_max.max(fc);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
            probes_min = probes_min.min(fd);
            probes_max = probes_max.max(fd);
        }
    }

    let spread = probes_max - probes_min;
    if spread <= 4.0 * f64::EPSILON * probes_max.abs().max(probes_min.abs()) {
        return GoldenResult {
            x: 0.5 * (a + b),
            value: probes_max,
            warning: Some(GoldenWarning::Flat),
        };
    }

    let (x, value) = if fc > fd { (c, fc) } else { (d, fd) };
    if warning == Some(GoldenWarning::NotUnimodal) && value >= fa.min(fb) {
        // later probes recovered past the endpoints; drop the early flag
        warning = None;
    }
    GoldenResult { x, value, warning }
}
