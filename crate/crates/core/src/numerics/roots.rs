//! Bracketed scalar root finding (Brent's method).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations (last estimate {estimate}, bracket width {width})")]
    MaxIterations { iterations: usize, estimate: f64, width: f64 },
    #[error("objective returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Settings for [`brent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentOptions {
    /// Absolute tolerance on the root location.
    pub xtol: f64,
    /// Relative tolerance on the root location.
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for BrentOptions {
    fn default() -> Self {
        Self { xtol: 1e-12, rtol: 4.0 * f64::EPSILON, max_iter: 200 }
    }
}

/// Find a root of `f` inside `[lo, hi]`.
///
/// The endpoints must bracket a sign change (a zero at either endpoint is
/// accepted and returned as is).
pub fn brent<F>(mut f: F, lo: f64, hi: f64, opts: BrentOptions) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..opts.max_iter {
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

        let tol = 2.0 * opts.rtol * b.abs() + 0.5 * opts.xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }

        if e.abs() >= tol && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, secant when only two points
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)), (q - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }

        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
    }

    Err(RootError::MaxIterations { iterations: opts.max_iter, estimate: b, width: (c - b).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root() {
        let root = brent(|x| x * x * x - 0.5, 0.0, 1.0, BrentOptions::default()).unwrap();
        assert!((root - 0.5f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn endpoint_root_is_returned() {
        let root = brent(|x| x - 2.0, 2.0, 5.0, BrentOptions::default()).unwrap();
        assert_eq!(root, 2.0);
    }

    #[test]
    fn rejects_same_sign() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, BrentOptions::default()).unwrap_err();
        assert!(matches!(err, RootError::NoSignChange { .. }));
    }

    #[test]
    fn flat_tail_converges() {
        // slow-moving function with a root near 1e3
        let f = |x: f64| (x / 1000.0).ln();
        let root = brent(f, 1.0, 1e6, BrentOptions { xtol: 1e-10, ..Default::default() }).unwrap();
        assert!((root - 1000.0).abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let opts = BrentOptions { xtol: 0.0, rtol: 0.0, max_iter: 3 };
        let err = brent(|x| x.sin(), 3.0, 4.0, opts).unwrap_err();
        assert!(matches!(err, RootError::MaxIterations { iterations: 3, .. }));
    }
}
