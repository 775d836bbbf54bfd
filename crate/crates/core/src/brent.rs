//! Derivative-free scalar minimization on a bracket: golden-section search
//! accelerated by successive parabolic interpolation.

use crate::error::{Error, Result};

/// (3 - sqrt 5) / 2
const GOLDEN: f64 = 0.381_966_011_250_105_1;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `x` is then the best point seen.
    pub converged: bool,
}

/// Minimize `f` on `[lo, hi]` to absolute tolerance `tol`.
pub fn brent_minimize<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<BrentResult>
where
    F: FnMut(f64) -> f64,
{
    brent_minimize_from(f, lo, hi, None, tol)
}

/// As [`brent_minimize`], with an optional first interior probe.
pub fn brent_minimize_from<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    start: Option<f64>,
    tol: f64,
) -> Result<BrentResult>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::Parameter(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let rel = 1e-10;

    let (mut a, mut b) = (lo, hi);
    let mut x = match start {
        Some(s) if s > lo && s < hi => s,
        _ => a + GOLDEN * (b - a),
    };
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    // d: current step, e: step before last
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        let mid = 0.5 * (a + b);
        let tol1 = rel * x.abs() + tol / 4.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut golden = true;
        if e.abs() > tol1 {
            // Fit a parabola through x, w, v.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = f(u);

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    // Never hand back something worse than the bracket ends.
    for end in [lo, hi] {
        let fe = f(end);
        if fe < fx {
            x = end;
            fx = fe;
        }
    }
    Ok(BrentResult { x, fx, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic() {
        let r = brent_minimize(|x| (x - 2.0) * (x - 2.0), 0.0, 5.0, 1e-8).unwrap();
        assert!((r.x - 2.0).abs() <= 1e-8, "{r:?}");
        assert!(r.converged && r.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn cosine() {
        let r = brent_minimize(f64::cos, 0.0, 2.0 * PI, 1e-8).unwrap();
        assert!((r.x - PI).abs() <= 1e-8, "{r:?}");
        assert!(r.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn quartic() {
        let r = brent_minimize(|x| x.powi(4) - 3.0 * x * x + 1.0, 0.0, 2.0, 1e-8).unwrap();
        assert!((r.x - 1.5f64.sqrt()).abs() <= 1e-8, "{r:?}");
    }

    #[test]
    fn monotone_function_returns_endpoint() {
        let r = brent_minimize(|x| x, -1.0, 3.0, 1e-9).unwrap();
        assert_eq!(r.x, -1.0);
        let r = brent_minimize(|x| -x * x * x, -1.0, 3.0, 1e-9).unwrap();
        assert_eq!(r.x, 3.0);
    }

    #[test]
    fn bad_bracket() {
        assert!(matches!(brent_minimize(|x| x, 1.0, 1.0, 1e-6), Err(Error::Parameter(_))));
        assert!(matches!(brent_minimize(|x| x, 2.0, 1.0, 1e-6), Err(Error::Parameter(_))));
        assert!(brent_minimize(|x| x, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        // A pathological tolerance far below representable spacing.
        let r = brent_minimize(|x| (x - 0.3).abs().sqrt(), 0.0, 1.0, 1e-300).unwrap();
        assert!(r.iterations <= MAX_ITERATIONS);
        assert!((r.x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn start_hint_is_used() {
        let r = brent_minimize_from(|x| (x - 0.7) * (x - 0.7), 0.0, 1.0, Some(0.69), 1e-10).unwrap();
        assert!((r.x - 0.7).abs() < 1e-10);
    }
}
