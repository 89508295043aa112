//! One-dimensional maximization.
//!
//! All maximum-likelihood and cross-entropy updates in this crate reduce to
//! a scalar problem. They are solved with Brent's method (golden section plus
//! parabolic steps) after either an outward bracketing search (for unimodal
//! objectives) or a coarse grid scan (when unimodality is not guaranteed).
//! NaN objective values are treated as `-inf`.

use crate::math::{abs, sqrt};

/// Golden-section fraction `(3 - √5) / 2`.
const GOLDEN: f64 = 0.381_966_011_250_105_1;
const SQRT_EPS: f64 = 1.490_116_119_384_765_6e-8;
const MAX_ITERATIONS: usize = 500;
const MAX_EXPANSIONS: usize = 200;

/// Default absolute tolerance on the search variable.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
    best: Maximum,
}

impl<F: FnMut(f64) -> f64> Counted<F> {
    fn new(f: F) -> Self {
        Self {
            f,
            evaluations: 0,
            best: Maximum {
                argmax: f64::NAN,
                value: f64::NEG_INFINITY,
                evaluations: 0,
            },
        }
    }

    fn eval(&mut self, x: f64) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if v > self.best.value || self.best.argmax.is_nan() {
            self.best = Maximum {
                argmax: x,
                value: v,
                evaluations: 0,
            };
        }
        v
    }

    fn finish(self) -> Maximum {
        Maximum {
            evaluations: self.evaluations,
            ..self.best
        }
    }
}

/// Maximizes `f` on `[lo, hi]` with Brent's method. The endpoints are
/// evaluated as well, so a maximum sitting on the boundary is returned exactly.
pub fn brent_max<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Maximum {
    let mut c = Counted::new(f);
    brent_inner(&mut c, lo, hi, tol);
    c.eval(lo);
    c.eval(hi);
    c.finish()
}

fn brent_inner<F: FnMut(f64) -> f64>(c: &mut Counted<F>, lo: f64, hi: f64, tol: f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if a == b {
        c.eval(a);
        return;
    }
    // Minimize g = -f.
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = -c.eval(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..MAX_ITERATIONS {
        let m = 0.5 * (a + b);
        let tol1 = SQRT_EPS * abs(x) + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if abs(x - m) <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if abs(e) > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if abs(p) < abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if abs(d) >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = -c.eval(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
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
}

/// Maximizes a unimodal `f` over `[lo, hi]` starting from `start`.
///
/// Steps outward from `start` with doubling step sizes until the objective
/// turns down (or a limit is hit), then polishes the bracket with Brent.
pub fn bracket_max<F: FnMut(f64) -> f64>(
    f: F,
    start: f64,
    step: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Maximum {
    let clamp = |x: f64| x.max(lo).min(hi);
    let mut c = Counted::new(f);
    let x0 = clamp(start);
    let f0 = c.eval(x0);
    let step = if step == 0.0 { 1.0 } else { abs(step) };

    let x_up = clamp(x0 + step);
    let f_up = c.eval(x_up);
    let (mut a, mut b, mut fb, mut h) = if f_up > f0 {
        (x0, x_up, f_up, step)
    } else {
        let x_dn = clamp(x0 - step);
        let f_dn = c.eval(x_dn);
        if f_dn > f0 {
            (x0, x_dn, f_dn, -step)
        } else {
            brent_inner(&mut c, x_dn, x_up, tol);
            return c.finish();
        }
    };

    for _ in 0..MAX_EXPANSIONS {
        h *= 2.0;
        let limit = if h > 0.0 { hi } else { lo };
        let x_next = clamp(b + h);
        let f_next = c.eval(x_next);
        if f_next < fb {
            brent_inner(&mut c, a, x_next, tol);
            return c.finish();
        }
        if x_next == limit {
            brent_inner(&mut c, b, limit, tol);
            return c.finish();
        }
        a = b;
        b = x_next;
        fb = f_next;
    }
    brent_inner(&mut c, a, b, tol);
    c.finish()
}

/// Scans `points` equally spaced values on `[lo, hi]`, then refines around
/// the best grid point with Brent. Suitable for objectives that may have
/// plateaus or are not known to be unimodal.
pub fn grid_max<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Maximum {
    let points = points.max(3);
    let mut c = Counted::new(f);
    let h = (hi - lo) / (points - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..points {
        let x = if i + 1 == points {
            hi
        } else {
            lo + h * i as f64
        };
        let v = c.eval(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let left = lo + h * best_i.saturating_sub(1) as f64;
    let right = (lo + h * (best_i + 1) as f64).min(hi);
    brent_inner(&mut c, left, right, tol);
    c.finish()
}

/// Golden ratio conjugate, exposed for tests that build independent oracles.
pub fn golden_fraction() -> f64 {
    (3.0 - sqrt(5.0)) / 2.0
}
