#![allow(dead_code)]

/// Adaptive Simpson quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integral over `[a, b)` split into `parts` equal panels, evaluating just
/// inside `b` so half-open supports are respected.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, parts: usize, tol: f64) -> f64 {
    let h = (b - a) / parts as f64;
    (0..parts)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == parts {
                b.next_down()
            } else {
                lo + h
            };
            integrate(&f, lo, hi, tol / parts as f64)
        })
        .sum()
}

/// Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic 99% critical value of the one-sample KS statistic.
pub fn ks_critical_99(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard normal density, written out independently of the crate.
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
