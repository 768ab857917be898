#![allow(dead_code)]

//! Test-only oracles, independent of the library's closed forms.

/// Minimizes `b + a(2Λ/n − 1)` over `a`, with `b` fixed by the Kato
/// confidence constraint `exp(−2(b² − a²)/(1 ± 4a/(3√n))²) = ε`, i.e.
/// `b = √(a² + L(1 ± 4a/(3√n))²/2)` for `L = ln(1/ε)`.
///
/// The objective is convex in `a` (a Euclidean norm of an affine map plus a
/// linear term), so golden-section search on an expanding bracket finds the
/// global minimum. Returns `(a, objective)`.
pub fn kato_minimizer(n: f64, lambda: f64, ln_inv_eps: f64, upper: bool) -> (f64, f64) {
    let s = if upper { 1.0 } else { -1.0 };
    let sqrt_n = n.sqrt();
    let slope = 2.0 * lambda / n - 1.0;
    let f = |a: f64| {
        let d = 1.0 + s * 4.0 * a / (3.0 * sqrt_n);
        (a * a + ln_inv_eps * d * d / 2.0).sqrt() + a * slope
    };

    // Walk downhill with doubling steps until the objective rises.
    let mut h = 1.0;
    let dir = if f(h) < f(0.0) {
        1.0
    } else if f(-h) < f(0.0) {
        -1.0
    } else {
        0.0
    };
    let (mut lo, mut hi) = (-h, h);
    if dir != 0.0 {
        let mut x0 = 0.0;
        let mut x1 = dir * h;
        while f(x1) < f(x0) {
            x0 = x1;
            h *= 2.0;
            x1 = x0 + dir * h;
            assert!(h < 1e15, "bracket diverged");
        }
        let back = x0 - dir * h;
        lo = back.min(x1);
        hi = back.max(x1);
    }

    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    (a, f(a))
}

/// Poisson sample by inversion; fine for the small means used in tests.
pub fn poisson<R: rand::Rng>(rng: &mut R, mean: f64) -> u64 {
    let mut k = 0;
    let mut p = (-mean).exp();
    let mut cdf = p;
    let u: f64 = rng.random();
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// `|observed − expected| ≤ k·σ` for a binomial count.
pub fn within_sigma(observed: f64, trials: f64, p: f64, k: f64) -> bool {
    let sigma = (trials * p * (1.0 - p)).sqrt();
    (observed - trials * p).abs() <= k * sigma.max(1e-300)
}
