//! Test-only numerical oracles, deliberately independent of the library's
//! own quadrature.

#![allow(dead_code)]

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson with Richardson correction, absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Sum of [`simpson`] over `n` equal pieces of [a, b].
pub fn simpson_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, tol: f64) -> f64 {
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| simpson(&f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / n as f64))
        .sum()
}

/// ∫ (K³/2) x² e^{−Kx} e^{−ixt} dx over [0, 80/K] as (modulus, argument).
pub fn lightshift_transform(t: f64, k: f64) -> (f64, f64) {
    let p = |x: f64| 0.5 * k.powi(3) * x * x * (-k * x).exp();
    let upper = 80.0 / k;
    let cycles = (t.abs() * upper / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let pieces = (4 * cycles).max(80);
    let re = simpson_pieces(|x| p(x) * (x * t).cos(), 0.0, upper, pieces, 1e-12);
    let im = simpson_pieces(|x| -p(x) * (x * t).sin(), 0.0, upper, pieces, 1e-12);
    (re.hypot(im), im.atan2(re))
}

/// ∫ −cos(Δδ τ) N(Δδ; 0, σ²) dΔδ over ±14σ.
pub fn gaussian_echo_average(tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return -1.0;
    }
    let g = |d: f64| (-0.5 * (d / sigma).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    simpson_pieces(|d| -(d * tau).cos() * g(d), -14.0 * sigma, 14.0 * sigma, 112, 1e-14)
}

pub fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
}
