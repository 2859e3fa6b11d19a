//! Fourier-side machinery on the uniform grid alpha_j = -pi + 2*pi*j/n.
//!
//! Everything here works on 2*pi-periodic real samples. Coefficients are kept
//! in FFT bin order with the frequency of bin m being m for m <= n/2 and
//! m - n otherwise; `freq` is the single source of truth for that layout.
//! Multiplier operators (derivatives, Hilbert transform, |k|^s, heat kernel,
//! strip weights) act bin-wise on that spectrum.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Signed frequency of FFT bin `m` on an `n`-point grid.
pub fn freq(n: usize, m: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// The grid alpha_j = -pi + 2*pi*j/n.
pub fn grid(n: usize) -> Vec<f64> {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    (0..n).map(|j| -std::f64::consts::PI + h * j as f64).collect()
}

pub fn grid_spacing(n: usize) -> f64 {
    2.0 * std::f64::consts::PI / n as f64
}

/// Forward transform of real samples, normalized so bin m holds the true
/// Fourier coefficient (up to the grid phase, which multiplier ops cancel).
pub fn to_coeffs(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse of `to_coeffs`, discarding the (round-off level) imaginary part.
pub fn from_coeffs_real(coeffs: &[Complex64]) -> Vec<f64> {
    from_coeffs(coeffs).into_iter().map(|c| c.re).collect()
}

pub fn from_coeffs(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    plan(n, true).process(&mut buf);
    buf
}

/// Apply a bin-wise multiplier g(k) to real samples and return real samples.
/// The caller guarantees g(-k) = conj(g(k)) so the result is real.
pub fn apply_multiplier(samples: &[f64], g: impl Fn(i64) -> Complex64) -> Vec<f64> {
    let n = samples.len();
    let mut coeffs = to_coeffs(samples);
    for (m, c) in coeffs.iter_mut().enumerate() {
        *c *= g(freq(n, m));
    }
    from_coeffs_real(&coeffs)
}

/// Spectral derivative of given order. Odd orders zero the Nyquist bin to
/// keep the multiplier conjugate-symmetric on real data.
pub fn derivative(samples: &[f64], order: usize) -> Vec<f64> {
    let n = samples.len();
    apply_multiplier(samples, |k| {
        if order % 2 == 1 && n % 2 == 0 && k == -(n as i64) / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k as f64).powu(order as u32)
    })
}

/// Periodic Hilbert transform: multiplier -i sgn(k), zero on the mean and
/// on the Nyquist bin.
pub fn hilbert(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    apply_multiplier(samples, |k| {
        if k == 0 || (n % 2 == 0 && k == -(n as i64) / 2) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -(k.signum() as f64))
        }
    })
}

/// Fractional Zygmund operator |k|^s (s >= 0); s = 0 leaves the mean intact.
pub fn lambda_pow(samples: &[f64], s: f64) -> Vec<f64> {
    apply_multiplier(samples, |k| {
        if k == 0 {
            Complex64::new(if s == 0.0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            Complex64::new((k.abs() as f64).powf(s), 0.0)
        }
    })
}

/// Heat-kernel mollifier: multiplier exp(-eps k^2). eps = 0 is the identity.
pub fn mollify(samples: &[f64], eps: f64) -> Vec<f64> {
    if eps == 0.0 {
        return samples.to_vec();
    }
    apply_multiplier(samples, |k| {
        Complex64::new((-eps * (k * k) as f64).exp(), 0.0)
    })
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Antiderivative of the mean-free part of `samples`, pinned to zero at the
/// first grid node (alpha = -pi).
pub fn antiderivative_mean_free(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut coeffs = to_coeffs(samples);
    for (m, c) in coeffs.iter_mut().enumerate() {
        let k = freq(n, m);
        if k == 0 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, k as f64);
        }
    }
    let mut vals = from_coeffs_real(&coeffs);
    let v0 = vals[0];
    for v in &mut vals {
        *v -= v0;
    }
    vals
}

/// Evaluate real samples on the shifted line alpha + i*side*xi; `side` is
/// +1 for the upper edge of the strip and -1 for the lower one.
pub fn strip_eval(samples: &[f64], xi: f64, side: f64) -> Vec<Complex64> {
    if xi == 0.0 {
        return samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    }
    let n = samples.len();
    let mut coeffs = to_coeffs(samples);
    for (m, c) in coeffs.iter_mut().enumerate() {
        let k = freq(n, m) as f64;
        *c *= (-side * k * xi).exp();
    }
    from_coeffs(&coeffs)
}

/// Largest |k| whose coefficient magnitude exceeds `threshold`.
pub fn active_modes(samples: &[f64], threshold: f64) -> usize {
    let n = samples.len();
    let coeffs = to_coeffs(samples);
    let mut kmax = 0usize;
    for (m, c) in coeffs.iter().enumerate() {
        if c.norm() > threshold {
            kmax = kmax.max(freq(n, m).unsigned_abs() as usize);
        }
    }
    kmax
}

/// Trigonometric interpolation of real samples at an arbitrary point.
pub fn eval_trig(samples: &[f64], x: f64) -> f64 {
    let coeffs = to_coeffs(samples);
    eval_trig_coeffs(&coeffs, x)
}

/// Same as `eval_trig` but on precomputed coefficients.
pub fn eval_trig_coeffs(coeffs: &[Complex64], x: f64) -> f64 {
    let n = coeffs.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, c) in coeffs.iter().enumerate() {
        let k = freq(n, m) as f64;
        // Grid phase: bin m stores c_k * exp(-i k pi).
        acc += c * Complex64::new(0.0, k * (x + std::f64::consts::PI)).exp();
    }
    acc.re
}

/// Resample real periodic data onto a finer (or coarser) uniform grid by
/// spectral padding/truncation.
pub fn resample(samples: &[f64], new_n: usize) -> Vec<f64> {
    let n = samples.len();
    if new_n == n {
        return samples.to_vec();
    }
    let coeffs = to_coeffs(samples);
    let mut out = vec![Complex64::new(0.0, 0.0); new_n];
    let keep = (n.min(new_n)) / 2;
    for m in 0..n {
        let k = freq(n, m);
        if k.unsigned_abs() as usize <= keep {
            let dst = if k >= 0 { k as usize } else { (new_n as i64 + k) as usize };
            out[dst] = coeffs[m];
        }
    }
    // Halve a shared Nyquist bin rather than double-count it.
    if n % 2 == 0 && new_n > n {
        let m = n / 2;
        out[new_n - m] = coeffs[m] * 0.5;
        out[m] = coeffs[m] * 0.5;
    }
    from_coeffs_real(&out)
}

/// Trapezoidal quadrature over the period; spectrally exact on the grid.
pub fn integrate(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() * grid_spacing(samples.len())
}

pub fn l2_norm(samples: &[f64]) -> f64 {
    (samples.iter().map(|x| x * x).sum::<f64>() * grid_spacing(samples.len())).sqrt()
}
