//! Periodic interface representation.
//!
//! A curve is stored as its 2*pi-periodic part (p1, p2) on the uniform grid,
//! with the full first component being slope*alpha + p1. Open interfaces that
//! advance one period horizontally per period of the parameter use slope = 1;
//! closed image curves (e.g. conformally transformed ones) use slope = 0.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral;

pub const MIN_POINTS: usize = 16;

/// Side(s) of the analyticity strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
    Both,
}

impl Side {
    pub fn signs(self) -> &'static [f64] {
        match self {
            Side::Plus => &[1.0],
            Side::Minus => &[-1.0],
            Side::Both => &[1.0, -1.0],
        }
    }
}

/// A horizontal strip around the real axis, |Im| < half_width.
#[derive(Debug, Clone, Copy)]
pub struct StripSpec {
    pub half_width: f64,
    pub side: Side,
}

impl StripSpec {
    pub fn new(half_width: f64, side: Side) -> Result<Self> {
        if !(half_width >= 0.0) {
            return Err(Error::Config(format!(
                "strip half-width must be nonnegative, got {half_width}"
            )));
        }
        Ok(Self { half_width, side })
    }

    pub fn both(half_width: f64) -> Result<Self> {
        Self::new(half_width, Side::Both)
    }
}

/// Curve samples continued to one edge of the strip; values are the periodic
/// parts, i.e. z(gamma) - (slope*gamma, 0).
#[derive(Debug, Clone)]
pub struct StripSamples {
    pub side: f64,
    pub xi: f64,
    pub p1: Vec<Complex64>,
    pub p2: Vec<Complex64>,
}

/// Result of the arc-chord scan: the maximum of beta^2 / |z(a) - z(a-beta)|^2
/// over grid pairs plus the diagonal limit 1/|z'|^2, with its argmax.
#[derive(Debug, Clone, Copy)]
pub struct ArcChord {
    pub max: f64,
    pub alpha: f64,
    /// Chord parameter at the argmax; 0 for the diagonal limit.
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodicCurve {
    n: usize,
    slope: f64,
    p1: Vec<f64>,
    p2: Vec<f64>,
    c1: Vec<Complex64>,
    c2: Vec<Complex64>,
}

impl PeriodicCurve {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>, slope: f64) -> Result<Self> {
        let n = p1.len();
        if n != p2.len() {
            return Err(Error::InvalidGrid { n, reason: "component lengths differ" });
        }
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid { n, reason: "fewer than 16 grid points" });
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid { n, reason: "odd number of grid points" });
        }
        if p1.iter().chain(p2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid { n, reason: "non-finite sample" });
        }
        let c1 = spectral::to_coeffs(&p1);
        let c2 = spectral::to_coeffs(&p2);
        Ok(Self { n, slope, p1, p2, c1, c2 })
    }

    /// Open interface: z1 = alpha + p1, z2 = p2.
    pub fn open(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        Self::new(p1, p2, 1.0)
    }

    /// Build a curve whose cached spectrum is exactly the given one; samples
    /// are synthesized from it. Lets mode surgery (projection, filtering)
    /// stay idempotent at the bit level.
    pub fn from_coeffs(c1: Vec<Complex64>, c2: Vec<Complex64>, slope: f64) -> Result<Self> {
        let n = c1.len();
        if n != c2.len() {
            return Err(Error::InvalidGrid { n, reason: "component lengths differ" });
        }
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid { n, reason: "fewer than 16 grid points" });
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid { n, reason: "odd number of grid points" });
        }
        let p1 = spectral::from_coeffs_real(&c1);
        let p2 = spectral::from_coeffs_real(&c2);
        if p1.iter().chain(p2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid { n, reason: "non-finite sample" });
        }
        Ok(Self { n, slope, p1, p2, c1, c2 })
    }

    /// Closed curve: z = (p1, p2), both components periodic.
    pub fn closed(p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        Self::new(p1, p2, 0.0)
    }

    pub fn flat(n: usize) -> Result<Self> {
        Self::open(vec![0.0; n], vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn is_closed(&self) -> bool {
        self.slope == 0.0
    }

    pub fn alpha(&self) -> Vec<f64> {
        spectral::grid(self.n)
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn p2(&self) -> &[f64] {
        &self.p2
    }

    pub fn coeffs1(&self) -> &[Complex64] {
        &self.c1
    }

    pub fn coeffs2(&self) -> &[Complex64] {
        &self.c2
    }

    /// Full first component slope*alpha + p1 on the grid.
    pub fn z1(&self) -> Vec<f64> {
        self.alpha()
            .iter()
            .zip(&self.p1)
            .map(|(&a, &p)| self.slope * a + p)
            .collect()
    }

    pub fn z2(&self) -> Vec<f64> {
        self.p2.clone()
    }

    /// Complexified samples w = z1 + i z2.
    pub fn w(&self) -> Vec<Complex64> {
        self.z1()
            .iter()
            .zip(&self.p2)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect()
    }

    /// d^order/dalpha^order of the full curve; the linear part contributes
    /// (slope, 0) at order one and nothing beyond.
    pub fn derivative(&self, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if order == 0 || order > self.n / 4 {
            return Err(Error::DerivativeOrder { order, n: self.n, max: self.n / 4 });
        }
        let mut d1 = spectral::derivative(&self.p1, order);
        let d2 = spectral::derivative(&self.p2, order);
        if order == 1 {
            for v in &mut d1 {
                *v += self.slope;
            }
        }
        Ok((d1, d2))
    }

    /// |dz/dalpha|^2 on the grid.
    pub fn tangent_sq(&self) -> Vec<f64> {
        let (d1, d2) = self.derivative(1).expect("order 1 is always within the guard");
        d1.iter().zip(&d2).map(|(&a, &b)| a * a + b * b).collect()
    }

    /// Reconstruction invariant: samples -> coefficients -> samples round
    /// trip, relative error below 1e-12.
    pub fn validate(&self) -> Result<()> {
        let r1 = spectral::from_coeffs_real(&self.c1);
        let r2 = spectral::from_coeffs_real(&self.c2);
        let scale = self
            .p1
            .iter()
            .chain(self.p2.iter())
            .fold(1.0f64, |m, &v| m.max(v.abs()));
        for (a, b) in self.p1.iter().zip(&r1).chain(self.p2.iter().zip(&r2)) {
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::InvalidGrid {
                    n: self.n,
                    reason: "cached coefficients inconsistent with samples",
                });
            }
        }
        Ok(())
    }

    /// Arc-chord scan over all grid pairs plus the diagonal limit.
    ///
    /// The chord parameter beta is the difference of grid parameters wrapped
    /// to (-pi, pi], so each pair is compared against its nearest horizontal
    /// image; this is a grid-resolution estimate with no sub-grid search.
    pub fn arc_chord(&self) -> Result<ArcChord> {
        let alpha = self.alpha();
        let n = self.n;
        let tau = 2.0 * std::f64::consts::PI;
        let mut best = ArcChord { max: 0.0, alpha: alpha[0], beta: 0.0 };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut beta = alpha[i] - alpha[j];
                if beta > std::f64::consts::PI {
                    beta -= tau;
                } else if beta <= -std::f64::consts::PI {
                    beta += tau;
                }
                let dx = self.slope * beta + self.p1[i] - self.p1[j];
                let dy = self.p2[i] - self.p2[j];
                let chord2 = dx * dx + dy * dy;
                if chord2 < 1e-24 {
                    return Err(Error::SelfIntersection { alpha: alpha[i], beta: alpha[j] });
                }
                let val = beta * beta / chord2;
                if val > best.max {
                    best = ArcChord { max: val, alpha: alpha[i], beta };
                }
            }
        }
        for (i, t2) in self.tangent_sq().iter().enumerate() {
            if *t2 < 1e-24 {
                return Err(Error::SelfIntersection { alpha: alpha[i], beta: alpha[i] });
            }
            let val = 1.0 / t2;
            if val > best.max {
                best = ArcChord { max: val, alpha: alpha[i], beta: 0.0 };
            }
        }
        Ok(best)
    }

    /// Continue the curve to one edge of the strip. Fails when the top 10%
    /// of amplified modes dominate the rest by more than `tail_guard`
    /// (pass `None` to force the evaluation).
    pub fn strip_samples(&self, xi: f64, side: f64, tail_guard: Option<f64>) -> Result<StripSamples> {
        debug_assert!(side == 1.0 || side == -1.0);
        if xi > 0.0 {
            if let Some(factor) = tail_guard {
                self.check_strip_tail(xi, factor)?;
            }
        }
        Ok(StripSamples {
            side,
            xi,
            p1: spectral::strip_eval(&self.p1, xi, side),
            p2: spectral::strip_eval(&self.p2, xi, side),
        })
    }

    fn check_strip_tail(&self, xi: f64, factor: f64) -> Result<()> {
        let n = self.n;
        let kmax = n / 2;
        let cutoff = ((0.9 * kmax as f64).ceil() as usize).max(1);
        let (mut tail2, mut band2) = (0.0f64, 0.0f64);
        for m in 0..n {
            let k = spectral::freq(n, m).unsigned_abs() as usize;
            if k == 0 {
                continue;
            }
            let amp = (k as f64 * xi).exp();
            let w = (self.c1[m].norm() + self.c2[m].norm()) * amp;
            if k >= cutoff {
                tail2 += w * w;
            } else {
                band2 += w * w;
            }
        }
        let (tail, band) = (tail2.sqrt(), band2.sqrt());
        if tail > factor * band {
            return Err(Error::StripExceeded { xi, tail, band, factor });
        }
        Ok(())
    }

    /// Least-squares spectral decay rate: slope of log coefficient magnitude
    /// against wavenumber over the usable band (between the round-off floor
    /// and 1% of the peak), both components combined.
    pub fn spectral_decay(&self) -> Result<f64> {
        const FLOOR: f64 = 1e-13;
        const NEEDED: usize = 8;
        let n = self.n;
        let mut mags = vec![0.0f64; n / 2];
        for m in 0..n {
            let k = spectral::freq(n, m);
            if k <= 0 || (k as usize) >= n / 2 + 1 {
                continue;
            }
            let k = k as usize;
            if k - 1 < mags.len() {
                let w = (self.c1[m].norm().powi(2) + self.c2[m].norm().powi(2)).sqrt();
                mags[k - 1] = mags[k - 1].max(w);
            }
        }
        let peak = mags.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (i, &w) in mags.iter().enumerate() {
            if w > FLOOR && w < 1e-2 * peak {
                pts.push(((i + 1) as f64, w.ln()));
            }
        }
        if pts.len() < NEEDED {
            return Err(Error::InsufficientSpectrum { found: pts.len(), needed: NEEDED });
        }
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        Ok((-slope).max(0.0))
    }
}

pub const DEFAULT_TAIL_GUARD: f64 = 1e3;

/// Curve evaluated on both requested strip edges.
pub fn strip_evaluate(curve: &PeriodicCurve, strip: &StripSpec) -> Result<Vec<StripSamples>> {
    strip_evaluate_with(curve, strip, Some(DEFAULT_TAIL_GUARD))
}

pub fn strip_evaluate_with(
    curve: &PeriodicCurve,
    strip: &StripSpec,
    tail_guard: Option<f64>,
) -> Result<Vec<StripSamples>> {
    strip
        .side
        .signs()
        .iter()
        .map(|&s| curve.strip_samples(strip.half_width, s, tail_guard))
        .collect()
}

/// Strip Sobolev energy: the L2(S) term integrates |z - (gamma, 0)|^2 over
/// each requested edge; for k >= 1 the k-th derivative of the periodic part
/// is added. For a flat interface the result is identically zero.
pub fn sobolev_strip_norm(curve: &PeriodicCurve, k: usize, strip: &StripSpec) -> Result<f64> {
    let h = spectral::grid_spacing(curve.n());
    let mut total = 0.0;
    for s in strip.side.signs() {
        let edge = curve.strip_samples(strip.half_width, *s, Some(DEFAULT_TAIL_GUARD))?;
        let mut l2 = 0.0;
        for (a, b) in edge.p1.iter().zip(&edge.p2) {
            l2 += a.norm_sqr() + b.norm_sqr();
        }
        total += l2 * h;
        if k >= 1 {
            let d1 = strip_derivative(curve, &curve.p1, k, strip.half_width, *s);
            let d2 = strip_derivative(curve, &curve.p2, k, strip.half_width, *s);
            let mut dk = 0.0;
            for (a, b) in d1.iter().zip(&d2) {
                dk += a.norm_sqr() + b.norm_sqr();
            }
            total += dk * h;
        }
    }
    Ok(total)
}

fn strip_derivative(
    curve: &PeriodicCurve,
    samples: &[f64],
    order: usize,
    xi: f64,
    side: f64,
) -> Vec<Complex64> {
    let _ = curve;
    let d = spectral::derivative(samples, order);
    spectral::strip_eval(&d, xi, side)
}
