//! Run monitors: the Rayleigh-Taylor function and its minimum, strip
//! Sobolev energies, the spectral decay estimate for the analyticity strip,
//! the stability energy functional, and the strip-width decay integrator.
//!
//! The energy functional and the decay integrator carry an unknowable
//! analytic constant; both take it as configuration (default 1) and are
//! monitors of trend, not certified bounds.

use num_complex::Complex64;

use crate::curve::{strip_evaluate_with, PeriodicCurve, Side, StripSpec};
use crate::dynamics::VelocityBundle;
use crate::error::{Error, Result};
use crate::singular::{VectorField, VorticityField};
use crate::spectral;
use crate::vorticity::FluidParams;

/// One diagnostics row. Serializes to CSV with a fixed column order.
#[derive(Debug, Clone, Copy)]
pub struct DiagRecord {
    pub t: f64,
    /// Mean of |dz/dalpha|^2 over the grid.
    pub a: f64,
    pub arc_chord_max: f64,
    pub sigma_min: f64,
    /// Fitted spectral decay rate; 0 when the spectrum is too short to fit.
    pub strip_rho: f64,
    /// Sobolev norm ||z - (alpha, 0)||_{H^4} on the real axis.
    pub sobolev_h4: f64,
    pub rt_energy: f64,
    pub h_of_t: f64,
}

impl DiagRecord {
    pub const CSV_HEADER: &'static str =
        "t,A,arc_chord_max,sigma_min,strip_rho,sobolev_h4,rt_energy,h_of_t";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t,
            self.a,
            self.arc_chord_max,
            self.sigma_min,
            self.strip_rho,
            self.sobolev_h4,
            self.rt_energy,
            self.h_of_t
        )
    }
}

/// Pointwise Rayleigh-Taylor function
/// sigma = (mu2/kappa) BR . (dz)^perp + g rho2 dz1, with (a,b)^perp = (-b,a).
pub fn rayleigh_taylor(
    curve: &PeriodicCurve,
    _w: &VorticityField,
    br: &VectorField,
    params: &FluidParams,
) -> Result<Vec<f64>> {
    Ok(rayleigh_taylor_terms(curve, br, params)?
        .into_iter()
        .map(|(a, b)| a + b)
        .collect())
}

/// The two terms of sigma separately: the sheet term and the gravity term.
pub fn rayleigh_taylor_terms(
    curve: &PeriodicCurve,
    br: &VectorField,
    params: &FluidParams,
) -> Result<Vec<(f64, f64)>> {
    let n = curve.n();
    if br.x.len() != n {
        return Err(Error::InvalidGrid { n, reason: "velocity grid mismatch" });
    }
    let (d1, d2) = curve.derivative(1)?;
    Ok((0..n)
        .map(|j| {
            let sheet = params.mu2 / params.kappa * (-br.x[j] * d2[j] + br.y[j] * d1[j]);
            let gravity = params.g * params.rho2 * d1[j];
            (sheet, gravity)
        })
        .collect())
}

/// Grid minimum of sigma and its location.
pub fn sigma_min(
    curve: &PeriodicCurve,
    w: &VorticityField,
    br: &VectorField,
    params: &FluidParams,
) -> Result<(f64, f64)> {
    let sigma = rayleigh_taylor(curve, w, br, params)?;
    let alpha = curve.alpha();
    let mut best = (f64::INFINITY, alpha[0]);
    for (j, &s) in sigma.iter().enumerate() {
        if s < best.0 {
            best = (s, alpha[j]);
        }
    }
    Ok(best)
}

/// Fitted spectral decay rate of the curve (analyticity-strip estimate).
pub fn strip_width(curve: &PeriodicCurve) -> Result<f64> {
    curve.spectral_decay()
}

/// Stability energy of the interface at a given strip width.
#[derive(Debug, Clone, Copy)]
pub struct RtEnergy {
    pub value: f64,
    /// sup of the arc-chord function over the strip edges, squared.
    pub arc_chord_sq: f64,
    pub l2_strip: f64,
    pub f_norm: f64,
    pub denominator: f64,
    /// True when the denominator was nonpositive and the energy saturated.
    pub sentinel: bool,
}

/// Arc-chord sup over the strip edges (reduces to the grid scan at xi = 0).
pub fn strip_arc_chord(curve: &PeriodicCurve, xi: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(curve.arc_chord()?.max);
    }
    let n = curve.n();
    let alpha = curve.alpha();
    let tau = 2.0 * std::f64::consts::PI;
    let spec = StripSpec { half_width: xi, side: Side::Both };
    let d1r = spectral::derivative(curve.p1(), 1);
    let d2r = spectral::derivative(curve.p2(), 1);
    let mut best = 0.0f64;
    for edge in strip_evaluate_with(curve, &spec, Some(crate::curve::DEFAULT_TAIL_GUARD))? {
        let d1 = spectral::strip_eval(&d1r, xi, edge.side);
        let d2 = spectral::strip_eval(&d2r, xi, edge.side);
        for j in 0..n {
            let t2 = (d1[j] + curve.slope()).norm_sqr() + d2[j].norm_sqr();
            if t2 < 1e-24 {
                return Err(Error::SelfIntersection { alpha: alpha[j], beta: alpha[j] });
            }
            best = best.max(1.0 / t2);
        }
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
                let c1 = Complex64::new(curve.slope() * beta, 0.0) + edge.p1[i] - edge.p1[j];
                let c2 = edge.p2[i] - edge.p2[j];
                let chord2 = c1.norm_sqr() + c2.norm_sqr();
                if chord2 < 1e-24 {
                    return Err(Error::SelfIntersection { alpha: alpha[i], beta: alpha[j] });
                }
                best = best.max(beta * beta / chord2);
            }
        }
    }
    Ok(best)
}

/// Sum over the strip edges of \int g^2 + \int (g'')^2 for a derived real
/// field sampled on each edge, square-rooted.
pub(crate) fn h2_norm_of_sides(sides: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for g in sides {
        let d2 = spectral::derivative(g, 2);
        total += spectral::integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>());
        total += spectral::integrate(&d2.iter().map(|v| v * v).collect::<Vec<_>>());
    }
    total.sqrt()
}

/// The imaginary-part norm that controls the strip evolution:
/// || Im(w/A) ||_{H2} + || Im(dz) . Re(dz w) ||_{H2}
/// + || Im(dz) . Im(dz w) ||_{H2} + || Im(c) ||_{H2}, all on the strip
/// edges. Identically zero on the real axis, where every field is real.
pub fn imaginary_drive_norm(curve: &PeriodicCurve, w: &[f64], c: &[f64], xi: f64) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    let n = curve.n();
    let a_mean = spectral::mean(&curve.tangent_sq());
    let d1r = spectral::derivative(curve.p1(), 1);
    let d2r = spectral::derivative(curve.p2(), 1);
    let mut g1 = Vec::with_capacity(2);
    let mut g2 = Vec::with_capacity(2);
    let mut g3 = Vec::with_capacity(2);
    let mut g4 = Vec::with_capacity(2);
    for side in [1.0f64, -1.0] {
        let ws = spectral::strip_eval(w, xi, side);
        let cs = spectral::strip_eval(c, xi, side);
        let d1 = spectral::strip_eval(&d1r, xi, side);
        let d2 = spectral::strip_eval(&d2r, xi, side);
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        let mut f3 = vec![0.0; n];
        let mut f4 = vec![0.0; n];
        for j in 0..n {
            let dz1 = d1[j] + curve.slope();
            let dz2 = d2[j];
            let p1 = dz1 * ws[j];
            let p2 = dz2 * ws[j];
            f1[j] = ws[j].im / a_mean;
            f2[j] = dz1.im * p1.re + dz2.im * p2.re;
            f3[j] = dz1.im * p1.im + dz2.im * p2.im;
            f4[j] = cs[j].im;
        }
        g1.push(f1);
        g2.push(f2);
        g3.push(f3);
        g4.push(f4);
    }
    Ok(h2_norm_of_sides(&g1)
        + h2_norm_of_sides(&g2)
        + h2_norm_of_sides(&g3)
        + h2_norm_of_sides(&g4))
}

/// Stability energy
/// ||F(z)||^2_{Loo(S)} + ||z||^2_{L2(S)} + 1/(m - 2 lambda - C ||f||),
/// computed from a precomputed velocity bundle. The denominator reuses the
/// same grid minimum as `sigma_min`. A nonpositive denominator yields an
/// infinite sentinel value rather than an error.
pub fn rt_energy_parts(
    curve: &PeriodicCurve,
    params: &FluidParams,
    bundle: &VelocityBundle,
    lambda: f64,
    strip_xi: f64,
    c_const: f64,
) -> Result<RtEnergy> {
    let arc_sq = {
        let f = strip_arc_chord(curve, strip_xi)?;
        f * f
    };
    let l2 = crate::curve::sobolev_strip_norm(curve, 0, &StripSpec::both(strip_xi)?)?;
    let (m, _) = sigma_min(curve, &bundle.vorticity, &bundle.br, params)?;
    let f_norm = imaginary_drive_norm(curve, bundle.vorticity.samples(), &bundle.c, strip_xi)?;
    let denominator = m - 2.0 * lambda - c_const * f_norm;
    let (value, sentinel) = if denominator > 0.0 {
        (arc_sq + l2 + 1.0 / denominator, false)
    } else {
        (f64::INFINITY, true)
    };
    Ok(RtEnergy { value, arc_chord_sq: arc_sq, l2_strip: l2, f_norm, denominator, sentinel })
}

/// Convenience entry that assembles the velocity bundle itself.
pub fn rt_energy(
    curve: &PeriodicCurve,
    params: &FluidParams,
    lambda: f64,
    strip_xi: f64,
    c_const: f64,
    opts: &crate::dynamics::EvolutionOptions,
) -> Result<RtEnergy> {
    let bundle = crate::dynamics::velocity(curve, params, opts)?;
    rt_energy_parts(curve, params, &bundle, lambda, strip_xi, c_const)
}

/// Strip-width decay series h(t).
#[derive(Debug, Clone)]
pub struct StripDecay {
    pub values: Vec<f64>,
    /// Index of the first sample with h <= 0, if the width collapsed.
    pub collapsed_at: Option<usize>,
}

/// Integrate h(t) = exp(-10 int G) [ int -10 G exp(10 int G) + h0 ].
///
/// The bracket telescopes against the prefactor, so the series is evaluated
/// through the equivalent closed form h = (h0 + 1) exp(-10 int_0^t G) - 1,
/// with the inner integral taken by the trapezoidal rule. h(0) = h0, and h
/// is non-increasing for G >= 0.
pub fn h_integrator(times: &[f64], g: &[f64], h0: f64) -> Result<StripDecay> {
    if times.len() != g.len() || times.is_empty() {
        return Err(Error::Config("time and G series must have equal nonzero length".into()));
    }
    if !(h0 > 0.0) {
        return Err(Error::Config(format!("h0 must be positive, got {h0}")));
    }
    if g.iter().any(|&v| v < 0.0) {
        return Err(Error::Config("G must be nonnegative".into()));
    }
    let mut integral = 0.0;
    let mut values = Vec::with_capacity(times.len());
    let mut collapsed_at = None;
    for i in 0..times.len() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            if dt < 0.0 {
                return Err(Error::Config("time series must be nondecreasing".into()));
            }
            integral += 0.5 * dt * (g[i] + g[i - 1]);
        }
        let h = h0 + (h0 + 1.0) * f64::exp_m1(-10.0 * integral);
        if h <= 0.0 && collapsed_at.is_none() {
            collapsed_at = Some(i);
        }
        values.push(h);
    }
    Ok(StripDecay { values, collapsed_at })
}

/// Growth-factor proxy exp(C (F_max^2 + ||z||^2_{H4})) feeding the decay
/// integrator. Saturates on overflow so the integrator can still flag the
/// collapse instead of propagating infinities.
pub fn g_proxy(arc_chord_max: f64, sobolev_h4: f64, c_const: f64) -> f64 {
    let v = (c_const * (arc_chord_max * arc_chord_max + sobolev_h4 * sobolev_h4)).exp();
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Diagnostics configuration shared by the runner and the CLI.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DiagnosticsConfig {
    /// Strip slope parameter; defaults to sigma_min(0)/4 when absent.
    pub lambda: Option<f64>,
    /// Strip half-width used by the energy terms (0 = real axis).
    pub strip_xi: f64,
    /// Stand-in for the analytic constant in the energy and G.
    pub c_const: f64,
    pub h0: f64,
    /// Record every this many steps.
    pub every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { lambda: None, strip_xi: 0.0, c_const: 1.0, h0: 0.1, every: 1 }
    }
}

/// Evaluate a full record from a precomputed bundle; `h_of_t` is supplied by
/// the caller (the runner integrates it across records).
pub fn record_from_bundle(
    curve: &PeriodicCurve,
    params: &FluidParams,
    bundle: &VelocityBundle,
    t: f64,
    lambda: f64,
    cfg: &DiagnosticsConfig,
    h_of_t: f64,
) -> Result<DiagRecord> {
    let a = spectral::mean(&curve.tangent_sq());
    let arc = curve.arc_chord()?;
    let (m, _) = sigma_min(curve, &bundle.vorticity, &bundle.br, params)?;
    let rho = match curve.spectral_decay() {
        Ok(r) => r,
        Err(Error::InsufficientSpectrum { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let h4 = crate::curve::sobolev_strip_norm(curve, 4, &StripSpec::both(0.0)?)?.sqrt();
    let energy = rt_energy_parts(curve, params, bundle, lambda, cfg.strip_xi, cfg.c_const)?;
    Ok(DiagRecord {
        t,
        a,
        arc_chord_max: arc.max,
        sigma_min: m,
        strip_rho: rho,
        sobolev_h4: h4,
        rt_energy: energy.value,
        h_of_t,
    })
}
