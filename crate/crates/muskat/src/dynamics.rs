//! Interface evolution: tangential reparametrization speed, velocity
//! assembly, and the explicit time stepper.
//!
//! The tangential speed c(alpha) is chosen so that d/dt |dz/dalpha|^2 loses
//! its alpha dependence: with f = (dz/|dz|^2) . d(BR)/dalpha,
//! c is the antiderivative of mean(f) - f vanishing at alpha = -pi. Time
//! stepping is classical RK4 on the periodic part, with an optional Krasny
//! coefficient filter, mode truncation, and heat-kernel regularization of
//! the strength equation applied stage by stage.

use crate::curve::PeriodicCurve;
use crate::error::{Error, Result};
use crate::singular::{birkhoff_rott, VectorField, VorticityField};
use crate::spectral;
use crate::vorticity::{solve_strength, FluidParams, SheetKernel, SolverOptions};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EvolutionOptions {
    /// Explicit step; `None` selects dt = c_stab / (R * N_active).
    pub dt: Option<f64>,
    pub c_stab: f64,
    /// Krasny filter threshold on coefficient magnitudes; 0 disables.
    pub filter_threshold: f64,
    /// Mode cap for the spectral truncation; `None` disables.
    pub galerkin_n: Option<usize>,
    /// Heat-kernel regularization strength; 0 disables.
    pub mollify_eps: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    /// Keep the reparametrizing tangential term (disable only for studies).
    pub use_tangential: bool,
    pub solver: SolverOptions,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            dt: None,
            c_stab: 0.5,
            filter_threshold: 1e-13,
            galerkin_n: None,
            mollify_eps: 0.0,
            t_end: 1.0,
            snapshot_every: 0,
            use_tangential: true,
            solver: SolverOptions::default(),
        }
    }
}

impl EvolutionOptions {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.c_stab > 0.0) {
            return Err(Error::Config("c_stab must be positive".into()));
        }
        if self.filter_threshold < 0.0 || self.mollify_eps < 0.0 {
            return Err(Error::Config("filter/mollifier strengths must be nonnegative".into()));
        }
        if let Some(gn) = self.galerkin_n {
            if gn > n / 2 {
                return Err(Error::Config(format!(
                    "galerkin mode cap {gn} exceeds n/2 = {}",
                    n / 2
                )));
            }
        }
        self.solver.validate()
    }

    /// Stability-rule step: dt = c_stab / (R * N_active), N_active the
    /// largest retained mode (the linearized operator stiffens like R*k).
    pub fn effective_dt(&self, curve: &PeriodicCurve, params: &FluidParams) -> f64 {
        if let Some(dt) = self.dt {
            return dt;
        }
        let thresh = if self.filter_threshold > 0.0 { self.filter_threshold } else { 1e-13 };
        let n_active = spectral::active_modes(curve.p1(), thresh)
            .max(spectral::active_modes(curve.p2(), thresh))
            .max(1)
            .min(self.galerkin_n.unwrap_or(usize::MAX));
        self.c_stab / (params.rate() * n_active as f64)
    }
}

/// Everything the velocity assembly produces, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct VelocityBundle {
    pub z_t: VectorField,
    pub vorticity: VorticityField,
    pub br: VectorField,
    pub c: Vec<f64>,
}

/// Reparametrizing tangential speed for a precomputed sheet velocity.
pub fn tangential_speed(curve: &PeriodicCurve, br: &VectorField) -> Result<Vec<f64>> {
    let n = curve.n();
    if br.x.len() != n {
        return Err(Error::InvalidGrid { n, reason: "velocity grid mismatch" });
    }
    let (d1, d2) = curve.derivative(1)?;
    let dbx = spectral::derivative(&br.x, 1);
    let dby = spectral::derivative(&br.y, 1);
    let f: Vec<f64> = (0..n)
        .map(|j| (d1[j] * dbx[j] + d2[j] * dby[j]) / (d1[j] * d1[j] + d2[j] * d2[j]))
        .collect();
    // c = -int_{-pi}^alpha (f - mean f); both endpoint values vanish.
    Ok(spectral::antiderivative_mean_free(&f)
        .into_iter()
        .map(|v| -v)
        .collect())
}

/// Assemble the full interface velocity (strength solve, sheet integral,
/// tangential term) for the physical system.
pub fn velocity(
    curve: &PeriodicCurve,
    params: &FluidParams,
    opts: &EvolutionOptions,
) -> Result<VelocityBundle> {
    let rhs = {
        let dz2 = spectral::derivative(curve.p2(), 1);
        dz2.iter().map(|&v| -2.0 * params.rate() * v).collect::<Vec<_>>()
    };
    let w = solve_strength(curve, &rhs, &opts.solver, opts.mollify_eps, SheetKernel::Auto)?;
    let br = birkhoff_rott(curve, &w)?;
    let c = if opts.use_tangential {
        tangential_speed(curve, &br)?
    } else {
        vec![0.0; curve.n()]
    };
    let (d1, d2) = curve.derivative(1)?;
    let n = curve.n();
    let mut z_t = VectorField::zeros(n);
    for j in 0..n {
        z_t.x[j] = br.x[j] + c[j] * d1[j];
        z_t.y[j] = br.y[j] + c[j] * d2[j];
    }
    Ok(VelocityBundle { z_t, vorticity: w, br, c })
}

/// Truncate the periodic part to modes |k| <= n_modes. Acts on the cached
/// spectrum, so applying it twice returns bit-identical samples.
pub fn galerkin_project(curve: &PeriodicCurve, n_modes: usize) -> Result<PeriodicCurve> {
    let n = curve.n();
    if n_modes > n / 2 {
        return Err(Error::Config(format!(
            "galerkin mode cap {n_modes} exceeds n/2 = {}",
            n / 2
        )));
    }
    let truncate = |c: &[num_complex::Complex64]| {
        c.iter()
            .enumerate()
            .map(|(m, &v)| {
                if spectral::freq(n, m).unsigned_abs() as usize > n_modes {
                    num_complex::Complex64::new(0.0, 0.0)
                } else {
                    v
                }
            })
            .collect::<Vec<_>>()
    };
    PeriodicCurve::from_coeffs(truncate(curve.coeffs1()), truncate(curve.coeffs2()), curve.slope())
}

/// Heat-kernel smoothing of a sample field (Fourier multiplier
/// exp(-eps k^2)); eps = 0 is the identity.
pub fn mollify(samples: &[f64], eps: f64) -> Vec<f64> {
    spectral::mollify(samples, eps)
}

/// Mollify the periodic part of a curve once (used on initial data when the
/// regularized system is enabled).
pub fn mollify_curve(curve: &PeriodicCurve, eps: f64) -> Result<PeriodicCurve> {
    PeriodicCurve::new(
        spectral::mollify(curve.p1(), eps),
        spectral::mollify(curve.p2(), eps),
        curve.slope(),
    )
}

fn postprocess(curve: PeriodicCurve, opts: &EvolutionOptions) -> Result<PeriodicCurve> {
    if opts.filter_threshold <= 0.0 && opts.galerkin_n.is_none() {
        return Ok(curve);
    }
    let n = curve.n();
    let cap = opts.galerkin_n.unwrap_or(n / 2);
    let clean = |c: &[num_complex::Complex64]| {
        c.iter()
            .enumerate()
            .map(|(m, &v)| {
                let k = spectral::freq(n, m).unsigned_abs() as usize;
                if k > cap || (opts.filter_threshold > 0.0 && v.norm() < opts.filter_threshold) {
                    num_complex::Complex64::new(0.0, 0.0)
                } else {
                    v
                }
            })
            .collect::<Vec<_>>()
    };
    PeriodicCurve::from_coeffs(clean(curve.coeffs1()), clean(curve.coeffs2()), curve.slope())
}

fn check_finite(curve: &PeriodicCurve, t: f64, step: usize) -> Result<()> {
    if curve
        .p1()
        .iter()
        .chain(curve.p2().iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::BlowUp { t, step, reason: "non-finite curve sample".into() });
    }
    Ok(())
}

fn shifted(curve: &PeriodicCurve, vx: &[f64], vy: &[f64], scale: f64) -> Result<PeriodicCurve> {
    PeriodicCurve::new(
        curve
            .p1()
            .iter()
            .zip(vx)
            .map(|(p, v)| p + scale * v)
            .collect(),
        curve
            .p2()
            .iter()
            .zip(vy)
            .map(|(p, v)| p + scale * v)
            .collect(),
        curve.slope(),
    )
}

/// One classical RK4 step of the physical system. The velocity evaluator is
/// abstracted so the conformally transformed system can reuse the stepper.
pub fn step_rk4_with(
    curve: &PeriodicCurve,
    dt: f64,
    opts: &EvolutionOptions,
    eval: &mut dyn FnMut(&PeriodicCurve) -> Result<VectorField>,
) -> Result<PeriodicCurve> {
    let y0 = postprocess(curve.clone(), opts)?;
    let k1 = eval(&y0)?;
    let y1 = postprocess(shifted(&y0, &k1.x, &k1.y, 0.5 * dt)?, opts)?;
    let k2 = eval(&y1)?;
    let y2 = postprocess(shifted(&y0, &k2.x, &k2.y, 0.5 * dt)?, opts)?;
    let k3 = eval(&y2)?;
    let y3 = postprocess(shifted(&y0, &k3.x, &k3.y, dt)?, opts)?;
    let k4 = eval(&y3)?;

    let n = curve.n();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    for j in 0..n {
        vx[j] = (k1.x[j] + 2.0 * k2.x[j] + 2.0 * k3.x[j] + k4.x[j]) / 6.0;
        vy[j] = (k1.y[j] + 2.0 * k2.y[j] + 2.0 * k3.y[j] + k4.y[j]) / 6.0;
    }
    postprocess(shifted(&y0, &vx, &vy, dt)?, opts)
}

/// One RK4 step of the physical system.
pub fn step_rk4(
    curve: &PeriodicCurve,
    params: &FluidParams,
    opts: &EvolutionOptions,
    dt: f64,
) -> Result<PeriodicCurve> {
    let mut eval = |c: &PeriodicCurve| -> Result<VectorField> {
        let v = velocity(c, params, opts)?;
        if v.z_t.x.iter().chain(v.z_t.y.iter()).any(|u| !u.is_finite()) {
            return Err(Error::BlowUp { t: f64::NAN, step: 0, reason: "non-finite velocity".into() });
        }
        Ok(v.z_t)
    };
    let next = step_rk4_with(curve, dt, opts, &mut eval)?;
    check_finite(&next, f64::NAN, 0)?;
    Ok(next)
}

/// Relative spread of |dz/dalpha|^2 across the grid: (max - min) / mean.
pub fn tangent_spread(curve: &PeriodicCurve) -> f64 {
    let t2 = curve.tangent_sq();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for v in &t2 {
        lo = lo.min(*v);
        hi = hi.max(*v);
        sum += *v;
    }
    (hi - lo) / (sum / t2.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid;

    fn graph(n: usize, amp: f64) -> PeriodicCurve {
        let g = grid(n);
        PeriodicCurve::open(vec![0.0; n], g.iter().map(|&a| amp * a.cos()).collect()).unwrap()
    }

    #[test]
    fn tangential_speed_vanishes_on_flat() {
        let n = 64;
        let c = PeriodicCurve::flat(n).unwrap();
        let br = VectorField::zeros(n);
        let sp = tangential_speed(&c, &br).unwrap();
        assert!(sp.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn tangential_speed_endpoint_and_derivative_identity() {
        let n = 64;
        let c = graph(n, 0.1);
        let params = FluidParams::unit();
        let opts = EvolutionOptions::default();
        let bundle = velocity(&c, &params, &opts).unwrap();
        // endpoint value: first grid node is alpha = -pi
        assert!(bundle.c[0].abs() < 1e-13);

        // d c/d alpha + f - mean f = 0 spectrally
        let (d1, d2) = c.derivative(1).unwrap();
        let dbx = spectral::derivative(&bundle.br.x, 1);
        let dby = spectral::derivative(&bundle.br.y, 1);
        let f: Vec<f64> = (0..n)
            .map(|j| (d1[j] * dbx[j] + d2[j] * dby[j]) / (d1[j] * d1[j] + d2[j] * d2[j]))
            .collect();
        let fbar = spectral::mean(&f);
        let dc = spectral::derivative(&bundle.c, 1);
        for j in 0..n {
            assert!((dc[j] + f[j] - fbar).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_is_a_fixed_point() {
        let n = 64;
        let mut c = PeriodicCurve::flat(n).unwrap();
        let params = FluidParams::unit();
        let opts = EvolutionOptions::default();
        for _ in 0..100 {
            c = step_rk4(&c, &params, &opts, 1e-3).unwrap();
        }
        assert!(c.p1().iter().all(|&v| v.abs() < 1e-14));
        assert!(c.p2().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn velocity_is_translation_equivariant() {
        let n = 64;
        let g = grid(n);
        let p2: Vec<f64> = g.iter().map(|&a| 0.1 * a.cos()).collect();
        let c = PeriodicCurve::open(vec![0.0; n], p2.clone()).unwrap();
        let half = n / 2;
        let rolled: Vec<f64> = (0..n).map(|j| p2[(j + half) % n]).collect();
        let cs = PeriodicCurve::open(vec![0.0; n], rolled).unwrap();
        let params = FluidParams::unit();
        let opts = EvolutionOptions::default();
        let v = velocity(&c, &params, &opts).unwrap();
        let vs = velocity(&cs, &params, &opts).unwrap();
        for j in 0..n {
            assert!((vs.z_t.y[j] - v.z_t.y[(j + half) % n]).abs() < 1e-11);
        }
    }

    #[test]
    fn linearized_vertical_velocity_contracts() {
        // z2 = delta cos a with small delta: vertical velocity ~ -R delta cos a
        let n = 64;
        let delta = 1e-4;
        let c = graph(n, delta);
        let params = FluidParams::unit();
        let v = velocity(&c, &params, &EvolutionOptions::default()).unwrap();
        for (j, &a) in c.alpha().iter().enumerate() {
            let want = -params.rate() * delta * a.cos();
            assert!((v.z_t.y[j] - want).abs() < 50.0 * delta * delta, "at {a}: {} vs {want}", v.z_t.y[j]);
        }
    }

    #[test]
    fn galerkin_projection_truncates_and_is_idempotent() {
        let n = 64;
        let g = grid(n);
        let p2: Vec<f64> = g.iter().map(|&a| a.cos() + 0.5 * (5.0 * a).cos()).collect();
        let c = PeriodicCurve::open(vec![0.0; n], p2).unwrap();
        let p = galerkin_project(&c, 2).unwrap();
        for (j, &a) in g.iter().enumerate() {
            assert!((p.p2()[j] - a.cos()).abs() < 1e-12);
        }
        let pp = galerkin_project(&p, 2).unwrap();
        for (a, b) in p.p2().iter().zip(pp.p2()) {
            assert_eq!(a, b);
        }
        // band-limited data below the cap is untouched
        let q = galerkin_project(&c, 5).unwrap();
        for (a, b) in c.p2().iter().zip(q.p2()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(galerkin_project(&c, 33).is_err());
    }

    #[test]
    fn fourth_order_self_convergence() {
        let n = 32;
        let c0 = graph(n, 0.2);
        let params = FluidParams::from_rate(2.0).unwrap();
        let opts = EvolutionOptions { filter_threshold: 0.0, ..Default::default() };
        let t_end = 0.4;

        let run = |dt: f64| -> PeriodicCurve {
            let steps = (t_end / dt).round() as usize;
            let mut c = c0.clone();
            for _ in 0..steps {
                c = step_rk4(&c, &params, &opts, dt).unwrap();
            }
            c
        };
        let a = run(0.02);
        let b = run(0.01);
        let r = run(0.005);
        let err = |x: &PeriodicCurve, y: &PeriodicCurve| -> f64 {
            x.p2()
                .iter()
                .zip(y.p2())
                .chain(x.p1().iter().zip(y.p1()))
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(&a, &b);
        let e2 = err(&b, &r);
        let ratio = e1 / e2;
        assert!(ratio > 13.0 && ratio < 19.0, "ratio {ratio} (e1={e1}, e2={e2})");
    }

    #[test]
    fn mollified_step_approaches_unmollified() {
        let n = 64;
        let c0 = graph(n, 0.1);
        let params = FluidParams::unit();
        let dt = 1e-3;
        let step_eps = |eps: f64| -> PeriodicCurve {
            let opts = EvolutionOptions { mollify_eps: eps, ..Default::default() };
            let start = if eps > 0.0 { mollify_curve(&c0, eps).unwrap() } else { c0.clone() };
            step_rk4(&start, &params, &opts, dt).unwrap()
        };
        let base = step_eps(0.0);
        let d = |x: &PeriodicCurve| -> f64 {
            x.p2()
                .iter()
                .zip(base.p2())
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max)
        };
        let e3 = d(&step_eps(1e-3));
        let e4 = d(&step_eps(1e-4));
        assert!(e4 < e3, "mollifier should vanish with eps: {e4} !< {e3}");
        let ratio = e3 / e4;
        assert!(ratio > 3.0, "expected roughly linear decay in eps, ratio {ratio}");
    }

    #[test]
    fn reality_and_symmetry_preserved() {
        let n = 64;
        let c0 = graph(n, 0.15);
        let params = FluidParams::unit();
        let opts = EvolutionOptions::default();
        let mut c = c0;
        for _ in 0..5 {
            c = step_rk4(&c, &params, &opts, 1e-3).unwrap();
        }
        c.validate().unwrap();
        for m in 1..n {
            let a = c.coeffs2()[m];
            let b = c.coeffs2()[n - m].conj();
            assert!((a - b).norm() < 1e-13);
        }
    }
}
