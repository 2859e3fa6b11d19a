//! Brute-force references for the evolution operator, independent of the
//! spectral fast paths: a finite-difference Jacobian of the full velocity
//! map and a measured linearized decay rate. Slow by design; they live
//! behind the `oracles` feature and back the validation suite.

use nalgebra::{DMatrix, DVector};

use crate::curve::PeriodicCurve;
use crate::dynamics::{step_rk4, velocity, EvolutionOptions};
use crate::error::{Error, Result};
use crate::spectral;
use crate::vorticity::FluidParams;

/// Dense central-difference Jacobian of the velocity map with respect to
/// every grid degree of freedom, ordered [p1; p2] -> [u1; u2].
pub fn fd_jacobian(
    curve: &PeriodicCurve,
    params: &FluidParams,
    opts: &EvolutionOptions,
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = curve.n();
    if n > 128 {
        return Err(Error::CostGuard { what: "finite-difference Jacobian", n, max: 128 });
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let eval = |p1: &[f64], p2: &[f64]| -> Result<Vec<f64>> {
        let c = PeriodicCurve::new(p1.to_vec(), p2.to_vec(), curve.slope())?;
        let b = velocity(&c, params, opts)?;
        let mut out = Vec::with_capacity(2 * n);
        out.extend_from_slice(&b.z_t.x);
        out.extend_from_slice(&b.z_t.y);
        Ok(out)
    };
    let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let base1 = curve.p1().to_vec();
    let base2 = curve.p2().to_vec();
    for dof in 0..2 * n {
        let mut plus1 = base1.clone();
        let mut plus2 = base2.clone();
        let mut minus1 = base1.clone();
        let mut minus2 = base2.clone();
        if dof < n {
            plus1[dof] += h;
            minus1[dof] -= h;
        } else {
            plus2[dof - n] += h;
            minus2[dof - n] -= h;
        }
        let fp = eval(&plus1, &plus2)?;
        let fm = eval(&minus1, &minus2)?;
        for i in 0..2 * n {
            jac[(i, dof)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Rayleigh-quotient eigenvalue of the Jacobian on the vertical mode-k
/// perturbation (0, cos(k alpha)), with the residual of the eigenpair.
pub fn vertical_mode_eigenvalue(jac: &DMatrix<f64>, n: usize, k: usize) -> (f64, f64) {
    let g = spectral::grid(n);
    let mut v = DVector::<f64>::zeros(2 * n);
    for (j, &a) in g.iter().enumerate() {
        v[n + j] = (k as f64 * a).cos();
    }
    let vn = v.norm();
    v /= vn;
    let jv = jac * &v;
    let lambda = v.dot(&jv);
    let residual = (&jv - &v * lambda).norm();
    (lambda, residual)
}

/// Measured decay rate of the k-th vertical mode, from a short run starting
/// at z2 = delta cos(k alpha). Fits log amplitude against time and rejects
/// fits whose relative residual exceeds 10%.
pub fn decay_rate(
    k: usize,
    delta: f64,
    params: &FluidParams,
    n: usize,
    opts: &EvolutionOptions,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1e-3) {
        return Err(Error::Config(format!(
            "decay-rate fits need a small amplitude (0 < delta <= 1e-3), got {delta}"
        )));
    }
    let g = spectral::grid(n);
    let p2: Vec<f64> = g.iter().map(|&a| delta * (k as f64 * a).cos()).collect();
    let mut curve = PeriodicCurve::open(vec![0.0; n], p2)?;

    // sample roughly half an e-folding of the expected decay
    let horizon = 0.5 / (params.rate() * k as f64);
    let dt = opts.effective_dt(&curve, params).min(horizon / 20.0);
    let steps = (horizon / dt).ceil() as usize;

    let amp_of = |c: &PeriodicCurve| -> f64 {
        let m = k.min(c.n() - k);
        let _ = m;
        c.coeffs2()[k].norm()
    };
    let mut samples = vec![(0.0, amp_of(&curve).ln())];
    let mut t = 0.0;
    for _ in 0..steps {
        curve = step_rk4(&curve, params, opts, dt)?;
        t += dt;
        samples.push((t, amp_of(&curve).ln()));
    }

    let m = samples.len() as f64;
    let sx: f64 = samples.iter().map(|p| p.0).sum();
    let sy: f64 = samples.iter().map(|p| p.1).sum();
    let sxx: f64 = samples.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = samples.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;

    let span = samples.last().unwrap().1 - samples[0].1;
    let rms = (samples
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let rel = rms / span.abs().max(1e-300);
    if rel > 0.1 {
        return Err(Error::FitFailure { residual: rel, limit: 0.1 });
    }
    Ok(slope)
}
