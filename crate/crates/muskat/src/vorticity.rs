//! Implicit sheet-strength solve.
//!
//! The strength satisfies (I + T) w = -2 R dz2/dalpha with T the interface
//! operator and R = kappa g rho2 / mu2 the single rate constant of the
//! one-phase problem. T is applied matrix-free through the quadrature
//! kernel; a dense assembly is kept as an oracle and as a direct solver for
//! small grids.

use nalgebra::{DMatrix, DVector};

use crate::curve::PeriodicCurve;
use crate::error::{Error, Result};
use crate::singular::{apply_t, apply_t_mirrored, VorticityField};
use crate::spectral;

/// Which sheet kernel backs the interface operator in a strength solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetKernel {
    /// Periodized kernel for open interfaces, plain Cauchy for closed ones.
    Auto,
    /// Image-frame kernel (reflected sheet plus singular-direction term).
    Mirrored,
}

/// Fluid constants of the wet phase. Only the combination
/// R = kappa g rho2 / mu2 enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FluidParams {
    pub mu2: f64,
    pub rho2: f64,
    pub kappa: f64,
    pub g: f64,
}

impl FluidParams {
    pub fn new(mu2: f64, rho2: f64, kappa: f64, g: f64) -> Result<Self> {
        for (name, v) in [("mu2", mu2), ("rho2", rho2), ("kappa", kappa), ("g", g)] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { mu2, rho2, kappa, g })
    }

    pub fn unit() -> Self {
        Self { mu2: 1.0, rho2: 1.0, kappa: 1.0, g: 1.0 }
    }

    /// All constituents 1 except kappa = rate, so rate() == rate.
    pub fn from_rate(rate: f64) -> Result<Self> {
        Self::new(1.0, 1.0, rate, 1.0)
    }

    pub fn rate(&self) -> f64 {
        self.kappa * self.g * self.rho2 / self.mu2
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        Self::unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    FixedPoint,
    Krylov,
    Dense,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolverMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200, mode: SolverMode::Krylov }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("solver tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Right-hand side of the strength equation for a physical interface.
fn forcing(curve: &PeriodicCurve, params: &FluidParams) -> Vec<f64> {
    let dz2 = spectral::derivative(curve.p2(), 1);
    dz2.iter().map(|&v| -2.0 * params.rate() * v).collect()
}

/// Solve (I + T) w = rhs for a given right-hand side. `mollify_eps`, when
/// positive, wraps both T and the forcing in the squared heat-kernel
/// smoothing of the regularized system.
pub fn solve_strength(
    curve: &PeriodicCurve,
    rhs: &[f64],
    opts: &SolverOptions,
    mollify_eps: f64,
    kernel: SheetKernel,
) -> Result<VorticityField> {
    opts.validate()?;
    let n = curve.n();
    let moll2 = |v: &[f64]| -> Vec<f64> { spectral::mollify(v, 2.0 * mollify_eps) };
    let rhs_eff = if mollify_eps > 0.0 { moll2(rhs) } else { rhs.to_vec() };
    let rhs_norm = spectral::l2_norm(&rhs_eff);
    if rhs_norm == 0.0 {
        return Ok(VorticityField::zeros(n));
    }
    let apply_raw = move |w: &VorticityField| -> Result<Vec<f64>> {
        match kernel {
            SheetKernel::Auto => apply_t(curve, w),
            SheetKernel::Mirrored => apply_t_mirrored(curve, w),
        }
    };
    let apply = |w: &[f64]| -> Result<Vec<f64>> {
        let t = apply_raw(&VorticityField::new(w.to_vec()))?;
        let t = if mollify_eps > 0.0 { moll2(&t) } else { t };
        Ok(w.iter().zip(&t).map(|(a, b)| a + b).collect())
    };
    let residual_norm = |w: &[f64]| -> Result<f64> {
        let aw = apply(w)?;
        Ok(spectral::l2_norm(
            &aw.iter().zip(&rhs_eff).map(|(a, b)| a - b).collect::<Vec<_>>(),
        ))
    };
    let tol_abs = opts.tol * rhs_norm;

    match opts.mode {
        SolverMode::Dense => {
            let w = dense_solve(curve, &rhs_eff, mollify_eps, kernel)?;
            let res = residual_norm(&w)?;
            if res > tol_abs.max(1e-10 * rhs_norm) {
                return Err(Error::SolveDiverged { iterations: 1, residual: res / rhs_norm, tol: opts.tol });
            }
            Ok(VorticityField::new(w))
        }
        SolverMode::FixedPoint => {
            let w = fixed_point(&apply, &rhs_eff, tol_abs, opts.max_iter, None)?;
            Ok(VorticityField::new(w))
        }
        SolverMode::Krylov => {
            // Fast path: two trial sweeps; strong contraction means plain
            // iteration will beat the Krylov setup cost.
            match fixed_point(&apply, &rhs_eff, tol_abs, opts.max_iter, Some(0.8)) {
                Ok(w) => Ok(VorticityField::new(w)),
                Err(Error::SolveDiverged { .. }) => {
                    let w = gmres(&apply, &rhs_eff, tol_abs, opts.max_iter)?;
                    Ok(VorticityField::new(w))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Solve the strength equation for the physical forcing -2 R dz2/dalpha.
pub fn solve_vorticity(
    curve: &PeriodicCurve,
    params: &FluidParams,
    opts: &SolverOptions,
) -> Result<VorticityField> {
    let ac = curve.arc_chord()?;
    if !ac.max.is_finite() {
        return Err(Error::SelfIntersection { alpha: ac.alpha, beta: ac.beta });
    }
    solve_strength(curve, &forcing(curve, params), opts, 0.0, SheetKernel::Auto)
}

fn fixed_point(
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    rhs: &[f64],
    tol_abs: f64,
    max_iter: usize,
    require_contraction: Option<f64>,
) -> Result<Vec<f64>> {
    // w <- rhs - T w, starting from the zero-operator solution w = rhs.
    let mut w = rhs.to_vec();
    let mut last_res = f64::INFINITY;
    for it in 0..max_iter {
        let aw = apply(&w)?;
        let res: Vec<f64> = rhs.iter().zip(&aw).map(|(b, a)| b - a).collect();
        let rn = spectral::l2_norm(&res);
        if rn <= tol_abs {
            return Ok(w);
        }
        if let Some(c) = require_contraction {
            if it > 0 && rn > c * last_res {
                return Err(Error::SolveDiverged { iterations: it, residual: rn, tol: tol_abs });
            }
        } else if it > 0 && rn > 4.0 * last_res {
            return Err(Error::SolveDiverged { iterations: it, residual: rn, tol: tol_abs });
        }
        last_res = rn;
        for (wj, r) in w.iter_mut().zip(&res) {
            *wj += r;
        }
    }
    let aw = apply(&w)?;
    let rn = spectral::l2_norm(&rhs.iter().zip(&aw).map(|(b, a)| b - a).collect::<Vec<_>>());
    if rn <= tol_abs {
        Ok(w)
    } else {
        Err(Error::SolveDiverged { iterations: max_iter, residual: rn, tol: tol_abs })
    }
}

/// Unpreconditioned GMRES on the matrix-free operator. The Krylov basis is
/// allowed to grow to the full iteration budget: the interface operator
/// develops outlying eigenvalues near a pinch, and short restarts stagnate
/// on them while the full basis converges within the grid dimension.
fn gmres(
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    rhs: &[f64],
    tol_abs: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let restart = max_iter.min(n);
    let b = DVector::from_column_slice(rhs);
    let mut x = DVector::zeros(n);
    let mut total = 0usize;

    loop {
        let ax = DVector::from_vec(apply(x.as_slice())?);
        let r = &b - &ax;
        let beta = r.norm();
        if beta <= tol_abs {
            return Ok(x.as_slice().to_vec());
        }
        if total >= max_iter {
            return Err(Error::SolveDiverged { iterations: total, residual: beta, tol: tol_abs });
        }

        let mut basis: Vec<DVector<f64>> = vec![&r / beta];
        let mut h = DMatrix::<f64>::zeros(restart + 1, restart);
        let mut cs = vec![0.0f64; restart];
        let mut sn = vec![0.0f64; restart];
        let mut g = DVector::<f64>::zeros(restart + 1);
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..restart {
            total += 1;
            let mut v = DVector::from_vec(apply(basis[k].as_slice())?);
            for i in 0..=k {
                h[(i, k)] = v.dot(&basis[i]);
                v -= &basis[i] * h[(i, k)];
            }
            h[(k + 1, k)] = v.norm();
            // apply accumulated Givens rotations to the new column
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let denom = (h[(k, k)] * h[(k, k)] + h[(k + 1, k)] * h[(k + 1, k)]).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[(k, k)] / denom;
            sn[k] = h[(k + 1, k)] / denom;
            h[(k, k)] = denom;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;

            let happy = h[(k + 1, k)] == 0.0 && g[k + 1].abs() <= tol_abs;
            if g[k + 1].abs() <= tol_abs || happy || total >= max_iter {
                break;
            }
            basis.push(&v / v.norm().max(1e-300));
        }

        // back-substitute the k_used x k_used triangular system
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (j, &yj) in y.iter().enumerate().take(k_used) {
            x += &basis[j] * yj;
        }
    }
}

/// Dense assembly of T: column j is T applied to the j-th unit grid field.
pub fn assemble_dense_t(curve: &PeriodicCurve) -> Result<DMatrix<f64>> {
    assemble_dense_with(curve, &apply_t)
}

fn assemble_dense_with(
    curve: &PeriodicCurve,
    op: &dyn Fn(&PeriodicCurve, &VorticityField) -> Result<Vec<f64>>,
) -> Result<DMatrix<f64>> {
    let n = curve.n();
    if n > 512 {
        return Err(Error::CostGuard { what: "dense interface operator", n, max: 512 });
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op(curve, &VorticityField::new(e))?;
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn dense_solve(
    curve: &PeriodicCurve,
    rhs: &[f64],
    mollify_eps: f64,
    kernel: SheetKernel,
) -> Result<Vec<f64>> {
    let n = curve.n();
    let mut t = match kernel {
        SheetKernel::Auto => assemble_dense_t(curve)?,
        SheetKernel::Mirrored => assemble_dense_with(curve, &apply_t_mirrored)?,
    };
    if mollify_eps > 0.0 {
        // wrap each column in the squared mollifier
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| t[(i, j)]).collect();
            let m = spectral::mollify(&col, 2.0 * mollify_eps);
            for (i, v) in m.into_iter().enumerate() {
                t[(i, j)] = v;
            }
        }
    }
    let a = DMatrix::identity(n, n) + t;
    let lu = a.lu();
    match lu.solve(&DVector::from_column_slice(rhs)) {
        Some(x) => Ok(x.as_slice().to_vec()),
        None => Err(Error::IllConditioned { pivot: 0.0 }),
    }
}

/// Largest-magnitude eigenvalue estimate of the assembled operator by a
/// fixed, deterministic power iteration.
pub fn spectral_radius_estimate(t: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = t.nrows();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 / n as f64));
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = t * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        lambda = nw;
        v = w / nw;
    }
    lambda
}

/// L2 residual of the strength equation, evaluated with a caller-supplied T.
pub fn strength_residual(
    w: &VorticityField,
    t_of_w: &[f64],
    curve: &PeriodicCurve,
    params: &FluidParams,
) -> f64 {
    let rhs = forcing(curve, params);
    let r: Vec<f64> = w
        .samples()
        .iter()
        .zip(t_of_w)
        .zip(&rhs)
        .map(|((w, t), b)| w + t - b)
        .collect();
    spectral::l2_norm(&r)
}


#[cfg(test)]
mod pinch_probe {
    use super::*;
    use crate::scenarios::Scenario;

    #[test]
    #[ignore = "conditioning survey, run on demand"]
    fn probe_neck_conditioning() {
        let n = 256;
        let c = Scenario::Neck { d: 0.02, l: 0.5 }.build(n).unwrap();
        let t = assemble_dense_t(&c).unwrap();
        let a = DMatrix::<f64>::identity(n, n) + &t;
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        println!("neck d=0.02: sigma_max {smax:.3e}, sigma_min {smin:.3e}, cond {:.3e}", smax / smin);
        let rho = spectral_radius_estimate(&t, 300);
        println!("spectral radius of T: {rho:.3}");
        // try solving
        let p = FluidParams::unit();
        for mode in [SolverMode::Dense, SolverMode::Krylov] {
            let opts = SolverOptions { mode, max_iter: 400, ..Default::default() };
            match solve_vorticity(&c, &p, &opts) {
                Ok(w) => {
                    let tw = crate::singular::apply_t(&c, &w).unwrap();
                    let res = strength_residual(&w, &tw, &c, &p);
                    println!("{mode:?}: solved, residual {res:.3e}");
                }
                Err(e) => println!("{mode:?}: failed: {e}"),
            }
        }
    }
}
