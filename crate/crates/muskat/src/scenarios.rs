//! Initial-data library.
//!
//! Three families: the flat interface, graphs z = (x, g(x)) reparametrized
//! to uniform tangent speed (the normalization the tangential term then
//! preserves), and a near-pinch "neck" in which a fluid tongue overhangs the
//! base across a vertical vacuum gap of width d. The neck is built from
//! periodic Gaussian bumps and their antiderivatives, so every member of
//! the family is analytic and exactly periodic.
//!
//! Neck geometry: the gap straddles the horizontal axis left of the origin,
//! the tongue's wall sits at small positive x, and the gap flares open near
//! the wall. The matching frame-map branch cut is the one whose preimage
//! runs along the negative real axis: it threads the gap and exits through
//! the open left end, so the facing arcs map to opposite sides of the cut.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::PeriodicCurve;
use crate::error::{Error, Result};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMode {
    pub k: usize,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Scenario {
    Flat,
    Graph { modes: Vec<GraphMode> },
    Neck { d: f64, l: f64 },
}

impl Scenario {
    /// Single-mode graph z2 = a1 cos(alpha).
    pub fn graph_simple(a1: f64) -> Self {
        Scenario::Graph { modes: vec![GraphMode { k: 1, amplitude: a1, phase: 0.0 }] }
    }

    /// Graph with `count` modes, amplitudes a/k^2 and seeded random phases.
    pub fn graph_seeded(amplitude: f64, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (1..=count)
            .map(|k| GraphMode {
                k,
                amplitude: amplitude / (k * k) as f64,
                phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            })
            .collect();
        Scenario::Graph { modes }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Flat => Ok(()),
            Scenario::Graph { modes } => {
                if modes.is_empty() {
                    return Err(Error::Scenario("graph needs at least one mode".into()));
                }
                let mut slope = 0.0;
                for m in modes {
                    if m.k == 0 || m.k > 16 {
                        return Err(Error::Scenario(format!(
                            "graph mode k = {} outside [1, 16]",
                            m.k
                        )));
                    }
                    if !m.amplitude.is_finite() || !m.phase.is_finite() {
                        return Err(Error::Scenario("non-finite graph parameter".into()));
                    }
                    slope += m.amplitude.abs() * m.k as f64;
                }
                if slope >= 0.8 {
                    return Err(Error::Scenario(format!(
                        "graph slope bound sum |a_k| k = {slope:.3} >= 0.8"
                    )));
                }
                Ok(())
            }
            Scenario::Neck { d, l } => {
                if !(*d >= 0.005 && *d <= 0.15) {
                    return Err(Error::Scenario(format!("neck gap d = {d} outside [0.005, 0.15]")));
                }
                if !(*l >= 0.3 && *l <= 0.7) {
                    return Err(Error::Scenario(format!("neck extent L = {l} outside [0.3, 0.7]")));
                }
                Ok(())
            }
        }
    }

    /// Frame-map branch suited to the scenario's geometry.
    pub fn recommended_branch_angle(&self) -> f64 {
        match self {
            // cut along the negative real axis of tan(w/2): its preimage
            // threads the neck gap and exits through the open end
            Scenario::Neck { .. } => -std::f64::consts::PI,
            _ => crate::conformal::DEFAULT_BRANCH_ANGLE,
        }
    }

    pub fn build(&self, n: usize) -> Result<PeriodicCurve> {
        self.validate()?;
        match self {
            Scenario::Flat => PeriodicCurve::flat(n),
            Scenario::Graph { modes } => build_graph(modes, n),
            Scenario::Neck { d, l } => build_neck(*d, *l, n),
        }
    }
}

fn graph_height(modes: &[GraphMode], x: f64) -> f64 {
    modes
        .iter()
        .map(|m| m.amplitude * (m.k as f64 * x + m.phase).cos())
        .sum()
}

fn graph_slope(modes: &[GraphMode], x: f64) -> f64 {
    modes
        .iter()
        .map(|m| -m.amplitude * m.k as f64 * (m.k as f64 * x + m.phase).sin())
        .sum()
}

/// Build the graph curve in the uniform-tangent-speed parametrization.
fn build_graph(modes: &[GraphMode], n: usize) -> Result<PeriodicCurve> {
    let fine = (8 * n).max(1024);
    let fine_grid = spectral::grid(fine);
    let speed: Vec<f64> = fine_grid
        .iter()
        .map(|&x| (1.0 + graph_slope(modes, x).powi(2)).sqrt())
        .collect();
    let mean_speed = spectral::mean(&speed);
    // arclength minus its linear part, spectrally integrated
    let wiggle = spectral::antiderivative_mean_free(&speed);
    let wiggle_coeffs = spectral::to_coeffs(&wiggle);

    let arclength = |x: f64| -> f64 {
        mean_speed * (x + std::f64::consts::PI) + spectral::eval_trig_coeffs(&wiggle_coeffs, x)
    };

    let grid = spectral::grid(n);
    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for &a in &grid {
        // solve sigma(x) = mean * (a + pi) by Newton; sigma' = speed > 0
        let target = mean_speed * (a + std::f64::consts::PI);
        let mut x = a;
        for _ in 0..60 {
            let f = arclength(x) - target;
            let step = f / (1.0 + graph_slope(modes, x).powi(2)).sqrt();
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        p1.push(x - a);
        p2.push(graph_height(modes, x));
    }
    PeriodicCurve::open(p1, p2)
}

// Fixed internals of the neck family. Widths are in the curve parameter;
// levels in physical units. The wall (rightmost point of the fold) is
// anchored at alpha = -1.8 and then the whole curve is translated so the
// wall lands at x = +0.2, leaving the gap window straddling the negative
// real axis where the frame-map cut runs. Away from the window the base
// sits at the fixed depth NECK_BASE_LEVEL so the curve keeps a
// d-independent clearance from the frame map's poles at x = +-pi.
const NECK_DIP_WIDTH: f64 = 0.45;
const NECK_JUMP_WIDTH: f64 = 0.28;
const NECK_STEP_WIDTH: f64 = 0.07;
const NECK_FLARE_WIDTH: f64 = 0.08;
const NECK_DESCENT_WIDTH: f64 = 0.12;
const NECK_FLARE_LEVEL: f64 = 0.30;
const NECK_LIP_LEVEL: f64 = 0.60;
const NECK_WALL_X: f64 = 0.20;
const NECK_FLARE_SPAN: f64 = 0.90;
const NECK_WALL_ALPHA: f64 = -1.8;
const NECK_LIP_CLEAR: f64 = 0.35;
const NECK_BASE_LEVEL: f64 = 0.25;
const NECK_RISE_WIDTH: f64 = 0.08;

/// Periodic Gaussian bump exp(-sin^2((a - center)/2) / w^2).
fn bump(alpha: f64, center: f64, width: f64) -> f64 {
    let s = (0.5 * (alpha - center)).sin();
    (-s * s / (width * width)).exp()
}

/// Cumulative unit step of the bump on an n-point grid: 0 at -pi, rising to
/// 1 near +pi. Combinations whose amplitudes sum to zero are exactly
/// periodic.
fn unit_step(n: usize, center: f64, width: f64) -> Vec<f64> {
    let g = spectral::grid(n);
    let b: Vec<f64> = g.iter().map(|&a| bump(a, center, width)).collect();
    let mean = spectral::mean(&b);
    let total = 2.0 * std::f64::consts::PI * mean;
    let wiggle = spectral::antiderivative_mean_free(&b);
    g.iter()
        .enumerate()
        .map(|(j, &a)| (wiggle[j] + mean * (a + std::f64::consts::PI)) / total)
        .collect()
}

fn bump_total(width: f64) -> f64 {
    let m = 4096;
    let g = spectral::grid(m);
    spectral::integrate(&g.iter().map(|&a| bump(a, 0.0, width)).collect::<Vec<_>>())
}

/// Near-pinch interface: a fluid tongue overhangs the base across a
/// vertical gap of width `d` whose parallel section has horizontal extent
/// roughly `l`.
fn build_neck(d: f64, l: f64, n: usize) -> Result<PeriodicCurve> {
    if n < 128 {
        return Err(Error::Scenario(format!(
            "neck scenario needs n >= 128 to resolve its steps, got {n}"
        )));
    }
    let total = bump_total(NECK_DIP_WIDTH);
    let window_target = l + NECK_FLARE_SPAN;

    // Reverse-fold depth: bisect until the backtracked window is as wide as
    // the gap section plus its flare.
    let geometry_of = |depth: f64| -> (f64, f64) {
        let slope = |a: f64| 1.0 - depth * bump(a, 0.0, NECK_DIP_WIDTH) / total;
        let mut lo = 0.0;
        let mut hi = 0.5 * std::f64::consts::PI;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let turn = 0.5 * (lo + hi);
        // x-travel from the dip center to the turning point
        let m = 2048;
        let h = turn / m as f64;
        let mut travel = 0.0;
        for i in 0..m {
            travel += slope((i as f64 + 0.5) * h) * h;
        }
        // window width = x(-turn) - x(+turn) = -2 * travel (travel < 0)
        (-2.0 * travel, turn)
    };
    let mut lo = 1.2;
    let mut hi = 6.0;
    if geometry_of(hi).0 < window_target {
        return Err(Error::Scenario(format!(
            "neck extent L = {l} not attainable within the period"
        )));
    }
    if geometry_of(lo).0 > window_target {
        return Err(Error::Scenario(format!("neck extent L = {l} too small for the fold")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if geometry_of(mid).0 < window_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let depth = 0.5 * (lo + hi);
    let (_, turn) = geometry_of(depth);

    let dip_center = NECK_WALL_ALPHA + turn;
    let alpha_wall = NECK_WALL_ALPHA;
    let alpha_tip = dip_center + turn;
    // forward catch-up jump once the lip has cleared the window; the
    // descent back to base level rides on the jump so it lands at positive
    // x, clear of the cut's preimage
    let jump_center = alpha_tip + window_target + NECK_LIP_CLEAR;
    let descent_center = jump_center;
    if descent_center + 4.0 * NECK_JUMP_WIDTH > std::f64::consts::PI {
        return Err(Error::Scenario(format!(
            "neck features do not fit one period (L = {l} too large)"
        )));
    }

    let u_dip = unit_step(n, dip_center, NECK_DIP_WIDTH);
    let u_jump = unit_step(n, jump_center, NECK_JUMP_WIDTH);

    // translate so the wall's rightmost point sits at x = NECK_WALL_X
    let x_wall_raw = {
        // evaluate the dip step at the wall parameter by fine quadrature
        let m = 8192;
        let gf = spectral::grid(m);
        let bf: Vec<f64> = gf.iter().map(|&a| bump(a, dip_center, NECK_DIP_WIDTH)).collect();
        let h = spectral::grid_spacing(m);
        let mut acc = 0.0;
        for (j, &a) in gf.iter().enumerate() {
            if a >= alpha_wall {
                break;
            }
            acc += bf[j] * h;
        }
        alpha_wall - depth * acc / total
    };
    let shift = NECK_WALL_X - x_wall_raw;

    let p1: Vec<f64> = (0..n).map(|j| shift - depth * (u_dip[j] - u_jump[j])).collect();

    // base returns to gap depth just before the window's left end (alpha
    // and x coincide on the base before the translation)
    let tau = 2.0 * std::f64::consts::PI;
    let mut rise_center = x_wall_raw - window_target - 0.25;
    rise_center -= (rise_center / tau).round() * tau;

    // height profile: base at -d/2, wall top at the flare level, settling
    // to +d/2 along the tongue underside, lip past the tip, then the
    // descent back to base level during the catch-up jump
    let s_wall = unit_step(n, alpha_wall, NECK_STEP_WIDTH);
    let s_flare = unit_step(
        n,
        alpha_wall + 3.0 * NECK_STEP_WIDTH + 2.0 * NECK_FLARE_WIDTH,
        NECK_FLARE_WIDTH,
    );
    let s_tip = unit_step(n, alpha_tip, NECK_STEP_WIDTH);
    let s_desc = unit_step(n, descent_center, NECK_DESCENT_WIDTH);
    let s_rise = unit_step(n, rise_center, NECK_RISE_WIDTH);
    let a_wall = NECK_FLARE_LEVEL + 0.5 * d;
    let a_flare = -(NECK_FLARE_LEVEL - 0.5 * d);
    let a_tip = NECK_LIP_LEVEL - 0.5 * d;
    let a_desc = -(NECK_LIP_LEVEL + NECK_BASE_LEVEL);
    let a_rise = NECK_BASE_LEVEL - 0.5 * d;

    // constant chosen so the stretch between the rise and the wall sits at
    // -d/2; with the rise placed ahead of the seam this is the level at
    // alpha = -pi as well
    let level_at = |j: usize| -> f64 {
        a_wall * s_wall[j] + a_flare * s_flare[j] + a_tip * s_tip[j] + a_desc * s_desc[j]
            + a_rise * s_rise[j]
    };
    let mut ref_alpha = 0.5 * (rise_center + tau + alpha_wall);
    ref_alpha -= (ref_alpha / tau).round() * tau;
    let j_ref = ((ref_alpha + std::f64::consts::PI) / spectral::grid_spacing(n)).round() as usize
        % n;
    let c0 = -0.5 * d - level_at(j_ref);
    let p2: Vec<f64> = (0..n).map(|j| c0 + level_at(j)).collect();
    PeriodicCurve::open(p1, p2)
}
