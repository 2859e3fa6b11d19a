//! Run orchestration: the stepping loop with diagnostics, termination
//! bookkeeping, the automatic image-frame probe, and parameter sweeps.
//!
//! Every run directory receives the exact configuration used, a diagnostics
//! CSV, curve snapshots, the final state, and a machine-readable termination
//! record. Identical configurations produce byte-identical CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{tilde_rt_energy, tilde_sigma, tilde_velocity, transform_curve, TildeState};
use crate::curve::PeriodicCurve;
use crate::diagnostics::{
    g_proxy, record_from_bundle, rt_energy_parts, sigma_min, DiagRecord, DiagnosticsConfig,
};
use crate::dynamics::{mollify_curve, step_rk4, velocity, EvolutionOptions};
use crate::error::{Error, Result};
use crate::io::{RunConfig, Snapshot};
use crate::scenarios::Scenario;
use crate::vorticity::FluidParams;

/// Arc-chord level at which a run is declared blown up.
pub const BLOW_UP_ARC_CHORD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    Completed,
    BlowUp,
    SingularKernel,
    Clearance,
}

impl TerminationReason {
    fn from_error(err: &Error) -> Option<Self> {
        match err {
            Error::BlowUp { .. } | Error::SolveDiverged { .. } => Some(Self::BlowUp),
            Error::SingularKernel { .. } | Error::SelfIntersection { .. } => {
                Some(Self::SingularKernel)
            }
            Error::ClearanceViolation { .. }
            | Error::PoleProximity { .. }
            | Error::CutProximity { .. } => Some(Self::Clearance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Termination {
    pub reason: TerminationReason,
    pub t: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub termination: Termination,
    pub records: usize,
    pub probe_emitted: bool,
}

fn write_termination(dir: &Path, term: &Termination) -> Result<()> {
    let mut f = fs::File::create(dir.join("termination.json"))?;
    serde_json::to_writer_pretty(&mut f, term)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Execute a configured run, writing artifacts under `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    config.save(&out_dir.join("config.json"))?;

    let mut curve = config.scenario.build(config.n_points)?;
    if config.evolution.mollify_eps > 0.0 {
        curve = mollify_curve(&curve, config.evolution.mollify_eps)?;
    }
    let params = &config.fluid;
    let opts = &config.evolution;
    let diag = &config.diagnostics;

    let mut csv = fs::File::create(out_dir.join("diagnostics.csv"))?;
    writeln!(csv, "{}", DiagRecord::CSV_HEADER)?;

    let snapdir = out_dir.join("snapshots");
    fs::create_dir_all(&snapdir)?;

    let mut t = 0.0;
    let mut step = 0usize;
    let mut records = 0usize;
    let mut probe_emitted = false;
    let mut h_integral = 0.0;
    let mut g_prev: Option<f64> = None;
    let mut t_prev = 0.0;

    let finish = |dir: &Path,
                  curve: &PeriodicCurve,
                  term: Termination,
                  records: usize,
                  probe_emitted: bool|
     -> Result<RunOutcome> {
        Snapshot::physical(curve, term.t).save(&dir.join("final_state.json"))?;
        write_termination(dir, &term)?;
        Ok(RunOutcome { termination: term, records, probe_emitted })
    };

    // resolve the strip slope parameter from the initial minimum of sigma
    let lambda = match velocity(&curve, params, opts) {
        Ok(b) => {
            let (m0, _) = sigma_min(&curve, &b.vorticity, &b.br, params)?;
            diag.lambda.unwrap_or(0.25 * m0)
        }
        Err(e) => {
            if let Some(reason) = TerminationReason::from_error(&e) {
                let term =
                    Termination { reason, t: 0.0, steps: 0, detail: Some(format!("{e}")) };
                return finish(out_dir, &curve, term, records, probe_emitted);
            }
            return Err(e);
        }
    };

    loop {
        // diagnostics, blow-up policy, and probe trigger
        let bundle = match velocity(&curve, params, opts) {
            Ok(b) => b,
            Err(e) => {
                if let Some(reason) = TerminationReason::from_error(&e) {
                    let term = Termination {
                        reason,
                        t,
                        steps: step,
                        detail: Some(format!("{e}")),
                    };
                    return finish(out_dir, &curve, term, records, probe_emitted);
                }
                return Err(e);
            }
        };

        if step % diag.every == 0 {
            let mut rec = record_from_bundle(&curve, params, &bundle, t, lambda, diag, 0.0)?;
            let g = g_proxy(rec.arc_chord_max, rec.sobolev_h4, diag.c_const);
            if let Some(gp) = g_prev {
                h_integral += 0.5 * (t - t_prev) * (g + gp);
            }
            g_prev = Some(g);
            t_prev = t;
            rec.h_of_t = diag.h0 + (diag.h0 + 1.0) * f64::exp_m1(-10.0 * h_integral);
            writeln!(csv, "{}", rec.csv_row())?;
            records += 1;

            if rec.arc_chord_max > BLOW_UP_ARC_CHORD {
                let term = Termination {
                    reason: TerminationReason::BlowUp,
                    t,
                    steps: step,
                    detail: Some(format!("arc-chord {:.3e} above {BLOW_UP_ARC_CHORD:.0e}", rec.arc_chord_max)),
                };
                return finish(out_dir, &curve, term, records, probe_emitted);
            }

            if config.probe.enabled
                && !probe_emitted
                && rec.arc_chord_max > config.probe.trigger_arc_chord
            {
                match transform_curve(&curve, config.branch_angle()) {
                    Ok(state) => {
                        Snapshot::tilde(&state, t)
                            .save(&snapdir.join(format!("probe_step_{step:06}.json")))?;
                        probe_emitted = true;
                    }
                    Err(e) => {
                        fs::write(
                            out_dir.join("probe_error.txt"),
                            format!("probe at t = {t}, step {step}: {e}\n"),
                        )?;
                        probe_emitted = true;
                    }
                }
            }
        }

        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            Snapshot::physical(&curve, t).save(&snapdir.join(format!("step_{step:06}.json")))?;
        }

        if t >= opts.t_end - 1e-14 {
            let term = Termination {
                reason: TerminationReason::Completed,
                t,
                steps: step,
                detail: None,
            };
            return finish(out_dir, &curve, term, records, probe_emitted);
        }

        let dt = opts.effective_dt(&curve, params).min(opts.t_end - t);
        match step_rk4(&curve, params, opts, dt) {
            Ok(next) => {
                curve = next;
                t += dt;
                step += 1;
            }
            Err(e) => {
                if let Some(reason) = TerminationReason::from_error(&e) {
                    let term = Termination {
                        reason,
                        t,
                        steps: step,
                        detail: Some(format!("{e}")),
                    };
                    return finish(out_dir, &curve, term, records, probe_emitted);
                }
                return Err(e);
            }
        }
    }
}

/// Recompute a diagnostics record from a stored physical snapshot.
pub fn diagnose_snapshot(
    snap: &Snapshot,
    params: &FluidParams,
    opts: &EvolutionOptions,
    diag: &DiagnosticsConfig,
) -> Result<DiagRecord> {
    if snap.is_tilde() {
        return Err(Error::Config(
            "diagnose expects a physical snapshot; use the probe command for image frames".into(),
        ));
    }
    let curve = snap.to_curve()?;
    let bundle = velocity(&curve, params, opts)?;
    let (m0, _) = sigma_min(&curve, &bundle.vorticity, &bundle.br, params)?;
    let lambda = diag.lambda.unwrap_or(0.25 * m0);
    record_from_bundle(&curve, params, &bundle, snap.t, lambda, diag, diag.h0)
}

/// Image-frame probe report for one state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub t: f64,
    pub branch_angle: f64,
    pub clearances: [f64; 5],
    pub image_arc_chord: f64,
    pub min_weighted_sigma: f64,
    pub rt_energy: f64,
    pub rt_sentinel: bool,
}

pub fn probe_report(
    state: &TildeState,
    t: f64,
    params: &FluidParams,
    opts: &EvolutionOptions,
    diag: &DiagnosticsConfig,
) -> Result<ProbeReport> {
    let bundle = tilde_velocity(&state.curve, params, opts)?;
    let ts = tilde_sigma(&state.curve, &bundle.vorticity, &bundle.br, params)?;
    let lambda = diag.lambda.unwrap_or(0.25 * ts.min_weighted.max(1e-12));
    let energy = tilde_rt_energy(state, params, lambda, diag.strip_xi, diag.c_const, opts)?;
    let ac = state.curve.arc_chord()?;
    Ok(ProbeReport {
        t,
        branch_angle: state.branch_angle,
        clearances: state.clearances,
        image_arc_chord: ac.max,
        min_weighted_sigma: ts.min_weighted,
        rt_energy: energy.value,
        rt_sentinel: energy.sentinel,
    })
}

/// Transform a stored physical snapshot, optionally evolve the image frame
/// a few steps, and write the report plus image snapshots.
pub fn probe_run(
    snap: &Snapshot,
    branch_angle: f64,
    params: &FluidParams,
    opts: &EvolutionOptions,
    diag: &DiagnosticsConfig,
    steps: usize,
    dt: f64,
    out_dir: &Path,
) -> Result<ProbeReport> {
    fs::create_dir_all(out_dir)?;
    let mut state = if snap.is_tilde() {
        TildeState::from_image_curve(snap.to_curve()?, snap.branch_angle.unwrap_or(branch_angle))?
    } else {
        transform_curve(&snap.to_curve()?, branch_angle)?
    };
    let mut t = snap.t;
    Snapshot::tilde(&state, t).save(&out_dir.join("tilde_000000.json"))?;
    let report0 = probe_report(&state, t, params, opts, diag)?;
    for s in 1..=steps {
        state = crate::conformal::probe_step(&state, params, opts, dt)?;
        t += dt;
        Snapshot::tilde(&state, t).save(&out_dir.join(format!("tilde_{s:06}.json")))?;
    }
    let report = if steps > 0 {
        probe_report(&state, t, params, opts, diag)?
    } else {
        report0
    };
    let mut f = fs::File::create(out_dir.join("probe_report.json"))?;
    serde_json::to_writer_pretty(&mut f, &report)?;
    f.write_all(b"\n")?;
    Ok(report)
}

/// Which scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    NeckD,
    NeckL,
    GraphA1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub arc_chord_max: f64,
    pub sigma_min: f64,
    pub clearances: [f64; 5],
    pub image_arc_chord: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "value,arc_chord_max,sigma_min,m_q0,m_q1,m_q2,m_q3,m_q4,image_arc_chord";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.value,
            self.arc_chord_max,
            self.sigma_min,
            self.clearances[0],
            self.clearances[1],
            self.clearances[2],
            self.clearances[3],
            self.clearances[4],
            self.image_arc_chord
        )
    }
}

fn sweep_scenario(base: &Scenario, param: SweepParam, value: f64) -> Result<Scenario> {
    match (param, base) {
        (SweepParam::NeckD, Scenario::Neck { l, .. }) => Ok(Scenario::Neck { d: value, l: *l }),
        (SweepParam::NeckL, Scenario::Neck { d, .. }) => Ok(Scenario::Neck { d: *d, l: value }),
        (SweepParam::GraphA1, Scenario::Graph { .. }) => Ok(Scenario::graph_simple(value)),
        _ => Err(Error::Config(format!(
            "sweep parameter {param:?} does not apply to scenario {base:?}"
        ))),
    }
}

/// Evaluate the initial-state diagnostics and the image-frame picture for a
/// family of scenarios; rows come back in the order of `values`.
pub fn sweep(config: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    let rows: Vec<Result<SweepRow>> = values
        .par_iter()
        .map(|&value| -> Result<SweepRow> {
            let scenario = sweep_scenario(&config.scenario, param, value)?;
            scenario.validate()?;
            let curve = scenario.build(config.n_points)?;
            let bundle = velocity(&curve, &config.fluid, &config.evolution)?;
            let (m, _) = sigma_min(&curve, &bundle.vorticity, &bundle.br, &config.fluid)?;
            let ac = curve.arc_chord()?;
            let branch = config
                .probe
                .branch_angle
                .unwrap_or_else(|| scenario.recommended_branch_angle());
            let state = transform_curve(&curve, branch)?;
            let image_ac = state.curve.arc_chord()?;
            // keep the energy denominators exercised even in sweeps
            let _ = rt_energy_parts(&curve, &config.fluid, &bundle, 0.0, 0.0, 1.0)?;
            Ok(SweepRow {
                value,
                arc_chord_max: ac.max,
                sigma_min: m,
                clearances: state.clearances,
                image_arc_chord: image_ac.max,
            })
        })
        .collect();
    rows.into_iter().collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", SweepRow::CSV_HEADER)?;
    for r in rows {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}
